"""
Dense fully connected ReLU networks.

A network is an ordered list of affine layers (W_k, b_k). Its realization
alternates the affine maps with a componentwise ReLU; the last affine map is
not followed by an activation, so a one-layer network is a plain affine map.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np
from django.conf import settings


class ShapeError(ValueError):
    """Array shapes do not chain, or do not match a network interface."""


def _frozen(values, ndim: int, what: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if ndim == 1:
        arr = arr.reshape(-1)
    if arr.ndim != ndim:
        raise ShapeError(f"{what} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{what} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Layer:
    """One affine map x -> W x + b; row i of W belongs to output unit i."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        weights = _frozen(self.weights, 2, "weights")
        bias = _frozen(self.bias, 1, "bias")
        if weights.shape[0] < 1 or weights.shape[1] < 1:
            raise ShapeError(f"empty weight matrix of shape {weights.shape}")
        if bias.shape[0] != weights.shape[0]:
            raise ShapeError(
                f"bias length {bias.shape[0]} does not match {weights.shape[0]} weight rows"
            )
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bias", bias)

    @property
    def in_dim(self) -> int:
        return int(self.weights.shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.weights.shape[0])

    @property
    def param_count(self) -> int:
        return self.out_dim * (self.in_dim + 1)


LayerLike = Layer | tuple


@dataclass(frozen=True, eq=False, init=False)
class Network:
    """Immutable ReLU feedforward network."""

    layers: tuple[Layer, ...]

    def __init__(self, layers: Iterable[LayerLike]):
        coerced = tuple(l if isinstance(l, Layer) else Layer(*l) for l in layers)
        if not coerced:
            raise ShapeError("a network needs at least one layer")
        for k in range(1, len(coerced)):
            if coerced[k].in_dim != coerced[k - 1].out_dim:
                raise ShapeError(
                    f"layer {k + 1} expects {coerced[k].in_dim} inputs "
                    f"but layer {k} produces {coerced[k - 1].out_dim}"
                )
        object.__setattr__(self, "layers", coerced)

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    @cached_property
    def architecture(self) -> tuple[int, ...]:
        return (self.input_dim,) + tuple(layer.out_dim for layer in self.layers)

    @cached_property
    def param_count(self) -> int:
        return sum(layer.param_count for layer in self.layers)

    @property
    def max_width(self) -> int:
        return max(self.architecture)

    def __repr__(self):
        return f"Network(architecture={self.architecture}, params={self.param_count})"

    def __call__(self, x):
        return evaluate(self, x)


@dataclass(frozen=True)
class Hypercube:
    """The domain [lower, upper]^dim."""

    lower: float
    upper: float
    dim: int

    def __post_init__(self):
        lower, upper = float(self.lower), float(self.upper)
        if not (np.isfinite(lower) and np.isfinite(upper)):
            raise ValueError("hypercube bounds must be finite")
        if not upper > lower:
            raise ValueError(f"hypercube needs upper > lower, got [{lower}, {upper}]")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"hypercube dimension must be a positive integer, got {self.dim}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def center(self) -> np.ndarray:
        return np.full(self.dim, 0.5 * (self.lower + self.upper))

    def with_dim(self, dim: int) -> "Hypercube":
        return Hypercube(self.lower, self.upper, dim)

    def contains(self, points, atol: float = 0.0) -> np.ndarray | bool:
        arr = np.asarray(points, dtype=np.float64)
        inside = (arr >= self.lower - atol) & (arr <= self.upper + atol)
        if arr.ndim == 1:
            return bool(inside.all())
        return inside.all(axis=1)

    def is_within(self, lower: float, upper: float) -> bool:
        return self.lower >= lower and self.upper <= upper

    def corners(self) -> np.ndarray:
        bits = (np.arange(2 ** self.dim)[:, None] >> np.arange(self.dim)[None, :]) & 1
        return np.where(bits == 1, self.upper, self.lower).astype(np.float64)

    def clip(self, points) -> np.ndarray:
        return np.clip(np.asarray(points, dtype=np.float64), self.lower, self.upper)

    def __str__(self):
        return f"[{self.lower!r}, {self.upper!r}]^{self.dim}"


def param_count(net: Network) -> int:
    return net.param_count


def _rows_per_chunk(net: Network) -> int:
    budget = int(getattr(settings, "RELU_FORGE_EVAL_CHUNK", 2 ** 22))
    return max(1, budget // net.max_width)


def _forward(net: Network, batch: np.ndarray) -> np.ndarray:
    h = batch
    for layer in net.layers[:-1]:
        h = h @ layer.weights.T
        h += layer.bias
        np.maximum(h, 0.0, out=h)
    last = net.layers[-1]
    return h @ last.weights.T + last.bias


def evaluate(net: Network, x) -> np.ndarray:
    """
    Realization of `net` at a point (1-D input) or at a batch of points (rows of a 2-D input).
    """
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    batch = arr.reshape(1, -1) if single else arr
    if batch.ndim != 2 or batch.shape[1] != net.input_dim:
        raise ShapeError(
            f"network expects inputs of length {net.input_dim}, got array of shape {arr.shape}"
        )
    if not np.isfinite(batch).all():
        raise ValueError("input contains non-finite entries")

    out = np.empty((batch.shape[0], net.output_dim), dtype=np.float64)
    step = _rows_per_chunk(net)
    for start in range(0, batch.shape[0], step):
        out[start:start + step] = _forward(net, batch[start:start + step])
    return out[0] if single else out
