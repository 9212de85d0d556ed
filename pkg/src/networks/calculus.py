"""
Network calculus: identity networks, composition, parallelization, clipping
and affine wrapping, each with an exact parameter count.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Hypercube, Layer, Network, ShapeError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AffineMap:
    """x -> matrix @ x + offset, used for pre/post wrapping only."""

    matrix: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        matrix = np.atleast_2d(np.asarray(self.matrix, dtype=np.float64))
        offset = np.asarray(self.offset, dtype=np.float64).reshape(-1)
        if matrix.ndim != 2 or matrix.shape[0] != offset.shape[0]:
            raise ShapeError(
                f"affine map with matrix {matrix.shape} needs an offset of length {matrix.shape[0]}"
            )
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "offset", offset)

    @classmethod
    def identity(cls, d: int) -> "AffineMap":
        return cls(np.eye(d), np.zeros(d))

    @classmethod
    def linear(cls, matrix) -> "AffineMap":
        matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        return cls(matrix, np.zeros(matrix.shape[0]))

    @property
    def in_dim(self) -> int:
        return int(self.matrix.shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.matrix.shape[0])

    def apply(self, x) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) @ self.matrix.T + self.offset


def affine_network(affine: AffineMap) -> Network:
    """The depth-1 network realizing `affine` (no activation)."""
    return Network([(affine.matrix, affine.offset)])


def _split(d: int) -> np.ndarray:
    """[I; -I]: feeds the ReLU pair r(x), r(-x)."""
    eye = np.eye(d)
    return np.vstack([eye, -eye])


def _merge(d: int) -> np.ndarray:
    """[I, -I]: x = r(x) - r(-x)."""
    eye = np.eye(d)
    return np.hstack([eye, -eye])


def identity_network(d: int) -> Network:
    if d < 1:
        raise ValueError(f"identity network needs d >= 1, got {d}")
    return Network([(_split(d), np.zeros(2 * d)), (_merge(d), np.zeros(d))])


def compose(outer: Network, inner: Network) -> Network:
    """
    outer ∘ inner. The last affine layer of `inner` and the first of `outer`
    are joined through one identity network: (W_L, b_L) becomes
    ([W_L; -W_L], [b_L; -b_L]) and (V_1, c_1) becomes ([V_1, -V_1], c_1).
    """
    if inner.output_dim != outer.input_dim:
        raise ShapeError(
            f"cannot compose: inner produces {inner.output_dim} outputs, "
            f"outer expects {outer.input_dim} inputs"
        )
    last, first = inner.layers[-1], outer.layers[0]
    up = Layer(np.vstack([last.weights, -last.weights]), np.concatenate([last.bias, -last.bias]))
    down = Layer(np.hstack([first.weights, -first.weights]), first.bias)
    return Network(inner.layers[:-1] + (up, down) + outer.layers[1:])


def compose_chain(nets: Sequence[Network]) -> Network:
    """
    Compose networks given in application order: nets[0] is applied first,
    so the result realizes nets[-1] ∘ ... ∘ nets[0].
    """
    if not nets:
        raise ValueError("compose_chain needs at least one network")
    result = nets[0]
    for index, net in enumerate(nets[1:], start=1):
        if result.output_dim != net.input_dim:
            raise ShapeError(
                f"chain breaks at position {index}: {result.output_dim} outputs "
                f"feed a network with {net.input_dim} inputs"
            )
        result = compose(net, result)
    return result


def _block_diag(blocks: Sequence[np.ndarray]) -> np.ndarray:
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols))
    r = c = 0
    for b in blocks:
        out[r:r + b.shape[0], c:c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


# --- parallelization layouts ---
def _count(arch: Sequence[int]) -> int:
    return sum(arch[k] * (arch[k - 1] + 1) for k in range(1, len(arch)))


def _padded_architecture(arch: tuple[int, ...], depth: int) -> tuple[int, ...]:
    extra = depth - (len(arch) - 1)
    if extra == 0:
        return arch
    out_dim = arch[-1]
    return arch[:-1] + (2 * out_dim,) * extra + (out_dim,)


def _block_diagonal_architecture(archs: Sequence[tuple[int, ...]]) -> tuple[int, ...]:
    depth = max(len(a) - 1 for a in archs)
    padded = [_padded_architecture(a, depth) for a in archs]
    return tuple(sum(a[k] for a in padded) for k in range(depth + 1))


def _lifted_architecture(arch: tuple[int, ...], carried: int) -> tuple[int, ...]:
    if len(arch) == 2:
        return (arch[0] + carried, arch[1] + carried)
    inner = tuple(w + 2 * carried for w in arch[1:-1])
    return (arch[0] + carried,) + inner + (arch[-1] + carried,)


def _staggered_architecture(archs: Sequence[tuple[int, ...]]) -> tuple[int, ...]:
    result = None
    for i, arch in enumerate(archs):
        carried = sum(a[-1] for a in archs[:i]) + sum(a[0] for a in archs[i + 1:])
        lifted = _lifted_architecture(arch, carried)
        result = lifted if result is None else result[:-1] + (2 * result[-1],) + lifted[1:]
    return result


def depth_pad(net: Network, depth: int) -> Network:
    """
    Same realization with `depth` layers: identity layers are inserted
    before the final affine map.
    """
    extra = depth - net.depth
    if extra < 0:
        raise ValueError(f"cannot pad a depth-{net.depth} network down to depth {depth}")
    if extra == 0:
        return net
    last = net.layers[-1]
    e = last.out_dim
    layers = list(net.layers[:-1])
    layers.append(Layer(np.vstack([last.weights, -last.weights]), np.concatenate([last.bias, -last.bias])))
    layers.extend(Layer(np.eye(2 * e), np.zeros(2 * e)) for _ in range(extra - 1))
    layers.append(Layer(_merge(e), np.zeros(e)))
    return Network(layers)


def _block_diagonal(nets: Sequence[Network]) -> Network:
    depth = max(n.depth for n in nets)
    padded = [depth_pad(n, depth) for n in nets]
    layers = []
    for k in range(depth):
        weights = _block_diag([p.layers[k].weights for p in padded])
        bias = np.concatenate([p.layers[k].bias for p in padded])
        layers.append(Layer(weights, bias))
    return Network(layers)


def _lift(net: Network, before: int, after: int) -> Network:
    """Run `net` on its slot while `before` leading and `after` trailing coordinates ride along."""
    if before == 0 and after == 0:
        return net
    if net.depth == 1:
        layer = net.layers[0]
        weights = _block_diag([np.eye(before), layer.weights, np.eye(after)])
        bias = np.concatenate([np.zeros(before), layer.bias, np.zeros(after)])
        return Network([(weights, bias)])

    layers = []
    for k, layer in enumerate(net.layers):
        if k == 0:
            side = (_split(before), _split(after))
            pads = (2 * before, 2 * after)
        elif k == net.depth - 1:
            side = (_merge(before), _merge(after))
            pads = (before, after)
        else:
            side = (np.eye(2 * before), np.eye(2 * after))
            pads = (2 * before, 2 * after)
        blocks = [m for m in (side[0], layer.weights, side[1]) if m.size]
        weights = _block_diag(blocks)
        bias = np.concatenate([np.zeros(pads[0]), layer.bias, np.zeros(pads[1])])
        layers.append(Layer(weights, bias))
    return Network(layers)


def _staggered(nets: Sequence[Network]) -> Network:
    lifted = []
    for i, net in enumerate(nets):
        before = sum(n.output_dim for n in nets[:i])
        after = sum(n.input_dim for n in nets[i + 1:])
        lifted.append(_lift(net, before, after))
    return compose_chain(lifted)


def parallelize(nets: Sequence[Network]) -> Network:
    """
    Network realizing x -> (net_1(x_1), ..., net_n(x_n)) on the concatenated input.

    Two exact layouts are considered: depth-padded block-diagonal stacking,
    and a staggered layout in which each network occupies its own depth
    segment while the other coordinates ride identity pairs. Both counts are
    known from the architectures alone; the cheaper layout is built.
    """
    if not nets:
        raise ValueError("parallelize needs at least one network")
    if len(nets) == 1:
        return nets[0]
    archs = [n.architecture for n in nets]
    diagonal = _count(_block_diagonal_architecture(archs))
    staggered = _count(_staggered_architecture(archs))
    logger.debug("parallelize %d nets: block-diagonal=%d staggered=%d", len(nets), diagonal, staggered)
    if staggered < diagonal:
        return _staggered(nets)
    return _block_diagonal(nets)


def parallel_bound(nets: Sequence[Network]) -> int:
    """(11/4) n² (max dim)² ΣP, rounded down (the count is an integer)."""
    n = len(nets)
    dim = max(max(net.input_dim, net.output_dim) for net in nets)
    return (11 * n * n * dim * dim * sum(net.param_count for net in nets)) // 4


def clip_network(Q: Hypercube) -> Network:
    """(n, n, n, n) network computing max{a, min{x, b}} componentwise."""
    n = Q.dim
    eye = np.eye(n)
    width = Q.upper - Q.lower
    return Network([
        (eye, np.full(n, -Q.lower)),      # r(x - a)
        (-eye, np.full(n, width)),        # r((b - a) - r(x - a))
        (-eye, np.full(n, Q.upper)),      # b - r(...)
    ])


def clip_to(net: Network, Q: Hypercube) -> Network:
    """
    Post-compose with the clipping network. Its first affine map is fused
    into the last layer of `net`, so the count grows by exactly 2n(n+1).
    """
    if Q.dim != net.output_dim:
        raise ShapeError(f"clip box has dimension {Q.dim}, network has {net.output_dim} outputs")
    last = net.layers[-1]
    clip = clip_network(Q)
    fused = Layer(last.weights, last.bias + clip.layers[0].bias)
    return Network(net.layers[:-1] + (fused,) + clip.layers[1:])


def affine_wrap(net: Network, pre: AffineMap | None = None, post: AffineMap | None = None) -> Network:
    """x -> post(net(pre(x))), fused into the first/last layers without adding depth."""
    layers = list(net.layers)
    if pre is not None:
        if pre.out_dim != net.input_dim:
            raise ShapeError(f"pre-map produces {pre.out_dim} values, network expects {net.input_dim}")
        first = layers[0]
        layers[0] = Layer(first.weights @ pre.matrix, first.weights @ pre.offset + first.bias)
    if post is not None:
        if post.in_dim != net.output_dim:
            raise ShapeError(f"post-map expects {post.in_dim} values, network produces {net.output_dim}")
        last = layers[-1]
        layers[-1] = Layer(post.matrix @ last.weights, post.matrix @ last.bias + post.offset)
    return Network(layers)
