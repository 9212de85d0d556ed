"""
Lipschitz approximants given by a maximum convolution over a uniform grid:

    f~(x) = max_k ( f(x_k) - L ||x - x_k||_1 ).

Every cone lies below f, and the nearest grid point gives the lower bound, so
with per-axis spacing h the error is at most L h (d + d^{1/p}) / 2. The
approximant is L-Lipschitz in ℓ_1, hence d^{1-1/p} L-Lipschitz in ℓ_p.

Construction:
  * grid values are first replaced by their ℓ_1 cone envelope (separable, one
    pass per axis), which leaves f~ unchanged;
  * in one dimension f~ is built exactly as a sum of ReLU kinks: slope +L to
    the left of the grid, a peak at every grid point and a valley where the
    cones of two neighbours meet;
  * in d dimensions f~(x) = max_i ( -L |x_1 - a_i| + f~_i(x_2, ..., x_d) ),
    with f~_i the (d-1)-dimensional approximant of the i-th grid slice.
"""
from __future__ import annotations

import logging
import math
from typing import TYPE_CHECKING

import numpy as np
from django.conf import settings

from .calculus import AffineMap, affine_wrap, compose, parallelize
from .core import Hypercube, Layer, Network, ShapeError
from .maxima import max_net

if TYPE_CHECKING:
    from .blocks import LipschitzBlockSpec

logger = logging.getLogger(__name__)


class GridBudgetError(ValueError):
    """The grid needed for the requested accuracy exceeds the parameter budget."""


def constant_network(d: int, c: float) -> Network:
    return Network([(np.zeros((1, d)), np.array([float(c)]))])


def grid_points_per_axis(Q: Hypercube, lipschitz: float, p: float, eps: float) -> int:
    d = Q.dim
    root = 1.0 if math.isinf(p) else d ** (1.0 / p)
    spacing = 2.0 * eps / (lipschitz * (root + d))
    return max(2, math.ceil(Q.width / spacing) + 1)


def maxconv_predicted_params(d: int, points_per_axis: int) -> int:
    m = points_per_axis
    if d == 1:
        return 6 * m + 4
    return 4 * m ** (d + 1)


def _cone_envelope(values: np.ndarray, grid: np.ndarray, L: float) -> np.ndarray:
    out = values
    for axis in range(values.ndim):
        moved = np.moveaxis(out, axis, -1)
        forward = np.maximum.accumulate(moved + L * grid, axis=-1) - L * grid
        backward = np.flip(np.maximum.accumulate(np.flip(moved - L * grid, axis=-1), axis=-1), axis=-1) + L * grid
        out = np.moveaxis(np.maximum(forward, backward), -1, axis)
    return out


def _envelope_net(values: np.ndarray, grid: np.ndarray, L: float) -> Network:
    """Exact (1, 2m+1, 1) network for t ↦ max_j (F_j - L |t - g_j|), F already cone-enveloped."""
    m = grid.shape[0]
    valleys = 0.5 * (grid[:-1] + grid[1:]) - (values[1:] - values[:-1]) / (2.0 * L)
    shifts = np.concatenate([[0.0, 0.0], grid, valleys])
    first = Layer(
        np.concatenate([[1.0, -1.0], np.ones(2 * m - 1)])[:, None],
        -shifts,
    )
    slopes = np.concatenate([[L, -L], np.full(m, -2.0 * L), np.full(m - 1, 2.0 * L)])
    second = Layer(slopes[None, :], np.array([values[0] - L * grid[0]]))
    return Network([first, second])


def _distance_net(grid: np.ndarray) -> Network:
    """(1, 2m, m) network computing |t - g_i| for every grid point."""
    m = grid.shape[0]
    first = Layer(np.concatenate([np.ones(m), -np.ones(m)])[:, None], np.concatenate([-grid, grid]))
    eye = np.eye(m)
    return Network([first, Layer(np.hstack([eye, eye]), np.zeros(m))])


def _maxconv_from_values(values: np.ndarray, grid: np.ndarray, L: float) -> Network:
    if values.ndim == 1:
        return _envelope_net(values, grid, L)
    m = grid.shape[0]
    rest = values.ndim - 1
    rows = [_maxconv_from_values(values[i], grid, L) for i in range(m)]
    combined = parallelize([_distance_net(grid)] + rows)
    # x -> (x_1, x_rest, ..., x_rest)
    replicate = np.zeros((1 + m * rest, 1 + rest))
    replicate[0, 0] = 1.0
    for i in range(m):
        replicate[1 + i * rest:1 + (i + 1) * rest, 1:] = np.eye(rest)
    cones = AffineMap.linear(np.hstack([-L * np.eye(m), np.eye(m)]))
    return compose(max_net(m), affine_wrap(combined, AffineMap.linear(replicate), cones))


def maxconv_net(
    block: "LipschitzBlockSpec",
    Q: Hypercube,
    eps: float,
    points_per_axis: int | None = None,
) -> Network:
    if block.dim != Q.dim:
        raise ShapeError(f"block has dimension {block.dim}, domain {Q} has dimension {Q.dim}")
    if not 0 < eps <= 1:
        raise ValueError(f"maxconv_net needs eps in (0, 1], got {eps}")
    L = float(block.lipschitz)
    if L < 0 or not math.isfinite(L):
        raise ValueError(f"Lipschitz bound of {block.label} must be finite and >= 0, got {L}")

    d = Q.dim
    if points_per_axis is None:
        points_per_axis = 2 if L == 0 else grid_points_per_axis(Q, L, block.norm, eps)
    if points_per_axis < 2:
        raise ValueError(f"need at least 2 grid points per axis, got {points_per_axis}")
    m = points_per_axis
    predicted = maxconv_predicted_params(d, m)
    limit = int(getattr(settings, "RELU_FORGE_MAX_PARAMS", 20_000_000))
    if predicted > limit:
        raise GridBudgetError(
            f"{block.label} on {Q} at eps={eps:g} needs {m}^{d} grid points "
            f"(about {predicted} parameters, limit {limit})"
        )

    grid = np.linspace(Q.lower, Q.upper, m)
    mesh = np.meshgrid(*([grid] * d), indexing="ij")
    points = np.stack([axis.reshape(-1) for axis in mesh], axis=1)
    values = np.asarray(block.function(points), dtype=np.float64).reshape(-1)
    bad = ~np.isfinite(values)
    if bad.any():
        where = points[np.argmax(bad)]
        raise ValueError(f"{block.label} is not finite at grid point {where.tolist()}")

    if np.ptp(values) == 0.0:
        return constant_network(d, values[0])
    if L == 0:
        raise ValueError(f"{block.label} is not constant on {Q} but its Lipschitz bound is 0")

    logger.debug("maxconv %s on %s: %d points per axis, ~%d params", block.label, Q, m, predicted)
    enveloped = _cone_envelope(values.reshape((m,) * d), grid, L)
    return _maxconv_from_values(enveloped, grid, L)
