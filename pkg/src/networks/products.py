"""
Product networks built from the sawtooth squaring approximant.

square_net(M, s) approximates u ↦ u² on [-M, M] by M²·S_s(|u|/M), where
S_s is the piecewise linear interpolant of t² at the 2^s + 1 points j/2^s:

    S_s(t) = t - Σ_{k=1..s} g_k(t) / 4^k,   g_k = g ∘ g_{k-1},
    g(t) = 2 r(t) - 4 r(t - 1/2) + 2 r(t - 1)   (hat function on [0, 1]).

The error is at most M² 4^{-s-1} and the slope deviates from 2u by at most
M 2^{-s}. Products use the polarization identity xy = ((x+y)² - x² - y²)/2
and a balanced binary tree whose node budgets keep both the error and the
Lipschitz envelope explicit.
"""
from __future__ import annotations

import logging
import math

import numpy as np

from .calculus import AffineMap, affine_network, affine_wrap, compose, compose_chain, identity_network, parallelize
from .core import Layer, Network

logger = logging.getLogger(__name__)

_HAT = np.array([2.0, -4.0, 2.0])
_HAT_SHIFTS = np.array([0.0, -0.5, -1.0])


def square_net(M: float, levels: int) -> Network:
    if M <= 0:
        raise ValueError(f"square_net needs M > 0, got {M}")
    if levels < 0:
        raise ValueError(f"square_net needs levels >= 0, got {levels}")
    layers = [Layer(np.array([[1.0], [-1.0]]), np.zeros(2))]        # r(u), r(-u)
    if levels == 0:
        layers.append(Layer(np.array([[M, M]]), np.zeros(1)))        # M |u|
        return Network(layers)

    # level 1 reads t = (r(u) + r(-u)) / M
    layers.append(Layer(np.full((3, 2), 1.0 / M), _HAT_SHIFTS.copy()))
    acc = np.array([1.0, 0.0, 0.0])        # r(t) = t, the level-0 accumulator
    hat = _HAT.copy()
    for k in range(2, levels + 1):
        # hidden: r(acc_{k-1}), r(g_{k-1}), r(g_{k-1} - 1/2), r(g_{k-1} - 1)
        new_acc = acc - hat / 4.0 ** (k - 1)
        weights = np.vstack([new_acc, hat, hat, hat])
        layers.append(Layer(weights, np.concatenate([[0.0], _HAT_SHIFTS])))
        acc = np.array([1.0, 0.0, 0.0, 0.0])
        hat = np.concatenate([[0.0], _HAT])
    final = acc - hat / 4.0 ** levels
    layers.append(Layer((M * M) * final[None, :], np.zeros(1)))
    return Network(layers)


def square_error(M: float, levels: int) -> float:
    return M * M * 4.0 ** (-levels - 1)


def sawtooth_levels(a: float, eps: float, slope: float | None = None) -> int:
    """
    Smallest level count for mult2 on [-a, a]²: the (x+y)² term has error
    a² 4^{-s} <= eps/3 and, when `slope` is given, the partial derivatives
    deviate from the exact ones by at most 1.5 a 2^{-s} <= slope.
    """
    levels = 0
    while a * a * 4.0 ** (-levels) > eps / 3.0 or (slope is not None and 1.5 * a * 2.0 ** (-levels) > slope):
        levels += 1
    return levels


def mult2_net(a: float, eps: float, slope: float | None = None) -> Network:
    """(x, y) ↦ xy on [-a, a]² within eps."""
    if a <= 0:
        raise ValueError(f"mult2_net needs a > 0, got {a}")
    if not 0 < eps <= 1:
        raise ValueError(f"mult2_net needs eps in (0, 1], got {eps}")
    levels = sawtooth_levels(a, eps, slope)
    logger.debug("mult2 a=%g eps=%g -> %d sawtooth levels", a, eps, levels)
    squares = parallelize([square_net(2 * a, levels), square_net(a, levels), square_net(a, levels)])
    pre = AffineMap.linear([[1.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
    post = AffineMap.linear([[0.5, -0.5, -0.5]])
    return affine_wrap(squares, pre, post)


def _carry(n: int) -> Network:
    return affine_network(AffineMap.identity(n))


def _product_tree(k: int, a: float, eps: float, depth: int) -> Network | None:
    """
    Balanced tree for x_1 ··· x_k on [-a, a]^k within eps; None for a bare leaf.

    Node budget: |out - xy| <= eps_m + (A1 + e1) e2 + A2 e1 with
    eps_m = e1 A2 = e2 (A1 + e1) = eps/3. Child errors are also capped at
    A/(8 depth) and the mult2 slope deviation at min(A1, A2)/(4 depth), which
    keeps every path product of partial derivatives below 1.46 a^{k-1}.
    """
    if k == 1:
        return None
    k1 = (k + 1) // 2
    k2 = k - k1
    A1, A2 = a ** k1, a ** k2
    e1 = min(eps / (3.0 * A2), A1 / (8.0 * depth)) if k1 > 1 else 0.0
    e2 = min(eps / (3.0 * (A1 + e1)), A2 / (8.0 * depth)) if k2 > 1 else 0.0
    left = _product_tree(k1, a, e1, depth)
    right = _product_tree(k2, a, e2, depth)
    mult = mult2_net(max(A1 + e1, A2 + e2), min(eps / 3.0, 1.0), slope=min(A1, A2) / (4.0 * depth))
    if left is None and right is None:
        return mult
    children = [left if left is not None else _carry(1), right if right is not None else _carry(1)]
    return compose(mult, parallelize(children))


def _tree_depth(k: int) -> int:
    return max(1, math.ceil(math.log2(k)))


def product_net(d: int, a: float, eps: float) -> Network:
    """x_1 ··· x_d on [-a, a]^d within eps."""
    if d < 1:
        raise ValueError(f"product_net needs d >= 1, got {d}")
    if a < 1:
        raise ValueError(f"product_net needs a >= 1, got {a}")
    if eps <= 0:
        raise ValueError(f"product_net needs eps > 0, got {eps}")
    if d == 1:
        return identity_network(1)
    return _product_tree(d, float(a), float(eps), _tree_depth(d))


def lip1_product_net(d: int, eps: float) -> Network:
    """
    1-Lipschitz product on [-1/8, 1/8]^d: pad to 2^e inputs with the constant
    1/8, approximate that product within 8^{-2^{e-1}} eps and rescale by
    8^{2^e - d}.
    """
    if d < 1:
        raise ValueError(f"lip1_product_net needs d >= 1, got {d}")
    if not 0 < eps <= 1:
        raise ValueError(f"lip1_product_net needs eps in (0, 1], got {eps}")
    if d == 1:
        return identity_network(1)
    e = math.ceil(math.log2(d))
    width = 2 ** e
    inner = _product_tree(width, 0.125, eps * 8.0 ** (-(2 ** (e - 1))), e)
    if width == d:
        return inner
    pad = width - d
    pre = AffineMap(
        np.vstack([np.eye(d), np.zeros((pad, d))]),
        np.concatenate([np.zeros(d), np.full(pad, 0.125)]),
    )
    post = AffineMap.linear([[8.0 ** pad]])
    return affine_wrap(inner, pre, post)


def cumprod_net(d: int, eps: float) -> Network:
    """
    Running products (x_1, x_1 x_2, ..., x_1 ··· x_d) on [-1, 1]^d; the ℓ_1
    norm of the error vector (hence every ℓ_p norm) stays below eps.

    Step k replaces x_k by y_k = mult(y_{k-1}, x_k); errors add up to
    (k - 1) eps_m in y_k.
    """
    if d < 1:
        raise ValueError(f"cumprod_net needs d >= 1, got {d}")
    if not 0 < eps <= 1:
        raise ValueError(f"cumprod_net needs eps in (0, 1], got {eps}")
    if d == 1:
        return identity_network(1)
    eps_m = min(2.0 * eps / (d * (d + 1)), 1.0 / (8.0 * d * d))
    mult = mult2_net(1.0 + 1.0 / (8.0 * d), eps_m, slope=1.0 / (4.0 * d))
    steps = []
    for k in range(2, d + 1):
        rows = list(range(k - 1)) + [k - 2, k - 1] + list(range(k, d))
        duplicate = AffineMap.linear(np.eye(d)[rows])
        parts = [_carry(k - 1), mult] + ([_carry(d - k)] if d > k else [])
        steps.append(affine_wrap(parallelize(parts), pre=duplicate))
    return compose_chain(steps)


def product_lipschitz_bound(k: int, a: float = 1.0, p: float = 1.0) -> float:
    """ℓ_p Lipschitz envelope of product_net(k, a, ·) / the tree inside lip1_product_net."""
    if k == 1:
        return 1.0
    return 2.0 * k ** (1.0 - 1.0 / p) * a ** (k - 1)


def cumprod_lipschitz_bound(d: int) -> float:
    return 1.0 if d == 1 else 2.0 * d
