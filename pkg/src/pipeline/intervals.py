"""
Outward-rounded interval arithmetic over numpy arrays.

An Interval holds two arrays `lo` and `hi` of one shape, one entry per cell of
a subdivided box, so an expression is enclosed on every cell in a single
pass. Every rounding operation widens its result by one ulp on each side.

Dual pairs the enclosure of a value with enclosures of its partial
derivatives (forward mode). The branch-and-bound drivers at the bottom use
both to bound the range and the Lipschitz constant of an expression on a
hypercube.
"""
from __future__ import annotations

import logging
import math
from typing import Protocol

import numpy as np
from django.conf import settings

from src.networks.core import Hypercube

logger = logging.getLogger(__name__)

_TWO_PI = 2.0 * math.pi


class SingularityError(ArithmeticError):
    """An expression is undefined, or not provably defined, somewhere on its domain."""


def _rounded(lo, hi) -> "Interval":
    lo = np.nextafter(lo, -np.inf)
    hi = np.nextafter(hi, np.inf)
    if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
        raise SingularityError("interval enclosure overflowed")
    return Interval(lo, hi)


class Interval:
    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None):
        self.lo = np.asarray(lo, dtype=np.float64)
        self.hi = self.lo if hi is None else np.asarray(hi, dtype=np.float64)

    @staticmethod
    def lift(value) -> "Interval":
        return value if isinstance(value, Interval) else Interval(float(value))

    # --- Field operations ---
    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __add__(self, other):
        other = Interval.lift(other)
        return _rounded(self.lo + other.lo, self.hi + other.hi)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-Interval.lift(other))

    def __rsub__(self, other):
        return Interval.lift(other) - self

    def __mul__(self, other):
        other = Interval.lift(other)
        products = np.stack(np.broadcast_arrays(
            self.lo * other.lo, self.lo * other.hi, self.hi * other.lo, self.hi * other.hi,
        ))
        return _rounded(products.min(axis=0), products.max(axis=0))

    __rmul__ = __mul__

    def reciprocal(self) -> "Interval":
        if ((self.lo <= 0) & (self.hi >= 0)).any():
            raise SingularityError("division by an interval containing 0")
        return _rounded(1.0 / self.hi, 1.0 / self.lo)

    def __truediv__(self, other):
        return self * Interval.lift(other).reciprocal()

    def __rtruediv__(self, other):
        return Interval.lift(other) * self.reciprocal()

    # --- Elementary functions ---
    def ipow(self, n: int) -> "Interval":
        if n == 0:
            return Interval(np.ones_like(self.lo), np.ones_like(self.hi))
        if n < 0:
            return self.ipow(-n).reciprocal()
        if n % 2:
            return _rounded(self.lo ** n, self.hi ** n)
        mag = self.abs()
        return _rounded(mag.lo ** n, mag.hi ** n)

    def power(self, exponent: "Interval") -> "Interval":
        if (self.lo <= 0).any():
            raise SingularityError("pow with a non-integer exponent needs a positive base")
        return (Interval.lift(exponent) * self.ln()).exp()

    def exp(self) -> "Interval":
        return _rounded(np.exp(self.lo), np.exp(self.hi))

    def ln(self) -> "Interval":
        if (self.lo <= 0).any():
            raise SingularityError("ln of a non-positive value")
        return _rounded(np.log(self.lo), np.log(self.hi))

    def cos(self) -> "Interval":
        lo, hi = self.lo, self.hi
        at_lo, at_hi = np.cos(lo), np.cos(hi)
        low, high = np.minimum(at_lo, at_hi), np.maximum(at_lo, at_hi)
        # peaks at 2kπ, troughs at (2k+1)π
        has_peak = _TWO_PI * np.ceil(lo / _TWO_PI) <= hi
        has_trough = math.pi + _TWO_PI * np.ceil((lo - math.pi) / _TWO_PI) <= hi
        out = _rounded(np.where(has_trough, -1.0, low), np.where(has_peak, 1.0, high))
        return Interval(np.maximum(out.lo, -1.0), np.minimum(out.hi, 1.0))

    def sin(self) -> "Interval":
        return (self - 0.5 * math.pi).cos()

    def abs(self) -> "Interval":
        lo, hi = self.lo, self.hi
        low = np.where(lo >= 0, lo, np.where(hi <= 0, -hi, 0.0))
        return Interval(low, np.maximum(np.abs(lo), np.abs(hi)))

    # --- Queries ---
    def magnitude(self) -> np.ndarray:
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def union(self, other: "Interval") -> "Interval":
        return Interval(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi))

    def hull(self) -> tuple[float, float]:
        return float(np.min(self.lo)), float(np.max(self.hi))

    def __repr__(self):
        return f"Interval(lo={self.lo!r}, hi={self.hi!r})"


_ZERO = Interval(0.0)
_ONE = Interval(1.0)


class Dual:
    """Enclosure of f and of its gradient; `grad[i]` encloses ∂f/∂x_(i+1)."""

    __slots__ = ("value", "grad")

    def __init__(self, value: Interval, grad: list[Interval]):
        self.value = value
        self.grad = grad

    @classmethod
    def constant(cls, c: float, n: int) -> "Dual":
        return cls(Interval(float(c)), [_ZERO] * n)

    @classmethod
    def variable(cls, value: Interval, index: int, n: int) -> "Dual":
        grad = [_ZERO] * n
        grad[index] = _ONE
        return cls(value, grad)

    @staticmethod
    def lift(other, n: int) -> "Dual":
        return other if isinstance(other, Dual) else Dual.constant(other, n)

    def _chain(self, value: Interval, factor: Interval) -> "Dual":
        return Dual(value, [factor * g for g in self.grad])

    def __neg__(self):
        return Dual(-self.value, [-g for g in self.grad])

    def __add__(self, other):
        other = Dual.lift(other, len(self.grad))
        return Dual(self.value + other.value, [a + b for a, b in zip(self.grad, other.grad)])

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-Dual.lift(other, len(self.grad)))

    def __rsub__(self, other):
        return Dual.lift(other, len(self.grad)) - self

    def __mul__(self, other):
        other = Dual.lift(other, len(self.grad))
        return Dual(
            self.value * other.value,
            [a * other.value + self.value * b for a, b in zip(self.grad, other.grad)],
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = Dual.lift(other, len(self.grad))
        inverse = other.value.reciprocal()
        quotient = self.value * inverse
        return Dual(quotient, [(a - quotient * b) * inverse for a, b in zip(self.grad, other.grad)])

    def __rtruediv__(self, other):
        return Dual.lift(other, len(self.grad)) / self

    def ipow(self, n: int) -> "Dual":
        if n == 0:
            return Dual.constant(1.0, len(self.grad))
        return self._chain(self.value.ipow(n), n * self.value.ipow(n - 1))

    def power(self, exponent: "Dual") -> "Dual":
        exponent = Dual.lift(exponent, len(self.grad))
        value = self.value.power(exponent.value)
        log_base = self.value.ln()
        ratio = exponent.value / self.value
        return Dual(value, [value * (db * log_base + ratio * da) for da, db in zip(self.grad, exponent.grad)])

    def exp(self) -> "Dual":
        value = self.value.exp()
        return self._chain(value, value)

    def ln(self) -> "Dual":
        return self._chain(self.value.ln(), self.value.reciprocal())

    def cos(self) -> "Dual":
        return self._chain(self.value.cos(), -self.value.sin())

    def abs(self) -> "Dual":
        lo, hi = self.value.lo, self.value.hi
        sign = Interval(np.where(lo > 0, 1.0, -1.0), np.where(hi < 0, -1.0, 1.0))
        return self._chain(self.value.abs(), sign)


# --- Branch and bound over a hypercube ---
class Enclosable(Protocol):
    def evaluate(self, points: np.ndarray) -> np.ndarray: ...

    def enclose(self, lower: np.ndarray, upper: np.ndarray) -> Interval: ...

    def enclose_gradient(self, lower: np.ndarray, upper: np.ndarray) -> list[Interval]: ...


def _limits(dim: int) -> tuple[int, int, int]:
    cells = getattr(settings, "RELU_FORGE_INTERVAL_CELLS", {1: 256, 2: 48, 3: 16})
    per_axis = int(cells.get(dim, min(cells.values()) if cells else 8))
    rounds = int(getattr(settings, "RELU_FORGE_INTERVAL_ROUNDS", 8))
    max_cells = int(getattr(settings, "RELU_FORGE_INTERVAL_MAX_CELLS", 200_000))
    return per_axis, rounds, max_cells


def grid_cells(Q: Hypercube, per_axis: int) -> tuple[np.ndarray, np.ndarray]:
    """Lower and upper corners of the per_axis^d congruent cells of Q."""
    edges = np.linspace(Q.lower, Q.upper, per_axis + 1)
    index = np.stack(np.meshgrid(*([np.arange(per_axis)] * Q.dim), indexing="ij"), axis=-1).reshape(-1, Q.dim)
    return edges[index], edges[index + 1]


def bisect_cells(lower: np.ndarray, upper: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split every cell in half along every axis (2^d children per cell)."""
    dim = lower.shape[1]
    mid = 0.5 * (lower + upper)
    bits = ((np.arange(2 ** dim)[:, None] >> np.arange(dim)[None, :]) & 1).astype(bool)
    new_lower = np.where(bits[:, None, :], mid[None], lower[None]).reshape(-1, dim)
    new_upper = np.where(bits[:, None, :], upper[None], mid[None]).reshape(-1, dim)
    return new_lower, new_upper


def _dual_exponent(p: float) -> float:
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def range_bound(expr: Enclosable, Q: Hypercube) -> tuple[float, float]:
    """
    Sound enclosure [lo, hi] of expr over Q. Cells whose enclosure reaches
    beyond the values seen at cell centers are bisected again.
    """
    per_axis, rounds, max_cells = _limits(Q.dim)
    atol = float(getattr(settings, "RELU_FORGE_RANGE_ATOL", 1e-9))
    lower, upper = grid_cells(Q, per_axis)
    seen_lo, seen_hi = math.inf, -math.inf
    low, high = math.inf, -math.inf
    for round_ in range(rounds + 1):
        enclosure = expr.enclose(lower, upper)
        enc_lo = np.broadcast_to(enclosure.lo, (len(lower),))
        enc_hi = np.broadcast_to(enclosure.hi, (len(lower),))
        centers = expr.evaluate(0.5 * (lower + upper))
        seen_lo, seen_hi = min(seen_lo, float(centers.min())), max(seen_hi, float(centers.max()))
        open_ = (enc_lo < seen_lo - atol) | (enc_hi > seen_hi + atol)
        done = ~open_
        if done.any():
            low, high = min(low, float(enc_lo[done].min())), max(high, float(enc_hi[done].max()))
        refine = open_.any() and round_ < rounds and open_.sum() * 2 ** Q.dim <= max_cells
        if not refine:
            if open_.any():
                low, high = min(low, float(enc_lo[open_].min())), max(high, float(enc_hi[open_].max()))
            break
        lower, upper = bisect_cells(lower[open_], upper[open_])
    return low, high


def lipschitz_bound(expr: Enclosable, Q: Hypercube, p: float = 1.0) -> float:
    """
    Sound upper bound of sup ||∇f||_q over Q with 1/p + 1/q = 1, i.e. of the
    ℓ_p Lipschitz constant of expr on Q.
    """
    per_axis, rounds, max_cells = _limits(Q.dim)
    rtol = float(getattr(settings, "RELU_FORGE_LIPSCHITZ_RTOL", 1e-2))
    q = _dual_exponent(p)
    lower, upper = grid_cells(Q, per_axis)
    seen, bound = 0.0, 0.0
    for round_ in range(rounds + 1):
        grads = expr.enclose_gradient(lower, upper)
        mags = np.column_stack([np.broadcast_to(g.magnitude(), (len(lower),)) for g in grads])
        bounds = np.nextafter(np.linalg.norm(mags, ord=q, axis=1) * (1.0 + 1e-12), np.inf)
        centers = 0.5 * (lower + upper)
        mids = np.column_stack([
            np.broadcast_to(g.midpoint(), (len(lower),)) for g in expr.enclose_gradient(centers, centers)
        ])
        seen = max(seen, float(np.linalg.norm(mids, ord=q, axis=1).max()))
        open_ = bounds > seen * (1.0 + 0.5 * rtol) + 1e-12
        done = ~open_
        if done.any():
            bound = max(bound, float(bounds[done].max()))
        refine = open_.any() and round_ < rounds and open_.sum() * 2 ** Q.dim <= max_cells
        if not refine:
            if open_.any():
                bound = max(bound, float(bounds[open_].max()))
            break
        lower, upper = bisect_cells(lower[open_], upper[open_])
    logger.debug("Lipschitz bound on %s: %.6g (largest sampled gradient %.6g)", Q, bound, seen)
    return bound
