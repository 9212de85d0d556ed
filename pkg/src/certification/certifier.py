"""
Sampling-based certification of constructed networks.

Every estimate here is a maximum over finitely many samples, i.e. a lower
bound of the true supremum. Acceptance checks therefore test "<= eps" claims
directly and treat Lipschitz estimates as falsification attempts.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from django.conf import settings

from src.networks.core import Hypercube, Network, evaluate
from src.networks.serializers import norm_label

from .reports import CertReport, ScalingFit

logger = logging.getLogger(__name__)

Oracle = Callable[[np.ndarray], np.ndarray]
CERTIFIED_NORMS = (1.0, 2.0, math.inf)


@dataclass(frozen=True)
class SamplerConfig:
    seed: int = 42
    samples: int = 100_000
    pairs: int = 10_000
    local_scale: float = 1e-3
    corner_max_dim: int = 16
    threads: int = 1

    @classmethod
    def from_settings(cls, **overrides) -> "SamplerConfig":
        config = cls(
            seed=int(getattr(settings, "RELU_FORGE_SEED", 42)),
            samples=int(getattr(settings, "RELU_FORGE_SAMPLES", 100_000)),
            pairs=int(getattr(settings, "RELU_FORGE_PAIRS", 10_000)),
            local_scale=float(getattr(settings, "RELU_FORGE_LOCAL_SCALE", 1e-3)),
            corner_max_dim=int(getattr(settings, "RELU_FORGE_CORNER_MAX_DIM", 16)),
            threads=int(getattr(settings, "RELU_FORGE_THREADS", os.cpu_count() or 1)),
        )
        return replace(config, **{k: v for k, v in overrides.items() if v is not None})


def sample_points(Q: Hypercube, config: SamplerConfig) -> np.ndarray:
    """Seeded uniform points, plus every corner when d <= corner_max_dim, plus the center."""
    rng = np.random.default_rng(config.seed)
    parts = [rng.uniform(Q.lower, Q.upper, size=(config.samples, Q.dim))]
    if Q.dim <= config.corner_max_dim:
        parts.append(Q.corners())
    parts.append(Q.center[None, :])
    return np.vstack(parts)


def sample_pairs(Q: Hypercube, config: SamplerConfig) -> tuple[np.ndarray, np.ndarray]:
    """Uniform pairs and local pairs (radius local_scale·(b - a)); coincident pairs dropped."""
    rng = np.random.default_rng([config.seed, 1])
    x = rng.uniform(Q.lower, Q.upper, size=(2 * config.pairs, Q.dim))
    far = rng.uniform(Q.lower, Q.upper, size=(config.pairs, Q.dim))
    radius = config.local_scale * Q.width
    near = Q.clip(x[config.pairs:] + rng.uniform(-radius, radius, size=(config.pairs, Q.dim)))
    y = np.vstack([far, near])
    keep = np.any(x != y, axis=1)
    return x[keep], y[keep]


def _evaluate(net: Network, points: np.ndarray, config: SamplerConfig) -> np.ndarray:
    workers = max(1, min(config.threads, len(points) // 1024))
    if workers == 1:
        return evaluate(net, points)
    chunks = np.array_split(points, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.vstack(list(pool.map(lambda chunk: evaluate(net, chunk), chunks)))


def _norms(diff: np.ndarray, p: float) -> np.ndarray:
    return np.linalg.norm(diff, ord=p, axis=1)


def sup_error(
    net: Network,
    oracle: Oracle,
    Q: Hypercube,
    p: float = math.inf,
    config: SamplerConfig | None = None,
    points: np.ndarray | None = None,
) -> float:
    config = config or SamplerConfig.from_settings()
    if net.input_dim != Q.dim:
        raise ValueError(f"network expects {net.input_dim} inputs, domain has dimension {Q.dim}")
    if points is None:
        points = sample_points(Q, config)
    reference = np.asarray(oracle(points), dtype=np.float64).reshape(len(points), -1)
    if not np.isfinite(reference).all():
        bad = points[np.argmax(~np.isfinite(reference).all(axis=1))]
        raise ValueError(f"reference is not finite at {bad.tolist()}")
    values = _evaluate(net, points, config)
    if values.shape != reference.shape:
        raise ValueError(f"network produces {values.shape[1]} outputs, reference {reference.shape[1]}")
    return float(_norms(values - reference, p).max())


def lipschitz_est(
    net: Network,
    Q: Hypercube,
    p: float = math.inf,
    config: SamplerConfig | None = None,
    pairs: tuple[np.ndarray, np.ndarray] | None = None,
) -> float:
    config = config or SamplerConfig.from_settings()
    x, y = pairs if pairs is not None else sample_pairs(Q, config)
    if not len(x):
        return 0.0
    out = _evaluate(net, np.vstack([x, y]), config)
    dy = _norms(out[:len(x)] - out[len(x):], p)
    return float((dy / _norms(x - y, p)).max())


def _inverse(p: float) -> float:
    return 0.0 if math.isinf(p) else 1.0 / p


def norm_factors(m: int, n: int, p: float, q: float) -> tuple[float, float]:
    """
    Factors turning an ℓ_p certificate (L, eps) of a map R^m -> R^n into an
    ℓ_q one: L' = max{m^{1/p-1/q}, n^{1/q-1/p}} L and eps' = max{n^{1/q-1/p}, 1} eps.
    """
    if m < 1 or n < 1:
        raise ValueError(f"dimensions must be positive, got m={m}, n={n}")
    gap = _inverse(p) - _inverse(q)
    return max(m ** gap, n ** -gap), max(n ** -gap, 1.0)


def convert_certificate(lipschitz: float, eps: float, m: int, n: int, p: float, q: float) -> tuple[float, float]:
    l_factor, e_factor = norm_factors(m, n, p, q)
    return lipschitz * l_factor, eps * e_factor


def scaling_fit(xs: Sequence[float], ys: Sequence[float], axis: str = "d", fixed: float | None = None) -> ScalingFit:
    """Least-squares slope of log(ys) against log(xs)."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("scaling_fit needs two sequences of equal length")
    if len(x) < 3:
        raise ValueError(f"scaling_fit needs at least 3 points, got {len(x)}")
    if (x <= 0).any() or (y <= 0).any():
        raise ValueError("scaling_fit needs positive values")
    if np.ptp(x) == 0:
        raise ValueError("scaling_fit needs at least two distinct abscissae")
    lx, ly = np.log(x), np.log(y)
    design = np.column_stack([lx, np.ones_like(lx)])
    (slope, intercept), *_ = np.linalg.lstsq(design, ly, rcond=None)
    residual = float(np.sqrt(np.mean((design @ np.array([slope, intercept]) - ly) ** 2)))
    return ScalingFit(axis=axis, fixed=fixed, slope=float(slope), intercept=float(intercept),
                      residual=residual, points=len(x))


def certify_network(
    net: Network,
    oracle: Oracle,
    Q: Hypercube,
    eps: float,
    p: float = math.inf,
    config: SamplerConfig | None = None,
    label: str = "",
    lipschitz_bound: float | None = None,
) -> CertReport:
    """Sup error in ℓ_p plus sampled Lipschitz constants in every certified norm."""
    config = config or SamplerConfig.from_settings()
    points = sample_points(Q, config)
    error = sup_error(net, oracle, Q, p, config, points=points)
    pairs = sample_pairs(Q, config)
    lipschitz = {norm_label(q): lipschitz_est(net, Q, q, config, pairs=pairs) for q in CERTIFIED_NORMS}
    passed = error <= eps
    if lipschitz_bound is not None:
        passed = passed and lipschitz[norm_label(p)] <= lipschitz_bound * (1 + 1e-9)
    report = CertReport(
        label=label,
        domain=Q,
        norm=p,
        eps=eps,
        sup_error_estimate=error,
        lipschitz_estimate=lipschitz,
        lipschitz_bound=lipschitz_bound,
        param_count=net.param_count,
        depth=net.depth,
        sample_count=len(points),
        pair_count=len(pairs[0]),
        seed=config.seed,
        passed=passed,
    )
    level = logging.INFO if passed else logging.WARNING
    logger.log(level, "certified %s: sup error %.3g (eps %.3g), %d params, %s",
               label or "network", error, eps, net.param_count, "passed" if passed else "FAILED")
    return report
