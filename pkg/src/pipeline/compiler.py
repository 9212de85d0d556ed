"""
Compile a validated FunctionSpec into one network.

Stage i is approximated within eps_i = eps / (n · ∏_{j>i} L_j), where L_j is
the Lipschitz bound of the network built for stage j, clipped into the next
stage's domain (the last stage into the hull of its range) and chained with
compose_chain. Errors then telescope to Σ (∏_{j>i} L_j) eps_i = eps.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from django.conf import settings

from src.certification.certifier import SamplerConfig, certify_network
from src.certification.reports import CertReport
from src.networks.blocks import BlockKind, parallel_block_net
from src.networks.calculus import clip_to, compose_chain
from src.networks.core import Hypercube, Network, ShapeError
from src.networks.maxconv import GridBudgetError
from src.networks.maxima import cummax_net
from src.networks.products import cumprod_net

from .specs import FunctionSpec, SpecMode, StageKind

logger = logging.getLogger(__name__)


class StageBuildError(RuntimeError):
    def __init__(self, index: int, kind: str, cause: Exception):
        self.index = index
        self.cause = cause
        super().__init__(f"stage {index + 1} ({kind}): {cause}")


@dataclass
class BuildResult:
    net: Network
    report: CertReport
    budgets: list[float] = field(default_factory=list)


def stage_lipschitz(spec: FunctionSpec, index: int) -> float:
    return spec.stages[index].construction_lipschitz(spec.norm, spec.mode)


def stage_budgets(spec: FunctionSpec, eps: float) -> list[float]:
    n = len(spec.stages)
    lipschitz = [stage_lipschitz(spec, i) for i in range(n)]
    return [eps / (n * math.prod(lipschitz[i + 1:])) for i in range(n)]


def propagated_error(spec: FunctionSpec, budgets: list[float]) -> float:
    """Σ_i (∏_{j>i} L_j) eps_i, the end-to-end error bound of the given budgets."""
    lipschitz = [stage_lipschitz(spec, i) for i in range(len(spec.stages))]
    return sum(math.prod(lipschitz[i + 1:]) * budget for i, budget in enumerate(budgets))


def output_hull(spec: FunctionSpec) -> Hypercube:
    lo, hi = spec.stages[-1].output_range
    if not hi > lo:
        hi = float(np.nextafter(lo, np.inf))
    return Hypercube(lo, hi, spec.output_dim)


def _stage_target(spec: FunctionSpec, index: int) -> Hypercube:
    if index + 1 < len(spec.stages):
        return spec.stages[index + 1].domain
    return output_hull(spec)


def _stage_network(spec: FunctionSpec, index: int, eps: float) -> Network:
    stage = spec.stages[index]
    if stage.kind == StageKind.LIPSCHITZ_PARALLEL:
        blocks = [block.to_block_spec(spec.norm) for block in stage.blocks]
        return parallel_block_net(BlockKind.LIPSCHITZ, blocks, stage.domain, eps, spec.norm)
    if stage.kind == StageKind.MAX_PARALLEL:
        return parallel_block_net(BlockKind.MAX, stage.partition, stage.domain, eps, spec.norm)
    if stage.kind == StageKind.PRODUCT_PARALLEL:
        kind = BlockKind.PRODUCT_LIP1 if spec.mode == SpecMode.THEOREM1 else BlockKind.PRODUCT
        return parallel_block_net(kind, stage.partition, stage.domain, eps, spec.norm)
    if stage.kind == StageKind.EXT_MAX:
        return cummax_net(stage.domain.dim)
    return cumprod_net(stage.domain.dim, eps)


def build_stage(spec: FunctionSpec, index: int, eps: float) -> Network:
    """Approximant of stage `index` within min(eps, 1), clipped into the next domain."""
    stage = spec.stages[index]
    try:
        net = _stage_network(spec, index, min(eps, 1.0))
    except (GridBudgetError, ShapeError, ValueError) as exc:
        raise StageBuildError(index, stage.kind, exc) from exc
    net = clip_to(net, _stage_target(spec, index))
    logger.info("stage %d (%s): %d -> %d, budget %.3g, %d params",
                index + 1, stage.kind, stage.input_dim, stage.output_dim, eps, net.param_count)
    return net


def reference_eval(spec: FunctionSpec, x) -> np.ndarray:
    """Exact staged value g_n(...g_1(x)...) at a point or at a batch of points (rows)."""
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    batch = arr.reshape(1, -1) if single else arr
    if batch.ndim != 2 or batch.shape[1] != spec.input_dim:
        raise ShapeError(f"spec expects points of dimension {spec.input_dim}, got array of shape {arr.shape}")
    atol = float(getattr(settings, "RELU_FORGE_EXACT_ATOL", 1e-9))
    inside = spec.domain.contains(batch, atol=atol)
    if not np.all(inside):
        where = batch[np.argmin(inside)]
        raise ValueError(f"point {where.tolist()} lies outside the input domain {spec.domain}")
    for stage in spec.stages:
        batch = stage.apply(batch)
    return batch[0] if single else batch


def lipschitz_envelope(spec: FunctionSpec) -> float:
    return math.prod(stage_lipschitz(spec, i) for i in range(len(spec.stages)))


def certify(
    net: Network,
    spec: FunctionSpec,
    eps: float,
    config: SamplerConfig | None = None,
    budgets: list[float] | None = None,
) -> CertReport:
    """Certify any network (built here or loaded from a file) against the spec's reference."""
    if net.input_dim != spec.input_dim or net.output_dim != spec.output_dim:
        raise ShapeError(
            f"network maps {net.input_dim} -> {net.output_dim}, spec maps {spec.input_dim} -> {spec.output_dim}"
        )
    report = certify_network(
        net,
        lambda points: reference_eval(spec, points),
        spec.domain,
        eps,
        spec.norm,
        config,
        label=spec.name,
        lipschitz_bound=lipschitz_envelope(spec),
    )
    return replace(report, stage_budgets=list(budgets or []))


def _threads() -> int:
    return max(1, int(getattr(settings, "RELU_FORGE_THREADS", os.cpu_count() or 1)))


def build(spec: FunctionSpec, eps: float, config: SamplerConfig | None = None) -> BuildResult:
    if not 0 < eps <= 1:
        raise ValueError(f"build needs eps in (0, 1], got {eps}")
    budgets = stage_budgets(spec, eps)
    logger.info("building %s at eps=%g: stage budgets %s",
                spec.name or "spec", eps, ", ".join(f"{b:.3g}" for b in budgets))
    with ThreadPoolExecutor(max_workers=min(_threads(), len(budgets))) as pool:
        nets = list(pool.map(lambda i: build_stage(spec, i, budgets[i]), range(len(budgets))))
    net = compose_chain(nets)
    report = certify(net, spec, eps, config, budgets)
    return BuildResult(net=net, report=report, budgets=budgets)
