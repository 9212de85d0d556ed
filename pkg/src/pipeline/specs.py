"""
Staged function specifications F = g_n ∘ ... ∘ g_1 and their hypothesis checks.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from django.conf import settings
from django.db import models
from rest_framework.exceptions import ValidationError

from src.networks.blocks import LIP1_PRODUCT_HALF_WIDTH, LipschitzBlockSpec, PartitionSpec
from src.networks.core import Hypercube
from src.networks.products import cumprod_lipschitz_bound, product_lipschitz_bound

from .expressions import Expression
from .intervals import Interval, SingularityError, lipschitz_bound, range_bound

logger = logging.getLogger(__name__)


class StageKind(models.TextChoices):
    LIPSCHITZ_PARALLEL = "lipschitz_parallel", "Parallelized Lipschitz blocks"
    MAX_PARALLEL = "max_parallel", "Parallelized maxima"
    PRODUCT_PARALLEL = "product_parallel", "Parallelized products"
    EXT_MAX = "ext_max", "Running maxima"
    EXT_PROD = "ext_prod", "Running products"


class SpecMode(models.TextChoices):
    THEOREM1 = "theorem1", "Lipschitz constants at most 1, stage count may grow"
    THEOREM2 = "theorem2", "Fixed stage count, Lipschitz constants may grow"


PARTITIONED_KINDS = (StageKind.MAX_PARALLEL, StageKind.PRODUCT_PARALLEL)
RUNNING_KINDS = (StageKind.EXT_MAX, StageKind.EXT_PROD)


class HypothesisError(ValidationError):
    """A spec that parses but violates a chaining, domain or Lipschitz hypothesis."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__({path: [message]})


@dataclass(frozen=True)
class ExpressionBlock:
    dim: int
    expression: Expression
    lipschitz: float

    @property
    def is_passthrough(self) -> bool:
        return self.dim == 1 and self.expression.is_variable and self.lipschitz == 1.0

    def to_block_spec(self, norm: float) -> LipschitzBlockSpec:
        return LipschitzBlockSpec(
            dim=self.dim,
            function=self.expression.evaluate,
            lipschitz=self.lipschitz,
            norm=norm,
            label=self.expression.text,
            exact=self.is_passthrough,
        )


@dataclass(frozen=True)
class StageSpec:
    kind: str
    domain: Hypercube
    blocks: tuple[ExpressionBlock, ...] = ()
    partition: PartitionSpec | None = None
    lipschitz: float | None = None

    @property
    def input_dim(self) -> int:
        return self.domain.dim

    @property
    def output_dim(self) -> int:
        if self.kind == StageKind.LIPSCHITZ_PARALLEL:
            return len(self.blocks)
        if self.kind in PARTITIONED_KINDS:
            return len(self.partition)
        return self.domain.dim

    @property
    def block_dims(self) -> list[int]:
        if self.kind == StageKind.LIPSCHITZ_PARALLEL:
            return [b.dim for b in self.blocks]
        if self.kind in PARTITIONED_KINDS:
            return list(self.partition.parts)
        return [self.domain.dim]

    def _slices(self, x: np.ndarray) -> list[np.ndarray]:
        edges = np.cumsum([0] + self.block_dims)
        return [x[:, lo:hi] for lo, hi in zip(edges[:-1], edges[1:])]

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Exact stage map on a batch of points (rows)."""
        if self.kind == StageKind.EXT_MAX:
            return np.maximum.accumulate(x, axis=1)
        if self.kind == StageKind.EXT_PROD:
            return np.cumprod(x, axis=1)
        parts = self._slices(x)
        if self.kind == StageKind.MAX_PARALLEL:
            return np.column_stack([part.max(axis=1) for part in parts])
        if self.kind == StageKind.PRODUCT_PARALLEL:
            return np.column_stack([part.prod(axis=1) for part in parts])
        return np.column_stack([b.expression.evaluate(part) for b, part in zip(self.blocks, parts)])

    @cached_property
    def output_range(self) -> tuple[float, float]:
        """Interval hull of g(Q) over all output coordinates."""
        Q = self.domain
        if self.kind in (StageKind.MAX_PARALLEL, StageKind.EXT_MAX):
            return Q.lower, Q.upper
        if self.kind in (StageKind.PRODUCT_PARALLEL, StageKind.EXT_PROD):
            arities = set(self.block_dims) if self.kind == StageKind.PRODUCT_PARALLEL else range(1, Q.dim + 1)
            return _product_hull(Q, arities)
        ranges = [range_bound(b.expression, Q.with_dim(b.dim)) for b in self.blocks]
        return min(lo for lo, _ in ranges), max(hi for _, hi in ranges)

    def construction_lipschitz(self, p: float, mode: str) -> float:
        """
        ℓ_p Lipschitz bound of the network that approximates this stage; the
        budgets of the earlier stages are divided by it.
        """
        if self.kind == StageKind.LIPSCHITZ_PARALLEL:
            exponent = 1.0 if math.isinf(p) else 1.0 - 1.0 / p
            bound = max(b.dim ** exponent * b.lipschitz for b in self.blocks)
        elif self.kind == StageKind.MAX_PARALLEL:
            bound = 1.0
        elif self.kind == StageKind.EXT_MAX:
            bound = 1.0 if math.isinf(p) else self.domain.dim ** (1.0 / p)
        elif self.kind == StageKind.PRODUCT_PARALLEL:
            if mode == SpecMode.THEOREM1:
                bound = 1.0
            else:
                bound = max(product_lipschitz_bound(k, 1.0, p) for k in self.partition.parts)
        else:
            bound = cumprod_lipschitz_bound(self.domain.dim)
        if self.lipschitz is not None:
            bound = max(bound, self.lipschitz)
        return bound


def _product_hull(Q: Hypercube, arities) -> tuple[float, float]:
    factor = Interval(Q.lower, Q.upper)
    lows, highs = [], []
    for k in arities:
        acc = factor
        for _ in range(k - 1):
            acc = acc * factor
        lows.append(float(acc.lo))
        highs.append(float(acc.hi))
    return min(lows), max(highs)


@dataclass(frozen=True)
class FunctionSpec:
    stages: tuple[StageSpec, ...]
    norm: float
    mode: str
    name: str = ""
    c: float | None = None
    d: int | None = None

    @property
    def domain(self) -> Hypercube:
        return self.stages[0].domain

    @property
    def input_dim(self) -> int:
        return self.stages[0].input_dim

    @property
    def output_dim(self) -> int:
        return self.stages[-1].output_dim

    def __len__(self):
        return len(self.stages)


# --- Hypothesis checks ---
def _check_shape(stage: StageSpec, path: str):
    if stage.kind == StageKind.LIPSCHITZ_PARALLEL:
        limit = int(getattr(settings, "RELU_FORGE_MAX_BLOCK_DIM", 3))
        for j, block in enumerate(stage.blocks):
            if block.dim > limit:
                raise HypothesisError(f"{path}.blocks[{j}].dim", f"block dimension {block.dim} exceeds the limit {limit}")
            if block.expression.arity > block.dim:
                raise HypothesisError(
                    f"{path}.blocks[{j}].expr",
                    f"uses x{block.expression.arity} but the block has dimension {block.dim}",
                )
    total = sum(stage.block_dims)
    if total != stage.domain.dim:
        raise HypothesisError(
            f"{path}.domain",
            f"blocks cover {total} coordinates but the domain has dimension {stage.domain.dim}",
        )


def _check_mode(spec: FunctionSpec, stage: StageSpec, path: str):
    if spec.mode == SpecMode.THEOREM1 and stage.kind in RUNNING_KINDS:
        raise HypothesisError(f"{path}.kind", f"{stage.kind} stages are only allowed in theorem2 mode")
    if stage.kind in (StageKind.PRODUCT_PARALLEL, StageKind.EXT_PROD):
        theorem1 = spec.mode == SpecMode.THEOREM1
        limit, text = (LIP1_PRODUCT_HALF_WIDTH, "[-1/8, 1/8]") if theorem1 else (1.0, "[-1, 1]")
        if not stage.domain.is_within(-limit, limit):
            raise HypothesisError(
                f"{path}.domain",
                f"product stages in {spec.mode} mode need a domain inside {text}^d, got {stage.domain}",
            )


def _check_size(spec: FunctionSpec, stage: StageSpec, path: str):
    if spec.c is None or spec.d is None:
        return
    bound = spec.c * spec.d ** spec.c
    if not stage.domain.is_within(-bound, bound):
        raise HypothesisError(f"{path}.domain", f"domain {stage.domain} leaves [-c d^c, c d^c] = [{-bound:g}, {bound:g}]")
    for j, block in enumerate(stage.blocks):
        if block.dim > spec.c:
            raise HypothesisError(f"{path}.blocks[{j}].dim", f"block dimension {block.dim} exceeds c = {spec.c:g}")
        if block.lipschitz > bound:
            raise HypothesisError(
                f"{path}.blocks[{j}].lipschitz",
                f"Lipschitz constant {block.lipschitz:g} exceeds c d^c = {bound:g}",
            )


def _check_lipschitz(spec: FunctionSpec, stage: StageSpec, path: str):
    rtol = float(getattr(settings, "RELU_FORGE_LIPSCHITZ_RTOL", 1e-2))
    theorem1 = spec.mode == SpecMode.THEOREM1
    for j, block in enumerate(stage.blocks):
        where = f"{path}.blocks[{j}]"
        if theorem1 and block.lipschitz > 1:
            raise HypothesisError(f"{where}.lipschitz", "theorem1 mode needs Lipschitz constants <= 1")
        Q = stage.domain.with_dim(block.dim)
        try:
            bound = lipschitz_bound(block.expression, Q, spec.norm)
        except SingularityError as exc:
            raise HypothesisError(f"{where}.expr", f"{block.expression} is not defined on all of {Q}: {exc}")
        if block.lipschitz * (1.0 + rtol) + 1e-12 < bound:
            raise HypothesisError(
                f"{where}.lipschitz",
                f"declared Lipschitz constant {block.lipschitz:g} is below the interval bound {bound:.6g}",
            )
    if stage.lipschitz is not None and theorem1 and stage.lipschitz > 1:
        raise HypothesisError(f"{path}.lipschitz", "theorem1 mode needs Lipschitz constants <= 1")


def _check_range(stage: StageSpec, following: StageSpec, path: str):
    atol = float(getattr(settings, "RELU_FORGE_RANGE_ATOL", 1e-9))
    try:
        lo, hi = stage.output_range
    except SingularityError as exc:
        raise HypothesisError(path, f"range could not be enclosed: {exc}")
    target = following.domain
    if lo < target.lower - atol or hi > target.upper + atol:
        raise HypothesisError(
            path,
            f"range [{lo:.6g}, {hi:.6g}] is not provably inside the next domain [{target.lower:g}, {target.upper:g}]",
        )


def _check_range_defined(stage: StageSpec, path: str):
    try:
        stage.output_range
    except SingularityError as exc:
        raise HypothesisError(path, f"range could not be enclosed: {exc}")


def validate_hypotheses(spec: FunctionSpec) -> FunctionSpec:
    """Raise HypothesisError naming the first violated hypothesis; return the spec otherwise."""
    if not spec.stages:
        raise HypothesisError("stages", "a spec needs at least one stage")
    for i, stage in enumerate(spec.stages):
        path = f"stages[{i}]"
        _check_shape(stage, path)
        if i > 0 and spec.stages[i - 1].output_dim != stage.domain.dim:
            raise HypothesisError(
                f"{path}.domain",
                f"stage {i} produces {spec.stages[i - 1].output_dim} values but this domain "
                f"has dimension {stage.domain.dim}",
            )
        _check_mode(spec, stage, path)
        _check_size(spec, stage, path)
        _check_lipschitz(spec, stage, path)
        if i > 0 and stage.construction_lipschitz(spec.norm, spec.mode) == 0:
            raise HypothesisError(path, "stage Lipschitz bound is 0, which leaves the earlier budgets unbounded")
    for i, (stage, following) in enumerate(zip(spec.stages, spec.stages[1:])):
        _check_range(stage, following, f"stages[{i}]")
    # the last range feeds the output clip
    _check_range_defined(spec.stages[-1], f"stages[{len(spec.stages) - 1}]")
    logger.debug("spec %s: %d stages accepted", spec.name or "<unnamed>", len(spec.stages))
    return spec