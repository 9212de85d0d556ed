"""
Parallelized function classes: Lipschitz blocks, maxima and products acting
on consecutive slices of the input.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from django.conf import settings
from django.db import models

from .calculus import parallelize
from .core import Hypercube, Network, ShapeError
from .maxconv import maxconv_net
from .maxima import max_net
from .products import lip1_product_net, product_net

logger = logging.getLogger(__name__)

LIP1_PRODUCT_HALF_WIDTH = 0.125


class BlockKind(models.TextChoices):
    LIPSCHITZ = "lipschitz", "Lipschitz blocks"
    MAX = "max", "Maxima"
    PRODUCT_LIP1 = "product_lip1", "Products on [-1/8, 1/8]"
    PRODUCT = "product", "Products on [-1, 1]"


@dataclass(frozen=True)
class LipschitzBlockSpec:
    """
    One block f_i of a parallelized Lipschitz function: `function` maps an
    (N, dim) array to N values and satisfies |f(x) - f(y)| <= L ||x - y||_p.
    """

    dim: int
    function: Callable[[np.ndarray], np.ndarray]
    lipschitz: float
    norm: float = 1.0
    label: str = "f"
    exact: bool = False    # reproduced without error by the max convolution (e.g. t -> t with L = 1)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"block dimension must be >= 1, got {self.dim}")
        if not self.lipschitz >= 0:
            raise ValueError(f"block Lipschitz bound must be >= 0, got {self.lipschitz}")
        if not self.norm >= 1:
            raise ValueError(f"norm exponent must lie in [1, inf], got {self.norm}")


@dataclass(frozen=True)
class PartitionSpec:
    parts: tuple[int, ...]

    def __post_init__(self):
        parts = tuple(int(k) for k in self.parts)
        if not parts:
            raise ValueError("a partition needs at least one part")
        if any(k < 1 for k in parts):
            raise ValueError(f"partition parts must be positive, got {list(parts)}")
        object.__setattr__(self, "parts", parts)

    @property
    def total(self) -> int:
        return sum(self.parts)

    def __len__(self):
        return len(self.parts)


def block_budget(n: int, eps: float, p: float) -> float:
    """Per-block accuracy n^{-1/p} eps, so the ℓ_p norm of the error vector stays <= eps."""
    if math.isinf(p) or n <= 1:
        return eps
    return eps * n ** (-1.0 / p)


def _threads() -> int:
    return max(1, int(getattr(settings, "RELU_FORGE_THREADS", os.cpu_count() or 1)))


def _check_product_domain(kind: str, Q: Hypercube):
    limit = LIP1_PRODUCT_HALF_WIDTH if kind == BlockKind.PRODUCT_LIP1 else 1.0
    if not Q.is_within(-limit, limit):
        raise ValueError(f"{BlockKind(kind).label} need a domain inside [{-limit:g}, {limit:g}]^d, got {Q}")


def parallel_block_net(
    kind: str,
    parts: PartitionSpec | Sequence[LipschitzBlockSpec] | Sequence[int],
    Q: Hypercube,
    eps: float,
    p: float = 1.0,
) -> Network:
    kind = BlockKind(kind)
    if kind == BlockKind.LIPSCHITZ:
        blocks = list(parts)
        if not blocks or not all(isinstance(b, LipschitzBlockSpec) for b in blocks):
            raise ValueError("Lipschitz stages need a non-empty list of LipschitzBlockSpec")
        dims = [b.dim for b in blocks]
    else:
        partition = parts if isinstance(parts, PartitionSpec) else PartitionSpec(tuple(parts))
        dims = list(partition.parts)
    if sum(dims) != Q.dim:
        raise ShapeError(f"block dimensions {dims} add up to {sum(dims)}, domain has dimension {Q.dim}")
    if not 0 < eps <= 1:
        raise ValueError(f"parallel_block_net needs eps in (0, 1], got {eps}")
    if kind in (BlockKind.PRODUCT_LIP1, BlockKind.PRODUCT):
        _check_product_domain(kind, Q)

    # exact blocks (unit parts, maxima, flagged Lipschitz blocks) take no share of the budget
    if kind == BlockKind.LIPSCHITZ:
        inexact = sum(not b.exact for b in blocks)
    elif kind == BlockKind.MAX:
        inexact = 0
    else:
        inexact = sum(k > 1 for k in dims)
    budget = block_budget(inexact, eps, p)
    if kind == BlockKind.LIPSCHITZ:
        jobs = [lambda b=b: maxconv_net(b, Q.with_dim(b.dim), budget) for b in blocks]
    elif kind == BlockKind.MAX:
        jobs = [lambda k=k: max_net(k) for k in dims]
    elif kind == BlockKind.PRODUCT_LIP1:
        jobs = [lambda k=k: lip1_product_net(k, budget) for k in dims]
    else:
        jobs = [lambda k=k: product_net(k, 1.0, budget) for k in dims]

    logger.debug("building %d %s blocks with budget %g", len(jobs), kind.value, budget)
    with ThreadPoolExecutor(max_workers=min(_threads(), len(jobs))) as pool:
        nets = list(pool.map(lambda job: job(), jobs))
    return parallelize(nets)
