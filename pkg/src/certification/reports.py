from __future__ import annotations

from dataclasses import dataclass, field

from src.networks.core import Hypercube


@dataclass
class CertReport:
    """
    Evidence that a network is an (L, eps) approximant in ℓ_norm on `domain`.
    Sampled values are lower bounds of the true suprema, never the minimum cost.
    """

    label: str
    domain: Hypercube
    norm: float
    eps: float
    sup_error_estimate: float
    lipschitz_estimate: dict[str, float]
    param_count: int
    depth: int
    sample_count: int
    pair_count: int
    seed: int
    passed: bool
    lipschitz_bound: float | None = None
    stage_budgets: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class ScalingFit:
    axis: str                  # "d" or "inv_eps"
    fixed: float | None        # the eps (axis "d") or d (axis "inv_eps") held fixed
    slope: float
    intercept: float
    residual: float
    points: int


@dataclass
class ScalingCell:
    d: int
    eps: float
    params: int | None = None
    sup_error: float | None = None
    passed: bool = False
    error: str | None = None


@dataclass
class ScalingReport:
    family: str
    norm: float
    seed: int
    cells: list[ScalingCell] = field(default_factory=list)
    fits: list[ScalingFit] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.cells) and all(cell.passed for cell in self.cells)
