from __future__ import annotations

import logging
from typing import Iterable

from rest_framework.exceptions import ValidationError

from src.certification.certifier import SamplerConfig, scaling_fit
from src.certification.reports import ScalingCell, ScalingReport
from src.networks.serializers import flatten_errors

from .compiler import StageBuildError, build
from .families import builtin_family, get_family

logger = logging.getLogger(__name__)


def _fits(report: ScalingReport):
    built = [cell for cell in report.cells if cell.params is not None]
    for eps in sorted({cell.eps for cell in built}, reverse=True):
        row = [cell for cell in built if cell.eps == eps]
        if len({cell.d for cell in row}) >= 3:
            report.fits.append(scaling_fit([c.d for c in row], [c.params for c in row], axis="d", fixed=eps))
    for d in sorted({cell.d for cell in built}):
        column = [cell for cell in built if cell.d == d]
        if len({cell.eps for cell in column}) >= 3:
            report.fits.append(
                scaling_fit([1.0 / c.eps for c in column], [c.params for c in column], axis="inv_eps", fixed=d)
            )


def run_scaling(
    family: str,
    dims: Iterable[int],
    eps_values: Iterable[float],
    config: SamplerConfig | None = None,
    **options,
) -> ScalingReport:
    """
    Build and certify `family` at every (d, eps). A failing cell is recorded
    with its error and the run moves on.
    """
    config = config or SamplerConfig.from_settings()
    info = get_family(family)
    eps_values = list(eps_values)
    report = ScalingReport(family=family, norm=info.p, seed=config.seed)
    for d in dims:
        try:
            spec = builtin_family(family, d, **options)
        except ValidationError as exc:
            message = "; ".join(flatten_errors(exc.detail))
            report.cells.extend(ScalingCell(d=d, eps=eps, error=message) for eps in eps_values)
            logger.warning("%s(%d) rejected: %s", family, d, message)
            continue
        for eps in eps_values:
            cell = ScalingCell(d=d, eps=eps)
            try:
                result = build(spec, eps, config)
            except StageBuildError as exc:
                cell.error = str(exc)
                logger.warning("%s(%d) at eps=%g failed: %s", family, d, eps, exc)
            else:
                cell.params = result.net.param_count
                cell.sup_error = result.report.sup_error_estimate
                cell.passed = result.report.passed
                logger.info("%s(%d) at eps=%g: %d params, sup error %.3g",
                            family, d, eps, cell.params, cell.sup_error)
            report.cells.append(cell)
    _fits(report)
    return report
