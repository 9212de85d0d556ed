"""
Built-in staged families, one spec document per dimension d.

Each builder returns the JSON-ready document, so a family can be exported,
edited and fed back through parse_spec like any user spec.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from src.networks.serializers import NORM_CHOICES

from .serializers import parse_spec
from .specs import FunctionSpec, SpecMode, StageKind


def _cube(a: float, b: float, dim: int) -> dict:
    return {"a": float(a), "b": float(b), "dim": dim}


def _block(dim: int, expr: str, lipschitz: float) -> dict:
    return {"dim": dim, "expr": expr, "lipschitz": float(lipschitz)}


def _ceil3(x: float) -> float:
    return math.ceil(x * 1000.0) / 1000.0


def tower_document(d: int) -> dict:
    """x1^(x2^(...^xd)) on [1/e, 1]^d: each stage folds the last two coordinates."""
    low = math.exp(-1)
    stages = []
    for dim in range(d, 1, -1):
        blocks = [_block(1, "x1", 1.0)] * (dim - 2) + [_block(2, "pow(x1,x2)", 1.0)]
        stages.append({"kind": StageKind.LIPSCHITZ_PARALLEL, "domain": _cube(low, 1.0, dim), "blocks": blocks})
    return {"name": f"tower({d})", "mode": SpecMode.THEOREM1, "norm": "1", "stages": stages}


def nested_log_bounds(d: int, a: float = 2.0) -> list[float]:
    """Upper domain ends in application order: a, a + ln a, ... (d values)."""
    bounds = [float(a)]
    for _ in range(d - 1):
        bounds.append(bounds[-1] + math.log(bounds[-1]))
    return bounds


def nested_log_document(d: int, a: float = 2.0) -> dict:
    """ln(x1 + ln(x2 + ... + ln(xd))) on [1, a]^d."""
    if not a > 1:
        raise ValueError(f"nested_log needs a > 1, got {a}")
    bounds = nested_log_bounds(d, a)
    stages = []
    for s, dim in enumerate(range(d, 1, -1)):
        blocks = [_block(1, "x1", 1.0)] * (dim - 2) + [_block(2, "x1 + ln(x2)", 1.0)]
        stages.append({"kind": StageKind.LIPSCHITZ_PARALLEL, "domain": _cube(1.0, bounds[s], dim), "blocks": blocks})
    stages.append({
        "kind": StageKind.LIPSCHITZ_PARALLEL,
        "domain": _cube(1.0, bounds[-1], 1),
        "blocks": [_block(1, "ln(x1)", 1.0)],
    })
    return {"name": f"nested_log({d})", "mode": SpecMode.THEOREM1, "norm": "1", "stages": stages}


def prodmax_tree_document(d: int, a: float = 0.125) -> dict:
    """
    (x1···xd) · max{x_(d+1..2d), (x_(2d+1)···x_3d) · max{...}} on [-a, a]^(d²):
    groups of d coordinates alternate between products (odd) and maxima
    (even); one stage per group, innermost group first.
    """
    if not 0 < a <= 0.125:
        raise ValueError(f"prodmax_tree needs a in (0, 1/8], got {a}")
    stages = []
    for group in range(d, 0, -1):
        lead = (group - 1) * d
        size = d if group == d else d + 1
        kind = StageKind.PRODUCT_PARALLEL if group % 2 else StageKind.MAX_PARALLEL
        stages.append({"kind": kind, "domain": _cube(-a, a, lead + size), "partition": [1] * lead + [size]})
    return {"name": f"prodmax_tree({d})", "mode": SpecMode.THEOREM1, "norm": "1", "stages": stages}


def powermax_document(d: int) -> dict:
    """max{x1^d, (x1 x2)^(d+1), ..., (x1···xd)^(2d-1)} on [-1, 1]^d."""
    blocks = [_block(1, f"pow(x1,{d + i})", d + i) for i in range(d)]
    return {
        "name": f"powermax({d})",
        "mode": SpecMode.THEOREM2,
        "norm": "inf",
        "c": 2,
        "d": d,
        "stages": [
            {"kind": StageKind.EXT_PROD, "domain": _cube(-1.0, 1.0, d)},
            {"kind": StageKind.LIPSCHITZ_PARALLEL, "domain": _cube(-1.0, 1.0, d), "blocks": blocks},
            {"kind": StageKind.MAX_PARALLEL, "domain": _cube(-1.0, 1.0, d), "partition": [d]},
        ],
    }


def _half_width(d: int, c: int, half_width: float | None) -> float:
    return float(half_width) if half_width is not None else float(c * d ** c)


def gauss_prod_document(d: int, c: int = 1, half_width: float | None = None) -> dict:
    """∏ exp(-i x_i²) on [-c d^c, c d^c]^d; block i is sqrt(2i/e)-Lipschitz."""
    h = _half_width(d, c, half_width)
    blocks = [_block(1, f"exp(-{i}*pow(x1,2))", _ceil3(math.sqrt(2.0 * i / math.e))) for i in range(1, d + 1)]
    return {
        "name": f"gauss_prod({d})",
        "mode": SpecMode.THEOREM2,
        "norm": "inf",
        "c": c,
        "d": d,
        "stages": [
            {"kind": StageKind.LIPSCHITZ_PARALLEL, "domain": _cube(-h, h, d), "blocks": blocks},
            {"kind": StageKind.PRODUCT_PARALLEL, "domain": _cube(0.0, 1.0, d), "partition": [d]},
        ],
    }


def cos_max_document(d: int, c: int = 1, half_width: float | None = None) -> dict:
    """max_l cos(l x_(3l-2) + l² x_(3l-1) + l³ x_(3l)) on [-c d^c, c d^c]^(3d)."""
    h = _half_width(d, c, half_width)
    blocks = [
        _block(3, f"cos({l}*x1 + {l * l}*x2 + {l ** 3}*x3)", l + l * l + l ** 3)
        for l in range(1, d + 1)  # noqa: E741
    ]
    return {
        "name": f"cos_max({d})",
        "mode": SpecMode.THEOREM2,
        "norm": "inf",
        # three-dimensional blocks need c >= 3
        "c": max(c, 3),
        "d": d,
        "stages": [
            {"kind": StageKind.LIPSCHITZ_PARALLEL, "domain": _cube(-h, h, 3 * d), "blocks": blocks},
            {"kind": StageKind.MAX_PARALLEL, "domain": _cube(-1.0, 1.0, d), "partition": [d]},
        ],
    }


@dataclass(frozen=True)
class Family:
    name: str
    description: str
    mode: str
    norm: str
    example: int
    builder: Callable[..., dict]
    options: dict = field(default_factory=dict)

    def document(self, d: int, **options) -> dict:
        unknown = set(options) - set(self.options)
        if unknown:
            raise ValueError(f"{self.name} takes options {sorted(self.options) or 'none'}, got {sorted(unknown)}")
        if d < 2:
            raise ValueError(f"{self.name} needs d >= 2, got {d}")
        merged = {**self.options, **{k: v for k, v in options.items() if v is not None}}
        return self.builder(d, **merged)

    @property
    def p(self) -> float:
        return NORM_CHOICES[self.norm]


FAMILIES: dict[str, Family] = {
    family.name: family
    for family in (
        Family("tower", "power towers x1^(x2^(...^xd)) on [1/e, 1]^d", SpecMode.THEOREM1, "1", 1, tower_document),
        Family("nested_log", "ln(x1 + ln(x2 + ... + ln(xd))) on [1, a]^d", SpecMode.THEOREM1, "1", 2,
               nested_log_document, {"a": 2.0}),
        Family("prodmax_tree", "alternating product/max tree on [-a, a]^(d²)", SpecMode.THEOREM1, "1", 3,
               prodmax_tree_document, {"a": 0.125}),
        Family("powermax", "max of powers of running products on [-1, 1]^d", SpecMode.THEOREM2, "inf", 4,
               powermax_document),
        Family("gauss_prod", "product of exp(-i x_i²) on [-c d^c, c d^c]^d", SpecMode.THEOREM2, "inf", 5,
               gauss_prod_document, {"c": 1, "half_width": None}),
        Family("cos_max", "max of cos(l y1 + l² y2 + l³ y3) on [-c d^c, c d^c]^(3d)", SpecMode.THEOREM2, "inf", 6,
               cos_max_document, {"c": 1, "half_width": None}),
    )
}


def get_family(name: str) -> Family:
    try:
        return FAMILIES[name]
    except KeyError:
        raise ValueError(f"unknown family {name!r}; choose one of {', '.join(FAMILIES)}") from None


def family_document(name: str, d: int, **options) -> dict:
    return get_family(name).document(d, **options)


def builtin_family(name: str, d: int, **options) -> FunctionSpec:
    return parse_spec(family_document(name, d, **options))
