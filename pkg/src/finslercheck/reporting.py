"""Identity reports: the unit of output of every verification check."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

__all__ = ["IdentityReport", "make_report", "residual_pair", "worst"]

HYPOTHESIS_TAGS = (
    "NONE",
    "H12",
    "HFULL",
    "GRADIENT",
    "TANGENT",
    "COND428",
    "FIRSTKIND",
    "PARALLEL",
    "LANDSBERG",
    "RHO0",
)


@dataclass
class IdentityReport:
    equation_id: str
    hypothesis_tags: tuple[str, ...]
    residual_inf: float
    residual_rel: float
    tol_rel: float
    tol_abs: float
    verdict: str  # "pass" | "fail"
    sample_point: dict | None = None
    seed: int | None = None
    extras: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return {
            "equation_id": self.equation_id,
            "hypothesis_tags": list(self.hypothesis_tags),
            "residual_inf": self.residual_inf,
            "residual_rel": self.residual_rel,
            "tol_rel": self.tol_rel,
            "tol_abs": self.tol_abs,
            "verdict": self.verdict,
            "sample_point": self.sample_point,
            "seed": self.seed,
            "extras": {k: _jsonable(v) for k, v in sorted(self.extras.items())},
        }


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def residual_pair(lhs, rhs=None) -> tuple[float, float]:
    """(inf, relative) residual of lhs - rhs; rhs omitted means a zero check."""
    a = np.asarray(lhs, dtype=float)
    if rhs is None:
        diff = a
        scale = 1.0
    else:
        b = np.asarray(rhs, dtype=float)
        diff = a - b
        scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))), 1.0)
    inf = float(np.max(np.abs(diff))) if diff.size else 0.0
    return inf, inf / scale


def make_report(
    equation_id: str,
    tags: tuple[str, ...],
    lhs,
    rhs=None,
    tol_rel: float = 1e-9,
    tol_abs: float | None = None,
    sample_point: dict | None = None,
    seed: int | None = None,
    extras: dict | None = None,
) -> IdentityReport:
    inf, rel = residual_pair(lhs, rhs)
    if tol_abs is None:
        tol_abs = tol_rel
    verdict = "pass" if (rel <= tol_rel or inf <= tol_abs) else "fail"
    return IdentityReport(
        equation_id=equation_id,
        hypothesis_tags=tuple(tags),
        residual_inf=inf,
        residual_rel=rel,
        tol_rel=tol_rel,
        tol_abs=tol_abs,
        verdict=verdict,
        sample_point=sample_point,
        seed=seed,
        extras=extras or {},
    )


def worst(reports: list[IdentityReport]) -> IdentityReport | None:
    """The report with the largest relative residual (ties by inf)."""
    if not reports:
        return None
    return max(reports, key=lambda r: (r.residual_rel, r.residual_inf))
