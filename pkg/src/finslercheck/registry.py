"""Registry of every pointwise check the engine can run.

Each entry names the check by its stable identifier, carries the
hypothesis tags under which it is meaningful, the context it needs
(base space, changed space, or hypersurface) and its default
tolerances.  Scenario files select entries by identifier or tag.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

__all__ = ["RegistryEntry", "REGISTRY", "list_registry", "resolve_selection", "UnknownEquationError"]


class UnknownEquationError(KeyError):
    pass


@dataclass(frozen=True)
class RegistryEntry:
    id: str
    tags: tuple[str, ...]
    context: str  # base | changed | hypersurface
    description: str
    tol_rel: float = 1e-9
    tol_abs: float | None = None
    field_mode_only: bool = False  # needs fiber shifts, so no constrained slots


_E = RegistryEntry

_ENTRIES = [
    # base-space invariants
    _E("euler", ("NONE",), "base", "l.y = L, g(y,y) = L^2, h.y = 0, C.y = 0", 1e-8),
    _E("metricity", ("NONE",), "base", "horizontal derivative of g vanishes; fiber derivative is 2C", 1e-8),
    _E("homog", ("NONE",), "base", "g is 0-homogeneous in the fiber", 1e-10),
    _E("ginv", ("NONE",), "base", "inverse metric consistency", 1e-10),
    _E("deflection", ("NONE",), "base", "connection transvections: F.y = nonlinear, F.y.y = 2 spray", 1e-9),
    _E("3.5", ("NONE",), "base", "third fiber derivative of L via Cartan tensor and angular metric", 1e-9),
    # changed-space identities: closed forms vs jets
    _E("3.1", ("H12",), "changed", "starred second fiber derivative of the metric function", 1e-9),
    _E("3.2", ("H12",), "changed", "starred third fiber derivative of the metric function", 1e-9),
    _E("3.3", ("H12",), "changed", "starred normalized supporting element", 1e-9),
    _E("3.4", ("H12",), "changed", "starred metric tensor", 1e-9),
    _E("3.6", ("H12",), "changed", "starred Cartan tensor", 1e-9),
    _E("3.7", ("H12",), "changed", "starred inverse metric times starred metric is the identity", 1e-9),
    _E("3.8", ("HFULL",), "changed", "starred Cartan connection = base + difference tensor", 1e-8),
    _E("3.9", ("HFULL",), "changed", "starred nonlinear connection = base + transvected difference", 1e-8),
    _E("3.10", ("HFULL",), "changed", "starred spray = base + fully transvected difference", 1e-8),
    _E("3.11", ("HFULL",), "changed", "starred Berwald coefficients via fiber derivative of the difference", 1e-4, field_mode_only=True),
    _E("L3.5", ("PARALLEL",), "changed", "parallel b kills the difference tensor and both connections agree", 1e-8),
    _E("4.28", ("LANDSBERG",), "changed", "on a Landsberg base the transvected derivative condition holds", 1e-7),
    # hypersurface identities
    _E("2.5", ("NONE",), "hypersurface", "projection factor orthonormality", 1e-9),
    _E("2.6", ("NONE",), "hypersurface", "completeness of tangent plus normal projectors", 1e-9),
    _E("2.9", ("NONE",), "hypersurface", "second fundamental transvections", 1e-9),
    _E("2.11", ("NONE",), "hypersurface", "relative derivatives of the normal (finite-difference check)", 1e-7, field_mode_only=False),
    _E("4.3", ("TANGENT",), "hypersurface", "starred projection-factor orthonormality", 1e-9),
    _E("4.4", ("NONE",), "hypersurface", "lowered supporting element annihilates the normal", 1e-9),
    _E("4.5", ("H12",), "hypersurface", "starred metric on the normal direction", 1e-9),
    _E("4.6", ("H12",), "hypersurface", "starred metric mixing tangent and normal directions", 1e-9),
    _E("4.8", ("TANGENT",), "hypersurface", "closed-form starred normal (contravariant)", 1e-8),
    _E("4.9", ("TANGENT",), "hypersurface", "closed-form starred normal (covariant)", 1e-8),
    _E("4.10", ("TANGENT",), "hypersurface", "m annihilates the normal", 1e-10),
    _E("4.11", ("NONE",), "hypersurface", "angular metric mixing tangent and normal vanishes", 1e-9),
    _E("4.12", ("TANGENT",), "hypersurface", "starred Cartan transvection scaling", 1e-9),
    _E("4.13", ("TANGENT",), "hypersurface", "second fundamental v-tensor scaling", 1e-8),
    _E("4.14", ("TANGENT",), "hypersurface", "starred normal curvature with difference correction", 1e-8),
    _E("4.15", ("TANGENT",), "hypersurface", "normal transvection of the spray difference", 1e-8),
    _E("4.18", ("TANGENT",), "hypersurface", "derivative of tangency along the hypersurface", 1e-8),
    _E("4.19", ("TANGENT", "GRADIENT", "FIRSTKIND"), "hypersurface", "transvected covariant slots annihilate the normal", 1e-9),
    _E("4.20", ("TANGENT", "GRADIENT", "FIRSTKIND"), "hypersurface", "difference covector annihilates the normal", 1e-9),
    _E("4.21", ("TANGENT", "GRADIENT", "FIRSTKIND", "HFULL"), "hypersurface", "b-transvected aux tensor annihilates the normal", 1e-9),
    _E("4.22", ("TANGENT", "GRADIENT", "FIRSTKIND", "HFULL"), "hypersurface", "aux tensor mixing normal and tangent vanishes", 1e-9),
    _E("4.23", ("TANGENT", "GRADIENT", "FIRSTKIND", "HFULL"), "hypersurface", "lowered difference tensor mixing normal and tangent vanishes", 1e-9),
    _E("4.24", ("TANGENT", "GRADIENT", "HFULL"), "hypersurface", "cubic transvection of the spray difference", 1e-8),
    _E("4.25", ("TANGENT", "GRADIENT", "FIRSTKIND", "HFULL"), "hypersurface", "angular-projected difference transvection vanishes", 1e-9),
    _E("4.26", ("TANGENT", "GRADIENT", "FIRSTKIND", "HFULL"), "hypersurface", "b- and normal-transvected difference vanishes", 1e-9),
    _E("4.27", ("TANGENT", "GRADIENT", "FIRSTKIND", "HFULL"), "hypersurface", "cubic aux transvection reduces to its leading block", 1e-8),
    _E("4.29", ("COND428", "GRADIENT"), "hypersurface", "covariant slope of beta annihilates the Cartan tensor", 1e-9),
    _E("4.30", ("TANGENT", "GRADIENT", "FIRSTKIND", "COND428", "HFULL"), "hypersurface", "first cubic transvection law", 1e-8),
    _E("4.31", ("TANGENT", "GRADIENT", "FIRSTKIND", "COND428", "HFULL"), "hypersurface", "second cubic transvection law", 1e-8),
    _E("4.32", ("TANGENT", "GRADIENT", "FIRSTKIND", "COND428", "HFULL"), "hypersurface", "third cubic transvection law", 1e-8),
    _E("4.33", ("TANGENT", "GRADIENT", "FIRSTKIND", "COND428", "HFULL"), "hypersurface", "combined cubic transvection law", 1e-8),
    _E("4.34", ("TANGENT", "GRADIENT", "FIRSTKIND", "COND428", "HFULL"), "hypersurface", "normal-tangent transvection of the difference tensor", 1e-8),
    _E("4.35", ("TANGENT",), "hypersurface", "starred second fundamental h-tensor relation", 1e-8),
    _E("4.37", ("PARALLEL", "TANGENT"), "hypersurface", "parallel b leaves the Cartan connection unchanged", 1e-8),
    _E("T4.1a", ("TANGENT",), "hypersurface", "tangent b: solved starred normal parallel to the base normal", 1e-10, 1e-10),
    _E("T4.1b", ("NONE",), "hypersurface", "non-tangent b: starred normal bounded away from the base normal", 1e-12, 0.0),
    _E("T4.5", ("PARALLEL", "TANGENT"), "hypersurface", "hyperplane kind preserved under the change with parallel b", 0.5, 0.5),
]

REGISTRY: dict[str, RegistryEntry] = {e.id: e for e in _ENTRIES}


def _sort_key(eid: str):
    m = re.match(r"([LT]?)(\d+)\.(\d+)([a-z]?)$", eid)
    if m:
        pre, major, minor, suffix = m.groups()
        return (1, int(major), int(minor), {"": 0, "L": 1, "T": 2}[pre], suffix)
    return (0, 0, 0, 0, eid)


def list_registry() -> list[RegistryEntry]:
    return [REGISTRY[k] for k in sorted(REGISTRY, key=_sort_key)]


def resolve_selection(ids_or_tags: list[str]) -> list[str]:
    """Expand a mixed list of equation ids and hypothesis tags."""
    out: list[str] = []
    for token in ids_or_tags:
        if token in REGISTRY:
            out.append(token)
        else:
            matched = [e.id for e in list_registry() if token in e.tags]
            if not matched:
                raise UnknownEquationError(
                    f"unknown equation id or tag {token!r}; run the list command for the registry"
                )
            out.extend(matched)
    seen = set()
    uniq = []
    for eid in out:
        if eid not in seen:
            seen.add(eid)
            uniq.append(eid)
    return uniq
