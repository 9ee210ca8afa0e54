"""Scenario configuration and execution.

A scenario file (YAML) names a metric, an h-vector, optionally a
hypersurface, a sample plan and a selection of registry checks.  Running
it evaluates every selected check at every sampled point and aggregates
the worst residual per check into a run report.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .fields import CovectorField, MatrixField, Poly
from .finsler import BaseGeometry, FinslerError, MetricSpec, fundamental_tensors
from .jets import MultiIndex
from .hfield import ConstrainedSlots, HVectorSpec, SlotPlan, draw_slots, evaluate
from .hypersurface import (
    HypersurfaceSpec,
    classify,
    classify_starred,
    condition_slots_for_chain,
    induced_geometry,
    landsberg_condition_check,
    normal_h_derivative_fd,
    normal_v_derivative_fd,
    starred_geometry,
    starred_second_fundamental,
    theorem_chain,
)
from .jets import PointState
from .kropina import (
    ChangedPoint,
    ChangedSpace,
    lemma35_forward,
    verify_connection_difference,
    verify_section3,
)
from .registry import REGISTRY, UnknownEquationError, resolve_selection
from .reporting import IdentityReport, make_report, worst

__all__ = ["Scenario", "ScenarioError", "load_scenario", "parse_scenario", "run_scenario", "RunResult"]


class ScenarioError(ValueError):
    pass


@dataclass
class Scenario:
    name: str
    metric: MetricSpec
    hvector: HVectorSpec | None
    hypersurface: HypersurfaceSpec | None
    regime: tuple[str, ...]
    ids: tuple[str, ...]
    points: int = 20
    seed: int = 0
    draws: int = 1
    x_box: tuple[float, float] = (-0.8, 0.8)
    y_box: tuple[float, float] = (-1.5, 1.5)
    min_y: float = 0.1
    min_beta: float = 0.1
    u_box: tuple[float, float] = (-0.5, 0.5)
    v_box: tuple[float, float] = (0.3, 1.2)
    grid: int = 4
    tangent: bool = True
    tolerances: dict[str, dict] = field(default_factory=dict)


@dataclass
class RunResult:
    scenario: str
    seed: int
    regime: tuple[str, ...]
    reports: list[IdentityReport]
    counts: dict[str, int]
    environment: dict[str, Any]

    @property
    def all_passed(self) -> bool:
        return self.counts.get("fail", 0) == 0


# -- config parsing ---------------------------------------------------------


def _parse_poly(node, n: int) -> Poly:
    if isinstance(node, (int, float)):
        return Poly.constant(n, float(node))
    if not isinstance(node, dict):
        raise ScenarioError(f"polynomial spec must be a number or mapping, got {node!r}")
    if "const" in node:
        return Poly.constant(n, float(node["const"]))
    if "terms" in node:
        terms = []
        for t in node["terms"]:
            if len(t) != 2 or len(t[1]) != n:
                raise ScenarioError(f"bad polynomial term {t!r}; want [coeff, [{n} powers]]")
            terms.append((float(t[0]), tuple(int(k) for k in t[1])))
        return Poly.make(n, terms)
    raise ScenarioError(f"polynomial spec needs 'const' or 'terms', got keys {list(node)}")


def _parse_matrix_field(node, n: int) -> MatrixField:
    if node in (None, "identity"):
        return MatrixField.identity(n)
    if "diag" in node:
        polys = [_parse_poly(p, n) for p in node["diag"]]
        if len(polys) != n:
            raise ScenarioError(f"diag needs {n} entries, got {len(polys)}")
        return MatrixField.diagonal(polys)
    if "entries" in node:
        rows = [[_parse_poly(p, n) for p in row] for row in node["entries"]]
        return MatrixField(tuple(tuple(r) for r in rows))
    raise ScenarioError("matrix field needs 'identity', 'diag' or 'entries'")


def _parse_covector_field(node, n: int) -> CovectorField:
    if isinstance(node, list):
        return CovectorField.constant([float(v) for v in node])
    if isinstance(node, dict) and "components" in node:
        comps = [_parse_poly(p, n) for p in node["components"]]
        if len(comps) != n:
            raise ScenarioError(f"covector needs {n} components, got {len(comps)}")
        return CovectorField(tuple(comps))
    if isinstance(node, dict) and "gradient_quadratic" in node:
        q = np.asarray(node["gradient_quadratic"], dtype=float)
        lin = node.get("gradient_linear")
        return CovectorField.gradient_of_quadratic(q, lin)
    raise ScenarioError("covector field needs a list of constants or 'components'")


def _parse_metric(node) -> MetricSpec:
    if not isinstance(node, dict) or "family" not in node:
        raise ScenarioError("metric block needs a 'family'")
    fam = node["family"]
    n = int(node.get("dimension", 3))
    if fam == "euclidean":
        return MetricSpec.euclidean(n)
    if fam == "riemannian":
        return MetricSpec.riemannian(n, _parse_matrix_field(node.get("a"), n))
    if fam in ("randers", "kropina"):
        a = _parse_matrix_field(node.get("a"), n)
        if "d" not in node:
            raise ScenarioError(f"{fam} metric needs a covector 'd'")
        d = _parse_covector_field(node["d"], n)
        ctor = MetricSpec.randers if fam == "randers" else MetricSpec.kropina
        return ctor(n, a, d)
    raise ScenarioError(f"unknown metric family {fam!r}")


def _parse_hvector(node, n: int) -> HVectorSpec | None:
    if node is None:
        return None
    mode = node.get("mode")
    if mode not in ("explicit", "function_of_x", "constrained"):
        raise ScenarioError(f"unknown h-vector mode {mode!r}")
    rho = float(node.get("rho", 0.0))
    if mode in ("explicit", "function_of_x"):
        if "c" not in node:
            raise ScenarioError(f"{mode} h-vector needs a covector 'c'")
        return HVectorSpec(mode, rho=rho, c=_parse_covector_field(node["c"], n))
    plan_node = node.get("plan", {}) or {}
    plan = SlotPlan(
        value=plan_node.get("value", "random"),
        value_data=tuple(plan_node["value_data"]) if "value_data" in plan_node else (
            plan_node.get("value_scale")
        ),
        gradient=bool(plan_node.get("gradient", False)),
        parallel=bool(plan_node.get("parallel", False)),
        cond428=bool(plan_node.get("cond428", False)),
        rho_k_random=bool(plan_node.get("rho_k_random", False)),
        scale=float(plan_node.get("scale", 0.4)),
    )
    return HVectorSpec(mode, rho=rho, plan=plan)


def _parse_hypersurface(node, n: int) -> HypersurfaceSpec | None:
    if node is None:
        return None
    kind = node.get("kind")
    if kind in ("coordinate_hyperplane", "hyperplane"):
        return HypersurfaceSpec.coordinate_hyperplane(
            n, axis=int(node.get("axis", n - 1)), level=float(node.get("level", 0.0))
        )
    if kind == "sphere":
        return HypersurfaceSpec.sphere(n, float(node.get("radius", 1.0)))
    if kind == "graph":
        return HypersurfaceSpec.graph(_parse_poly(node.get("height"), n - 1))
    raise ScenarioError(f"unknown hypersurface kind {kind!r}")


def parse_scenario(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a mapping")
    name = doc.get("name")
    if not name:
        raise ScenarioError("scenario needs a 'name'")
    metric = _parse_metric(doc.get("metric"))
    n = metric.dimension
    hvec = _parse_hvector(doc.get("hvector"), n)
    hs = _parse_hypersurface(doc.get("hypersurface"), n)
    regime = tuple(doc.get("regime", []) or [])
    select = doc.get("select", {}) or {}
    tokens = list(select.get("ids", [])) + list(select.get("tags", []))
    if not tokens:
        raise ScenarioError("scenario selects no checks ('select.ids' or 'select.tags')")
    try:
        ids = tuple(resolve_selection(tokens))
    except UnknownEquationError as exc:
        raise ScenarioError(str(exc)) from exc
    needs_changed = any(REGISTRY[i].context == "changed" for i in ids)
    needs_hyper = any(REGISTRY[i].context == "hypersurface" for i in ids)
    starred_hyper = needs_hyper and any(
        REGISTRY[i].context == "hypersurface" and i not in ("2.5", "2.6", "2.9", "2.11", "4.4", "4.11")
        for i in ids
    )
    if needs_changed and hvec is None:
        raise ScenarioError("selected changed-space checks but no hvector block given")
    if needs_hyper and hs is None:
        raise ScenarioError("selected hypersurface checks but no hypersurface block given")
    if starred_hyper and hvec is None:
        raise ScenarioError("selected starred hypersurface checks but no hvector block given")
    if "PARALLEL" in regime and hvec is not None and hvec.mode == "constrained" and not hvec.plan.parallel:
        raise ScenarioError("PARALLEL regime requires parallel slot plan (E = F = 0)")
    if hvec is not None and hvec.mode == "constrained":
        bad = [i for i in ids if REGISTRY[i].field_mode_only]
        if bad:
            raise ScenarioError(
                f"checks {bad} take fiber-shifted evaluations and need a field-mode h-vector"
            )
    sample = doc.get("sample", {}) or {}
    hyper_node = doc.get("hypersurface", {}) or {}
    tolerances = {str(k): dict(v) for k, v in (doc.get("tolerances", {}) or {}).items()}
    for k in tolerances:
        if k not in REGISTRY:
            raise ScenarioError(f"tolerance override for unknown equation id {k!r}")
    return Scenario(
        name=str(name),
        metric=metric,
        hvector=hvec,
        hypersurface=hs,
        regime=regime,
        ids=ids,
        points=int(sample.get("points", 20)),
        seed=int(sample.get("seed", 0)),
        draws=int(sample.get("draws", 1)),
        x_box=tuple(sample.get("x_box", (-0.8, 0.8))),
        y_box=tuple(sample.get("y_box", (-1.5, 1.5))),
        min_y=float(sample.get("min_y", 0.1)),
        min_beta=float(sample.get("min_beta", 0.1)),
        u_box=tuple(sample.get("u_box", (-0.5, 0.5))),
        v_box=tuple(sample.get("v_box", (0.3, 1.2))),
        grid=int(sample.get("grid", 4)),
        tangent=bool(hyper_node.get("tangent", True)) if hyper_node else True,
        tolerances=tolerances,
    )


def load_scenario(path: str | Path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    return parse_scenario(doc)


# -- execution --------------------------------------------------------------


def _beta_estimate(scn: Scenario):
    h = scn.hvector
    if h is None:
        return None
    if h.mode in ("explicit", "function_of_x"):

        def f(p: PointState) -> float:
            c = np.array(h.c(list(p.x)), dtype=float)
            # crude lower bound: the l-part contributes rho * L with L >= |y| scale
            return float(c @ p.y)

        return f
    return None


def _tols(scn: Scenario, eid: str) -> tuple[float, float]:
    e = REGISTRY[eid]
    node = scn.tolerances.get(eid, {})
    tr = float(node.get("rel", e.tol_rel))
    ta = float(node.get("abs", e.tol_abs if e.tol_abs is not None else tr))
    return tr, ta


def _clamp(rep: IdentityReport, scn: Scenario) -> IdentityReport:
    """Re-verdict a report under the scenario's tolerance overrides."""
    tr, ta = _tols(scn, rep.equation_id)
    rep.tol_rel = tr
    rep.tol_abs = ta
    rep.verdict = "pass" if (rep.residual_rel <= tr or rep.residual_inf <= ta) else "fail"
    return rep


def _sample_points(scn: Scenario, rng: np.random.Generator) -> list[PointState]:
    m = scn.metric
    beta_of = _beta_estimate(scn)
    n = m.dimension
    out: list[PointState] = []
    tries = 0
    while len(out) < scn.points and tries < 200 * scn.points + 400:
        tries += 1
        x = rng.uniform(*scn.x_box, size=n)
        y = rng.uniform(*scn.y_box, size=n)
        if np.linalg.norm(y) < scn.min_y:
            continue
        p = PointState(x, y)
        if beta_of is not None and abs(beta_of(p)) < scn.min_beta:
            continue
        try:
            ft = BaseGeometry(m, p).tensors
        except (FinslerError, ArithmeticError):
            continue
        if np.min(np.linalg.eigvalsh(ft.g)) <= 0.0:
            continue
        out.append(p)
    if len(out) < scn.points:
        raise ScenarioError(
            f"could not sample {scn.points} admissible points for scenario {scn.name!r}"
        )
    return out


def _base_reports(scn: Scenario, pts: list[PointState], ids: list[str]) -> list[IdentityReport]:
    from .kropina import base_identity_35

    m = scn.metric
    per_id: dict[str, list[IdentityReport]] = {i: [] for i in ids}
    for p in pts:
        geom = BaseGeometry(m, p)
        ft = geom.tensors
        n = m.dimension
        pd = {"x": p.x.tolist(), "y": p.y.tolist()}
        if "euler" in per_id:
            scale = max(1.0, ft.L)
            res = max(
                abs(ft.l @ p.y - ft.L) / scale,
                abs(p.y @ ft.g @ p.y - ft.L**2) / scale**2,
                float(np.max(np.abs(ft.h @ p.y))) / scale,
                float(np.max(np.abs(np.einsum("ijk,k->ij", ft.C, p.y)))),
            )
            tr, ta = _tols(scn, "euler")
            per_id["euler"].append(
                make_report("euler", ("NONE",), res, None, tol_rel=tr, tol_abs=ta, sample_point=pd, seed=scn.seed)
            )
        if "metricity" in per_id:
            dgdx = 0.5 * np.array(
                [
                    [
                        [geom.L2_jet.partial(MultiIndex.mixed(n, [k], [i, j])) for j in range(n)]
                        for i in range(n)
                    ]
                    for k in range(n)
                ]
            )
            delta_g = dgdx - 2.0 * np.einsum("rk,ijr->kij", ft.nonlinear, ft.C)
            hcov_g = (
                delta_g
                - np.einsum("rj,rik->kij", ft.g, ft.cartan)
                - np.einsum("ir,rjk->kij", ft.g, ft.cartan)
            )
            dgdy = np.array(
                [
                    [
                        [
                            0.5 * geom.L2_jet.partial(MultiIndex.mixed(n, [], [i, j, k]))
                            for k in range(n)
                        ]
                        for j in range(n)
                    ]
                    for i in range(n)
                ]
            )
            res = max(float(np.max(np.abs(hcov_g))), float(np.max(np.abs(dgdy - 2 * ft.C))))
            tr, ta = _tols(scn, "metricity")
            per_id["metricity"].append(
                make_report("metricity", ("NONE",), res, None, tol_rel=tr, tol_abs=ta, sample_point=pd, seed=scn.seed)
            )
        if "homog" in per_id:
            # positive 1-homogeneity of L and 0-homogeneity of g
            res = 0.0
            gscale = max(1.0, float(np.max(np.abs(ft.g))))
            for lam in (0.5, 2.0, 7.0):
                ft2 = fundamental_tensors(m, PointState(p.x, lam * p.y))
                res = max(res, float(np.max(np.abs(ft2.g - ft.g))) / gscale)
                res = max(res, abs(ft2.L - lam * ft.L) / max(1.0, lam * ft.L))
            tr, ta = _tols(scn, "homog")
            per_id["homog"].append(
                make_report("homog", ("NONE",), res, None, tol_rel=tr, tol_abs=ta, sample_point=pd, seed=scn.seed)
            )
        if "ginv" in per_id:
            res = float(np.max(np.abs(ft.g_inv @ ft.g - np.eye(n))))
            tr, ta = _tols(scn, "ginv")
            per_id["ginv"].append(
                make_report("ginv", ("NONE",), res, None, tol_rel=tr, tol_abs=ta, sample_point=pd, seed=scn.seed)
            )
        if "deflection" in per_id:
            scale = max(1.0, float(np.max(np.abs(ft.nonlinear))))
            r1 = float(np.max(np.abs(np.einsum("ijk,j->ik", ft.cartan, p.y) - ft.nonlinear))) / scale
            r2 = float(
                np.max(np.abs(np.einsum("ijk,j,k->i", ft.cartan, p.y, p.y) - 2 * ft.spray))
            ) / max(1.0, float(np.max(np.abs(ft.spray))))
            r3 = float(np.max(np.abs(np.einsum("ijk,k->ij", ft.berwald, p.y) - ft.nonlinear))) / scale
            tr, ta = _tols(scn, "deflection")
            per_id["deflection"].append(
                make_report("deflection", ("NONE",), max(r1, r2, r3), None, tol_rel=tr, tol_abs=ta, sample_point=pd, seed=scn.seed)
            )
        if "3.5" in per_id:
            lhs, rhs = base_identity_35(geom)
            tr, ta = _tols(scn, "3.5")
            per_id["3.5"].append(
                make_report("3.5", ("NONE",), lhs, rhs, tol_rel=tr, tol_abs=ta, sample_point=pd, seed=scn.seed)
            )
    return [worst(v) for v in per_id.values() if v]


def _healthy(cp: ChangedPoint, tau_max: float = 25.0) -> bool:
    """Reject configurations too close to a singular locus for clean
    floating-point verdicts (the identities still hold there, but the
    conditioning of the starred tensors degrades as powers of tau)."""
    sc = cp.hdata.scalars
    rho = cp.hdata.rho
    return (
        abs(sc.tau) <= tau_max
        and abs(sc.Q) >= 0.05
        and abs(2.0 - rho * sc.tau) >= 0.1
        and abs(2.0 * sc.b2 * sc.tau - rho) >= 0.05
    )


def _changed_reports(scn: Scenario, pts: list[PointState], ids: list[str], rng: np.random.Generator) -> list[IdentityReport]:
    from .hfield import HVectorError

    cs = ChangedSpace(scn.metric, scn.hvector)
    constrained = scn.hvector.mode == "constrained"
    draws = scn.draws if constrained else 1
    sec3 = [i for i in ids if i in ("3.1", "3.2", "3.3", "3.4", "3.5", "3.6", "3.7")]
    conn = [i for i in ids if i in ("3.8", "3.9", "3.10", "3.11")]
    per_id: dict[str, list[IdentityReport]] = {i: [] for i in ids}
    tags = scn.regime if scn.regime else ("NONE",)
    for p in pts:
        geom = BaseGeometry(scn.metric, p)
        for k in range(draws):
            cp = None
            for _ in range(40):
                slots = draw_slots(scn.hvector.plan, geom, rng) if constrained else None
                try:
                    cand = ChangedPoint(cs, geom=geom, slots=slots)
                except (FinslerError, ArithmeticError, HVectorError):
                    if not constrained:
                        break
                    continue
                if not constrained or _healthy(cand):
                    cp = cand
                    break
            if cp is None:
                raise ScenarioError(
                    f"changed-space evaluation failed at x={p.x.tolist()}, y={p.y.tolist()}"
                )
            if sec3:
                for rep in verify_section3(cp, tags, seed=scn.seed, ids=sec3):
                    if rep.equation_id in per_id:
                        rep.extras["draw"] = k
                        per_id[rep.equation_id].append(_clamp(rep, scn))
            if conn:
                for rep in verify_connection_difference(cp, tags, seed=scn.seed, ids=conn):
                    rep.extras["draw"] = k
                    per_id[rep.equation_id].append(_clamp(rep, scn))
            if "L3.5" in per_id:
                per_id["L3.5"].append(_clamp(lemma35_forward(cp, tags, seed=scn.seed), scn))
            if "4.28" in per_id:
                per_id["4.28"].append(_clamp(landsberg_condition_check(cp, tags=tags, seed=scn.seed), scn))
    out = []
    for eid, reps in per_id.items():
        if not reps:
            continue
        w = worst(reps)
        if draws > 1:
            vals = [r.residual_rel for r in reps]
            w.extras["draw_residual_min"] = min(vals)
            w.extras["draw_residual_max"] = max(vals)
            w.extras["draw_spread"] = max(vals) - min(vals)
        out.append(w)
    return out


def _sample_surface(scn: Scenario, rng: np.random.Generator):
    """Admissible (u, v) samples: full-rank embedding, admissible ambient
    point, and a healthy h-vector at the (projected) evaluation."""
    hs = scn.hypersurface
    m = scn.metric
    out = []
    tries = 0
    ns = m.dimension - 1
    while len(out) < scn.grid and tries < 300 * scn.grid + 500:
        tries += 1
        u = rng.uniform(*scn.u_box, size=ns)
        v = rng.uniform(*scn.v_box, size=ns)
        try:
            ig = induced_geometry(hs, m, u, v)
        except (FinslerError, ArithmeticError):
            continue
        if scn.hvector is not None:
            try:
                tn = (ig.N_up, ig.N_low) if scn.tangent else None
                if scn.hvector.mode == "constrained":
                    probe_slots = draw_slots(scn.hvector.plan, ig.geom, np.random.default_rng(scn.seed))
                    data = evaluate(scn.hvector, ig.geom, slots=probe_slots, tangent_normal=tn)
                else:
                    data = evaluate(scn.hvector, ig.geom, tangent_normal=tn)
            except (FinslerError, ArithmeticError):
                continue
            if abs(data.scalars.beta) < scn.min_beta:
                continue
            if 2.0 * data.scalars.tau**2 - scn.hvector.rho * data.scalars.tau**3 <= 0.05:
                continue
        out.append((u, v))
    if len(out) < scn.grid:
        raise ScenarioError(f"could not sample {scn.grid} admissible surface points")
    return out


def _hyper_reports(scn: Scenario, ids: list[str], rng: np.random.Generator) -> list[IdentityReport]:
    hs = scn.hypersurface
    m = scn.metric
    grid = _sample_surface(scn, rng)
    per_id: dict[str, list[IdentityReport]] = {i: [] for i in ids}
    tags = scn.regime if scn.regime else ("NONE",)
    base_only = {"2.5", "2.6", "2.9", "2.11", "4.4", "4.11"}
    needs_starred = [i for i in ids if i not in base_only and not i.startswith("T4")]
    sff_ids = [i for i in ids if i in ("4.13", "4.14", "4.15", "4.35")]
    chain_ids = [
        i
        for i in needs_starred
        if i not in sff_ids and i not in ("T4.5",)
    ]
    want_grad = "GRADIENT" in scn.regime
    want_cond = "COND428" in scn.regime
    want_transport = "TANGENT" in scn.regime and scn.hvector is not None and scn.hvector.mode == "constrained"

    for u, v in grid:
        ig = induced_geometry(hs, m, u, v)
        pd = {"u": ig.u.tolist(), "v": ig.v.tolist()}

        def add(eid, lhs, rhs=None, extras=None):
            tr, ta = _tols(scn, eid)
            per_id[eid].append(
                make_report(eid, tags, lhs, rhs, tol_rel=tr, tol_abs=ta, sample_point=pd, seed=scn.seed, extras=extras)
            )

        nsur = m.dimension - 1
        if "2.5" in per_id:
            res = max(
                float(np.max(np.abs(ig.Binv @ ig.B - np.eye(nsur)))),
                float(np.max(np.abs(ig.B.T @ ig.N_low))),
                float(np.max(np.abs(ig.Binv @ ig.N_up))),
                abs(float(ig.N_up @ ig.N_low) - 1.0),
            )
            add("2.5", res)
        if "2.6" in per_id:
            add("2.6", ig.B @ ig.Binv + np.outer(ig.N_up, ig.N_low), np.eye(m.dimension))
        if "2.9" in per_id:
            res = max(
                float(np.max(np.abs(ig.v @ ig.H_ab - ig.H_a))),
                float(np.max(np.abs(ig.H_ab @ ig.v - (ig.H_a + ig.M_a * ig.H_0)))),
            )
            add("2.9", res)
        if "2.11" in per_id:
            lhs_h = normal_h_derivative_fd(hs, m, ig)
            rhs_h = -np.einsum("ab,aj,ij->ib", ig.H_ab, ig.Binv, ig.geom.tensors.g_inv)
            lhs_v = normal_v_derivative_fd(hs, m, ig)
            rhs_v = -np.einsum("ab,aj,ij->ib", ig.M_ab, ig.Binv, ig.geom.tensors.g_inv)
            add("2.11", np.concatenate([lhs_h.ravel(), lhs_v.ravel()]), np.concatenate([rhs_h.ravel(), rhs_v.ravel()]))
        if "4.4" in per_id:
            add("4.4", float(abs((ig.geom.tensors.g @ ig.y) @ ig.N_up)))
        if "4.11" in per_id:
            add("4.11", np.einsum("ij,ia,j->a", ig.geom.tensors.h, ig.B, ig.N_up))

        if needs_starred or any(i.startswith("T4.1") for i in ids):
            slots = None
            if scn.hvector is not None and scn.hvector.mode == "constrained":
                slots = draw_slots(scn.hvector.plan, ig.geom, rng)
                if want_grad or want_cond or want_transport:
                    slots = condition_slots_for_chain(
                        slots,
                        ig,
                        rho=scn.hvector.rho,
                        want_gradient=want_grad,
                        want_cond428=want_cond,
                        want_transport=want_transport,
                    )
            cs = ChangedSpace(m, scn.hvector)
            si = starred_geometry(
                hs,
                cs,
                ig,
                slots=slots,
                project_tangent=scn.tangent,
                require_closed_form=scn.tangent,
            )
            if chain_ids:
                for rep in theorem_chain(si, tags, seed=scn.seed, ids=chain_ids):
                    rep.sample_point = pd
                    per_id[rep.equation_id].append(_clamp(rep, scn))
            if sff_ids:
                for rep in starred_second_fundamental(si, tags=tags, seed=scn.seed):
                    if rep.equation_id in per_id:
                        rep.sample_point = pd
                        per_id[rep.equation_id].append(_clamp(rep, scn))
            if "T4.1a" in per_id:
                add("T4.1a", 1.0 - si.cosine, extras={"cosine": si.cosine, "tangency": si.tangency})
            if "T4.1b" in per_id:
                boosted = ConstrainedSlots(
                    b_value=si.cp.hdata.b + 0.4 * ig.N_low,
                    E=si.cp.hdata.E,
                    F=si.cp.hdata.F,
                    rho_k=si.cp.hdata.rho_k,
                )
                cs_b = ChangedSpace(m, HVectorSpec("constrained", rho=scn.hvector.rho))
                si_b = starred_geometry(
                    hs, cs_b, ig, slots=boosted, project_tangent=False, require_closed_form=False
                )
                gap = max(0.0, si_b.cosine - (1.0 - 1e-4))
                add(
                    "T4.1b",
                    gap,
                    extras={"cosine": si_b.cosine, "tangency": si_b.tangency},
                )

    if "T4.5" in per_id:
        kb = classify(hs, m, grid)
        slots_for = None
        if scn.hvector is not None and scn.hvector.mode == "constrained":
            plan = scn.hvector.plan

            def slots_for(ig2, plan=plan):
                return draw_slots(plan, ig2.geom, np.random.default_rng(scn.seed))

        ks = classify_starred(hs, ChangedSpace(m, scn.hvector), grid, slots_for=slots_for)
        tr, ta = _tols(scn, "T4.5")
        per_id["T4.5"].append(
            make_report(
                "T4.5",
                tags,
                0.0 if kb.kind == ks.kind else 1.0,
                None,
                tol_rel=tr,
                tol_abs=ta,
                seed=scn.seed,
                extras={
                    "base_kind": kb.kind,
                    "starred_kind": ks.kind,
                    "base_witnesses": kb.witnesses,
                    "starred_witnesses": ks.witnesses,
                },
            )
        )
    return [worst(v) for v in per_id.values() if v]


def run_scenario(scn: Scenario, seed: int | None = None) -> RunResult:
    seed = scn.seed if seed is None else seed
    scn.seed = seed
    rng = np.random.default_rng(seed)
    base_ids = [i for i in scn.ids if REGISTRY[i].context == "base"]
    changed_ids = [i for i in scn.ids if REGISTRY[i].context == "changed"]
    hyper_ids = [i for i in scn.ids if REGISTRY[i].context == "hypersurface"]
    reports: list[IdentityReport] = []
    if base_ids or changed_ids:
        pts = _sample_points(scn, rng)
        if base_ids:
            reports.extend(_base_reports(scn, pts, base_ids))
        if changed_ids:
            reports.extend(_changed_reports(scn, pts, changed_ids, rng))
    if hyper_ids:
        reports.extend(_hyper_reports(scn, hyper_ids, rng))
    from .registry import _sort_key

    reports.sort(key=lambda r: _sort_key(r.equation_id))
    counts = {
        "pass": sum(1 for r in reports if r.passed),
        "fail": sum(1 for r in reports if not r.passed),
        "total": len(reports),
    }
    env = {
        "caps": [1, 3],
        "points": scn.points,
        "grid": scn.grid,
        "draws": scn.draws,
        "regime": list(scn.regime),
    }
    return RunResult(
        scenario=scn.name,
        seed=seed,
        regime=scn.regime,
        reports=reports,
        counts=counts,
        environment=env,
    )
