import numpy as np
import pytest

from finslercheck.fields import CovectorField, MatrixField, Poly
from finslercheck.finsler import MetricSpec
from finslercheck.hfield import HVectorSpec, SlotPlan, draw_slots
from finslercheck.hypersurface import (
    HypersurfaceSpec,
    classify,
    classify_starred,
    condition_slots_for_chain,
    induced_geometry,
    landsberg_condition_check,
    normal_h_derivative_fd,
    normal_v_derivative_fd,
    relative_derivatives,
    second_fundamental,
    starred_geometry,
    starred_second_fundamental,
    theorem_chain,
)
from finslercheck.kropina import ChangedPoint, ChangedSpace

from conftest import make_randers, make_riemannian


EUC3 = MetricSpec.euclidean(3)
PLANE = HypersurfaceSpec.coordinate_hyperplane(3, axis=2)
SPHERE = HypersurfaceSpec.sphere(3, 2.0)
GRAPH = HypersurfaceSpec.graph(Poly.make(2, [(1.0, (1, 1))]))  # x3 = u1 u2

U0 = np.array([0.3, -0.2])
V0 = np.array([1.0, 0.6])
US = np.array([1.1, 0.7])
VS = np.array([0.8, 0.5])


def grid2(us, vs):
    return [(np.array(u), np.array(v)) for u in us for v in vs]


class TestInducedGeometry:
    def test_flat_hyperplane_euclidean(self):
        ig = induced_geometry(PLANE, EUC3, U0, V0)
        np.testing.assert_allclose(ig.N_up, [0.0, 0.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(ig.g_surf, np.eye(2), atol=1e-12)
        np.testing.assert_allclose(ig.H_ab, 0.0, atol=1e-12)
        np.testing.assert_allclose(ig.M_ab, 0.0, atol=1e-12)

    def test_orthonormality_and_completeness(self):
        for hs, u, v in [(PLANE, U0, V0), (SPHERE, US, VS), (GRAPH, U0, V0)]:
            ig = induced_geometry(hs, EUC3, u, v)
            n = 3
            assert np.max(np.abs(ig.Binv @ ig.B - np.eye(2))) <= 1e-9
            assert np.max(np.abs(ig.B.T @ ig.N_low)) <= 1e-9
            assert np.max(np.abs(ig.Binv @ ig.N_up)) <= 1e-9
            assert abs(ig.N_up @ ig.N_low - 1.0) <= 1e-9
            completeness = ig.B @ ig.Binv + np.outer(ig.N_up, ig.N_low) - np.eye(n)
            assert np.max(np.abs(completeness)) <= 1e-9
            # y_j N^j = 0
            assert abs((ig.geom.tensors.g @ ig.y) @ ig.N_up) <= 1e-9

    def test_sphere_second_fundamental_oracle(self):
        # classical result: H_ab = +/- g_ab / R depending on orientation
        ig = induced_geometry(SPHERE, EUC3, US, VS)
        R = 2.0
        sign = -1.0 if ig.N_up @ (ig.geom.point.x - 0.0) > 0 else 1.0
        np.testing.assert_allclose(ig.H_ab, sign * ig.g_surf / R, atol=1e-6)
        H_ab, H_a, M_ab, M_a = second_fundamental(ig)
        np.testing.assert_allclose(M_ab, 0.0, atol=1e-12)  # Riemannian ambient

    def test_graph_second_fundamental_oracle(self):
        # z = u1 u2 in euclidean space: II = Hess f / sqrt(1 + |grad f|^2)
        ig = induced_geometry(GRAPH, EUC3, U0, V0)
        grad = np.array([U0[1], U0[0]])
        hess = np.array([[0.0, 1.0], [1.0, 0.0]])
        ii = hess / np.sqrt(1.0 + grad @ grad)
        sign = np.sign(ig.N_up[2])
        np.testing.assert_allclose(ig.H_ab, sign * ii, atol=1e-6)

    def test_transvection_identities(self):
        ig = induced_geometry(SPHERE, EUC3, US, VS)
        assert np.max(np.abs(ig.v @ ig.H_ab - ig.H_a)) <= 1e-9
        assert np.max(np.abs(ig.H_ab @ ig.v - (ig.H_a + ig.M_a * ig.H_0))) <= 1e-9

    def test_normal_derivative_formulas_fd(self):
        # relative derivatives of the normal against the closed forms,
        # independent sides by finite differences over (u, v)
        m = make_randers(3, const_d=True)
        ig = induced_geometry(SPHERE, m, US, VS)
        lhs_h = normal_h_derivative_fd(SPHERE, m, ig)
        rhs_h = -np.einsum("ab,aj,ij->ib", ig.H_ab, ig.Binv, ig.geom.tensors.g_inv)
        assert np.max(np.abs(lhs_h - rhs_h)) <= 1e-8
        lhs_v = normal_v_derivative_fd(SPHERE, m, ig)
        rhs_v = -np.einsum("ab,aj,ij->ib", ig.M_ab, ig.Binv, ig.geom.tensors.g_inv)
        assert np.max(np.abs(lhs_v - rhs_v)) <= 1e-8

    def test_relative_derivatives_of_fields(self):
        # l-field is h-parallel, so its relative h-derivative vanishes
        ig = induced_geometry(PLANE, EUC3, U0, V0)
        rel_h, rel_v = relative_derivatives(ig.geom.l_jets(), ig)
        assert np.max(np.abs(rel_h)) <= 1e-10
        # constant covector on flat space: both vanish
        s = ig.geom.master
        const = [s.constant(0.3), s.constant(-0.1), s.constant(0.2)]
        rel_h, rel_v = relative_derivatives(const, ig)
        assert np.max(np.abs(rel_h)) <= 1e-12
        assert np.max(np.abs(rel_v)) <= 1e-12


class TestClassification:
    def test_flat_plane_third_kind(self):
        grid = grid2([U0, [0.1, 0.5]], [V0, [0.7, -0.4]])
        kind = classify(PLANE, EUC3, grid)
        assert kind.kind == "third"

    def test_sphere_not_a_hyperplane(self):
        grid = grid2([US], [VS, [0.6, 0.9]])
        kind = classify(SPHERE, EUC3, grid)
        assert kind.kind == "none"
        assert kind.witnesses["H_ab"] > 1e-3

    def test_flat_plane_in_curved_metric_not_a_hyperplane(self):
        # a coordinate plane is extrinsically curved once the ambient
        # Riemannian metric varies across it; the classical Christoffel
        # oracle gives the same second fundamental form
        from oracles import christoffel

        polys = [
            Poly.make(3, [(1.0, (0, 0, 0)), (0.5, (0, 0, 1))]),
            Poly.make(3, [(1.0, (0, 0, 0)), (0.2, (0, 0, 1))]),
            Poly.constant(3, 1.0),
        ]
        m = MetricSpec.riemannian(3, MatrixField.diagonal(polys))
        ig = induced_geometry(PLANE, m, U0, V0)
        gamma = christoffel(m.a.numpy_at, ig.geom.point.x)
        ii = np.einsum("i,ijk,ja,kb->ab", ig.N_low, gamma, ig.B, ig.B)
        np.testing.assert_allclose(ig.H_ab, ii, atol=1e-6)
        assert np.max(np.abs(ig.H_ab)) > 1e-3
        grid = grid2([U0, [0.5, 0.2]], [V0, [0.9, -0.6]])
        kind = classify(PLANE, m, grid)
        assert kind.kind == "none"
        assert kind.witnesses["M_ab"] <= 1e-10  # Riemannian ambient

    def test_kind_monotonicity(self):
        from finslercheck.hypersurface import _kind_from_witnesses

        # vanishing H_ab forces the first-kind witness too
        k = _kind_from_witnesses(wH_a=1.0, wH_ab=1e-12, wM_ab=1.0, tol=1e-8)
        assert k.kind == "second"
        k = _kind_from_witnesses(wH_a=1.0, wH_ab=1e-12, wM_ab=1e-12, tol=1e-8)
        assert k.kind == "third"
        k = _kind_from_witnesses(wH_a=1e-12, wH_ab=1.0, wM_ab=1e-12, tol=1e-8)
        assert k.kind == "first"

    def test_randers_flat_plane_second_kind(self):
        # flat a, constant d with a normal component: H vanishes but the
        # second fundamental v-tensor does not
        m = MetricSpec.randers(
            3, MatrixField.identity(3), CovectorField.constant([0.3, 0.0, 0.2])
        )
        grid = grid2([U0], [V0, [0.7, -0.4]])
        kind = classify(PLANE, m, grid)
        assert kind.kind == "second"
        assert kind.witnesses["M_ab"] > 1e-3


class TestStarredGeometry:
    def test_theorem41_tangent_and_non_tangent(self):
        ig = induced_geometry(SPHERE, EUC3, US, VS)
        c = 0.45 * ig.y / np.linalg.norm(ig.y)
        cs = ChangedSpace(EUC3, HVectorSpec("explicit", rho=0.0, c=CovectorField.constant(list(c))))
        si = starred_geometry(SPHERE, cs, ig)
        assert abs(si.tangency) <= 1e-12
        assert si.cosine >= 1.0 - 1e-10
        np.testing.assert_allclose(si.N_solved_up, si.N_closed_up, atol=1e-8)
        # non-tangent variant: normal component >= 0.1
        c2 = list(c + 0.4 * ig.N_low)
        cs2 = ChangedSpace(EUC3, HVectorSpec("explicit", rho=0.0, c=CovectorField.constant(c2)))
        si2 = starred_geometry(SPHERE, cs2, ig, project_tangent=False, require_closed_form=False)
        assert abs(si2.tangency) >= 0.1
        assert 1.0 - si2.cosine >= 1e-4

    def test_scaling_laws_explicit_sphere(self):
        ig = induced_geometry(SPHERE, EUC3, US, VS)
        c = 0.45 * ig.y / np.linalg.norm(ig.y)
        cs = ChangedSpace(EUC3, HVectorSpec("explicit", rho=0.2, c=CovectorField.constant(list(c))))
        si = starred_geometry(SPHERE, cs, ig)
        for r in starred_second_fundamental(si):
            assert r.residual_rel <= 1e-8, (r.equation_id, r.residual_rel)
        for r in theorem_chain(si, ("TANGENT", "H12"), ids=["4.3", "4.4", "4.5", "4.6", "4.8", "4.9", "4.10", "4.11", "4.12"]):
            assert r.residual_rel <= 1e-9, (r.equation_id, r.residual_rel)

    def test_tangency_violation_raises(self):
        from finslercheck.hypersurface import TangencyViolationError

        ig = induced_geometry(SPHERE, EUC3, US, VS)
        cs = ChangedSpace(
            EUC3, HVectorSpec("explicit", rho=0.0, c=CovectorField.constant([0.0, 0.0, 0.5]))
        )
        with pytest.raises(TangencyViolationError):
            starred_geometry(SPHERE, cs, ig, project_tangent=False, require_closed_form=True)


class TestTheoremChain:
    def chain_setup(self, seed=11):
        m = MetricSpec.randers(
            3, MatrixField.identity(3), CovectorField.constant([0.3, 0.0, 0.2])
        )
        hs = PLANE
        h = HVectorSpec("constrained", rho=0.0, plan=SlotPlan(value="proportional_y", gradient=True))
        cs = ChangedSpace(m, h)
        u = np.array([0.2, -0.3])
        v = np.array([1.0, 0.4])
        ig = induced_geometry(hs, m, u, v)
        slots0 = draw_slots(h.plan, ig.geom, np.random.default_rng(seed))
        slots = condition_slots_for_chain(slots0, ig, rho=0.0)
        si = starred_geometry(hs, cs, ig, slots=slots)
        return ig, si

    CHAIN_IDS = [
        "4.3", "4.4", "4.8", "4.9", "4.10", "4.11", "4.12", "4.18", "4.19",
        "4.20", "4.21", "4.22", "4.23", "4.24", "4.25", "4.26", "4.27",
        "4.29", "4.30", "4.31", "4.32", "4.33", "4.34",
    ]

    def test_full_chain_exact_regime(self):
        ig, si = self.chain_setup()
        assert np.max(np.abs(ig.M_ab)) > 1e-3  # nontrivial transvection laws
        tags = ("RHO0", "GRADIENT", "TANGENT", "FIRSTKIND", "COND428", "HFULL")
        reps = theorem_chain(si, tags, ids=self.CHAIN_IDS)
        assert len(reps) == len(self.CHAIN_IDS)
        for r in reps:
            assert r.residual_rel <= 1e-9, (r.equation_id, r.residual_rel)
        for r in starred_second_fundamental(si):
            assert r.residual_rel <= 1e-8, (r.equation_id, r.residual_rel)

    def test_chain_invariant_across_draws(self):
        vals = {}
        for seed in (3, 7, 21):
            _, si = self.chain_setup(seed)
            for r in theorem_chain(si, ("HFULL",), ids=["4.27", "4.33", "4.34"]):
                vals.setdefault(r.equation_id, []).append(r.residual_rel)
        for eq, vs in vals.items():
            assert max(vs) <= 1e-9, (eq, vs)

    def test_transport_constraint_on_sphere(self):
        # differentiating tangency along the surface must close (4.18)
        ig = induced_geometry(SPHERE, EUC3, US, VS)
        h = HVectorSpec("constrained", rho=0.0, plan=SlotPlan())
        cs = ChangedSpace(EUC3, h)
        slots0 = draw_slots(h.plan, ig.geom, np.random.default_rng(5))
        slots = condition_slots_for_chain(
            slots0, ig, rho=0.0, want_gradient=False, want_cond428=False
        )
        si = starred_geometry(SPHERE, cs, ig, slots=slots)
        reps = theorem_chain(si, ("TANGENT",), ids=["4.18"])
        assert reps[0].residual_rel <= 1e-10
        # nontrivial: both sides are individually nonzero
        assert abs(ig.H_0) > 1e-3


class TestTheorem45:
    def test_euclidean_third_kind_preserved(self):
        cs = ChangedSpace(
            EUC3, HVectorSpec("function_of_x", rho=0.0, c=CovectorField.constant([0.4, 0.2, 0.0]))
        )
        grid = grid2([U0, [0.5, 0.1]], [V0, [0.8, -0.5]])
        kb = classify(PLANE, EUC3, grid)
        ks = classify_starred(PLANE, cs, grid)
        assert kb.kind == "third"
        assert ks.kind == "third"
        ig = induced_geometry(PLANE, EUC3, U0, V0)
        si = starred_geometry(PLANE, cs, ig)
        reps = theorem_chain(si, ("PARALLEL", "TANGENT"), ids=["4.37"])
        assert reps[0].residual_rel <= 1e-8

    def test_randers_second_kind_preserved(self):
        # parallel tangent slots on a Berwald base: H_ab = 0 transfers, the
        # nonzero M_ab scales
        m = MetricSpec.randers(
            3, MatrixField.identity(3), CovectorField.constant([0.3, 0.0, 0.2])
        )
        h = HVectorSpec("constrained", rho=0.0, plan=SlotPlan(value="proportional_y", parallel=True))
        cs = ChangedSpace(m, h)

        def slots_for(ig):
            return draw_slots(h.plan, ig.geom, np.random.default_rng(2))

        grid = grid2([U0], [V0, [0.7, -0.4]])
        kb = classify(PLANE, m, grid)
        ks = classify_starred(PLANE, cs, grid, slots_for=slots_for)
        assert kb.kind == "second"
        assert ks.kind == "second"
        assert ks.witnesses["M_ab"] > 1e-4


class TestLandsbergCondition:
    def test_riemannian_trivial(self, rng):
        m = make_riemannian(3)
        cs = ChangedSpace(m, HVectorSpec("constrained", rho=0.0))
        from finslercheck.finsler import sample_admissible

        p = sample_admissible(m, rng, 1)[0]
        cp = ChangedPoint(cs, p, rng=np.random.default_rng(1))
        rep = landsberg_condition_check(cp)
        assert rep.passed
        assert rep.extras["is_landsberg"]

    def test_berwald_randers(self, rng):
        m = make_randers(3, const_d=True)
        c = CovectorField.constant([0.4, 0.1, -0.2])
        cs = ChangedSpace(m, HVectorSpec("explicit", rho=0.2, c=c))
        from finslercheck.finsler import sample_admissible

        p = sample_admissible(m, rng, 1)[0]
        cp = ChangedPoint(cs, p)
        rep = landsberg_condition_check(cp)
        assert rep.extras["is_landsberg"]
        assert rep.extras["condition_norm"] <= 1e-7
        assert rep.passed

    def test_non_landsberg_diagnostic(self, rng):
        m = make_randers(3, const_d=False)
        c = CovectorField.constant([0.4, 0.1, -0.2])
        cs = ChangedSpace(m, HVectorSpec("explicit", rho=0.2, c=c))
        from finslercheck.finsler import sample_admissible

        p = sample_admissible(m, rng, 1)[0]
        cp = ChangedPoint(cs, p)
        rep = landsberg_condition_check(cp)
        assert not rep.extras["is_landsberg"]
        assert rep.passed  # diagnostic only off Landsberg bases
