"""The changed Finsler space *L = L^2 / (b_i y^i) and its tensors.

Every starred tensor is computed twice: once from closed forms in
terms of base tensors and the derived scalars of b, and once
from jets of *L itself.  The difference tensors D (the gap between the
two Cartan connections) have closed forms in terms of the covariant
data (E, F, beta_j, rho_k); the verification functions compare them
against independently jet-computed starred connections.

Array conventions follow finsler.py; additionally
    D00[i]       = D^i_00
    D0[i, j]     = D^i_0j
    D3[a, i, k]  = D^a_ik
    Gmat[i, j]   = G_ij     (auxiliary, not the nonlinear connection)
    Gvec[j]      = G_j
    Hcub[j,i,k]  = H_jik
    Hmat[i, k]   = H_ik
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .finsler import (
    BaseGeometry,
    DegenerateMetricError,
    MetricSpec,
    cartan_from_values,
    spray_from_l2jet,
)
from .hfield import (
    ConstrainedSlots,
    HVectorData,
    HVectorSpec,
    SingularCoefficientError,
    evaluate,
)
from .jets import MultiIndex, PointState, jet_space
from .reporting import IdentityReport, make_report

__all__ = [
    "ChangedPoint",
    "ChangedSpace",
    "DifferenceTensors",
    "StarredTensors",
    "difference_tensors",
    "starred_closed_forms",
    "starred_jet_forms",
    "verify_connection_difference",
    "verify_section3",
]

COEF_GUARD = 1e-10


@dataclass(frozen=True)
class ChangedSpace:
    base: MetricSpec
    hvec: HVectorSpec


@dataclass
class StarredTensors:
    """Tensors of the changed space; source is 'closed' or 'jets'."""

    source: str
    L: float
    l: np.ndarray
    L_ij: np.ndarray
    L_ijk: np.ndarray
    g: np.ndarray
    C: np.ndarray
    g_inv: np.ndarray


@dataclass
class DifferenceTensors:
    D00: np.ndarray
    D0: np.ndarray
    D3: np.ndarray
    Gmat: np.ndarray
    Gvec: np.ndarray
    Hcub: np.ndarray
    Hmat: np.ndarray
    A: float
    D3_aux: np.ndarray | None = None


def _guard(value: float, name: str) -> float:
    if abs(value) < COEF_GUARD:
        raise SingularCoefficientError(f"coefficient denominator {name} = {value:.3g} vanishes")
    return value


class ChangedPoint:
    """Base geometry, h-vector data and starred-space jets at one point."""

    def __init__(
        self,
        cs: ChangedSpace,
        p: PointState | None = None,
        slots: ConstrainedSlots | None = None,
        rng: np.random.Generator | None = None,
        caps: tuple[int, int] = (1, 3),
        geom: BaseGeometry | None = None,
        tangent_normal: tuple[np.ndarray, np.ndarray] | None = None,
    ):
        self.space = cs
        if geom is None:
            if p is None:
                raise ValueError("need a point or a prebuilt geometry")
            geom = BaseGeometry(cs.base, p, caps)
        self.geom = geom
        self.hdata: HVectorData = evaluate(
            cs.hvec, self.geom, slots=slots, rng=rng, tangent_normal=tangent_normal
        )
        n = self.geom.n
        p = self.geom.point
        sub = jet_space(n, self.geom.caps[0], self.geom.caps[1])
        yj = [sub.var_y(i, p.y[i]) for i in range(n)]
        beta_jet = sub.zero()
        for i in range(n):
            beta_jet = beta_jet + self.hdata.b_jets[i] * yj[i]
        self.beta_jet = beta_jet
        self.Lstar_jet = self.geom.L2_jet.restrict(sub) / beta_jet
        self.Lstar2_jet = self.Lstar_jet * self.Lstar_jet
        self._jet_forms: StarredTensors | None = None
        self._closed_forms: StarredTensors | None = None
        self._diff: DifferenceTensors | None = None
        self._starred_conn: dict | None = None

    @property
    def point(self) -> PointState:
        return self.geom.point

    # -- starred tensors -----------------------------------------------

    def jet_forms(self) -> StarredTensors:
        if self._jet_forms is not None:
            return self._jet_forms
        n = self.geom.n
        Ls = self.Lstar_jet
        L2s = self.Lstar2_jet

        def part(jet, ys):
            return jet.partial(MultiIndex.mixed(n, ys=ys))

        L = Ls.value
        l = np.array([part(Ls, [i]) for i in range(n)])
        L_ij = np.array([[part(Ls, [i, j]) for j in range(n)] for i in range(n)])
        L_ijk = np.array(
            [[[part(Ls, [i, j, k]) for k in range(n)] for j in range(n)] for i in range(n)]
        )
        g = 0.5 * np.array([[part(L2s, [i, j]) for j in range(n)] for i in range(n)])
        C = 0.25 * np.array(
            [[[part(L2s, [i, j, k]) for k in range(n)] for j in range(n)] for i in range(n)]
        )
        det = float(np.linalg.det(g))
        if abs(det) < 1e-12:
            raise DegenerateMetricError("starred metric degenerate at sampled point")
        self._jet_forms = StarredTensors("jets", L, l, L_ij, L_ijk, g, C, np.linalg.inv(g))
        return self._jet_forms

    def closed_forms(self) -> StarredTensors:
        if self._closed_forms is not None:
            return self._closed_forms
        ft = self.geom.tensors
        sc = self.hdata.scalars
        rho = self.hdata.rho
        n = self.geom.n
        L, l, h = ft.L, ft.l, ft.h
        tau, beta, m, b = sc.tau, sc.beta, sc.m, self.hdata.b
        L_ij = ft.L_ij
        one = _guard(2.0 - rho * tau, "2 - rho tau")
        coef = tau * one  # 2 tau - rho tau^2
        coef2 = tau * tau * one  # 2 tau^2 - rho tau^3

        mm = np.outer(m, m)
        Lstar_ij = coef * L_ij + (2.0 * tau**2 / beta) * mm

        mL = (
            np.einsum("i,jk->ijk", m, L_ij)
            + np.einsum("j,ik->ijk", m, L_ij)
            + np.einsum("k,ij->ijk", m, L_ij)
        )
        mml = (
            np.einsum("i,j,k->ijk", m, m, l)
            + np.einsum("j,k,i->ijk", m, m, l)
            + np.einsum("k,i,j->ijk", m, m, l)
        )
        mmm = np.einsum("i,j,k->ijk", m, m, m)
        Lstar_ijk = (
            coef * ft.L_ijk
            + (2.0 * tau / beta) * (rho * tau - 1.0) * mL
            - (2.0 * tau**2 / (L * beta)) * mml
            - (6.0 * tau**2 / beta**2) * mmm
        )

        lstar = 2.0 * tau * l - tau**2 * b

        bb = np.outer(b, b)
        lb = np.outer(l, b) + np.outer(b, l)
        ll = np.outer(l, l)
        gstar = coef2 * ft.g + 3.0 * tau**4 * bb - 4.0 * tau**3 * lb + (
            4.0 * tau**2 + rho * tau**3
        ) * ll

        hm = (
            np.einsum("ij,k->ijk", h, m)
            + np.einsum("jk,i->ijk", h, m)
            + np.einsum("ki,j->ijk", h, m)
        )
        # fiber-differentiating the metric tensor forces the tau^4/beta
        # coefficient on the cubic m-term (jet-verified)
        Cstar = (
            coef2 * ft.C
            - (tau**2 / (2.0 * beta)) * (4.0 - 3.0 * rho * tau) * hm
            - (6.0 * tau**4 / beta) * mmm
        )

        b2 = sc.b2
        b_up = sc.b_up
        l_up = self.geom.point.y / L
        den = _guard(2.0 * b2 * tau - rho, "2 b^2 tau - rho")
        _guard(coef2, "2 tau^2 - rho tau^3")
        num_ll = 3.0 * rho * b2 * tau**3 - rho**2 * tau**2 - 4.0 * b2 * tau**2 - 2.0 * rho * tau + 8.0
        gstar_inv = (1.0 / coef2) * (
            ft.g_inv
            - (2.0 * tau / den) * np.outer(b_up, b_up)
            + ((4.0 - rho * tau) / den) * (np.outer(l_up, b_up) + np.outer(b_up, l_up))
            - (num_ll / (tau * den)) * np.outer(l_up, l_up)
        )

        self._closed_forms = StarredTensors(
            "closed", tau * L, lstar, Lstar_ij, Lstar_ijk, gstar, Cstar, gstar_inv
        )
        return self._closed_forms

    # -- starred connections (jet route) --------------------------------

    def starred_connections(self) -> dict:
        """Spray, nonlinear connection and Cartan h-connection of the
        changed space, computed from jets of *L^2 by the same construction
        as the base space."""
        if self._starred_conn is not None:
            return self._starred_conn
        n = self.geom.n
        y = self.point.y
        st = self.jet_forms()
        spray_jets = spray_from_l2jet(self.Lstar2_jet, y)
        spray = np.array([sj.value for sj in spray_jets])
        nonlinear = np.array(
            [[sj.partial(MultiIndex.mixed(n, ys=[j])) for j in range(n)] for sj in spray_jets]
        )
        dgdx = 0.5 * np.array(
            [
                [
                    [self.Lstar2_jet.partial(MultiIndex.mixed(n, [k], [i, j])) for j in range(n)]
                    for i in range(n)
                ]
                for k in range(n)
            ]
        )
        cartan = cartan_from_values(st.g_inv, dgdx, st.C, nonlinear)
        self._starred_conn = {"spray": spray, "nonlinear": nonlinear, "cartan": cartan}
        return self._starred_conn

    # -- difference tensors ---------------------------------------------

    def difference(self) -> DifferenceTensors:
        if self._diff is not None:
            return self._diff
        ft = self.geom.tensors
        sc = self.hdata.scalars
        rho = self.hdata.rho
        rho_k = self.hdata.rho_k
        E, F = self.hdata.E, self.hdata.F
        n = self.geom.n
        y = self.point.y
        L = ft.L
        tau, beta, m, b = sc.tau, sc.beta, sc.m, self.hdata.b
        m_up, b_up = sc.m_up, sc.b_up
        l_up = y / L
        beta_j, beta_0, A, Q = sc.beta_j, sc.beta_0, sc.A, sc.Q
        L_ij, L3 = ft.L_ij, ft.L_ijk
        g_inv = ft.g_inv

        one = _guard(2.0 - rho * tau, "2 - rho tau")
        _guard(Q, "2 b^2/beta - rho/L")
        coef = tau * one  # 2 tau - rho tau^2

        E00 = float(y @ E @ y)
        E0 = E @ y
        F0 = F @ y
        Fup0 = g_inv @ F0  # F^i_0

        D00 = (
            l_up * tau * (A - E00)
            - (2.0 * tau**2 / one) * A * m_up
            + (2.0 * L * tau / one) * (beta_0 * m_up / beta - Fup0)
        )

        # cyclic auxiliary: CYC[i,j,r] = sum_cyc m_i ((rho tau - 1) L_jr - (tau/beta) m_j b_r)
        W1 = (rho * tau - 1.0)
        CYC = (
            W1 * (
                np.einsum("i,jr->ijr", m, L_ij)
                + np.einsum("j,ri->ijr", m, L_ij)
                + np.einsum("r,ij->ijr", m, L_ij)
            )
            - (tau / beta) * (
                np.einsum("i,j,r->ijr", m, m, b)
                + np.einsum("j,r,i->ijr", m, m, b)
                + np.einsum("r,i,j->ijr", m, m, b)
            )
        )

        rho_0 = float(rho_k @ y)
        Wmat = W1 * L_ij - (3.0 * tau / beta) * np.outer(m, m)
        # The antisymmetric m/beta pair alone breaks the y-transvection
        # consistency of D^i_0j; the symmetric partner with the second-index
        # transvection b_{j|0} (projected off l) is required as well.
        b_bar0 = (E + F) @ y  # b_{i|k} y^k
        v = b_bar0 - (beta_0 / L) * ft.l
        Gmat = (
            (tau**2 / beta) * (np.outer(m, beta_j) - np.outer(beta_j, m))
            + (tau**2 / beta) * (np.outer(m, v) + np.outer(v, m))
            - tau**2 * F
            - 0.5 * coef * np.einsum("ijr,r->ij", L3, D00)
            - 0.5 * tau**2 * rho_0 * L_ij
            - (tau / beta) * np.einsum("ijr,r->ij", CYC, D00)
            + (tau / beta) * beta_0 * Wmat
        )

        Gvec = tau**2 * (F0 - E0)  # G_j = tau^2 (F_j0 - E_j0)

        G_beta = b_up @ Gmat  # G_{beta j} = G_ij b^i
        Gup = g_inv @ Gmat  # G^i_j = g^ik G_kj
        D0 = (
            np.outer(l_up, (G_beta / Q + Gvec) / tau)
            - (2.0 / one) * np.outer(m_up, G_beta) / Q
            + (L / coef) * Gup
        )

        t1 = np.einsum("ijr,rk->jik", L3, D0)
        t2 = np.einsum("jkr,ri->jik", L3, D0)
        t3 = np.einsum("kir,rj->jik", L3, D0)
        g1 = 0.5 * (rho * tau**2 - 2.0 * tau) * (t1 + t2 - t3)
        g2 = -(tau / beta) * np.einsum("ijr,rk->jik", CYC, D0)
        g3 = -(tau / beta) * np.einsum("jkr,ri->jik", CYC, D0)
        g4 = (tau / beta) * np.einsum("kir,rj->jik", CYC, D0)
        g5 = -0.5 * tau**2 * (
            np.einsum("k,ij->jik", rho_k, L_ij)
            + np.einsum("i,jk->jik", rho_k, L_ij)
            - np.einsum("j,ki->jik", rho_k, L_ij)
        )
        g6 = (tau / beta) * (
            np.einsum("k,ij->jik", beta_j, Wmat)
            + np.einsum("i,jk->jik", beta_j, Wmat)
            - np.einsum("j,ki->jik", beta_j, Wmat)
        )
        Hcub = g1 + g2 + g3 + g4 + g5 + g6

        Hmat = (
            (tau**2 / beta) * (np.outer(m, beta_j) + np.outer(beta_j, m))
            - tau**2 * E
            - 0.5 * (Gmat + Gmat.T)
        )

        H_beta = np.einsum("jik,j->ik", Hcub, b_up)  # H_{beta ik}
        Hup = np.einsum("jm,mik->jik", g_inv, Hcub)  # H^j_ik
        D3_aux = (
            np.einsum("j,ik->jik", l_up, (H_beta / Q + Hmat) / tau)
            - (2.0 / one) * np.einsum("j,ik->jik", m_up, H_beta) / Q
            + (L / coef) * Hup
        )

        # D^i_jk from metric compatibility of both connections: with
        # M_ijk = *g_{ij|k} - 2 *C_ijr D^r_0k (base-connection bars), the
        # Christoffel process gives
        #   D^i_jk = 1/2 *g^{ia} (M_ajk + M_akj - M_jka).
        # Pointwise this needs only slot calculus: g, l are h-parallel,
        # b_{i|k} = T_ik, tau_{|k} = -tau beta_k / beta, rho_{|k} = rho_k.
        T = E + F
        gs = self.closed_forms()
        l = ft.l
        dtau = -tau * beta_j / beta
        dcoef2 = (4.0 * tau - 3.0 * rho * tau**2) * dtau - tau**3 * rho_k
        d3t4 = 12.0 * tau**3 * dtau
        d4t3 = 12.0 * tau**2 * dtau
        dq = (8.0 * tau + 3.0 * rho * tau**2) * dtau + tau**3 * rho_k
        gstar_bar = (
            np.einsum("k,ij->ijk", dcoef2, ft.g)
            + np.einsum("k,i,j->ijk", d3t4, b, b)
            + 3.0 * tau**4 * (np.einsum("ik,j->ijk", T, b) + np.einsum("i,jk->ijk", b, T))
            - np.einsum("k,i,j->ijk", d4t3, l, b)
            - np.einsum("k,i,j->ijk", d4t3, b, l)
            - 4.0 * tau**3 * (np.einsum("i,jk->ijk", l, T) + np.einsum("ik,j->ijk", T, l))
            + np.einsum("k,i,j->ijk", dq, l, l)
        )
        Msys = gstar_bar - 2.0 * np.einsum("ijr,rk->ijk", gs.C, D0)
        D3 = 0.5 * np.einsum(
            "ia,ajk->ijk",
            gs.g_inv,
            Msys + np.transpose(Msys, (0, 2, 1)) - np.transpose(Msys, (2, 0, 1)),
        )

        self._diff = DifferenceTensors(
            D00=D00,
            D0=D0,
            D3=D3,
            Gmat=Gmat,
            Gvec=Gvec,
            Hcub=Hcub,
            Hmat=Hmat,
            A=A,
            D3_aux=D3_aux,
        )
        return self._diff

    # -- finite differences over the fiber (field modes only) -----------

    def can_shift(self) -> bool:
        return self.space.hvec.mode in ("explicit", "function_of_x")

    def _at_shifted_y(self, dy: np.ndarray) -> "ChangedPoint":
        if not self.can_shift():
            raise ValueError("fiber shifts need a field-mode h-vector (not constrained)")
        p = PointState(self.point.x, self.point.y + dy)
        return ChangedPoint(self.space, p, caps=self.geom.caps)

    def fd_fiber(self, extract, step_scale: float = 1e-5):
        """Central difference over y of a per-point quantity.

        extract: ChangedPoint -> ndarray; returns d(extract)/dy^h stacked
        on a trailing axis h.
        """
        n = self.geom.n
        h = step_scale * max(1.0, float(np.linalg.norm(self.point.y)))
        cols = []
        for hh in range(n):
            dy = np.zeros(n)
            dy[hh] = h
            plus = extract(self._at_shifted_y(dy))
            minus = extract(self._at_shifted_y(-dy))
            cols.append((plus - minus) / (2.0 * h))
        return np.stack(cols, axis=-1)


# -- public operations ------------------------------------------------------


def starred_closed_forms(cp: ChangedPoint) -> StarredTensors:
    return cp.closed_forms()


def starred_jet_forms(cp: ChangedPoint) -> StarredTensors:
    return cp.jet_forms()


def difference_tensors(cp: ChangedPoint) -> DifferenceTensors:
    return cp.difference()


def _point_dict(p: PointState) -> dict:
    return {"x": p.x.tolist(), "y": p.y.tolist()}


def base_identity_35(geom: BaseGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of the pure base-space identity for L_ijk."""
    ft = geom.tensors
    hl = (
        np.einsum("ij,k->ijk", ft.h, ft.l)
        + np.einsum("jk,i->ijk", ft.h, ft.l)
        + np.einsum("ki,j->ijk", ft.h, ft.l)
    )
    rhs = (2.0 / ft.L) * ft.C - hl / ft.L**2
    return ft.L_ijk, rhs


def verify_section3(
    cp: ChangedPoint,
    tags: tuple[str, ...],
    tol_rel: float = 1e-9,
    seed: int | None = None,
    ids: Sequence[str] | None = None,
) -> list[IdentityReport]:
    """Reports for the closed-form vs jet identities of the starred tensors."""
    want = set(ids) if ids is not None else None
    cf = cp.closed_forms()
    jf = cp.jet_forms()
    pd = _point_dict(cp.point)
    out = []

    def rep(eq, lhs, rhs, tr=tol_rel, extras=None):
        if want is None or eq in want:
            out.append(
                make_report(eq, tags, lhs, rhs, tol_rel=tr, sample_point=pd, seed=seed, extras=extras)
            )

    rep("3.1", cf.L_ij, jf.L_ij)
    rep("3.2", cf.L_ijk, jf.L_ijk)
    rep("3.3", cf.l, jf.l, extras={"lstar_dot_y": float(cf.l @ cp.point.y), "Lstar": jf.L})
    rep("3.4", cf.g, jf.g)
    lhs35, rhs35 = base_identity_35(cp.geom)
    rep("3.5", lhs35, rhs35)
    rep("3.6", cf.C, jf.C)
    rep("3.7", cf.g_inv @ cf.g, np.eye(cp.geom.n))
    return out


def verify_connection_difference(
    cp: ChangedPoint,
    tags: tuple[str, ...],
    tol_rel: float = 1e-8,
    tol_fd: float = 1e-4,
    seed: int | None = None,
    ids: Sequence[str] | None = None,
) -> list[IdentityReport]:
    """Reports for the connection-difference identities.

    The starred connections come from jets of *L^2; the difference
    tensors from their closed forms.  The fiber derivative of
    D^i_0k (and the starred Berwald coefficients) are finite differences
    over the fiber, so that check carries the looser tolerance.
    """
    want = set(ids) if ids is not None else None
    ft = cp.geom.tensors
    conn = cp.starred_connections()
    diff = cp.difference()
    pd = _point_dict(cp.point)
    out = []

    def wanted(eq):
        return want is None or eq in want

    if wanted("3.8"):
        aux_gap = (
            float(np.max(np.abs(diff.D3_aux - diff.D3)))
            if diff.D3_aux is not None
            else None
        )
        out.append(
            make_report(
                "3.8",
                tags,
                conn["cartan"],
                ft.cartan + diff.D3,
                tol_rel=tol_rel,
                sample_point=pd,
                seed=seed,
                extras={"aux_route_gap": aux_gap},
            )
        )
    if wanted("3.9"):
        out.append(
            make_report(
                "3.9",
                tags,
                conn["nonlinear"],
                ft.nonlinear + diff.D0,
                tol_rel=tol_rel,
                sample_point=pd,
                seed=seed,
            )
        )
    if wanted("3.10"):
        out.append(
            make_report(
                "3.10",
                tags,
                2.0 * conn["spray"],
                2.0 * ft.spray + diff.D00,
                tol_rel=tol_rel,
                sample_point=pd,
                seed=seed,
                extras={"transvection_D0_y_vs_D00": float(np.max(np.abs(diff.D0 @ cp.point.y - diff.D00)))},
            )
        )
    if wanted("3.11") and cp.can_shift():
        # *G^i_kh = G^i_kh + d(D^i_0k)/dy^h, both non-exact pieces by
        # central differences over the fiber
        star_berwald = cp.fd_fiber(lambda q: q.starred_connections()["nonlinear"])
        dD0 = cp.fd_fiber(lambda q: q.difference().D0)
        out.append(
            make_report(
                "3.11",
                tags,
                star_berwald,
                ft.berwald + dD0,
                tol_rel=tol_fd,
                sample_point=pd,
                seed=seed,
            )
        )
    return out


def lemma35_forward(
    cp: ChangedPoint,
    tags: tuple[str, ...] = ("PARALLEL",),
    tol_abs: float = 1e-10,
    tol_conn: float = 1e-8,
    seed: int | None = None,
) -> IdentityReport:
    """Parallel b (E = F = 0, rho_k = 0) forces every difference tensor to
    vanish and the two Cartan connections to coincide."""
    diff = cp.difference()
    conn = cp.starred_connections()
    ft = cp.geom.tensors
    d_norm = max(
        float(np.max(np.abs(diff.D00))),
        float(np.max(np.abs(diff.D0))),
        float(np.max(np.abs(diff.D3))),
    )
    conn_inf, conn_rel = 0.0, 0.0
    fdiff = conn["cartan"] - ft.cartan
    conn_inf = float(np.max(np.abs(fdiff)))
    scale = max(1.0, float(np.max(np.abs(ft.cartan))))
    verdict = "pass" if (d_norm <= tol_abs and conn_inf / scale <= tol_conn) else "fail"
    return IdentityReport(
        equation_id="L3.5",
        hypothesis_tags=tuple(tags),
        residual_inf=max(d_norm, conn_inf),
        residual_rel=max(d_norm, conn_inf / scale),
        tol_rel=tol_conn,
        tol_abs=tol_conn,
        verdict=verdict,
        sample_point=_point_dict(cp.point),
        seed=seed,
        extras={"D_norm": d_norm, "cartan_gap": conn_inf},
    )
