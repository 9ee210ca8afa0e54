"""Fundamental tensors and connections of a Finsler space at a point.

Everything is derived from jets of the metric function L and of L**2,
never from family-specific closed forms; the known closed forms
(Riemannian g_ij = a_ij, Christoffel symbols, ...) are reserved for the
test oracles.

Index conventions on arrays:
    g[i, j]        metric tensor g_ij
    C[i, j, k]     Cartan tensor C_ijk (totally symmetric)
    spray[i]       geodesic spray G^i
    nonlinear[i,j] nonlinear connection G^i_j = dG^i/dy^j
    berwald[i,j,k] Berwald coefficients G^i_jk
    cartan[i,j,k]  Cartan h-connection F^i_jk (symmetric in j,k)
    landsberg[r,i,j] (v)hv-torsion P^r_ij = G^r_ij - F^r_ij
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fields import CovectorField, MatrixField
from .jets import (
    CapOverflowError,
    Jet,
    JetSpace,
    MultiIndex,
    PointState,
    jet_space,
)

__all__ = [
    "BaseGeometry",
    "DegenerateMetricError",
    "FinslerError",
    "FundamentalTensors",
    "InadmissiblePointError",
    "MetricSpec",
    "cartan_from_values",
    "fundamental_tensors",
    "h_covariant",
    "jet_matrix_inverse",
    "landsberg_tensor",
    "sample_admissible",
    "spray_and_connections",
    "spray_from_l2jet",
    "v_covariant",
]

DET_GUARD = 1e-12


class FinslerError(Exception):
    pass


class DegenerateMetricError(FinslerError):
    pass


class InadmissiblePointError(FinslerError):
    pass


@dataclass(frozen=True)
class MetricSpec:
    """A Finsler metric function family with a jet-evaluable evaluator."""

    family: str
    dimension: int
    evaluator: Callable[[Sequence[Jet], Sequence[Jet]], Jet]
    a: MatrixField | None = None
    d: CovectorField | None = None
    params: dict = field(default_factory=dict)

    @classmethod
    def euclidean(cls, n: int) -> "MetricSpec":
        def ev(x, y):
            s = y[0] * y[0]
            for i in range(1, n):
                s = s + y[i] * y[i]
            return s.sqrt()

        return cls("euclidean", n, ev)

    @classmethod
    def riemannian(cls, n: int, a: MatrixField) -> "MetricSpec":
        def ev(x, y):
            am = a(x)
            s = None
            for i in range(n):
                for j in range(n):
                    t = am[i][j] * y[i] * y[j]
                    s = t if s is None else s + t
            return s.sqrt()

        return cls("riemannian", n, ev, a=a)

    @classmethod
    def randers(cls, n: int, a: MatrixField, d: CovectorField) -> "MetricSpec":
        def ev(x, y):
            am = a(x)
            dv = d(x)
            s = None
            for i in range(n):
                for j in range(n):
                    t = am[i][j] * y[i] * y[j]
                    s = t if s is None else s + t
            lin = None
            for i in range(n):
                t = dv[i] * y[i]
                lin = t if lin is None else lin + t
            return s.sqrt() + lin

        return cls("randers", n, ev, a=a, d=d)

    @classmethod
    def kropina(cls, n: int, a: MatrixField, d: CovectorField) -> "MetricSpec":
        def ev(x, y):
            am = a(x)
            dv = d(x)
            s = None
            for i in range(n):
                for j in range(n):
                    t = am[i][j] * y[i] * y[j]
                    s = t if s is None else s + t
            lin = None
            for i in range(n):
                t = dv[i] * y[i]
                lin = t if lin is None else lin + t
            return s / lin

        return cls("kropina", n, ev, a=a, d=d)

    @classmethod
    def custom(cls, n: int, fn: Callable, family: str = "custom") -> "MetricSpec":
        return cls(family, n, fn)


@dataclass
class FundamentalTensors:
    """Pointwise tensors of a Finsler space, all jet-derived."""

    point: PointState
    L: float
    l: np.ndarray
    L_ij: np.ndarray
    L_ijk: np.ndarray
    g: np.ndarray
    h: np.ndarray
    C: np.ndarray
    g_inv: np.ndarray
    spray: np.ndarray
    nonlinear: np.ndarray
    berwald: np.ndarray
    cartan: np.ndarray
    landsberg: np.ndarray

    @property
    def C_up(self) -> np.ndarray:
        """C^r_ij with the first index raised."""
        return np.einsum("rm,mij->rij", self.g_inv, self.C)


def jet_matrix_inverse(mat: list[list[Jet]], space: JetSpace) -> list[list[Jet]]:
    """Inverse of a jet-valued matrix via the truncated Neumann series.

    mat = M0 + N with N carrying no value part; the series terminates at
    the total degree cap, so the result is exact within the caps.
    """
    n = len(mat)
    m0 = np.array([[mat[i][j].value for j in range(n)] for i in range(n)])
    if abs(np.linalg.det(m0)) < DET_GUARD:
        raise DegenerateMetricError("jet matrix value part is singular")
    m0inv = np.linalg.inv(m0)

    def scalarmat_times(jm, sm):  # jm jet matrix x numeric matrix (on the right)
        return [
            [sum((jm[i][k] * sm[k, j] for k in range(n)), space.zero()) for j in range(n)]
            for i in range(n)
        ]

    def numeric_times(sm, jm):
        return [
            [sum((jm[k][j] * sm[i, k] for k in range(n)), space.zero()) for j in range(n)]
            for i in range(n)
        ]

    def jmatmul(a, b):
        return [
            [sum((a[i][k] * b[k][j] for k in range(n)), space.zero()) for j in range(n)]
            for i in range(n)
        ]

    # E = -m0inv (mat - m0): nilpotent
    e = numeric_times(-m0inv, mat)
    for i in range(n):
        e[i][i] = e[i][i] + 1.0
    K = space.x_cap + space.y_cap
    # inv = (I + E + E^2 + ...) m0inv
    acc = [[space.constant(1.0 if i == j else 0.0) for j in range(n)] for i in range(n)]
    power = e
    for _ in range(K):
        for i in range(n):
            for j in range(n):
                acc[i][j] = acc[i][j] + power[i][j]
        power = jmatmul(power, e)
    return scalarmat_times(acc, m0inv)


def cartan_from_values(
    g_inv: np.ndarray, dgdx: np.ndarray, C: np.ndarray, nonlinear: np.ndarray
) -> np.ndarray:
    """Cartan h-connection from pointwise data.

    F^i_jk = 1/2 g^is (delta_j g_sk + delta_k g_js - delta_s g_jk) with
    delta_k = d_k - G^r_k d/dy^r; dgdx[k, i, j] = d_k g_ij.
    """
    n = g_inv.shape[0]
    delta_g = dgdx - 2.0 * np.einsum("rk,ijr->kij", nonlinear, C)
    T = np.zeros((n, n, n))
    for s in range(n):
        for j in range(n):
            for k in range(n):
                T[s, j, k] = delta_g[j, s, k] + delta_g[k, j, s] - delta_g[s, j, k]
    return 0.5 * np.einsum("is,sjk->ijk", g_inv, T)


def spray_from_l2jet(l2: Jet, y: np.ndarray) -> list[Jet]:
    """Geodesic spray G^i = 1/4 g^il (y^m d_m dy_l L^2 - d_l L^2) as jets.

    The returned jets live in the space with caps (x_cap-1, y_cap-2) of
    the input, so one y-derivative gives the nonlinear connection and a
    second one the Berwald coefficients when the caps allow.
    """
    s = l2.space
    n = s.n
    if s.x_cap < 1 or s.y_cap < 2:
        raise CapOverflowError("spray needs caps at least (1, 2) on the L^2 jet")
    sub = jet_space(n, s.x_cap - 1, s.y_cap - 2)
    yj = [sub.var_y(i, y[i]) for i in range(n)]
    g_jets = [
        [(l2.dy(i).dy(j) * 0.5).restrict(sub) for j in range(n)] for i in range(n)
    ]
    ginv = jet_matrix_inverse(g_jets, sub)
    w = []
    for l in range(n):
        t = -l2.dx(l).restrict(sub)
        for m in range(n):
            t = t + yj[m] * l2.dx(m).dy(l).restrict(sub)
        w.append(t)
    spray = []
    for i in range(n):
        t = sub.zero()
        for l in range(n):
            t = t + ginv[i][l] * w[l]
        spray.append(t * 0.25)
    return spray


class BaseGeometry:
    """All jet data of one Finsler space at one point.

    Lifts the metric once at caps (x_cap, y_cap + 1); the extra fiber
    order feeds the exact Berwald coefficients, which involve two fiber
    derivatives of the inverse metric.
    """

    def __init__(self, m: MetricSpec, p: PointState, caps: tuple[int, int] = (1, 3)):
        if caps[0] < 1 or caps[1] < 3:
            raise CapOverflowError("base geometry needs caps at least (1, 3)")
        self.spec = m
        self.point = p
        self.caps = caps
        n = m.dimension
        if p.dimension != n:
            raise ValueError("point dimension does not match metric")
        self.n = n
        self.master = jet_space(n, caps[0], caps[1] + 1)
        self.xj, self.yj = self.master.point_jets(p)
        self.L_jet = m.evaluator(self.xj, self.yj)
        if self.L_jet.value <= 0.0:
            raise InadmissiblePointError(f"L = {self.L_jet.value:.3g} <= 0 at sampled point")
        self.L2_jet = self.L_jet * self.L_jet
        self._tensors: FundamentalTensors | None = None
        self._l_jets: list[Jet] | None = None

    # -- extraction helpers -------------------------------------------

    def _part(self, jet: Jet, xs=(), ys=()):
        return jet.partial(MultiIndex.mixed(self.n, xs, ys))

    @property
    def tensors(self) -> FundamentalTensors:
        if self._tensors is None:
            self._tensors = self._compute()
        return self._tensors

    def l_jets(self) -> list[Jet]:
        """Jets of l_i = dL/dy^i, caps one fiber order below the master."""
        if self._l_jets is None:
            self._l_jets = [self.L_jet.dy(i) for i in range(self.n)]
        return self._l_jets

    def h_jets(self) -> list[list[Jet]]:
        """Jets of the angular metric h_ij = L * d2L/dy^i dy^j."""
        n = self.n
        sub = jet_space(n, self.master.x_cap, self.master.y_cap - 2)
        Lr = self.L_jet.restrict(sub)
        return [[Lr * self.L_jet.dy(i).dy(j) for j in range(n)] for i in range(n)]

    def _compute(self) -> FundamentalTensors:
        n = self.n
        L = self.L_jet.value
        l = np.array([self._part(self.L_jet, ys=[i]) for i in range(n)])
        L_ij = np.array(
            [[self._part(self.L_jet, ys=[i, j]) for j in range(n)] for i in range(n)]
        )
        L_ijk = np.array(
            [
                [[self._part(self.L_jet, ys=[i, j, k]) for k in range(n)] for j in range(n)]
                for i in range(n)
            ]
        )
        g = 0.5 * np.array(
            [[self._part(self.L2_jet, ys=[i, j]) for j in range(n)] for i in range(n)]
        )
        h = L * L_ij
        C = 0.25 * np.array(
            [
                [[self._part(self.L2_jet, ys=[i, j, k]) for k in range(n)] for j in range(n)]
                for i in range(n)
            ]
        )
        det = float(np.linalg.det(g))
        if abs(det) < DET_GUARD:
            raise DegenerateMetricError(f"|det g| = {abs(det):.3g} < {DET_GUARD}")
        g_inv = np.linalg.inv(g)

        spray_jets = spray_from_l2jet(self.L2_jet, self.point.y)
        spray = np.array([sj.value for sj in spray_jets])
        nonlinear = np.array(
            [[self._part(spray_jets[i], ys=[j]) for j in range(n)] for i in range(n)]
        )
        berwald = np.array(
            [
                [[self._part(spray_jets[i], ys=[j, k]) for k in range(n)] for j in range(n)]
                for i in range(n)
            ]
        )

        # Cartan h-connection from delta-derivatives of g:
        # delta_k g_ij = d_k g_ij - G^r_k * (dg/dy^r)_ij
        dgdx = 0.5 * np.array(
            [
                [[self._part(self.L2_jet, xs=[k], ys=[i, j]) for j in range(n)] for i in range(n)]
                for k in range(n)
            ]
        )
        cartan = cartan_from_values(g_inv, dgdx, C, nonlinear)
        landsberg = berwald - cartan

        return FundamentalTensors(
            point=self.point,
            L=L,
            l=l,
            L_ij=L_ij,
            L_ijk=L_ijk,
            g=g,
            h=h,
            C=C,
            g_inv=g_inv,
            spray=spray,
            nonlinear=nonlinear,
            berwald=berwald,
            cartan=cartan,
            landsberg=landsberg,
        )

    # -- covariant derivatives on jet-valued covector fields -----------

    def h_covariant_values(self, x_jets: Sequence[Jet]) -> np.ndarray:
        """X_{i|j} = d_j X_i - (dX_i/dy^h) G^h_j - F^r_ij X_r."""
        n = self.n
        ft = self.tensors
        xv = np.array([xj.value for xj in x_jets])
        dx = np.array([[self._jpart(x_jets[i], xs=[j]) for j in range(n)] for i in range(n)])
        dy = np.array([[self._jpart(x_jets[i], ys=[h]) for h in range(n)] for i in range(n)])
        return dx - dy @ ft.nonlinear - np.einsum("rij,r->ij", ft.cartan, xv)

    def v_covariant_values(self, x_jets: Sequence[Jet]) -> np.ndarray:
        """X_i|_j = dX_i/dy^j - C^r_ij X_r."""
        n = self.n
        ft = self.tensors
        xv = np.array([xj.value for xj in x_jets])
        dy = np.array([[self._jpart(x_jets[i], ys=[j]) for j in range(n)] for i in range(n)])
        return dy - np.einsum("rij,r->ij", ft.C_up, xv)

    def _jpart(self, jet: Jet, xs=(), ys=()):
        return jet.partial(MultiIndex.mixed(jet.space.n, xs, ys))


# -- public operations ----------------------------------------------------


def fundamental_tensors(m: MetricSpec, p: PointState, caps: tuple[int, int] = (1, 3)) -> FundamentalTensors:
    return BaseGeometry(m, p, caps).tensors


def spray_and_connections(m: MetricSpec, p: PointState, caps: tuple[int, int] = (1, 3)) -> FundamentalTensors:
    """Alias of fundamental_tensors; all connection fields are populated."""
    return fundamental_tensors(m, p, caps)


def landsberg_tensor(m: MetricSpec, p: PointState, tol: float = 1e-8) -> tuple[np.ndarray, bool]:
    ft = fundamental_tensors(m, p)
    P = ft.landsberg
    return P, bool(np.max(np.abs(P)) < tol)


def h_covariant(X: Callable, m: MetricSpec, p: PointState) -> np.ndarray:
    """Horizontal covariant derivative of a covector field X_i(x, y)."""
    geom = BaseGeometry(m, p)
    x_jets = X(geom.xj, geom.yj)
    return geom.h_covariant_values(x_jets)


def v_covariant(X: Callable, m: MetricSpec, p: PointState) -> np.ndarray:
    """Vertical covariant derivative of a covector field X_i(x, y)."""
    geom = BaseGeometry(m, p)
    x_jets = X(geom.xj, geom.yj)
    return geom.v_covariant_values(x_jets)


def sample_admissible(
    m: MetricSpec,
    rng: np.random.Generator,
    count: int,
    x_box: tuple[float, float] = (-0.8, 0.8),
    y_box: tuple[float, float] = (-1.5, 1.5),
    min_y: float = 0.1,
    beta_of: Callable[[PointState], float] | None = None,
    min_beta: float = 0.1,
    max_tries: int = 4000,
) -> list[PointState]:
    """Random admissible points: y bounded away from 0, L > 0, g positive
    definite, and optionally a change covector beta bounded away from 0."""
    out: list[PointState] = []
    n = m.dimension
    tries = 0
    while len(out) < count and tries < max_tries:
        tries += 1
        x = rng.uniform(*x_box, size=n)
        y = rng.uniform(*y_box, size=n)
        if np.linalg.norm(y) < min_y:
            continue
        p = PointState(x, y)
        if beta_of is not None and abs(beta_of(p)) < min_beta:
            continue
        try:
            geom = BaseGeometry(m, p)
            ft = geom.tensors
        except (FinslerError, ArithmeticError):
            continue
        if np.min(np.linalg.eigvalsh(ft.g)) <= 0.0:
            continue
        out.append(p)
    if len(out) < count:
        raise InadmissiblePointError(
            f"could only sample {len(out)}/{count} admissible points in {max_tries} tries"
        )
    return out
