"""Covector fields b_i(x, y) driving the metric change.

Two regimes produce the jet of b at a point:

* explicit / function_of_x: b = rho * l + c(x) with a real polynomial
  field c.  This satisfies the directional-derivative constraint
  L db_i/dy^j = rho h_ij identically for constant rho; the horizontal
  covariant data (E, F) is derived from the field.

* constrained: the point data (b value, E, F, rho, rho_k) are free
  slots; every other Taylor coefficient of b within caps is forced by
  the constraint chain, which again has the closed solution
  b = rho(x) l + c(x) with the value and x-slope of c reconstructed
  from the slots by inverting the horizontal covariant derivative.

Either way the rest of the engine only sees the jets of b.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import CovectorField
from .finsler import BaseGeometry
from .jets import Jet, MultiIndex, jet_space

__all__ = [
    "BetaSingularError",
    "ConstrainedSlots",
    "DerivedScalars",
    "HVectorData",
    "HVectorError",
    "HVectorSpec",
    "SingularCoefficientError",
    "SlotPlan",
    "covariant_data",
    "draw_slots",
    "evaluate",
    "hvector_residuals",
]


class HVectorError(Exception):
    pass


class BetaSingularError(HVectorError):
    pass


class SingularCoefficientError(HVectorError):
    pass


@dataclass(frozen=True)
class SlotPlan:
    """How to draw the free constrained-jet slots."""

    value: str = "random"  # random | proportional_y | given
    value_data: tuple[float, ...] | float | None = None
    gradient: bool = False  # force F = 0
    parallel: bool = False  # force E = F = 0 (and rho_k = 0)
    cond428: bool = False  # force (E+F) y = kappa y (kills b_{r|0} C^r_ij terms)
    rho_k_random: bool = False
    scale: float = 0.4


@dataclass(frozen=True)
class HVectorSpec:
    mode: str  # explicit | function_of_x | constrained
    rho: float = 0.0
    c: CovectorField | None = None
    plan: SlotPlan = field(default_factory=SlotPlan)

    def __post_init__(self):
        if self.mode not in ("explicit", "function_of_x", "constrained"):
            raise ValueError(f"unknown h-vector mode {self.mode!r}")
        if self.mode == "function_of_x" and self.rho != 0.0:
            raise ValueError("function_of_x mode requires rho = 0")
        if self.mode in ("explicit", "function_of_x") and self.c is None:
            raise ValueError(f"{self.mode} mode needs a covector field c")


@dataclass(frozen=True)
class ConstrainedSlots:
    """Free slots of a constrained point-jet of b."""

    b_value: np.ndarray
    E: np.ndarray
    F: np.ndarray
    rho_k: np.ndarray

    def __post_init__(self):
        if np.max(np.abs(self.E - self.E.T)) > 1e-14:
            raise ValueError("E slot must be symmetric")
        if np.max(np.abs(self.F + self.F.T)) > 1e-14:
            raise ValueError("F slot must be antisymmetric")


@dataclass
class DerivedScalars:
    beta: float
    tau: float
    m: np.ndarray
    b_up: np.ndarray
    m_up: np.ndarray
    b2: float
    m2: float
    beta_j: np.ndarray
    beta_0: float
    F_b0: float
    Q: float  # 2 b^2/beta - rho/L
    A: float


@dataclass
class HVectorData:
    """Point evaluation of an h-vector candidate: values, jets, slots."""

    mode: str
    rho: float
    rho_k: np.ndarray
    b: np.ndarray
    b_jets: list[Jet]
    E: np.ndarray
    F: np.ndarray
    scalars: DerivedScalars

    @property
    def db_forced(self) -> np.ndarray:
        """The forced fiber-derivative slots (rho/L) h_ij, read from the jets."""
        n = len(self.b)
        return np.array(
            [
                [self.b_jets[i].partial(MultiIndex.mixed(n, ys=[j])) for j in range(n)]
                for i in range(n)
            ]
        )


def draw_slots(plan: SlotPlan, geom: BaseGeometry, rng: np.random.Generator) -> ConstrainedSlots:
    """Draw free slots per the plan; projections keep the stated regime exact."""
    n = geom.n
    y = geom.point.y
    if plan.value == "given":
        b_value = np.asarray(plan.value_data, dtype=float).copy()
    elif plan.value == "proportional_y":
        t = float(plan.value_data) if plan.value_data is not None else 0.5
        y_low = geom.tensors.g @ y
        b_value = t * y_low
    else:
        b_value = rng.uniform(-plan.scale, plan.scale, size=n)
        # keep beta = b . y away from the singular locus
        beta = float(b_value @ y)
        floor = 0.35 * plan.scale * max(1.0, float(np.linalg.norm(y)))
        if abs(beta) < floor:
            sgn = 1.0 if beta >= 0.0 else -1.0
            b_value = b_value + (sgn * floor - beta) * y / float(y @ y)
    if plan.parallel:
        E = np.zeros((n, n))
        F = np.zeros((n, n))
        rho_k = np.zeros(n)
        return ConstrainedSlots(b_value, E, F, rho_k)
    raw = rng.uniform(-plan.scale, plan.scale, size=(n, n))
    E = 0.5 * (raw + raw.T)
    if plan.gradient:
        F = np.zeros((n, n))
    else:
        raw2 = rng.uniform(-plan.scale, plan.scale, size=(n, n))
        F = 0.5 * (raw2 - raw2.T)
    if plan.cond428:
        # project so that (E+F) y = kappa * (g y); the lowered supporting
        # element spans the kernel of X_r C^r_ij, so b_{r|0} C^r_ij = 0
        # holds on any base.
        yy = float(y @ y)
        y_low = geom.tensors.g @ y
        kappa = 0.25 * plan.scale
        if plan.gradient:
            d = E @ y - kappa * y_low
            E = (
                E
                - (np.outer(d, y) + np.outer(y, d)) / yy
                + float(y @ d) * np.outer(y, y) / yy**2
            )
        else:
            T = E + F
            d = T @ y - kappa * y_low
            T = T - np.outer(d, y) / yy
            E = 0.5 * (T + T.T)
            F = 0.5 * (T - T.T)
    rho_k = (
        rng.uniform(-plan.scale, plan.scale, size=n) if plan.rho_k_random else np.zeros(n)
    )
    return ConstrainedSlots(b_value, E, F, rho_k)


def _build_jets_from_c(
    geom: BaseGeometry, rho: float, rho_k: np.ndarray, c_value: np.ndarray, c_dx: np.ndarray
) -> list[Jet]:
    """Jets of b = rho(x) l + c(x) given pointwise values and x-slopes of c."""
    n = geom.n
    space = jet_space(n, geom.master.x_cap, geom.master.y_cap - 1)
    x = geom.point.x
    xj = [space.var_x(k, x[k]) for k in range(n)]
    rho_jet = space.constant(rho)
    for k in range(n):
        if rho_k[k] != 0.0:
            rho_jet = rho_jet + rho_k[k] * (xj[k] - float(x[k]))
    out = []
    for i in range(n):
        c_jet = space.constant(float(c_value[i]))
        for k in range(n):
            if c_dx[i, k] != 0.0:
                c_jet = c_jet + c_dx[i, k] * (xj[k] - float(x[k]))
        out.append(rho_jet * geom.L_jet.dy(i) + c_jet)
    return out


def _derived_scalars(geom: BaseGeometry, b: np.ndarray, E: np.ndarray, F: np.ndarray, rho: float) -> DerivedScalars:
    ft = geom.tensors
    y = geom.point.y
    L = ft.L
    beta = float(b @ y)
    if abs(beta) < 1e-10:
        raise BetaSingularError(f"beta = {beta:.3g} too close to zero")
    tau = L / beta
    m = b - ft.l / tau
    b_up = ft.g_inv @ b
    m_up = ft.g_inv @ m
    b2 = float(b_up @ b)
    m2 = float(m_up @ m)
    T = E + F
    beta_j = y @ T  # b_{i|j} y^i
    beta_0 = float(beta_j @ y)
    F_b0 = float(b_up @ F @ y)
    Q = 2.0 * b2 / beta - rho / L
    if abs(Q) < 1e-10:
        raise SingularCoefficientError("denominator 2 b^2/beta - rho/L vanishes")
    A = (2.0 * beta_0 * m2 / beta - 2.0 * F_b0) / Q
    return DerivedScalars(
        beta=beta,
        tau=tau,
        m=m,
        b_up=b_up,
        m_up=m_up,
        b2=b2,
        m2=m2,
        beta_j=beta_j,
        beta_0=beta_0,
        F_b0=F_b0,
        Q=Q,
        A=A,
    )


def evaluate(
    h: HVectorSpec,
    geom: BaseGeometry,
    slots: ConstrainedSlots | None = None,
    rng: np.random.Generator | None = None,
    tangent_normal: tuple[np.ndarray, np.ndarray] | None = None,
) -> HVectorData:
    """Evaluate b and all derived data at the geometry's point.

    tangent_normal = (N_up, N_low) projects the value slot onto the
    tangent hyperplane (b <- b - (b.N) N_low) before anything else; the
    jets shift consistently by a constant covector.
    """
    n = geom.n
    ft = geom.tensors
    if h.mode in ("explicit", "function_of_x"):
        space = jet_space(n, geom.master.x_cap, geom.master.y_cap - 1)
        xj = [space.var_x(k, geom.point.x[k]) for k in range(n)]
        cvals = h.c(xj)
        b_jets = []
        for i in range(n):
            ci = cvals[i]
            if not isinstance(ci, Jet):
                ci = space.constant(float(ci))
            b_jets.append(h.rho * geom.L_jet.dy(i) + ci)
        b = np.array([bj.value for bj in b_jets])
        if tangent_normal is not None:
            n_up, n_low = tangent_normal
            shift = -float(b @ n_up) * n_low
            b = b + shift
            b_jets = [bj + float(s) for bj, s in zip(b_jets, shift)]
        hc = geom.h_covariant_values(b_jets)
        E = 0.5 * (hc + hc.T)
        F = 0.5 * (hc - hc.T)
        rho_k = np.zeros(n)
    elif h.mode == "constrained":
        if slots is None:
            if rng is None:
                raise ValueError("constrained mode needs slots or an rng to draw them")
            slots = draw_slots(h.plan, geom, rng)
        b = np.asarray(slots.b_value, dtype=float)
        if tangent_normal is not None:
            n_up, n_low = tangent_normal
            b = b - float(b @ n_up) * n_low
        E = np.asarray(slots.E, dtype=float)
        F = np.asarray(slots.F, dtype=float)
        rho_k = np.asarray(slots.rho_k, dtype=float)
        # invert the horizontal covariant derivative for the x-slope of b,
        # then split off rho l to get the x-slope of c
        psi = h.rho * ft.L_ij  # forced fiber slopes db_i/dy^h at the point
        db_x = (
            (E + F)
            + psi @ ft.nonlinear
            + np.einsum("rij,r->ij", ft.cartan, b)
        )
        dl_x = np.array(
            [
                [geom.l_jets()[i].partial(_mi(n, xs=[j])) for j in range(n)]
                for i in range(n)
            ]
        )
        c_value = b - h.rho * ft.l
        c_dx = db_x - h.rho * dl_x - np.outer(ft.l, rho_k)
        b_jets = _build_jets_from_c(geom, h.rho, rho_k, c_value, c_dx)
    else:  # pragma: no cover
        raise ValueError(h.mode)
    scalars = _derived_scalars(geom, b, E, F, h.rho)
    return HVectorData(
        mode=h.mode,
        rho=h.rho,
        rho_k=rho_k,
        b=b,
        b_jets=b_jets,
        E=E,
        F=F,
        scalars=scalars,
    )


def _mi(n, xs=(), ys=()):
    return MultiIndex.mixed(n, xs, ys)


def hvector_residuals(data: HVectorData, geom: BaseGeometry) -> tuple[float, float]:
    """Diagnostics r1 = |L C^h_ij b_h - rho h_ij| and r2 = |L db_i/dy^j - rho h_ij|.

    The explicit family satisfies the second identically; the first is the
    genuine h-vector condition and is generally nonzero off Riemannian bases.
    """
    ft = geom.tensors
    r1 = float(
        np.max(
            np.abs(ft.L * np.einsum("hij,h->ij", ft.C, data.scalars.b_up) - data.rho * ft.h)
        )
    )
    r2 = float(np.max(np.abs(ft.L * data.db_forced - data.rho * ft.h)))
    return r1, r2


def covariant_data(data: HVectorData) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(E_ij, F_ij, beta_j, rho_k) of the evaluated h-vector."""
    return data.E, data.F, data.scalars.beta_j, data.rho_k
