"""Truncated multivariate Taylor arithmetic for mixed (x, y) derivatives.

A Jet stores the Taylor coefficients of a scalar function of base
coordinates x and fiber coordinates y at a point, complete over the
lattice of multi-indices with total x-order <= x_cap and total
y-order <= y_cap.  Arithmetic (+, -, *, /, sqrt, ...) propagates the
coefficients exactly, so every mixed partial within the caps comes out
exact to machine rounding.  Coefficients are Taylor coefficients, i.e.
partial derivatives divided by the multi-index factorial.

Jets are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "CapOverflowError",
    "Jet",
    "JetDomainError",
    "JetSpace",
    "MultiIndex",
    "PointState",
    "jet_space",
    "lift",
    "partial",
    "sqrt",
]

# Divisor values below this are treated as a singular configuration
# (e.g. the Kropina denominator beta -> 0).
DIV_GUARD = 1e-13


class JetDomainError(ArithmeticError):
    """A jet operation hit a singularity (division by ~0, sqrt/log of <=0)."""


class CapOverflowError(LookupError):
    """A requested multi-index lies outside the jet's derivative caps."""


@dataclass(frozen=True)
class MultiIndex:
    """Orders of differentiation per coordinate: x_orders for the base
    derivatives, y_orders for the fiber derivatives."""

    x_orders: tuple[int, ...]
    y_orders: tuple[int, ...]

    def __post_init__(self):
        if any(k < 0 for k in self.x_orders) or any(k < 0 for k in self.y_orders):
            raise ValueError("multi-index orders must be nonnegative")
        if len(self.x_orders) != len(self.y_orders):
            raise ValueError("x_orders and y_orders must have equal length")

    @classmethod
    def zero(cls, n: int) -> "MultiIndex":
        return cls((0,) * n, (0,) * n)

    @classmethod
    def single_x(cls, n: int, i: int) -> "MultiIndex":
        x = [0] * n
        x[i] = 1
        return cls(tuple(x), (0,) * n)

    @classmethod
    def of_y(cls, n: int, *ys: int) -> "MultiIndex":
        """Multi-index for repeated y-derivatives, e.g. of_y(2, 0, 0, 1)."""
        y = [0] * n
        for i in ys:
            y[i] += 1
        return cls((0,) * n, tuple(y))

    @classmethod
    def mixed(cls, n: int, xs: Sequence[int] = (), ys: Sequence[int] = ()) -> "MultiIndex":
        x = [0] * n
        y = [0] * n
        for i in xs:
            x[i] += 1
        for i in ys:
            y[i] += 1
        return cls(tuple(x), tuple(y))

    @property
    def dimension(self) -> int:
        return len(self.x_orders)

    @property
    def x_total(self) -> int:
        return sum(self.x_orders)

    @property
    def y_total(self) -> int:
        return sum(self.y_orders)

    def factorial(self) -> float:
        f = 1
        for k in self.x_orders:
            f *= math.factorial(k)
        for k in self.y_orders:
            f *= math.factorial(k)
        return float(f)


@dataclass(frozen=True)
class PointState:
    """Base point x and nonzero supporting element y of the slit tangent bundle."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise ValueError("x and y must be 1-d arrays of equal length")
        if float(np.linalg.norm(self.y)) == 0.0:
            raise ValueError("supporting element y must be nonzero")

    @property
    def dimension(self) -> int:
        return self.x.size


def _enumerate_pows(n: int, cap: int) -> list[tuple[int, ...]]:
    """All exponent tuples of length n with total degree <= cap, graded order."""
    out: list[tuple[int, ...]] = []

    def rec(prefix: list[int], remaining: int, slots: int):
        if slots == 0:
            out.append(tuple(prefix))
            return
        for k in range(remaining + 1):
            rec(prefix + [k], remaining - k, slots - 1)

    for total in range(cap + 1):
        # fix total degree, enumerate compositions
        buf: list[tuple[int, ...]] = []

        def rec2(prefix: list[int], left: int, slots: int):
            if slots == 1:
                buf.append(tuple(prefix + [left]))
                return
            for k in range(left + 1):
                rec2(prefix + [k], left - k, slots - 1)

        rec2([], total, n)
        out.extend(buf)
    return out


class JetSpace:
    """Context for jets of a fixed dimension and caps.

    Holds the enumerated multi-index lattice, the truncated-product
    index table and the derivative/restriction tables.  Instances are
    cached by (n, x_cap, y_cap); obtain them through :func:`jet_space`.
    """

    def __init__(self, n: int, x_cap: int = 1, y_cap: int = 3):
        if n < 1:
            raise ValueError("dimension must be >= 1")
        if x_cap < 0 or y_cap < 0:
            raise ValueError("caps must be nonnegative")
        self.n = n
        self.x_cap = x_cap
        self.y_cap = y_cap

        xs = _enumerate_pows(n, x_cap)
        ys = _enumerate_pows(n, y_cap)
        self.indices: list[tuple[tuple[int, ...], tuple[int, ...]]] = []
        for a in xs:
            for b in ys:
                self.indices.append((a, b))
        # graded order (by total degree) so recurrences could run low-to-high
        self.indices.sort(key=lambda ab: (sum(ab[0]) + sum(ab[1]), ab))
        self.size = len(self.indices)
        self._pos = {ab: k for k, ab in enumerate(self.indices)}
        self._fact = np.array(
            [
                float(
                    math.prod(math.factorial(k) for k in a)
                    * math.prod(math.factorial(k) for k in b)
                )
                for a, b in self.indices
            ]
        )

        ii: list[int] = []
        jj: list[int] = []
        kk: list[int] = []
        for i, (a1, b1) in enumerate(self.indices):
            for j, (a2, b2) in enumerate(self.indices):
                a = tuple(p + q for p, q in zip(a1, a2))
                b = tuple(p + q for p, q in zip(b1, b2))
                if sum(a) <= x_cap and sum(b) <= y_cap:
                    ii.append(i)
                    jj.append(j)
                    kk.append(self._pos[(a, b)])
        self._mul_i = np.array(ii, dtype=np.intp)
        self._mul_j = np.array(jj, dtype=np.intp)
        self._mul_k = np.array(kk, dtype=np.intp)

    # -- constructors -------------------------------------------------

    def zero(self) -> "Jet":
        return Jet(self, np.zeros(self.size))

    def constant(self, v: float) -> "Jet":
        c = np.zeros(self.size)
        c[0] = float(v)
        return Jet(self, c)

    def var_x(self, i: int, value: float) -> "Jet":
        if self.x_cap < 1:
            raise CapOverflowError("x_cap is 0; cannot seed an x variable")
        c = np.zeros(self.size)
        c[0] = float(value)
        a = [0] * self.n
        a[i] = 1
        c[self._pos[(tuple(a), (0,) * self.n)]] = 1.0
        return Jet(self, c)

    def var_y(self, i: int, value: float) -> "Jet":
        if self.y_cap < 1:
            raise CapOverflowError("y_cap is 0; cannot seed a y variable")
        c = np.zeros(self.size)
        c[0] = float(value)
        b = [0] * self.n
        b[i] = 1
        c[self._pos[((0,) * self.n, tuple(b))]] = 1.0
        return Jet(self, c)

    def point_jets(self, p: PointState) -> tuple[list["Jet"], list["Jet"]]:
        if p.dimension != self.n:
            raise ValueError("point dimension does not match jet space")
        xj = [self.var_x(i, p.x[i]) for i in range(self.n)]
        yj = [self.var_y(i, p.y[i]) for i in range(self.n)]
        return xj, yj

    # -- index helpers ------------------------------------------------

    def position(self, mi: MultiIndex) -> int:
        if mi.dimension != self.n:
            raise ValueError("multi-index dimension mismatch")
        key = (mi.x_orders, mi.y_orders)
        if key not in self._pos:
            raise CapOverflowError(f"multi-index {key} outside caps ({self.x_cap},{self.y_cap})")
        return self._pos[key]

    def __repr__(self) -> str:  # pragma: no cover
        return f"JetSpace(n={self.n}, caps=({self.x_cap},{self.y_cap}), size={self.size})"


@lru_cache(maxsize=None)
def jet_space(n: int, x_cap: int = 1, y_cap: int = 3) -> JetSpace:
    return JetSpace(n, x_cap, y_cap)


class Jet:
    """Truncated Taylor expansion of a scalar at a point (x, y)."""

    __slots__ = ("space", "c")

    def __init__(self, space: JetSpace, coeffs: np.ndarray):
        self.space = space
        self.c = coeffs

    # -- basic accessors ----------------------------------------------

    @property
    def value(self) -> float:
        return float(self.c[0])

    def partial(self, mi: MultiIndex) -> float:
        """Raw mixed partial: multi-index factorial times the Taylor coefficient."""
        k = self.space.position(mi)
        return float(self.c[k] * self.space._fact[k])

    def coefficient(self, mi: MultiIndex) -> float:
        return float(self.c[self.space.position(mi)])

    # -- ring operations ----------------------------------------------

    def _coerce(self, other) -> "Jet | None":
        if isinstance(other, Jet):
            if other.space is not self.space:
                raise ValueError("jets from different spaces; restrict to common caps first")
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self.space.constant(float(other))
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return Jet(self.space, self.c + o.c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.space, -self.c)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return Jet(self.space, self.c - o.c)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return Jet(self.space, o.c - self.c)

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Jet(self.space, self.c * float(other))
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        s = self.space
        w = self.c[s._mul_i] * o.c[s._mul_j]
        return Jet(s, np.bincount(s._mul_k, weights=w, minlength=s.size))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            if abs(float(other)) < DIV_GUARD:
                raise JetDomainError("division by near-zero scalar")
            return Jet(self.space, self.c / float(other))
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self * o.reciprocal()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o * self.reciprocal()

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)):
            p = int(p)
            if p < 0:
                return (self ** (-p)).reciprocal()
            out = self.space.constant(1.0)
            base = self
            while p:
                if p & 1:
                    out = out * base
                base = base * base
                p >>= 1
            return out
        # real exponent: binomial series around the value part
        v = self.value
        if v <= 0.0:
            raise JetDomainError("non-integer power of a non-positive jet")
        K = self.space.x_cap + self.space.y_cap
        coeffs = []
        binom = 1.0
        for k in range(K + 1):
            coeffs.append(binom * v ** (p - k))
            binom *= (p - k) / (k + 1)
        return self._compose(coeffs)

    # -- analytic functions -------------------------------------------

    def _compose(self, series: Sequence[float]) -> "Jet":
        """Evaluate sum_k series[k] * (self - value)^k with truncated products."""
        u = Jet(self.space, self.c.copy())
        u.c[0] = 0.0
        out = self.space.constant(series[-1])
        for k in range(len(series) - 2, -1, -1):
            out = out * u + series[k]
        return out

    def reciprocal(self) -> "Jet":
        v = self.value
        if abs(v) < DIV_GUARD:
            raise JetDomainError("division by a jet with near-zero value part")
        K = self.space.x_cap + self.space.y_cap
        series = [((-1.0) ** k) / v ** (k + 1) for k in range(K + 1)]
        return self._compose(series)

    def sqrt(self) -> "Jet":
        v = self.value
        if v <= 0.0:
            raise JetDomainError("sqrt of a jet with non-positive value part")
        K = self.space.x_cap + self.space.y_cap
        coeffs = []
        binom = 1.0
        for k in range(K + 1):
            coeffs.append(binom * v ** (0.5 - k))
            binom *= (0.5 - k) / (k + 1)
        return self._compose(coeffs)

    def exp(self) -> "Jet":
        K = self.space.x_cap + self.space.y_cap
        ev = math.exp(self.value)
        return self._compose([ev / math.factorial(k) for k in range(K + 1)])

    def log(self) -> "Jet":
        v = self.value
        if v <= 0.0:
            raise JetDomainError("log of a jet with non-positive value part")
        K = self.space.x_cap + self.space.y_cap
        series = [math.log(v)]
        for k in range(1, K + 1):
            series.append(((-1.0) ** (k + 1)) / (k * v**k))
        return self._compose(series)

    def sin(self) -> "Jet":
        K = self.space.x_cap + self.space.y_cap
        v = self.value
        table = [math.sin(v), math.cos(v), -math.sin(v), -math.cos(v)]
        return self._compose([table[k % 4] / math.factorial(k) for k in range(K + 1)])

    def cos(self) -> "Jet":
        K = self.space.x_cap + self.space.y_cap
        v = self.value
        table = [math.cos(v), -math.sin(v), -math.cos(v), math.sin(v)]
        return self._compose([table[k % 4] / math.factorial(k) for k in range(K + 1)])

    # -- derivation and restriction -----------------------------------

    def dx(self, i: int) -> "Jet":
        """Jet of the x_i-derivative; lives in the space with x_cap reduced by 1."""
        s = self.space
        if s.x_cap < 1:
            raise CapOverflowError("x_cap exhausted")
        sub = jet_space(s.n, s.x_cap - 1, s.y_cap)
        c = np.zeros(sub.size)
        for k, (a, b) in enumerate(sub.indices):
            aa = list(a)
            aa[i] += 1
            c[k] = self.c[s._pos[(tuple(aa), b)]] * aa[i]
        return Jet(sub, c)

    def dy(self, i: int) -> "Jet":
        """Jet of the y_i-derivative; lives in the space with y_cap reduced by 1."""
        s = self.space
        if s.y_cap < 1:
            raise CapOverflowError("y_cap exhausted")
        sub = jet_space(s.n, s.x_cap, s.y_cap - 1)
        c = np.zeros(sub.size)
        for k, (a, b) in enumerate(sub.indices):
            bb = list(b)
            bb[i] += 1
            c[k] = self.c[s._pos[(a, tuple(bb))]] * bb[i]
        return Jet(sub, c)

    def restrict(self, space: JetSpace) -> "Jet":
        """Project onto a sub-lattice with smaller (or equal) caps."""
        s = self.space
        if space.n != s.n or space.x_cap > s.x_cap or space.y_cap > s.y_cap:
            raise ValueError("restrict target must have the same n and smaller caps")
        if space is s:
            return self
        c = np.zeros(space.size)
        for k, ab in enumerate(space.indices):
            c[k] = self.c[s._pos[ab]]
        return Jet(space, c)

    def __repr__(self) -> str:  # pragma: no cover
        return f"Jet(value={self.value:.6g}, caps=({self.space.x_cap},{self.space.y_cap}))"


def sqrt(v):
    """sqrt that works for jets and plain floats alike."""
    if isinstance(v, Jet):
        return v.sqrt()
    return math.sqrt(v)


def lift(
    f: Callable[[Sequence[Jet], Sequence[Jet]], Jet],
    p: PointState,
    caps: tuple[int, int] = (1, 3),
) -> Jet:
    """Evaluate a scalar function of (x, y) on coordinate jets at p.

    The returned jet's coefficient at multi-index alpha equals
    d^alpha f(p) / alpha! for every alpha within caps.
    """
    space = jet_space(p.dimension, caps[0], caps[1])
    xj, yj = space.point_jets(p)
    out = f(xj, yj)
    if not isinstance(out, Jet):
        raise TypeError("lifted function must return a Jet")
    return out


def partial(j: Jet, alpha: MultiIndex) -> float:
    """Raw mixed partial of the lifted function: alpha! times the coefficient."""
    return j.partial(alpha)
