"""Polynomial fields on the base manifold, evaluable on floats or jets.

Metric coefficient matrices a_ij(x) and covector fields c_i(x) enter the
engine as smooth functions that must propagate through jet arithmetic.
Multivariate polynomials cover every configuration the scenario files
need and evaluate exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = ["Poly", "CovectorField", "MatrixField"]


@dataclass(frozen=True)
class Poly:
    """Multivariate polynomial: terms is a sequence of (coeff, powers)."""

    dimension: int
    terms: tuple[tuple[float, tuple[int, ...]], ...]

    @classmethod
    def make(cls, n: int, terms: Sequence[tuple[float, Sequence[int]]]) -> "Poly":
        tt = []
        for coeff, powers in terms:
            powers = tuple(int(k) for k in powers)
            if len(powers) != n:
                raise ValueError("term power tuple length must equal dimension")
            tt.append((float(coeff), powers))
        return cls(n, tuple(tt))

    @classmethod
    def constant(cls, n: int, value: float) -> "Poly":
        return cls.make(n, [(value, (0,) * n)])

    def __call__(self, x: Sequence):
        out = None
        for coeff, powers in self.terms:
            term = coeff
            for i, k in enumerate(powers):
                for _ in range(k):
                    term = term * x[i]
            out = term if out is None else out + term
        if out is None:
            return 0.0
        return out

    def diff(self, i: int) -> "Poly":
        """Exact partial derivative with respect to x_i."""
        terms = []
        for coeff, powers in self.terms:
            if powers[i] == 0:
                continue
            pw = list(powers)
            pw[i] -= 1
            terms.append((coeff * powers[i], tuple(pw)))
        return Poly(self.dimension, tuple(terms))


@dataclass(frozen=True)
class CovectorField:
    """Covector field c_i(x) with polynomial components."""

    components: tuple[Poly, ...]

    @classmethod
    def constant(cls, values: Sequence[float]) -> "CovectorField":
        n = len(values)
        return cls(tuple(Poly.constant(n, v) for v in values))

    @classmethod
    def gradient_of_quadratic(cls, q: np.ndarray, lin: Sequence[float] | None = None) -> "CovectorField":
        """Gradient of phi(x) = 1/2 x^T q x + lin . x; always a gradient field."""
        q = np.asarray(q, dtype=float)
        n = q.shape[0]
        qs = 0.5 * (q + q.T)
        comps = []
        for i in range(n):
            terms = []
            for j in range(n):
                if qs[i, j] != 0.0:
                    pw = [0] * n
                    pw[j] = 1
                    terms.append((qs[i, j], tuple(pw)))
            if lin is not None and lin[i] != 0.0:
                terms.append((float(lin[i]), (0,) * n))
            comps.append(Poly.make(n, terms))
        return cls(tuple(comps))

    @property
    def dimension(self) -> int:
        return len(self.components)

    def __call__(self, x: Sequence):
        return [p(x) for p in self.components]


@dataclass(frozen=True)
class MatrixField:
    """Symmetric matrix field a_ij(x) with polynomial entries."""

    entries: tuple[tuple[Poly, ...], ...]

    @classmethod
    def identity(cls, n: int) -> "MatrixField":
        rows = []
        for i in range(n):
            row = [Poly.constant(n, 1.0 if i == j else 0.0) for j in range(n)]
            rows.append(tuple(row))
        return cls(tuple(rows))

    @classmethod
    def diagonal(cls, polys: Sequence[Poly]) -> "MatrixField":
        n = len(polys)
        rows = []
        for i in range(n):
            row = [polys[i] if i == j else Poly.constant(n, 0.0) for j in range(n)]
            rows.append(tuple(row))
        return cls(tuple(rows))

    @property
    def dimension(self) -> int:
        return len(self.entries)

    def __call__(self, x: Sequence):
        return [[p(x) for p in row] for row in self.entries]

    def numpy_at(self, x: np.ndarray) -> np.ndarray:
        return np.array([[p(list(x)) for p in row] for row in self.entries], dtype=float)
