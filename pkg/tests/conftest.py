import numpy as np
import pytest

from finslercheck.fields import CovectorField, MatrixField, Poly
from finslercheck.finsler import MetricSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def make_riemannian(n=3):
    """Diagonal metric a = diag(1, 1 + (x1)^2, 1 + (x2)^2) (n=3) or the
    2-d analogue; smooth, positive definite everywhere."""
    if n == 2:
        polys = [
            Poly.make(2, [(1.0, (0, 0))]),
            Poly.make(2, [(1.0, (0, 0)), (1.0, (2, 0))]),
        ]
    else:
        polys = [
            Poly.make(3, [(1.0, (0, 0, 0))]),
            Poly.make(3, [(1.0, (0, 0, 0)), (1.0, (2, 0, 0))]),
            Poly.make(3, [(1.0, (0, 0, 0)), (1.0, (0, 2, 0))]),
        ]
    return MetricSpec.riemannian(n, MatrixField.diagonal(polys))


def make_randers(n=3, const_d=False):
    a = MatrixField.identity(n)
    if const_d:
        d = CovectorField.constant([0.3] + [0.0] * (n - 1))
    else:
        # mild x-dependence, |d| < 1 on the sampling box
        comps = [Poly.make(n, [(0.3, (0,) * n), (0.1, tuple(1 if k == (1 % n) else 0 for k in range(n)))])]
        comps += [Poly.constant(n, 0.1) for _ in range(n - 1)]
        d = CovectorField(tuple(comps))
    return MetricSpec.randers(n, a, d)


def make_kropina(n=3):
    a = MatrixField.identity(n)
    d = CovectorField.constant([1.0] + [0.1] * (n - 1))
    return MetricSpec.kropina(n, a, d)


METRIC_MAKERS = {
    "euclidean": lambda n=3: MetricSpec.euclidean(n),
    "riemannian": make_riemannian,
    "randers": make_randers,
    "kropina": make_kropina,
}
