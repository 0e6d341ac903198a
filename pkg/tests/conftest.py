import numpy as np
import pytest

from annulus_abc.curves import ParametricCurve
from annulus_abc.mesh import generate_annulus


def fd_grad(f, x, h=1e-3):
    """Fourth-order central gradient of ``f`` at a single point; returns (..., 2)."""
    x = np.asarray(x, dtype=float)
    out = []
    for d in range(2):
        e = np.zeros(2)
        e[d] = h
        out.append((-f(x + 2 * e) + 8 * f(x + e) - 8 * f(x - e) + f(x - 2 * e)) / (12 * h))
    return np.stack(out, axis=-1)


def guenter_traction(grad, n, lam, mu):
    """Elastic traction from a gradient ``grad[a, b] = d_b v_a``.

    Written in the form ``2 mu dv/dn + lam n div v + mu n_perp (d2 v1 - d1 v2)``
    with ``n_perp = (-n2, n1)``.
    """
    n = np.asarray(n, dtype=float)
    dvdn = grad @ n
    div = grad[0, 0] + grad[1, 1]
    curl = grad[0, 1] - grad[1, 0]
    nperp = np.array([-n[1], n[0]])
    return 2 * mu * dvdn + lam * n * div + mu * nperp * curl


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture(scope="session")
def cc_mesh():
    """Unit circle inside a radius-3 circle."""
    return generate_annulus(ParametricCurve("circle"), ParametricCurve("circle", 3.0), 0.5)


@pytest.fixture(scope="session")
def ck_mesh():
    return generate_annulus(ParametricCurve("kite"), ParametricCurve("circle", 3.0), 0.4)
