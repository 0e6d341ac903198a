"""Fundamental solutions and their traction derivatives.

Every kernel is written as ``u*(x, y) = phi(r) I + grad grad psi(r)`` with
``r = |x - y|`` and radial ``phi``, ``psi`` (``psi`` absent for scalar
problems).  Cartesian derivatives of a radial function ``f`` follow from the
sequence ``g_0 = f``, ``g_{m+1} = g_m'(r) / r``::

    d_i f       = z_i g1
    d_ij f      = d_ij g1 + z_i z_j g2
    d_ijk f     = (d_ij z_k + d_ik z_j + d_jk z_i) g2 + z_i z_j z_k g3
    d_ijkl f    = (d_ij d_kl + d_ik d_jl + d_il d_jk) g2 + (six d z z terms) g3 + z_i z_j z_k z_l g4

with ``z = x - y``.  For ``c H0(k r)`` the sequence is ``g_m = c (-k)^m H_m(k r) / r^m``.

Sign convention: each kernel solves ``L u* = -delta`` so that exterior
fields satisfy ``u = D(u) - S(Tu)``.  Kernel arrays carry a trailing
``(sigma, sigma)`` pair even for scalar problems.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from math import factorial

import numpy as np

from .specfun import hankel1_upto

OPERATORS = ("laplace", "helmholtz", "lame", "navier")
MIN_SEPARATION = 1e-8

_I2 = np.eye(2)


class SeparationError(ValueError):
    """A kernel was evaluated at (nearly) coincident points."""


@dataclass(frozen=True)
class KernelSet:
    operator: str
    k: float = 0.0
    lam: float = 0.0
    mu: float = 1.0
    rho: float = 1.0
    omega: float = 0.0

    def __post_init__(self):
        if self.operator not in OPERATORS:
            raise ValueError(f"unknown operator {self.operator!r}")
        if self.operator == "helmholtz" and not self.k > 0:
            raise ValueError("helmholtz needs k > 0")
        if self.sigma == 2:
            if not (self.mu > 0 and self.lam + self.mu > 0):
                raise ValueError("Lame parameters need mu > 0 and lam + mu > 0")
        if self.operator == "navier" and not (self.rho > 0 and self.omega > 0):
            raise ValueError("navier needs rho > 0 and omega > 0")

    @property
    def sigma(self) -> int:
        return 1 if self.operator in ("laplace", "helmholtz") else 2

    @property
    def is_static(self) -> bool:
        return self.operator in ("laplace", "lame")

    @property
    def kp(self) -> float:
        return float(np.sqrt(self.rho * self.omega**2 / (self.lam + 2 * self.mu)))

    @property
    def ks(self) -> float:
        return float(np.sqrt(self.rho * self.omega**2 / self.mu))

    @property
    def mass_coefficient(self) -> float:
        """Coefficient of the zeroth-order term: ``k^2`` or ``rho omega^2``."""
        if self.operator == "helmholtz":
            return self.k**2
        if self.operator == "navier":
            return self.rho * self.omega**2
        return 0.0

    def radial_parts(self):
        """``(phi, psi)`` as lists of radial terms."""
        if self.operator == "laplace":
            return [("log", -1 / (2 * np.pi))], None
        if self.operator == "helmholtz":
            return [("hankel", 0.25j, self.k)], None
        lam, mu = self.lam, self.mu
        if self.operator == "lame":
            a = (lam + 3 * mu) / (4 * np.pi * mu * (lam + 2 * mu))
            b = (lam + mu) / (lam + 3 * mu)
            # z z^T / r^2 = (grad grad (r^2 log r) - (2 log r + 1) I) / 2
            phi = [("log", -a * (1 + b)), ("const", -0.5 * a * b)]
            return phi, [("r2log", 0.5 * a * b)]
        c = 0.25j / (self.rho * self.omega**2)
        phi = [("hankel", 0.25j / mu, self.ks)]
        psi = [("hankel", c, self.ks), ("hankel", -c, self.kp)]
        return phi, psi


def radial_sequence(terms, r: np.ndarray, mmax: int) -> list[np.ndarray]:
    """``[g_0, ..., g_mmax]`` for a sum of radial terms."""
    out = [np.zeros(r.shape, dtype=complex) for _ in range(mmax + 1)]
    logr = np.log(r)
    for term in terms:
        kind, c = term[0], term[1]
        if kind == "const":
            out[0] += c
        elif kind == "log":
            out[0] += c * logr
            for m in range(1, mmax + 1):
                out[m] += c * (-2.0) ** (m - 1) * factorial(m - 1) * r ** (-2 * m)
        elif kind == "r2log":
            seq = [r * r * logr, 2 * logr + 1, 2 / r**2, -4 / r**4, 16 / r**6]
            for m in range(mmax + 1):
                out[m] += c * seq[m]
        elif kind == "hankel":
            k = term[2]
            h = hankel1_upto(mmax, k * r)
            for m in range(mmax + 1):
                out[m] += c * (-k) ** m * h[m] / r**m
        else:
            raise ValueError(kind)
    return out


def radial_tensors(g: list[np.ndarray], z: np.ndarray, order: int) -> list[np.ndarray]:
    """Cartesian derivative tensors of a radial function up to ``order`` (<= 4).

    With ``g_{m+1} = g_m' / r`` the derivatives are sums of Kronecker deltas
    and products of ``z`` components, weighted by ``g_1 .. g_4``.
    """
    n = len(z)
    zc = (z[:, 0], z[:, 1])
    out = [g[0]]
    if order >= 1:
        out.append(z * g[1][:, None])
    if order >= 2:
        t = np.empty((n, 2, 2), dtype=np.result_type(g[1], z))
        for i, j in product(range(2), repeat=2):
            t[:, i, j] = (i == j) * g[1] + zc[i] * zc[j] * g[2]
        out.append(t)
    if order >= 3:
        t = np.empty((n,) + (2,) * 3, dtype=np.result_type(g[2], z))
        for i, j, k in product(range(2), repeat=3):
            d = (i == j) * zc[k] + (i == k) * zc[j] + (j == k) * zc[i]
            t[:, i, j, k] = d * g[2] + zc[i] * zc[j] * zc[k] * g[3]
        out.append(t)
    if order >= 4:
        t = np.empty((n,) + (2,) * 4, dtype=np.result_type(g[2], z))
        for i, j, k, l in product(range(2), repeat=4):
            dd = (i == j) * (k == l) + (i == k) * (j == l) + (i == l) * (j == k)
            dzz = (
                (i == j) * zc[k] * zc[l]
                + (i == k) * zc[j] * zc[l]
                + (i == l) * zc[j] * zc[k]
                + (j == k) * zc[i] * zc[l]
                + (j == l) * zc[i] * zc[k]
                + (k == l) * zc[i] * zc[j]
            )
            t[:, i, j, k, l] = dd * g[2] + dzz * g[3] + zc[i] * zc[j] * zc[k] * zc[l] * g[4]
        out.append(t)
    return out


def _pairs(x, y, min_sep):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    shape = np.broadcast_shapes(x.shape, y.shape)[:-1]
    z = (x - y).reshape(-1, 2)
    r = np.linalg.norm(z, axis=1)
    if r.size and r.min() < min_sep:
        raise SeparationError(f"kernel evaluated at separation {r.min():.3g} < {min_sep:.3g}")
    return z, r, shape


def kernel_derivatives(kset: KernelSet, z: np.ndarray, r: np.ndarray, order: int):
    """``u*`` and its first ``order`` derivatives in ``z = x - y``.

    Returns arrays shaped ``(N, s, s)``, ``(N, s, s, 2)``, ``(N, s, s, 2, 2)``.
    """
    phi, psi = kset.radial_parts()
    tp = radial_tensors(radial_sequence(phi, r, order), z, order)
    n = len(r)
    if psi is None:
        out = [tp[0].reshape(n, 1, 1)]
        for m in range(1, order + 1):
            out.append(tp[m].reshape((n, 1, 1) + (2,) * m))
        return out
    ts = radial_tensors(radial_sequence(psi, r, order + 2), z, order + 2)
    out = [_I2 * tp[0][:, None, None] + ts[2]]
    if order >= 1:
        out.append(_I2[None, :, :, None] * tp[1][:, None, None, :] + ts[3])
    if order >= 2:
        out.append(_I2[None, :, :, None, None] * tp[2][:, None, None, :, :] + ts[4])
    return out


def _dot_axis(t: np.ndarray, n: np.ndarray, axis: int) -> np.ndarray:
    """Contract axis ``axis`` (of length 2) of ``t`` with the per-row vector ``n``."""
    shape = (len(n),) + (1,) * (t.ndim - 2)
    return np.take(t, 0, axis=axis) * n[:, 0].reshape(shape) + np.take(t, 1, axis=axis) * n[:, 1].reshape(shape)


def apply_traction(grad: np.ndarray, n: np.ndarray, kset: KernelSet) -> np.ndarray:
    """Traction of a family of fields given their gradients.

    ``grad[N, a, j, b]`` is ``d_b`` of component ``a`` of field ``j``; ``n`` is
    ``(N, 2)``.  Returns ``t[N, a, j]``.  Scalar problems use ``dv/dn``; the
    elastic traction is ``lam n div v + mu (grad v + grad v^T) n``, which equals
    ``2 mu dv/dn + lam n div v + mu n_perp (d2 v1 - d1 v2)``.
    """
    if kset.sigma == 1:
        return _dot_axis(grad, n, 3)
    div = grad[:, 0, :, 0] + grad[:, 1, :, 1]
    sym = _dot_axis(grad, n, 3) + _dot_axis(grad, n, 1).transpose(0, 2, 1)
    return kset.lam * n[:, :, None] * div[:, None, :] + kset.mu * sym


def _normals(n, count):
    n = np.asarray(n, dtype=float).reshape(-1, 2)
    if len(n) == 1 and count > 1:
        n = np.repeat(n, count, axis=0)
    return n


def fundamental(kset: KernelSet, x, y, min_sep: float = MIN_SEPARATION) -> np.ndarray:
    z, r, shape = _pairs(x, y, min_sep)
    s = kset.sigma
    return kernel_derivatives(kset, z, r, 0)[0].reshape(shape + (s, s))


def traction_y(kset: KernelSet, x, y, n_y, min_sep: float = MIN_SEPARATION) -> np.ndarray:
    """``T_y`` applied column-wise to ``u*(x, .)``."""
    z, r, shape = _pairs(x, y, min_sep)
    du = kernel_derivatives(kset, z, r, 1)[1]
    s = kset.sigma
    return apply_traction(-du, _normals(n_y, len(r)), kset).reshape(shape + (s, s))


def traction_x(kset: KernelSet, x, y, n_x, min_sep: float = MIN_SEPARATION) -> np.ndarray:
    """``T_x`` applied column-wise to ``u*(., y)``."""
    z, r, shape = _pairs(x, y, min_sep)
    du = kernel_derivatives(kset, z, r, 1)[1]
    s = kset.sigma
    return apply_traction(du, _normals(n_x, len(r)), kset).reshape(shape + (s, s))


def _double_layer_pair(kset, z, r, n_x, n_y, need_hyper=True):
    """``(T_y u*)^T`` and ``T_x`` applied column-wise to it."""
    order = 2 if need_hyper else 1
    ders = kernel_derivatives(kset, z, r, order)
    k = apply_traction(-ders[1], n_y, kset)
    m = k.transpose(0, 2, 1)
    if not need_hyper:
        return m, None
    # x-derivative of k[a, j] along index l, arranged as grad of column a of m
    ddu = -ders[2]
    s = kset.sigma
    if s == 1:
        dk = _dot_axis(ddu, n_y, 3)
    else:
        div = ddu[:, 0, :, 0, :] + ddu[:, 1, :, 1, :]
        sym = _dot_axis(ddu, n_y, 3) + _dot_axis(ddu, n_y, 1).transpose(0, 2, 1, 3)
        dk = kset.lam * n_y[:, :, None, None] * div[:, None, :, :] + kset.mu * sym
    grad_m = dk.transpose(0, 2, 1, 3)  # [N, j, a, l]: d_l of component j of column a
    return m, apply_traction(grad_m, n_x, kset)


def traction_xy(kset: KernelSet, x, y, n_x, n_y, min_sep: float = 0.1) -> np.ndarray:
    """``T_x`` applied column-wise to ``(T_y u*(x, y))^T``."""
    z, r, shape = _pairs(x, y, min_sep)
    s = kset.sigma
    _, h = _double_layer_pair(kset, z, r, _normals(n_x, len(r)), _normals(n_y, len(r)))
    return h.reshape(shape + (s, s))


def double_layer(kset: KernelSet, x, y, n_y, min_sep: float = MIN_SEPARATION) -> np.ndarray:
    """``(T_y u*(x, y))^T``, the double-layer kernel."""
    s = kset.sigma
    return np.swapaxes(traction_y(kset, x, y, n_y, min_sep), -1, -2).reshape(
        np.broadcast_shapes(np.shape(x), np.shape(y))[:-1] + (s, s)
    )
