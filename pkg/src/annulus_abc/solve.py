"""Sparse direct solution of the coupled system and error norms."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import AssembledSystem, p1_geometry, quadrature_points, rigid_motions
from .mesh import Mesh

RESIDUAL_TOL = 1e-10
# condition estimates above this are treated as numerically singular
CONDITION_LIMIT = 1e13


class NumericalFailure(RuntimeError):
    pass


class SingularSystemError(NumericalFailure):
    pass


@dataclass
class Solution:
    coefficients: np.ndarray
    multipliers: np.ndarray
    residual: float
    condition: float
    timings: dict = field(default_factory=dict)

    def nodal(self, sigma: int) -> np.ndarray:
        return self.coefficients.reshape(-1, sigma)


def bordered_matrix(system: AssembledSystem) -> sp.csc_matrix:
    m = system.matrix()
    if system.constraints is None:
        return m.tocsc()
    c = sp.csr_matrix(system.constraints.astype(complex))
    zero = sp.csr_matrix((c.shape[0], c.shape[0]), dtype=complex)
    return sp.bmat([[m, c.T], [c, zero]], format="csc")


def condition_estimate(mat: sp.csc_matrix, lu) -> float:
    """One-norm condition estimate from an existing LU factorization."""
    n = mat.shape[0]
    inv = spla.LinearOperator(
        (n, n), matvec=lu.solve, rmatvec=lambda v: lu.solve(v, trans="H"), dtype=complex
    )
    inv_norm = spla.onenormest(inv)
    return float(spla.norm(mat, 1) * inv_norm)


def solve_system(system: AssembledSystem, check_condition: bool = True) -> Solution:
    """Factor with SuperLU, solve and verify the relative residual."""
    t0 = time.perf_counter()
    mat = bordered_matrix(system)
    rhs = system.rhs
    n_con = 0 if system.constraints is None else system.constraints.shape[0]
    b = np.concatenate([rhs, np.zeros(n_con, dtype=complex)])
    try:
        lu = spla.splu(mat, permc_spec="COLAMD")
    except RuntimeError as exc:
        raise SingularSystemError(f"factorization failed: {exc}") from exc
    x = lu.solve(b)
    t1 = time.perf_counter()

    cond = condition_estimate(mat, lu) if check_condition else float("nan")
    if check_condition and not cond <= CONDITION_LIMIT:
        raise SingularSystemError(f"system is numerically singular (condition estimate {cond:.3g})")
    if not np.all(np.isfinite(x)):
        raise NumericalFailure("solution contains non-finite values")
    bnorm = np.linalg.norm(b)
    res = np.linalg.norm(mat @ x - b) / (bnorm if bnorm > 0 else 1.0)
    if res > RESIDUAL_TOL:
        raise NumericalFailure(f"relative residual {res:.3g} exceeds {RESIDUAL_TOL}")
    timings = {"solve": t1 - t0}
    return Solution(x[: system.n_dof], x[system.n_dof :], float(res), cond, timings)


# -- error norms ---------------------------------------------------------------------


@dataclass
class ErrorReport:
    l2: float
    h1_semi: float

    @property
    def h1(self) -> float:
        return float(np.sqrt(self.l2**2 + self.h1_semi**2))


def evaluate_p1(mesh: Mesh, coeffs: np.ndarray, sigma: int, degree: int = 4):
    """Values ``(T, Q, s)`` and gradients ``(T, Q, s, 2)`` at the quadrature points."""
    _, g = p1_geometry(mesh)
    _, _, bary = quadrature_points(mesh, degree)
    nodal = coeffs.reshape(-1, sigma)[mesh.triangles]  # (T, 3, s)
    val = np.einsum("qa,tas->tqs", bary, nodal)
    grad = np.einsum("tas,tad->tsd", nodal, g)
    grad = np.broadcast_to(grad[:, None], (len(g), bary.shape[0]) + grad.shape[1:])
    return val, grad


def compute_errors(
    mesh: Mesh, coeffs: np.ndarray, exact, sigma: int, align: bool = False, degree: int = 4
) -> ErrorReport:
    """L2 and H1-seminorm errors of a P1 field against ``exact(points)``.

    ``exact`` returns values ``(N, s)`` and gradients ``(N, s, 2)``.  With
    ``align`` the error is first made L2-orthogonal to the static nullspace
    (constants, or rigid motions for two-component fields).
    """
    pts, w, _ = quadrature_points(mesh, degree)
    uh, guh = evaluate_p1(mesh, coeffs, sigma, degree)
    flat = pts.reshape(-1, 2)
    ue, gue = exact(flat)
    ue = np.asarray(ue).reshape(uh.shape)
    gue = np.asarray(gue).reshape(guh.shape)
    e = uh - ue
    ge = guh - gue
    if align:
        modes = rigid_motions(flat, sigma).reshape((-1,) + e.shape)  # (m, T, Q, s)
        gram = np.einsum("mtqs,ntqs,tq->mn", modes, modes, w)
        proj = np.einsum("mtqs,tqs,tq->m", modes, e, w)
        coef = np.linalg.solve(gram, proj)
        e = e - np.einsum("m,mtqs->tqs", coef, modes)
        if sigma == 2:
            # gradient of the rotation mode (-y, x)
            rot = np.array([[0.0, -1.0], [1.0, 0.0]])
            ge = ge - coef[2] * rot
    l2 = np.sqrt(np.einsum("tq,tqs->", w, np.abs(e) ** 2).real)
    semi = np.sqrt(np.einsum("tq,tqsd->", w, np.abs(ge) ** 2).real)
    return ErrorReport(float(l2), float(semi))


def neumann_residual(mesh: Mesh, system: AssembledSystem, coeffs: np.ndarray, sigma: int) -> float:
    """Relative size of ``a(u_h, phi) + int_Gamma g phi`` over obstacle hats."""
    if "gamma" not in mesh.loops:
        return float("nan")
    verts = mesh.loops["gamma"].vertices
    dofs = (sigma * verts[:, None] + np.arange(sigma)).ravel()
    au = system.A @ coeffs
    r = au[dofs] - system.rhs[dofs]
    scale = max(np.abs(system.rhs[dofs]).max(), np.abs(au[dofs]).max(), 1e-300)
    return float(np.abs(r).max() / scale)
