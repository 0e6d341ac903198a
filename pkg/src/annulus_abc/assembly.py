"""Galerkin assembly of ``a(u, v) + b(u, v) = l(v)`` over P1 elements.

Degree of freedom ``sigma * vertex + component``.  Rows are test functions,
columns trial functions.  Boundary integrals run over the mesh's polygonal
boundaries with the polygon's edge normals.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .curves import BoundaryQuadrature, polygon_quadrature
from .kernels import KernelSet, _double_layer_pair, kernel_derivatives, apply_traction
from .mesh import Mesh

# pairs of (x, y) quadrature points per kernel evaluation chunk
CHUNK_PAIRS = 40_000
# Gauss points per panel for the local data term -int_Gamma g v; it costs O(panels)
# and g can vary quickly near sources inside the obstacle
DATA_ORDER = 8


class ConfigurationError(ValueError):
    pass


@dataclass
class ProblemSpec:
    """Operator, impedance and data for one boundary value problem.

    ``neumann(points, normals) -> (N, sigma)`` gives ``g`` on the obstacle.
    For the inhomogeneous-medium problem ``incident(points) -> (value, grad)``
    with shapes ``(N,)`` and ``(N, 2)`` and ``refractive_index(points) -> (N,)``.
    An index with a true ``piecewise_constant`` attribute is sampled once per
    triangle at the centroid, so a jump across a meshed interface stays on the
    mesh edges instead of cutting through neighbouring triangles.
    """

    kernels: KernelSet
    alpha: float = 2.0
    neumann: Callable | None = None
    incident: Callable | None = None
    refractive_index: Callable | None = None
    elastic_form: str = "strain"
    c0: float = 0.1

    def __post_init__(self):
        if self.kernels.is_static:
            if self.alpha != 0:
                raise ConfigurationError("static problems use alpha = 0")
        elif self.alpha == 0 or not np.isreal(self.alpha):
            raise ConfigurationError("wave problems need a nonzero real alpha")
        if self.elastic_form not in ("strain", "gradgrad"):
            raise ConfigurationError(f"unknown elastic_form {self.elastic_form!r}")
        if self.inhomogeneous and self.kernels.operator != "helmholtz":
            raise ConfigurationError("the inhomogeneous-medium problem is acoustic")

    @property
    def sigma(self) -> int:
        return self.kernels.sigma

    @property
    def inhomogeneous(self) -> bool:
        return self.refractive_index is not None


@dataclass
class DenseBlock:
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def to_sparse(self, n: int) -> sp.csr_matrix:
        r = np.repeat(self.rows, len(self.cols))
        c = np.tile(self.cols, len(self.rows))
        return sp.csr_matrix((self.values.ravel(), (r, c)), shape=(n, n))


@dataclass
class AssembledSystem:
    n_dof: int
    A: sp.csr_matrix
    boundary_mass: sp.csr_matrix
    blocks: list[DenseBlock]
    rhs: np.ndarray
    constraints: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    def matrix(self) -> sp.csr_matrix:
        m = self.A + self.boundary_mass
        for blk in self.blocks:
            m = m + blk.to_sparse(self.n_dof)
        return m.tocsr()

    def apply(self, u: np.ndarray) -> np.ndarray:
        out = self.A @ u + self.boundary_mass @ u
        for blk in self.blocks:
            out[blk.rows] += blk.values @ u[blk.cols]
        return out


# -- element geometry -----------------------------------------------------------

# Symmetric triangle rules in barycentric coordinates; weights sum to 1.
_TRI_RULES = {
    1: (np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])),
    2: (
        np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]),
        np.full(3, 1 / 3),
    ),
}


def _dunavant(groups):
    pts, wts = [], []
    for a, w in groups:
        if a is None:
            pts.append([1 / 3, 1 / 3, 1 / 3])
            wts.append(w)
            continue
        b = 1 - 2 * a
        for p in ([a, a, b], [a, b, a], [b, a, a]):
            pts.append(p)
            wts.append(w)
    return np.array(pts), np.array(wts)


_TRI_RULES[4] = _dunavant([(0.445948490915965, 0.223381589678011), (0.091576213509771, 0.109951743655322)])
_TRI_RULES[5] = _dunavant(
    [(None, 0.225), (0.470142064105115, 0.132394152788506), (0.101286507323456, 0.125939180544827)]
)


def triangle_rule(degree: int):
    for d in sorted(_TRI_RULES):
        if d >= degree:
            return _TRI_RULES[d]
    raise ValueError(f"no triangle rule of degree {degree}")


def p1_geometry(mesh: Mesh):
    """Areas ``(T,)`` and barycentric gradients ``(T, 3, 2)``."""
    p = mesh.vertices[mesh.triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    inv = np.empty((len(p), 2, 2))
    inv[:, 0, 0], inv[:, 0, 1] = e2[:, 1] / det, -e2[:, 0] / det
    inv[:, 1, 0], inv[:, 1, 1] = -e1[:, 1] / det, e1[:, 0] / det
    # rows of inv are gradients of lambda_1 and lambda_2
    g = np.empty((len(p), 3, 2))
    g[:, 1], g[:, 2] = inv[:, 0], inv[:, 1]
    g[:, 0] = -g[:, 1] - g[:, 2]
    return 0.5 * det, g


def quadrature_points(mesh: Mesh, degree: int, triangles: np.ndarray | None = None):
    """Physical points ``(T, Q, 2)``, weights ``(T, Q)`` and barycentrics ``(Q, 3)``."""
    tri = mesh.triangles if triangles is None else mesh.triangles[triangles]
    bary, w = triangle_rule(degree)
    p = mesh.vertices[tri]
    pts = np.einsum("qa,tad->tqd", bary, p)
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    return pts, area[:, None] * w[None, :], bary


def index_values(mesh: Mesh, spec: ProblemSpec, pts: np.ndarray, triangles: np.ndarray | None = None) -> np.ndarray:
    """Refractive index at quadrature points ``pts[T, Q, 2]`` -> ``(T, Q)``."""
    index = spec.refractive_index
    if getattr(index, "piecewise_constant", False):
        tri = mesh.triangles if triangles is None else mesh.triangles[triangles]
        cen = mesh.vertices[tri].mean(axis=1)
        return np.repeat(np.asarray(index(cen))[:, None], pts.shape[1], axis=1)
    return np.asarray(index(pts.reshape(-1, 2))).reshape(pts.shape[:2])


def _scatter(mesh: Mesh, local: np.ndarray, sigma: int, n_dof: int) -> sp.csr_matrix:
    """Sum element matrices ``local[T, 3*s, 3*s]`` (dof order vertex-major)."""
    dofs = (sigma * mesh.triangles[:, :, None] + np.arange(sigma)[None, None, :]).reshape(len(local), -1)
    nloc = dofs.shape[1]
    r = np.repeat(dofs, nloc, axis=1).ravel()
    c = np.tile(dofs, (1, nloc)).ravel()
    return sp.csr_matrix((local.ravel(), (r, c)), shape=(n_dof, n_dof))


def p1_mass_local(area: np.ndarray) -> np.ndarray:
    base = (np.ones((3, 3)) + np.eye(3)) / 12.0
    return area[:, None, None] * base[None]


def lumped_mass(mesh: Mesh) -> np.ndarray:
    area, _ = p1_geometry(mesh)
    m = np.zeros(mesh.n_vertices)
    np.add.at(m, mesh.triangles.ravel(), np.repeat(area / 3.0, 3))
    return m


def _expand_scalar(local: np.ndarray, sigma: int) -> np.ndarray:
    """Scalar element matrix times the ``sigma x sigma`` identity."""
    if sigma == 1:
        return local
    t = len(local)
    out = np.einsum("tab,cd->tacbd", local, np.eye(sigma))
    return out.reshape(t, 3 * sigma, 3 * sigma)


# -- interior form ----------------------------------------------------------------


def assemble_interior(mesh: Mesh, spec: ProblemSpec, volume_degree: int = 2) -> sp.csr_matrix:
    """Sparse matrix of the volume form ``a``."""
    ks = spec.kernels
    s = ks.sigma
    n_dof = s * mesh.n_vertices
    area, g = p1_geometry(mesh)
    if s == 1:
        local = area[:, None, None] * np.einsum("tad,tbd->tab", g, g)
    else:
        lam, mu = ks.lam, ks.mu
        gg = np.einsum("tad,tbd->tab", g, g)
        eye = np.eye(2)
        # local[(a,c),(b,d)] for test phi_a e_c, trial phi_b e_d
        term_lap = mu * np.einsum("tab,cd->tacbd", gg, eye)
        term_div = np.einsum("tac,tbd->tacbd", g, g)
        if spec.elastic_form == "strain":
            term_cross = mu * np.einsum("tad,tbc->tacbd", g, g)
            local = term_lap + term_cross + lam * term_div
        else:
            local = term_lap + (lam + mu) * term_div
        local = area[:, None, None] * local.reshape(len(area), 6, 6)

    mass_coef = ks.mass_coefficient
    if spec.inhomogeneous:
        pts, w, bary = quadrature_points(mesh, volume_degree)
        nq = index_values(mesh, spec, pts)
        mass = np.einsum("tq,qa,qb->tab", w * nq, bary, bary)
        local = local - ks.k**2 * mass
    elif mass_coef:
        local = local - mass_coef * _expand_scalar(p1_mass_local(area), s)
    return _scatter(mesh, local.astype(complex), s, n_dof)


# -- boundary pieces ----------------------------------------------------------------


def boundary_quadrature(mesh: Mesh, name: str, order: int = 4, subdivisions: int = 1) -> BoundaryQuadrature:
    loop = mesh.loops[name]
    return polygon_quadrature(mesh.vertices, loop.vertices, order, subdivisions)


def _trace_matrix(quad: BoundaryQuadrature, n_vertices: int) -> sp.csr_matrix:
    """``P[q, v]`` = value at node ``q`` of the hat function of vertex ``v``."""
    nq = quad.order
    npan = quad.n_panels
    rows = np.repeat(np.arange(npan * nq), 2)
    cols = np.repeat(quad.panel_vertices, nq, axis=0).ravel()
    vals = np.tile(quad.basis, (npan, 1)).ravel()
    return sp.csr_matrix((vals, (rows, cols)), shape=(npan * nq, n_vertices))


def _local_trace(quad: BoundaryQuadrature, n_vertices: int):
    """Trace matrix restricted to the vertices touched by ``quad``."""
    full = _trace_matrix(quad, n_vertices).tocsc()
    verts = np.unique(quad.panel_vertices)
    return full[:, verts].tocsr(), verts


def _dofs(verts: np.ndarray, sigma: int) -> np.ndarray:
    return (sigma * verts[:, None] + np.arange(sigma)[None, :]).ravel()


def assemble_boundary_mass(mesh: Mesh, spec: ProblemSpec, name: str = "gamma0") -> sp.csr_matrix:
    """``-i alpha`` times the P1 mass matrix on the polygonal boundary ``name``."""
    s = spec.sigma
    n_dof = s * mesh.n_vertices
    if spec.alpha == 0:
        return sp.csr_matrix((n_dof, n_dof), dtype=complex)
    e = mesh.loops[name].edges()
    length = np.linalg.norm(mesh.vertices[e[:, 1]] - mesh.vertices[e[:, 0]], axis=1)
    base = (np.ones((2, 2)) + np.eye(2)) / 6.0
    local = length[:, None, None] * base[None]
    local = np.einsum("tab,cd->tacbd", local, np.eye(s)).reshape(len(e), 2 * s, 2 * s)
    dofs = (s * e[:, :, None] + np.arange(s)).reshape(len(e), -1)
    r = np.repeat(dofs, 2 * s, axis=1).ravel()
    c = np.tile(dofs, (1, 2 * s)).ravel()
    m = sp.csr_matrix((local.ravel(), (r, c)), shape=(n_dof, n_dof))
    return (-1j * spec.alpha) * m.astype(complex)


def _chunks(n_rows: int, n_cols: int):
    step = max(1, CHUNK_PAIRS // max(n_cols, 1))
    for start in range(0, n_rows, step):
        yield slice(start, min(n_rows, start + step))


def abc_kernel(spec: ProblemSpec, x, nx, y, ny) -> np.ndarray:
    """``T_x (T_y u*)^T - i alpha (T_y u*)^T`` on the grid ``x`` by ``y``.

    Returns ``(len(x), s, len(y), s)``.
    """
    ks = spec.kernels
    s = ks.sigma
    nxq, nyq = len(x), len(y)
    z = (x[:, None, :] - y[None, :, :]).reshape(-1, 2)
    r = np.linalg.norm(z, axis=1)
    if r.min() < spec.c0:
        raise ConfigurationError(f"boundaries closer than c0 = {spec.c0} (found {r.min():.3g})")
    n_x = np.repeat(nx, nyq, axis=0)
    n_y = np.tile(ny, (nxq, 1))
    m, h = _double_layer_pair(ks, z, r, n_x, n_y)
    kern = h - 1j * spec.alpha * m if spec.alpha else h
    return kern.reshape(nxq, nyq, s, s).transpose(0, 2, 1, 3)


def single_layer_kernel(spec: ProblemSpec, x, nx, y) -> np.ndarray:
    """``T_x u* - i alpha u*`` on the grid; ``(len(x), s, len(y), s)``."""
    ks = spec.kernels
    s = ks.sigma
    nxq, nyq = len(x), len(y)
    z = (x[:, None, :] - y[None, :, :]).reshape(-1, 2)
    r = np.linalg.norm(z, axis=1)
    if r.min() < spec.c0:
        raise ConfigurationError(f"source points closer than c0 = {spec.c0} to the artificial boundary")
    u, du = kernel_derivatives(ks, z, r, 1)
    kern = apply_traction(du, np.repeat(nx, nyq, axis=0), ks)
    if spec.alpha:
        kern = kern - 1j * spec.alpha * u
    return kern.reshape(nxq, nyq, s, s).transpose(0, 2, 1, 3)


def _galerkin_block(kernel_fn, x_trace, wx, y_trace, wy, s, n_x):
    """``sum_x sum_y w_x w_y phi_i(x) K(x, y) phi_j(y)`` for all hat pairs."""
    rows_loc = x_trace.shape[1]
    cols_loc = y_trace.shape[1]
    nqy = len(wy)
    yw = sp.diags(wy) @ y_trace  # (nqy, ncol)
    xw = (sp.diags(wx) @ x_trace).T.tocsr()  # (nrow, nqx)
    out = np.zeros((rows_loc, s * cols_loc * s), dtype=complex)
    for sl in _chunks(n_x, nqy):
        kern = kernel_fn(sl)  # (nx_chunk, s, nqy, s)
        nxc = kern.shape[0]
        flat = kern.transpose(0, 1, 3, 2).reshape(-1, nqy)
        ky = (yw.T @ flat.T).T  # (nx_chunk * s * s, ncol), rows ordered (x, c, d)
        ky = ky.reshape(nxc, s, s, cols_loc).transpose(0, 1, 3, 2).reshape(nxc, -1)
        out += xw[:, sl] @ ky
    return out.reshape(rows_loc * s, cols_loc * s)


def assemble_abc_block(
    mesh: Mesh, spec: ProblemSpec, gamma_quad: BoundaryQuadrature, gamma0_quad: BoundaryQuadrature
) -> DenseBlock:
    """Dense ``Gamma0 x Gamma`` block of ``-int_{Gamma0} Lambda_alpha D(u) . v``."""
    s = spec.sigma
    x_trace, x_verts = _local_trace(gamma0_quad, mesh.n_vertices)
    y_trace, y_verts = _local_trace(gamma_quad, mesh.n_vertices)
    x, nx = gamma0_quad.points, gamma0_quad.normals
    y, ny = gamma_quad.points, gamma_quad.normals

    def kern(sl):
        return abc_kernel(spec, x[sl], nx[sl], y, ny)

    vals = _galerkin_block(kern, x_trace, gamma0_quad.weights, y_trace, gamma_quad.weights, s, len(x))
    return DenseBlock(_dofs(x_verts, s), _dofs(y_verts, s), -vals)


def assemble_load(
    mesh: Mesh, spec: ProblemSpec, gamma_quad: BoundaryQuadrature | None, gamma0_quad: BoundaryQuadrature
) -> np.ndarray:
    """Load vector ``l(v)``."""
    s = spec.sigma
    n_dof = s * mesh.n_vertices
    rhs = np.zeros(n_dof, dtype=complex)
    x_trace, x_verts = _local_trace(gamma0_quad, mesh.n_vertices)
    wx = gamma0_quad.weights
    x, nx = gamma0_quad.points, gamma0_quad.normals

    if spec.inhomogeneous:
        val, grad = spec.incident(x)
        lam_ui = np.einsum("qd,qd->q", grad, nx) - 1j * spec.alpha * val
        rhs[_dofs(x_verts, 1)] += x_trace.T @ (wx * lam_ui)
        return rhs

    if spec.neumann is None:
        return rhs
    if gamma_quad.order < DATA_ORDER:
        local_quad = polygon_quadrature(mesh.vertices, gamma_quad.panel_vertices[:, 0], DATA_ORDER)
    else:
        local_quad = gamma_quad
    g_loc = np.asarray(spec.neumann(local_quad.points, local_quad.normals), dtype=complex).reshape(-1, s)
    loc_trace, loc_verts = _local_trace(local_quad, mesh.n_vertices)
    rhs[_dofs(loc_verts, s)] -= (loc_trace.T @ (local_quad.weights[:, None] * g_loc)).ravel()

    y, ny, wy = gamma_quad.points, gamma_quad.normals, gamma_quad.weights
    g = np.asarray(spec.neumann(y, ny), dtype=complex).reshape(len(y), s)
    gw = wy[:, None] * g
    field_x = np.zeros((len(x), s), dtype=complex)
    for sl in _chunks(len(x), len(y)):
        kern = single_layer_kernel(spec, x[sl], nx[sl], y)
        field_x[sl] = np.einsum("xcqd,qd->xc", kern, gw)
    rhs[_dofs(x_verts, s)] -= (x_trace.T @ (wx[:, None] * field_x)).ravel()
    return rhs


def contrast_support(mesh: Mesh, spec: ProblemSpec, degree: int = 2) -> np.ndarray:
    """Triangles where ``n != 1`` at the centroid or any quadrature point."""
    pts, _, _ = quadrature_points(mesh, degree)
    cen = mesh.vertices[mesh.triangles].mean(axis=1)
    dn_q = np.abs(1 - index_values(mesh, spec, pts))
    dn_c = np.abs(1 - spec.refractive_index(cen))
    return np.flatnonzero((dn_c > 0) | np.any(dn_q > 0, axis=1))


def assemble_volume_block(
    mesh: Mesh, spec: ProblemSpec, gamma0_quad: BoundaryQuadrature, degree: int = 2
) -> DenseBlock | None:
    """Dense block of ``+int_{Gamma0} k^2 Lambda_alpha V((1 - n) u) . v``."""
    tris = contrast_support(mesh, spec, degree)
    if len(tris) == 0:
        return None
    k2 = spec.kernels.k ** 2
    pts, w, bary = quadrature_points(mesh, degree, tris)
    y = pts.reshape(-1, 2)
    contrast = 1 - index_values(mesh, spec, pts, tris)
    cols = np.unique(mesh.triangles[tris])
    local = np.searchsorted(cols, mesh.triangles[tris])  # (T, 3)
    nq = bary.shape[0]
    qidx = np.repeat(np.arange(len(y)), 3)
    vals = np.tile(bary.ravel(), len(tris))
    vidx = np.repeat(local, nq, axis=0).ravel()
    y_trace = sp.csr_matrix((vals, (qidx, vidx)), shape=(len(y), len(cols)))
    wy = (w * contrast).ravel()

    x_trace, x_verts = _local_trace(gamma0_quad, mesh.n_vertices)
    x, nx = gamma0_quad.points, gamma0_quad.normals

    def kern(sl):
        return single_layer_kernel(spec, x[sl], nx[sl], y)

    vals = _galerkin_block(kern, x_trace, gamma0_quad.weights, y_trace, wy, 1, len(x))
    return DenseBlock(x_verts, cols, k2 * vals)


def rigid_motions(points: np.ndarray, sigma: int) -> np.ndarray:
    """Basis of the static nullspace sampled at ``points``: ``(m, N, sigma)``."""
    if sigma == 1:
        return np.ones((1, len(points), 1))
    z = np.zeros(len(points))
    o = np.ones(len(points))
    return np.array(
        [
            np.stack([o, z], axis=1),
            np.stack([z, o], axis=1),
            np.stack([-points[:, 1], points[:, 0]], axis=1),
        ]
    )


def assemble_constraints(mesh: Mesh, spec: ProblemSpec) -> np.ndarray:
    """Rows of lumped-mass orthogonality to constants (Laplace) or rigid motions (Lame)."""
    if not spec.kernels.is_static:
        raise ConfigurationError("constraints only apply to static problems")
    s = spec.sigma
    m = lumped_mass(mesh)
    modes = rigid_motions(mesh.vertices, s)
    return (modes * m[None, :, None]).reshape(len(modes), -1)


def assemble_system(
    mesh: Mesh,
    spec: ProblemSpec,
    boundary_order: int = 4,
    subdivisions: int = 1,
    volume_degree: int = 2,
    constrain: bool = True,
    timings: dict | None = None,
) -> AssembledSystem:
    """Everything the solver needs for one mesh."""
    timings = {} if timings is None else timings
    t0 = time.perf_counter()
    s = spec.sigma
    n_dof = s * mesh.n_vertices
    A = assemble_interior(mesh, spec, volume_degree)
    mass = assemble_boundary_mass(mesh, spec)
    timings["assemble_sparse"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    q0 = boundary_quadrature(mesh, "gamma0", boundary_order, subdivisions)
    blocks = []
    if spec.inhomogeneous:
        qg = None
        blk = assemble_volume_block(mesh, spec, q0, volume_degree)
        if blk is not None:
            blocks.append(blk)
    else:
        qg = boundary_quadrature(mesh, "gamma", boundary_order, subdivisions)
        blocks.append(assemble_abc_block(mesh, spec, qg, q0))
    rhs = assemble_load(mesh, spec, qg, q0)
    timings["assemble_dense"] = time.perf_counter() - t0

    constraints = None
    if spec.kernels.is_static and constrain:
        constraints = assemble_constraints(mesh, spec)
    return AssembledSystem(n_dof, A, mass, blocks, rhs, constraints)
