import numpy as np
import pytest

from annulus_abc.assembly import (
    ConfigurationError,
    ProblemSpec,
    assemble_abc_block,
    assemble_boundary_mass,
    assemble_constraints,
    assemble_interior,
    assemble_load,
    assemble_system,
    assemble_volume_block,
    boundary_quadrature,
    lumped_mass,
    rigid_motions,
)
from annulus_abc.config import RefractiveIndex
from annulus_abc.curves import ParametricCurve
from annulus_abc.exact import DipoleLaplace, PlaneWave, scattering_data
from annulus_abc.kernels import KernelSet, fundamental, traction_x
from annulus_abc.mesh import BoundaryLoop, Mesh, generate_annulus, generate_disc

LAPLACE = KernelSet("laplace")
HELMHOLTZ = KernelSet("helmholtz", k=1.0)
LAME = KernelSet("lame", lam=3.0, mu=2.0)
NAVIER = KernelSet("navier", lam=0.5, mu=2.0, rho=0.5, omega=3.0)


def static_spec(kernels, **kw):
    return ProblemSpec(kernels, alpha=0.0, **kw)


def edge_rule(vertices, loop, order=12):
    """Independent Gauss-Legendre rule on polygon edges with hat-function values."""
    s, w = np.polynomial.legendre.leggauss(order)
    s, w = 0.5 * (s + 1), 0.5 * w
    a, b = vertices[loop], vertices[np.roll(loop, -1)]
    pts, nrm, wts, hats = [], [], [], []
    for i in range(len(loop)):
        e = b[i] - a[i]
        ln = np.hypot(*e)
        pts.append(a[i] + s[:, None] * e)
        nrm.append(np.tile([e[1] / ln, -e[0] / ln], (order, 1)))
        wts.append(ln * w)
        hats.append((loop[i], loop[(i + 1) % len(loop)], 1 - s, s))
    return np.vstack(pts), np.vstack(nrm), np.concatenate(wts), hats


def p1_on_edges(coeffs, hats):
    return np.concatenate([coeffs[i] * wa + coeffs[j] * wb for i, j, wa, wb in hats])


def test_local_stiffness_unit_triangle():
    mesh = Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]))
    a = assemble_interior(mesh, static_spec(LAPLACE)).toarray()
    np.testing.assert_allclose(a, [[1, -0.5, -0.5], [-0.5, 0.5, 0], [-0.5, 0, 0.5]], atol=1e-15)


def test_mass_sums_to_area(ck_mesh):
    stiff = assemble_interior(ck_mesh, static_spec(LAPLACE))
    k = 1.3
    full = assemble_interior(ck_mesh, ProblemSpec(KernelSet("helmholtz", k=k)))
    mass = (stiff - full) / k**2
    assert mass.sum() == pytest.approx(ck_mesh.areas().sum(), rel=1e-12)
    assert lumped_mass(ck_mesh).sum() == pytest.approx(ck_mesh.areas().sum(), rel=1e-12)


@pytest.mark.parametrize("kernels", [LAME, NAVIER])
def test_elastic_matrix_symmetric(ck_mesh, kernels):
    spec = ProblemSpec(kernels, alpha=0.0 if kernels.is_static else 2.0)
    a = assemble_interior(ck_mesh, spec)
    assert abs(a - a.T).max() <= 1e-12 * abs(a).max()


def test_sparsity_follows_triangles(cc_mesh):
    a = assemble_interior(cc_mesh, static_spec(LAPLACE)).tocoo()
    pairs = {(int(i), int(j)) for i, j in zip(a.row, a.col)}
    allowed = set()
    for t in cc_mesh.triangles:
        allowed |= {(int(i), int(j)) for i in t for j in t}
    assert pairs <= allowed


def test_rigid_motions_in_strain_form_kernel(ck_mesh):
    a = assemble_interior(ck_mesh, static_spec(LAME))
    modes = rigid_motions(ck_mesh.vertices, 2).reshape(3, -1)
    for r in modes:
        assert np.abs(a @ r).max() <= 1e-12 * abs(a).max()


def test_gradgrad_form_does_not_annihilate_rotation(ck_mesh):
    a = assemble_interior(ck_mesh, static_spec(LAME, elastic_form="gradgrad"))
    modes = rigid_motions(ck_mesh.vertices, 2).reshape(3, -1)
    assert np.abs(a @ modes[0]).max() <= 1e-12 * abs(a).max()
    # translations survive but the rotation leaves an interior residual of order mu
    res = np.abs(a @ modes[2]).max()
    assert res > 1e-2 * abs(a).max()


def test_boundary_mass_total_is_perimeter(cc_mesh):
    alpha = 2.0
    m = assemble_boundary_mass(cc_mesh, ProblemSpec(HELMHOLTZ, alpha=alpha))
    p = cc_mesh.vertices[cc_mesh.boundary_gamma0]
    perimeter = np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1).sum()
    assert abs(m.sum() - (-1j * alpha * perimeter)) <= 1e-12
    assert abs(perimeter - 6 * np.pi) < 0.05
    # rows only on gamma0
    rows = np.unique(m.tocoo().row)
    assert set(rows) == set(cc_mesh.boundary_gamma0)
    assert assemble_boundary_mass(cc_mesh, static_spec(LAPLACE)).nnz == 0


def test_laplace_block_annihilates_constants():
    mesh = generate_annulus(ParametricCurve("circle"), ParametricCurve("circle", 3.0), 2 * np.pi / 128)
    spec = static_spec(LAPLACE)
    blk = assemble_abc_block(mesh, spec, boundary_quadrature(mesh, "gamma"), boundary_quadrature(mesh, "gamma0"))
    assert len(mesh.boundary_gamma) >= 128
    assert np.abs(blk.values @ np.ones(len(blk.cols))).max() <= 1e-6
    assert set(blk.rows) == set(mesh.boundary_gamma0)
    assert set(blk.cols) == set(mesh.boundary_gamma)


def test_abc_block_rejects_close_boundaries():
    mesh = generate_annulus(ParametricCurve("circle"), ParametricCurve("circle", 1.5), 0.3, c0=0.1)
    spec = ProblemSpec(HELMHOLTZ, c0=0.6)
    with pytest.raises(ConfigurationError):
        assemble_abc_block(mesh, spec, boundary_quadrature(mesh, "gamma"), boundary_quadrature(mesh, "gamma0"))


def test_panel_doubling_stability():
    mesh = generate_annulus(ParametricCurve("kite"), ParametricCurve("circle", 3.0), 0.2)
    for kernels, alpha in ((LAPLACE, 0.0), (HELMHOLTZ, 2.0), (LAME, 0.0)):
        spec = ProblemSpec(kernels, alpha=alpha)
        blocks = [
            assemble_abc_block(
                mesh, spec, boundary_quadrature(mesh, "gamma", 4, sub), boundary_quadrature(mesh, "gamma0", 4, sub)
            ).values
            for sub in (1, 2)
        ]
        assert np.abs(blocks[0] - blocks[1]).max() <= 1e-8


def test_zero_data_gives_zero_load(cc_mesh):
    spec = ProblemSpec(HELMHOLTZ, neumann=lambda p, n: np.zeros(len(p)))
    rhs = assemble_load(cc_mesh, spec, boundary_quadrature(cc_mesh, "gamma"), boundary_quadrature(cc_mesh, "gamma0"))
    assert not np.any(rhs)
    spec = ProblemSpec(HELMHOLTZ)
    assert not np.any(assemble_load(cc_mesh, spec, None, boundary_quadrature(cc_mesh, "gamma0")))


def test_plane_wave_data_spot_value():
    g = scattering_data(PlaneWave(3.0, (1.0, 0.0)))
    val = g(np.array([[1.0, 0.0]]), np.array([[1.0, 0.0]]))[0, 0]
    assert abs(val - (-3j * np.exp(3j))) <= 1e-14


def test_load_linear_in_data(ck_mesh):
    q, q0 = boundary_quadrature(ck_mesh, "gamma"), boundary_quadrature(ck_mesh, "gamma0")
    g1 = DipoleLaplace().neumann
    g2 = scattering_data(PlaneWave(1.0, (0.6, 0.8)))
    loads = [
        assemble_load(ck_mesh, ProblemSpec(HELMHOLTZ, neumann=g), q, q0)
        for g in (g1, g2, lambda p, n: 2 * g1(p, n) - 3j * g2(p, n))
    ]
    np.testing.assert_allclose(loads[2], 2 * loads[0] - 3j * loads[1], atol=1e-13 * np.abs(loads[0]).max())


@pytest.mark.parametrize("kernels,alpha", [(LAPLACE, 0.0), (HELMHOLTZ, 2.0)])
def test_load_matches_fine_quadrature(ck_mesh, rng, kernels, alpha):
    exact = DipoleLaplace()
    spec = ProblemSpec(kernels, alpha=alpha, neumann=exact.neumann)
    rhs = assemble_load(ck_mesh, spec, boundary_quadrature(ck_mesh, "gamma"), boundary_quadrature(ck_mesh, "gamma0"))

    loop, loop0 = ck_mesh.loops["gamma"].vertices, ck_mesh.loops["gamma0"].vertices
    y, ny, wy, hy = edge_rule(ck_mesh.vertices, loop)
    x, nx, wx, hx = edge_rule(ck_mesh.vertices, loop0)
    g = exact.neumann(y, ny)[:, 0]
    lam_s = np.empty(len(x), dtype=complex)
    for i in range(len(x)):
        kern = traction_x(kernels, x[i], y, nx[i])[:, 0, 0] - 1j * alpha * fundamental(kernels, x[i], y)[:, 0, 0]
        lam_s[i] = np.sum(kern * g * wy)
    for _ in range(5):
        c = rng.standard_normal(ck_mesh.n_vertices)
        oracle = -np.sum(g * p1_on_edges(c, hy) * wy) - np.sum(lam_s * p1_on_edges(c, hx) * wx)
        assert abs(rhs @ c - oracle) <= 1e-8 * max(1.0, abs(oracle))


@pytest.fixture(scope="module")
def disc_setup():
    mesh = generate_disc(ParametricCurve("circle", 2.0), 0.2, interfaces=(ParametricCurve("circle", 0.5),))
    index = RefractiveIndex("disc", value=2.0, center=(0.0, 0.0), radius=0.5)
    incident = PlaneWave(1.0, (1.0, 0.0))
    spec = ProblemSpec(HELMHOLTZ, alpha=2.0, incident=incident.scalar, refractive_index=index)
    return mesh, spec


def test_volume_block_empty_without_contrast(disc_setup):
    mesh, spec = disc_setup
    plain = ProblemSpec(HELMHOLTZ, incident=spec.incident, refractive_index=RefractiveIndex("constant", value=1.0))
    assert assemble_volume_block(mesh, plain, boundary_quadrature(mesh, "gamma0")) is None


def test_volume_block_bounded(disc_setup):
    mesh, spec = disc_setup
    q0 = boundary_quadrature(mesh, "gamma0")
    blk = assemble_volume_block(mesh, spec, q0)
    assert set(blk.rows) == set(mesh.boundary_gamma0)
    assert np.all(np.linalg.norm(mesh.vertices[blk.cols], axis=1) <= 0.5 + 1e-12)
    # sup over x in gamma0, y in the disc of |T_x u* - i alpha u*|, at distance >= 1.5
    r = np.linspace(1.5, 2.5, 200)
    y = np.column_stack([np.zeros_like(r), np.zeros_like(r)])
    x = np.column_stack([r, np.zeros_like(r)])
    sup = np.max(np.abs(traction_x(HELMHOLTZ, x, y, [1.0, 0.0])) + 2.0 * np.abs(fundamental(HELMHOLTZ, x, y)))
    area = np.pi * 0.25
    row_len = 2 * (2 * np.pi * 2.0 / len(mesh.boundary_gamma0)) * 1.1
    assert np.abs(blk.values).sum(axis=1).max() <= 1.0 * 1.0 * area * sup * row_len


def test_volume_block_constant_matches_fine_quadrature(disc_setup):
    mesh, spec = disc_setup
    q0 = boundary_quadrature(mesh, "gamma0")
    blk = assemble_volume_block(mesh, spec, q0)
    applied = blk.values @ np.ones(len(blk.cols))

    # collapsed tensor Gauss rule on every mesh triangle inside the disc, where 1 - n = -1
    inside = np.linalg.norm(mesh.vertices[mesh.triangles].mean(axis=1), axis=1) < 0.5
    g, gw = np.polynomial.legendre.leggauss(8)
    g, gw = 0.5 * (g + 1), 0.5 * gw
    u, v = np.meshgrid(g, g, indexing="ij")
    l1, l2 = u.ravel(), (v * (1 - u)).ravel()
    wref = np.outer(gw, gw).ravel() * (1 - u.ravel())
    p = mesh.vertices[mesh.triangles[inside]]
    y = (p[:, None, 0] + l1[None, :, None] * (p[:, None, 1] - p[:, None, 0]) + l2[None, :, None] * (p[:, None, 2] - p[:, None, 0])).reshape(-1, 2)
    wy = (2 * np.abs(mesh.areas()[inside])[:, None] * wref[None, :]).ravel()

    loop0 = mesh.loops["gamma0"].vertices
    x, nx, wx, hx = edge_rule(mesh.vertices, loop0, order=8)
    field = np.array(
        [np.sum((traction_x(HELMHOLTZ, x[i], y, nx[i])[:, 0, 0] - 2j * fundamental(HELMHOLTZ, x[i], y)[:, 0, 0]) * -wy)
         for i in range(len(x))]
    )
    rows = {int(v): k for k, v in enumerate(blk.rows)}
    for v in loop0[:: len(loop0) // 5][:5]:
        c = np.zeros(mesh.n_vertices)
        c[v] = 1.0
        oracle = np.sum(field * p1_on_edges(c, hx) * wx)
        assert abs(applied[rows[int(v)]] - oracle) <= 1e-6 * max(1.0, abs(oracle))


def test_constraints(ck_mesh):
    rows = assemble_constraints(ck_mesh, static_spec(LAPLACE))
    assert rows.shape == (1, ck_mesh.n_vertices)
    assert rows @ np.ones(ck_mesh.n_vertices) == pytest.approx(ck_mesh.areas().sum(), rel=1e-12)

    rows = assemble_constraints(ck_mesh, static_spec(LAME))
    modes = rigid_motions(ck_mesh.vertices, 2).reshape(3, -1)
    m = lumped_mass(ck_mesh)
    rot = modes[2].reshape(-1, 2)
    assert rows[2] @ modes[2] == pytest.approx(np.sum(m * (rot**2).sum(axis=1)), rel=1e-12)
    assert rows[2] @ modes[2] > 0
    with pytest.raises(ConfigurationError):
        assemble_constraints(ck_mesh, ProblemSpec(HELMHOLTZ))


@pytest.mark.parametrize("kernels", [LAPLACE, LAME])
def test_static_nullspace(kernels):
    mesh = generate_annulus(ParametricCurve("kite"), ParametricCurve("circle", 3.0), 0.3)
    system = assemble_system(mesh, static_spec(kernels))
    modes = rigid_motions(mesh.vertices, kernels.sigma).reshape(-1, kernels.sigma * mesh.n_vertices)
    scale = abs(system.A).max()
    for r in modes:
        assert np.abs(system.apply(r.astype(complex))).max() <= 1e-8 * scale


def test_problem_spec_validation():
    with pytest.raises(ConfigurationError):
        ProblemSpec(LAPLACE, alpha=2.0)
    with pytest.raises(ConfigurationError):
        ProblemSpec(HELMHOLTZ, alpha=0.0)
    with pytest.raises(ConfigurationError):
        ProblemSpec(HELMHOLTZ, alpha=1j)
    with pytest.raises(ConfigurationError):
        ProblemSpec(NAVIER, refractive_index=lambda p: np.ones(len(p)))
    with pytest.raises(ConfigurationError):
        ProblemSpec(LAME, alpha=0.0, elastic_form="other")


def test_dense_block_matches_system_apply(cc_mesh, rng):
    system = assemble_system(cc_mesh, ProblemSpec(HELMHOLTZ))
    u = rng.standard_normal(system.n_dof) + 1j * rng.standard_normal(system.n_dof)
    np.testing.assert_allclose(system.matrix() @ u, system.apply(u), atol=1e-12 * np.abs(system.apply(u)).max())


def test_mesh_without_gamma_loop_raises_for_annulus_problem():
    mesh = generate_disc(ParametricCurve("circle", 2.0), 0.5)
    with pytest.raises(KeyError):
        boundary_quadrature(mesh, "gamma")
    assert isinstance(mesh.loops["gamma0"], BoundaryLoop)
