import numpy as np
import pytest
import scipy.sparse as sp

from annulus_abc.assembly import AssembledSystem, ProblemSpec, assemble_system, rigid_motions
from annulus_abc.curves import ParametricCurve
from annulus_abc.exact import DipoleLaplace, KernelColumn, RadialHankel
from annulus_abc.kernels import KernelSet
from annulus_abc.mesh import generate_annulus
from annulus_abc.solve import (
    RESIDUAL_TOL,
    SingularSystemError,
    compute_errors,
    neumann_residual,
    solve_system,
)

LAPLACE = KernelSet("laplace")
LAME = KernelSet("lame", lam=3.0, mu=2.0)
HELMHOLTZ = KernelSet("helmholtz", k=1.0)


def test_identity_solve():
    n = 5
    rhs = np.zeros(n, dtype=complex)
    rhs[0] = 1.0
    eye = sp.identity(n, dtype=complex, format="csr")
    system = AssembledSystem(n, eye, sp.csr_matrix((n, n), dtype=complex), [], rhs)
    sol = solve_system(system)
    np.testing.assert_array_equal(sol.coefficients, rhs)
    assert sol.residual == 0.0
    assert sol.condition == pytest.approx(1.0)


def test_unconstrained_static_system_is_singular(ck_mesh):
    spec = ProblemSpec(LAPLACE, alpha=0.0, neumann=DipoleLaplace().neumann)
    system = assemble_system(ck_mesh, spec, constrain=False)
    with pytest.raises(SingularSystemError, match="singular"):
        solve_system(system)


def test_unconstrained_lame_system_is_singular(cc_mesh):
    spec = ProblemSpec(LAME, alpha=0.0, neumann=KernelColumn().neumann)
    with pytest.raises(SingularSystemError):
        solve_system(assemble_system(cc_mesh, spec, constrain=False))


@pytest.fixture(scope="module")
def helmholtz_solution(request):
    mesh = request.getfixturevalue("cc_mesh")
    exact = RadialHankel(1.0)
    system = assemble_system(mesh, ProblemSpec(HELMHOLTZ, neumann=exact.neumann))
    return mesh, system, solve_system(system), exact


def test_helmholtz_residual(helmholtz_solution):
    _, system, sol, _ = helmholtz_solution
    assert sol.residual <= RESIDUAL_TOL
    assert sol.condition < 1e6
    assert sol.multipliers.size == 0


def test_galerkin_orthogonality_witness(helmholtz_solution, rng):
    _, system, sol, _ = helmholtz_solution
    au = system.apply(sol.coefficients)
    scale = np.abs(system.rhs).max()
    for _ in range(10):
        v = rng.standard_normal(system.n_dof)
        assert abs(v @ au - v @ system.rhs) <= 1e-8 * scale * np.abs(v).sum()


def test_helmholtz_errors_are_small(helmholtz_solution):
    mesh, system, sol, exact = helmholtz_solution
    err = compute_errors(mesh, sol.coefficients, exact, 1)
    assert err.l2 < 0.05
    assert err.h1 >= err.l2
    assert err.h1 >= err.h1_semi
    assert neumann_residual(mesh, system, sol.coefficients, 1) < 1.0


def test_linear_fields_reproduced(ck_mesh):
    a = np.array([0.3 - 0.1j, 1.2 + 0.5j])

    def exact(p):
        return (p @ a + 2.0)[:, None], np.broadcast_to(a, (len(p), 1, 2))

    coeffs = ck_mesh.vertices @ a + 2.0
    err = compute_errors(ck_mesh, coeffs, exact, 1)
    assert err.l2 <= 1e-12 and err.h1_semi <= 1e-12


def test_linear_vector_field_reproduced(ck_mesh):
    m = np.array([[0.5, -1.0], [2.0, 0.25]])

    def exact(p):
        return p @ m.T, np.broadcast_to(m, (len(p), 2, 2))

    coeffs = (ck_mesh.vertices @ m.T).ravel()
    err = compute_errors(ck_mesh, coeffs, exact, 2)
    assert err.l2 <= 1e-12 and err.h1_semi <= 1e-12


def test_alignment_ignores_nullspace_shifts(ck_mesh, rng):
    exact = DipoleLaplace()
    coeffs = exact.evaluate(ck_mesh.vertices)[0][:, 0] + 0.01 * rng.standard_normal(ck_mesh.n_vertices)
    base = compute_errors(ck_mesh, coeffs, exact, 1, align=True)
    shifted = compute_errors(ck_mesh, coeffs + 3.7, exact, 1, align=True)
    assert shifted.l2 == pytest.approx(base.l2, rel=1e-10)
    assert shifted.h1_semi == pytest.approx(base.h1_semi, rel=1e-12)
    assert compute_errors(ck_mesh, coeffs + 3.7, exact, 1).l2 > 10 * base.l2

    vec = KernelColumn()
    c2 = vec.evaluate(ck_mesh.vertices)[0].ravel() + 0.001 * rng.standard_normal(2 * ck_mesh.n_vertices)
    rigid = rigid_motions(ck_mesh.vertices, 2).reshape(3, -1)
    base = compute_errors(ck_mesh, c2, vec, 2, align=True)
    moved = compute_errors(ck_mesh, c2 + 0.4 * rigid[0] - 0.2 * rigid[1] + 0.3 * rigid[2], vec, 2, align=True)
    assert moved.l2 == pytest.approx(base.l2, rel=1e-9)
    assert moved.h1_semi == pytest.approx(base.h1_semi, rel=1e-9)


def test_static_solution_satisfies_constraints(ck_mesh):
    spec = ProblemSpec(LAPLACE, alpha=0.0, neumann=DipoleLaplace().neumann)
    system = assemble_system(ck_mesh, spec)
    sol = solve_system(system)
    assert abs(system.constraints @ sol.coefficients).max() <= 1e-10
    # compatible data: the multiplier absorbs nothing
    assert abs(sol.multipliers).max() <= 1e-8
    err = compute_errors(ck_mesh, sol.coefficients, DipoleLaplace(), 1, align=True)
    assert err.l2 < 0.05


def test_zero_data_gives_zero_solution():
    mesh = generate_annulus(ParametricCurve("kite"), ParametricCurve("circle", 3.0), 0.5)
    sol = solve_system(assemble_system(mesh, ProblemSpec(HELMHOLTZ, neumann=lambda p, n: np.zeros(len(p)))))
    assert np.abs(sol.coefficients).max() <= 1e-8
