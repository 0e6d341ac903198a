"""Experiment drivers: single solves, convergence series, field exports, validation."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .assembly import (
    ConfigurationError,
    assemble_system,
    rigid_motions,
    single_layer_kernel,
)
from .config import ExperimentConfig
from .curves import build_quadrature
from .mesh import Mesh, generate_annulus, generate_disc, refine_uniform
from .solve import ErrorReport, Solution, compute_errors, neumann_residual, solve_system

log = logging.getLogger("annulus_abc")

# relative tolerance for the static solvability check
COMPATIBILITY_TOL = 1e-8


class ExperimentError(RuntimeError):
    pass


@dataclass
class LevelResult:
    level: int
    h: float
    n_dof: int
    errors: ErrorReport | None
    solution: Solution
    timings: dict


@dataclass
class ConvergenceReport:
    rows: list = field(default_factory=list)
    l2_rate: float | None = None
    h1_rate: float | None = None

    def table(self) -> list[dict]:
        """CSV rows; rates are least-squares fits over the current and two previous levels."""
        out = []
        for i, r in enumerate(self.rows):
            row = {
                "level": r.level,
                "h": r.h,
                "n_dof": r.n_dof,
                "l2_error": r.errors.l2 if r.errors else None,
                "h1_error": r.errors.h1 if r.errors else None,
                "l2_rate": None,
                "h1_rate": None,
            }
            if i >= 2 and all(x.errors for x in self.rows[i - 2 : i + 1]):
                window = self.rows[i - 2 : i + 1]
                row["l2_rate"] = fit_rate([x.h for x in window], [x.errors.l2 for x in window])
                row["h1_rate"] = fit_rate([x.h for x in window], [x.errors.h1 for x in window])
            out.append(row)
        return out


def fit_rate(h, err) -> float:
    """Slope of the least-squares line through ``(log h, log err)``."""
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


def base_mesh(cfg: ExperimentConfig) -> Mesh:
    if cfg.problem == "inhomogeneous":
        iface = cfg.refractive_index.interface()
        return generate_disc(cfg.gamma0, cfg.base_h, () if iface is None else (iface,))
    return generate_annulus(cfg.gamma, cfg.gamma0, cfg.base_h, cfg.c0)


def refine(mesh: Mesh) -> Mesh:
    return refine_uniform(mesh)


def solve_on(cfg: ExperimentConfig, mesh: Mesh, spec=None, constrain: bool = True):
    """Assemble and solve on ``mesh``; returns ``(system, solution, timings)``."""
    spec = cfg.problem_spec() if spec is None else spec
    timings: dict = {}
    system = assemble_system(
        mesh,
        spec,
        boundary_order=cfg.boundary_order,
        subdivisions=cfg.panel_subdivisions,
        volume_degree=cfg.volume_degree,
        constrain=constrain,
        timings=timings,
    )
    sol = solve_system(system)
    timings.update(sol.timings)
    return system, sol, timings


def errors_for(cfg: ExperimentConfig, mesh: Mesh, sol: Solution) -> ErrorReport | None:
    ex = cfg.exact_field()
    if ex is None:
        return None
    return compute_errors(
        mesh,
        sol.coefficients,
        ex,
        cfg.kernels.sigma,
        align=cfg.kernels.is_static,
        degree=cfg.error_degree,
    )


def _log_level(level: int, mesh: Mesh, system, sol: Solution, err, timings: dict) -> None:
    parts = [f"level {level}: h={mesh.h:.5g} n_dof={system.n_dof} residual={sol.residual:.3g}"]
    parts.append(f"cond_est={sol.condition:.3g}")
    if len(sol.multipliers):
        parts.append("multipliers=" + ",".join(f"{abs(m):.2e}" for m in sol.multipliers))
    if err is not None:
        parts.append(f"l2={err.l2:.6e} h1={err.h1:.6e}")
    log.info(" ".join(parts))
    log.info("  timings " + " ".join(f"{k}={v:.3f}s" for k, v in timings.items()))


def log_parameters(cfg: ExperimentConfig) -> None:
    for key, value in cfg.summary().items():
        log.info(f"param {key} = {value}")


def run_single(cfg: ExperimentConfig):
    """One mesh at ``base_h``, one solve and (when available) an error report."""
    log_parameters(cfg)
    validate(cfg)
    t0 = time.perf_counter()
    mesh = base_mesh(cfg)
    tm = time.perf_counter() - t0
    system, sol, timings = solve_on(cfg, mesh)
    t0 = time.perf_counter()
    err = errors_for(cfg, mesh, sol)
    timings = {"mesh": tm, **timings, "errors": time.perf_counter() - t0}
    _log_level(0, mesh, system, sol, err, timings)
    report = ConvergenceReport([LevelResult(0, mesh.h, system.n_dof, err, sol, timings)])
    return mesh, system, sol, report


def run_convergence(cfg: ExperimentConfig) -> ConvergenceReport:
    """Uniform refinement series with errors at every level."""
    if cfg.exact_field() is None or cfg.preset == "none":
        raise ConfigurationError("a convergence study needs an exact solution preset")
    log_parameters(cfg)
    validate(cfg)
    report = ConvergenceReport()
    mesh = None
    for level in range(cfg.levels):
        try:
            t0 = time.perf_counter()
            mesh = base_mesh(cfg) if mesh is None else refine(mesh)
            tm = time.perf_counter() - t0
            system, sol, timings = solve_on(cfg, mesh)
            t0 = time.perf_counter()
            err = errors_for(cfg, mesh, sol)
            timings = {"mesh": tm, **timings, "errors": time.perf_counter() - t0}
        except Exception as exc:
            exc.args = (f"level {level}: {exc.args[0] if exc.args else exc}",) + exc.args[1:]
            raise
        _log_level(level, mesh, system, sol, err, timings)
        report.rows.append(LevelResult(level, mesh.h, system.n_dof, err, sol, timings))
    if len(report.rows) >= 3:
        last = report.table()[-1]
        report.l2_rate, report.h1_rate = last["l2_rate"], last["h1_rate"]
        log.info(f"fitted rates over the last 3 levels: l2={report.l2_rate:.3f} h1={report.h1_rate:.3f}")
    else:
        log.info("fewer than 3 levels: no rates fitted")
    return report


@dataclass
class FieldResult:
    mesh: Mesh
    values: np.ndarray  # (n_vertices, sigma) complex field written out
    scattered: np.ndarray
    neumann_residual: float
    solution: Solution


def run_field(cfg: ExperimentConfig) -> FieldResult:
    """Solve on the base mesh refined ``levels - 1`` times and return the total field."""
    log_parameters(cfg)
    validate(cfg)
    mesh = base_mesh(cfg)
    for _ in range(cfg.levels - 1):
        mesh = refine(mesh)
    system, sol, timings = solve_on(cfg, mesh)
    s = cfg.kernels.sigma
    uh = sol.nodal(s)
    total = uh.copy()
    inc = cfg.incident_field()
    if inc is not None and cfg.problem != "inhomogeneous":
        total = total + inc.evaluate(mesh.vertices)[0]
    res = neumann_residual(mesh, system, sol.coefficients, s)
    err = errors_for(cfg, mesh, sol)
    _log_level(cfg.levels - 1, mesh, system, sol, err, timings)
    if cfg.gamma is not None:
        log.info(f"weak Neumann residual on the obstacle: {res:.3e}")
    log.info(f"max |u_h| = {np.abs(uh).max():.6e}; max |total| = {np.abs(total).max():.6e}")
    if not np.all(np.isfinite(total)):
        from .solve import NumericalFailure

        raise NumericalFailure("field contains non-finite values")
    return FieldResult(mesh, total, uh, res, sol)


# -- validation without solving ------------------------------------------------------


def static_compatibility(cfg: ExperimentConfig, n_panels: int = 192, order: int = 8) -> dict:
    """Solvability of the static problem, evaluated on the exact curves.

    Returns the net data ``int_Gamma g . r`` and the load ``l(r)`` for every
    rigid mode ``r``.  The discrete system is solvable when ``l(r) = 0``, which
    holds whenever the data is the traction of a field admitting the
    layer-potential representation; Laplace data is also required to have zero
    net flux.
    """
    spec = cfg.problem_spec()
    qg = build_quadrature(cfg.gamma, n_panels, order)
    q0 = build_quadrature(cfg.gamma0, n_panels, order)
    s = cfg.kernels.sigma
    g = np.asarray(spec.neumann(qg.points, qg.normals), dtype=complex).reshape(-1, s)
    modes_g = rigid_motions(qg.points, s)
    modes_0 = rigid_motions(q0.points, s)
    net = np.einsum("q,mqs,qs->m", qg.weights, modes_g, g)
    ts = np.zeros((len(q0.weights), s), dtype=complex)
    step = max(1, 20000 // len(qg.weights))
    for i in range(0, len(ts), step):
        sl = slice(i, i + step)
        kern = single_layer_kernel(spec, q0.points[sl], q0.normals[sl], qg.points)
        ts[sl] = np.einsum("xcqd,qd->xc", kern, qg.weights[:, None] * g)
    load = -net - np.einsum("q,mqs,qs->m", q0.weights, modes_0, ts)
    scale = np.einsum("q,mqs,qs->m", qg.weights, np.abs(modes_g), np.abs(g))
    return {"net": net, "load": load, "scale": scale}


def support_distance(cfg: ExperimentConfig, samples: int = 512, depth: int = 16) -> float:
    """Sampled distance from the support of ``1 - n`` to the artificial boundary.

    Returns ``inf`` if no sample inside the ``c0`` band is in the support.
    """
    theta = np.linspace(0, 2 * np.pi, samples, endpoint=False)
    x = cfg.gamma0.point(theta)
    nrm = cfg.gamma0.normal(theta)
    best = np.inf
    for d in np.linspace(0.0, cfg.c0, depth):
        p = x - d * nrm
        bad = np.abs(1 - cfg.refractive_index(p)) > 0
        if np.any(bad):
            best = min(best, d)
    return best


def validate(cfg: ExperimentConfig) -> dict:
    """Configuration checks that need no solve.  Raises ``ConfigurationError``."""
    out = {}
    if cfg.gamma is not None:
        from .curves import separation

        out["separation"] = separation(cfg.gamma, cfg.gamma0)
        log.info(f"validate: sampled separation {out['separation']:.4f} (c0 = {cfg.c0})")
    if cfg.problem == "inhomogeneous":
        d = support_distance(cfg)
        if np.isfinite(d):
            raise ConfigurationError(f"support of 1 - n comes within {d:.3g} < c0 of the artificial boundary")
        out["support"] = "separated"
        log.info("validate: support of 1 - n separated from the artificial boundary")
    elif cfg.kernels.is_static:
        comp = static_compatibility(cfg)
        out.update(comp)
        for i, (net, load, scale) in enumerate(zip(comp["net"], comp["load"], comp["scale"])):
            log.info(f"validate: rigid mode {i}: int_Gamma g.r = {net.real:+.3e}, load l(r) = {abs(load):.3e}")
            if cfg.problem == "laplace" and abs(net) > COMPATIBILITY_TOL * max(scale, 1.0):
                raise ConfigurationError(f"Laplace data must have zero mean: int_Gamma g = {net.real:.3g}")
            if abs(load) > COMPATIBILITY_TOL * max(scale, 1.0):
                raise ConfigurationError(
                    f"static data incompatible: load against rigid mode {i} is {abs(load):.3g}"
                )
    return out
