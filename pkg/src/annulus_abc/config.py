"""JSON experiment configuration with strict validation and named presets."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import exact
from .curves import CurveError, ParametricCurve, check_pair
from .kernels import KernelSet

PROBLEMS = ("laplace", "helmholtz", "lame", "navier", "inhomogeneous")
PRESETS = ("example1", "example2", "example3", "example4", "plane_wave_scattering", "none")

TOP_KEYS = {
    "problem",
    "parameters",
    "gamma",
    "gamma0",
    "exact_solution",
    "refractive_index",
    "levels",
    "base_h",
    "quadrature",
    "output_dir",
    "deterministic",
    "threads",
    "c0",
    "elastic_form",
}
PARAM_KEYS = {"k", "lam", "mu", "rho", "omega", "alpha"}
QUAD_KEYS = {"boundary_order", "panel_subdivisions", "volume_degree", "error_degree"}
PRESET_KEYS = {
    "example1": set(),
    "example2": {"k"},
    "example3": {"source"},
    "example4": set(),
    "plane_wave_scattering": {"k", "direction"},
    "none": set(),
}
INDEX_KEYS = {
    "constant": {"value"},
    "disc": {"value", "center", "radius"},
    "bump": {"amplitude", "center", "radius"},
}

# operator and pinned parameters for each preset
PRESET_PROBLEM = {
    "example1": ("laplace", {}),
    "example2": ("helmholtz", {}),
    "example3": ("lame", {"mu": 2.0, "lam": 3.0}),
    "example4": ("navier", {"rho": 0.5, "mu": 2.0, "lam": 0.5, "omega": 3.0}),
    "plane_wave_scattering": ("helmholtz", {}),
}

# default (gamma, gamma0) per preset
DEFAULT_CURVES = {
    "example1": ({"kind": "kite"}, {"kind": "circle", "scale": 3.0}),
    "example2": ({"kind": "star"}, {"kind": "peanut", "scale": 3.5}),
    "example3": ({"kind": "kite"}, {"kind": "circle", "scale": 3.0}),
    "example4": ({"kind": "kite"}, {"kind": "circle", "scale": 3.0}),
    "plane_wave_scattering": ({"kind": "kite"}, {"kind": "kite", "scale": 3.0}),
    "none": ({"kind": "circle"}, {"kind": "circle", "scale": 3.0}),
}


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _reject_unknown(d, allowed, path):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}" if path else unknown[0], "unknown key")


def _number(value, path, positive=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(path, "must be finite")
    if integer and int(value) != value:
        raise ConfigError(path, "must be an integer")
    if positive and value <= 0:
        raise ConfigError(path, "must be positive")
    return int(value) if integer else float(value)


def _point(value, path):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(path, "expected [x, y]")
    return (_number(value[0], f"{path}[0]"), _number(value[1], f"{path}[1]"))


def _curve(d, path):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected a curve object")
    try:
        return ParametricCurve.from_dict(d)
    except CurveError as exc:
        raise ConfigError(path, str(exc)) from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, f"invalid curve: {exc}") from exc


@dataclass(frozen=True)
class RefractiveIndex:
    kind: str = "constant"
    value: float = 1.0
    center: tuple = (0.0, 0.0)
    radius: float = 0.5
    amplitude: float = 0.0

    def __call__(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "constant":
            return np.full(len(p), self.value, dtype=complex)
        r = np.linalg.norm(p - np.asarray(self.center), axis=1) / self.radius
        if self.kind == "disc":
            return np.where(r < 1, self.value, 1.0).astype(complex)
        out = np.ones(len(p), dtype=complex)
        inside = r < 1
        out[inside] += self.amplitude * np.exp(1 - 1 / (1 - r[inside] ** 2))
        return out

    @property
    def piecewise_constant(self) -> bool:
        """Constant on each triangle of a mesh that resolves ``interface()``."""
        return self.kind in ("constant", "disc")

    @property
    def trivial(self) -> bool:
        if self.kind == "bump":
            return self.amplitude == 0
        return self.value == 1.0

    def interface(self) -> ParametricCurve | None:
        if self.kind == "disc":
            return ParametricCurve("circle", self.radius, self.center)
        return None


@dataclass
class ExperimentConfig:
    problem: str
    kernels: KernelSet
    alpha: float
    gamma: ParametricCurve | None
    gamma0: ParametricCurve
    preset: str
    preset_params: dict
    refractive_index: RefractiveIndex | None = None
    levels: int = 4
    base_h: float = 0.4
    boundary_order: int = 4
    panel_subdivisions: int = 1
    volume_degree: int = 2
    error_degree: int = 4
    output_dir: Path = Path("output")
    deterministic: bool = True
    threads: int = 0
    c0: float = 0.1
    elastic_form: str = "strain"
    raw: dict = field(default_factory=dict, repr=False)

    # -- derived objects -------------------------------------------------------

    def exact_field(self):
        """Closed-form field of the preset (``None`` when there is none)."""
        p = self.preset_params
        if self.preset == "example1":
            return exact.DipoleLaplace()
        if self.preset == "example2":
            return exact.RadialHankel(k=self.kernels.k)
        if self.preset == "example3":
            return exact.KernelColumn(self.kernels, source=p["source"])
        if self.preset == "example4":
            return exact.PressureWave(self.kernels)
        if self.preset == "plane_wave_scattering" and self.problem == "inhomogeneous":
            # with n = 1 the total field is the incident wave itself
            return self.incident_field() if self.refractive_index.trivial else None
        if self.preset == "none":
            return exact.ZeroField(self.kernels)
        return None

    def incident_field(self):
        if self.preset != "plane_wave_scattering":
            return None
        return exact.PlaneWave(k=self.kernels.k, direction=self.preset_params["direction"])

    def neumann_data(self):
        """``g(points, normals)`` on the obstacle, or ``None``."""
        if self.problem == "inhomogeneous":
            return None
        if self.preset == "plane_wave_scattering":
            return exact.scattering_data(self.incident_field())
        return self.exact_field().neumann

    def problem_spec(self):
        from .assembly import ProblemSpec

        inc = self.incident_field()
        return ProblemSpec(
            self.kernels,
            alpha=self.alpha,
            neumann=self.neumann_data(),
            incident=inc.scalar if (inc is not None and self.problem == "inhomogeneous") else None,
            refractive_index=self.refractive_index if self.problem == "inhomogeneous" else None,
            elastic_form=self.elastic_form,
            c0=self.c0,
        )

    def summary(self) -> dict:
        ks = self.kernels
        out = {"problem": self.problem, "preset": self.preset, "alpha": self.alpha}
        if ks.operator == "helmholtz":
            out["k"] = ks.k
        if ks.operator in ("lame", "navier"):
            out.update(lam=ks.lam, mu=ks.mu)
        if ks.operator == "navier":
            out.update(rho=ks.rho, omega=ks.omega, kp=ks.kp, ks=ks.ks)
        out.update({k: v for k, v in self.preset_params.items()})
        out["gamma"] = self.gamma.to_dict() if self.gamma else None
        out["gamma0"] = self.gamma0.to_dict()
        out.update(levels=self.levels, base_h=self.base_h, boundary_order=self.boundary_order)
        return out


def parse_config(data: dict, base_dir: Path | None = None) -> ExperimentConfig:
    """Validate a decoded JSON document and build an :class:`ExperimentConfig`."""
    _reject_unknown(data, TOP_KEYS, "")

    ex = data.get("exact_solution", {"name": "none"})
    if isinstance(ex, str):
        ex = {"name": ex}
    if not isinstance(ex, dict) or "name" not in ex:
        raise ConfigError("exact_solution", "expected an object with a 'name'")
    preset = ex["name"]
    if preset not in PRESETS:
        raise ConfigError("exact_solution.name", f"unknown preset {preset!r}; expected one of {PRESETS}")
    _reject_unknown(ex, PRESET_KEYS[preset] | {"name"}, "exact_solution")

    problem = data.get("problem")
    pinned_problem, pinned = PRESET_PROBLEM.get(preset, (None, {}))
    if problem is None:
        problem = pinned_problem
        if problem is None:
            raise ConfigError("problem", "required for this preset")
    if problem not in PROBLEMS:
        raise ConfigError("problem", f"unknown problem {problem!r}; expected one of {PROBLEMS}")
    if problem == "inhomogeneous":
        if preset not in ("plane_wave_scattering",):
            raise ConfigError("exact_solution.name", "the inhomogeneous problem needs plane_wave_scattering incidence")
    elif pinned_problem is not None and problem != pinned_problem:
        raise ConfigError("problem", f"preset {preset} requires problem {pinned_problem!r}")

    params = data.get("parameters", {})
    _reject_unknown(params, PARAM_KEYS, "parameters")
    params = {k: _number(v, f"parameters.{k}") for k, v in params.items()}
    for key, value in pinned.items():
        if key in params and params[key] != value:
            raise ConfigError(f"parameters.{key}", f"preset {preset} pins {key} = {value}")
        params[key] = value

    preset_params = {}
    if "k" in ex:
        k = _number(ex["k"], "exact_solution.k", positive=True)
        if "k" in params and params["k"] != k:
            raise ConfigError("exact_solution.k", "conflicts with parameters.k")
        params["k"] = k
    if preset == "example2" or preset == "plane_wave_scattering":
        params.setdefault("k", 1.0)
    if preset == "plane_wave_scattering":
        d = _point(ex.get("direction", [1.0, 0.0]), "exact_solution.direction")
        if np.hypot(*d) == 0:
            raise ConfigError("exact_solution.direction", "must be nonzero")
        preset_params["direction"] = d
    if preset == "example3":
        preset_params["source"] = _point(ex.get("source", [0.5, 0.0]), "exact_solution.source")

    operator = "helmholtz" if problem == "inhomogeneous" else problem
    allowed = {
        "laplace": set(),
        "helmholtz": {"k"},
        "lame": {"lam", "mu"},
        "navier": {"lam", "mu", "rho", "omega"},
    }[operator]
    for key in params:
        if key != "alpha" and key not in allowed:
            raise ConfigError(f"parameters.{key}", f"not used by the {operator} operator")
    kparams = {k: v for k, v in params.items() if k != "alpha"}
    if operator == "helmholtz" and "k" not in kparams:
        raise ConfigError("parameters.k", "required for Helmholtz problems")
    if operator == "lame":
        kparams.setdefault("mu", 1.0)
        kparams.setdefault("lam", 1.0)
    if operator == "navier":
        for key in ("lam", "mu", "rho", "omega"):
            if key not in kparams:
                raise ConfigError(f"parameters.{key}", "required for Navier problems")
    try:
        kernels = KernelSet(operator, **kparams)
    except ValueError as exc:
        raise ConfigError("parameters", str(exc)) from exc

    if kernels.is_static:
        alpha = params.get("alpha", 0.0)
        if alpha != 0:
            raise ConfigError("parameters.alpha", "static problems use alpha = 0")
    else:
        alpha = params.get("alpha", 2.0)
        if alpha == 0:
            raise ConfigError("parameters.alpha", "must be nonzero for wave problems")

    c0 = _number(data.get("c0", 0.1), "c0", positive=True)
    dg, dg0 = DEFAULT_CURVES[preset]
    gamma0 = _curve(data.get("gamma0", dg0 if problem != "inhomogeneous" else {"kind": "circle", "scale": 2.0}), "gamma0")
    if problem == "inhomogeneous":
        if "gamma" in data:
            raise ConfigError("gamma", "the inhomogeneous problem has no obstacle")
        gamma = None
    else:
        gamma = _curve(data.get("gamma", dg), "gamma")
        try:
            check_pair(gamma, gamma0, c0)
        except CurveError as exc:
            raise ConfigError("gamma0", str(exc)) from exc

    nidx = None
    if problem == "inhomogeneous":
        nd = data.get("refractive_index", {"kind": "constant", "value": 1.0})
        if not isinstance(nd, dict) or nd.get("kind") not in INDEX_KEYS:
            raise ConfigError("refractive_index.kind", f"expected one of {sorted(INDEX_KEYS)}")
        _reject_unknown(nd, INDEX_KEYS[nd["kind"]] | {"kind"}, "refractive_index")
        kw = {"kind": nd["kind"]}
        for key in INDEX_KEYS[nd["kind"]]:
            path = f"refractive_index.{key}"
            if key == "center":
                kw[key] = _point(nd.get(key, [0.0, 0.0]), path)
            elif key == "radius":
                kw[key] = _number(nd.get(key, 0.5), path, positive=True)
            else:
                kw[key] = _number(nd.get(key, 1.0 if key == "value" else 0.0), path)
        nidx = RefractiveIndex(**kw)
        low = nidx.value if nidx.kind != "bump" else 1.0 + min(nidx.amplitude, 0.0)
        if not low > 0:
            raise ConfigError("refractive_index", "the refractive index must have positive real part")
    elif "refractive_index" in data:
        raise ConfigError("refractive_index", "only used by the inhomogeneous problem")

    quad = data.get("quadrature", {})
    _reject_unknown(quad, QUAD_KEYS, "quadrature")
    bo = _number(quad.get("boundary_order", 4), "quadrature.boundary_order", integer=True)
    if not 2 <= bo <= 10:
        raise ConfigError("quadrature.boundary_order", "must be in 2..10")
    sub = _number(quad.get("panel_subdivisions", 1), "quadrature.panel_subdivisions", positive=True, integer=True)
    vd = _number(quad.get("volume_degree", 2), "quadrature.volume_degree", integer=True)
    ed = _number(quad.get("error_degree", 4), "quadrature.error_degree", integer=True)
    for name, v in (("volume_degree", vd), ("error_degree", ed)):
        if v not in (1, 2, 4, 5):
            raise ConfigError(f"quadrature.{name}", "must be one of 1, 2, 4, 5")

    levels = _number(data.get("levels", 4), "levels", positive=True, integer=True)
    base_h = _number(data.get("base_h", 0.4), "base_h", positive=True)
    threads = _number(data.get("threads", 0), "threads", integer=True)
    if threads < 0:
        raise ConfigError("threads", "must be >= 0")
    deterministic = data.get("deterministic", True)
    if not isinstance(deterministic, bool):
        raise ConfigError("deterministic", "expected true or false")
    elastic_form = data.get("elastic_form", "strain")
    if elastic_form not in ("strain", "gradgrad"):
        raise ConfigError("elastic_form", "expected 'strain' or 'gradgrad'")
    out = data.get("output_dir", "output")
    if not isinstance(out, str) or not out:
        raise ConfigError("output_dir", "expected a non-empty path string")
    out_path = Path(out)
    if not out_path.is_absolute() and base_dir is not None:
        out_path = base_dir / out_path

    return ExperimentConfig(
        problem=problem,
        kernels=kernels,
        alpha=float(alpha),
        gamma=gamma,
        gamma0=gamma0,
        preset=preset,
        preset_params=preset_params,
        refractive_index=nidx,
        levels=levels,
        base_h=base_h,
        boundary_order=bo,
        panel_subdivisions=sub,
        volume_degree=vd,
        error_degree=ed,
        output_dir=out_path,
        deterministic=deterministic,
        threads=threads,
        c0=c0,
        elastic_form=elastic_form,
        raw=data,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<json>", f"line {exc.lineno}: {exc.msg}") from exc
    return parse_config(data, path.parent)
