import json

import pytest

from annulus_abc.config import ConfigError, load_config, parse_config
from annulus_abc.exact import PlaneWave


def parse(**kw):
    return parse_config(kw)


def test_defaults_for_example1():
    cfg = parse(exact_solution="example1")
    assert cfg.problem == "laplace"
    assert cfg.alpha == 0.0
    assert cfg.gamma.kind == "kite" and cfg.gamma0.kind == "circle"
    assert cfg.levels == 4 and cfg.boundary_order == 4


def test_wave_default_alpha():
    cfg = parse(exact_solution={"name": "example2", "k": 3.0})
    assert cfg.alpha == 2.0
    assert cfg.kernels.k == 3.0


def test_example3_pins_parameters():
    cfg = parse(exact_solution="example3")
    assert (cfg.kernels.mu, cfg.kernels.lam) == (2.0, 3.0)
    assert cfg.preset_params["source"] == (0.5, 0.0)
    with pytest.raises(ConfigError) as exc:
        parse(exact_solution="example3", parameters={"mu": 1.0})
    assert exc.value.path == "parameters.mu"


def test_example4_pins_parameters():
    k = parse(exact_solution="example4").kernels
    assert (k.rho, k.mu, k.lam) == (0.5, 2.0, 0.5)
    assert k.kp == pytest.approx(1.0)


@pytest.mark.parametrize(
    "doc,path",
    [
        ({"exact_solution": "example1", "colour": "red"}, "colour"),
        ({"exact_solution": "example1", "parameters": {"kappa": 1}}, "parameters.kappa"),
        ({"exact_solution": {"name": "example2", "speed": 1}}, "exact_solution.speed"),
        ({"exact_solution": "example1", "quadrature": {"order": 4}}, "quadrature.order"),
        ({"exact_solution": "example1", "gamma": {"kind": "kite", "size": 2}}, "gamma"),
        (
            {"problem": "inhomogeneous", "exact_solution": "plane_wave_scattering",
             "refractive_index": {"kind": "disc", "value": 2, "width": 1}},
            "refractive_index.width",
        ),
    ],
)
def test_unknown_keys_rejected_with_path(doc, path):
    with pytest.raises(ConfigError) as exc:
        parse_config(doc)
    assert exc.value.path == path


@pytest.mark.parametrize(
    "doc,path",
    [
        ({"exact_solution": "example9"}, "exact_solution.name"),
        ({"problem": "maxwell"}, "problem"),
        ({"problem": "helmholtz", "exact_solution": "example1"}, "problem"),
        ({"exact_solution": "example1", "parameters": {"alpha": 2}}, "parameters.alpha"),
        ({"problem": "helmholtz", "parameters": {"k": 1, "alpha": 0}}, "parameters.alpha"),
        ({"problem": "helmholtz"}, "parameters.k"),
        ({"problem": "helmholtz", "parameters": {"k": 1, "mu": 2}}, "parameters.mu"),
        ({"exact_solution": "example1", "levels": 0}, "levels"),
        ({"exact_solution": "example1", "levels": 2.5}, "levels"),
        ({"exact_solution": "example1", "base_h": -1}, "base_h"),
        ({"exact_solution": "example1", "base_h": "big"}, "base_h"),
        ({"exact_solution": "example1", "quadrature": {"boundary_order": 30}}, "quadrature.boundary_order"),
        ({"exact_solution": "example1", "gamma0": {"kind": "circle", "scale": 1.05}}, "gamma0"),
        ({"exact_solution": "example1", "gamma": {"kind": "blob"}}, "gamma"),
        ({"exact_solution": "example1", "deterministic": "yes"}, "deterministic"),
        ({"exact_solution": "example1", "refractive_index": {"kind": "constant"}}, "refractive_index"),
        (
            {"problem": "inhomogeneous", "exact_solution": "plane_wave_scattering",
             "refractive_index": {"kind": "constant", "value": -1}},
            "refractive_index",
        ),
        ({"problem": "inhomogeneous", "exact_solution": "plane_wave_scattering", "gamma": {"kind": "kite"}}, "gamma"),
        ({"problem": "inhomogeneous", "exact_solution": "example2"}, "exact_solution.name"),
        ({"exact_solution": {"name": "plane_wave_scattering", "direction": [0, 0]}}, "exact_solution.direction"),
    ],
)
def test_invalid_values_rejected_with_path(doc, path):
    with pytest.raises(ConfigError) as exc:
        parse_config(doc)
    assert exc.value.path == path


def test_inhomogeneous_defaults():
    cfg = parse(problem="inhomogeneous", exact_solution={"name": "plane_wave_scattering", "k": 2.0},
                refractive_index={"kind": "disc", "value": 2.0, "radius": 0.5})
    assert cfg.gamma is None
    assert cfg.gamma0.scale == 2.0
    assert cfg.refractive_index.interface().scale == 0.5
    spec = cfg.problem_spec()
    assert spec.inhomogeneous and spec.kernels.k == 2.0
    assert cfg.exact_field() is None


def test_trivial_index_has_incident_wave_as_exact_field():
    cfg = parse(problem="inhomogeneous", exact_solution="plane_wave_scattering")
    assert cfg.refractive_index.trivial
    assert isinstance(cfg.exact_field(), PlaneWave)


def test_output_dir_relative_to_config(tmp_path):
    path = tmp_path / "sub" / "cfg.json"
    path.parent.mkdir()
    path.write_text(json.dumps({"exact_solution": "example1", "output_dir": "out"}))
    assert load_config(path).output_dir == tmp_path / "sub" / "out"


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)
    bad.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_summary_echoes_parameters():
    s = parse(exact_solution="example4").summary()
    assert s["kp"] == pytest.approx(1.0) and s["ks"] == pytest.approx(1.5)
    assert s["gamma"]["kind"] == "kite"
