import numpy as np
import pytest

from nanohdg.config import ConfigError, build_contour, parse_config
from nanohdg.postprocess import Contour

CAVITY_MIN = """\
scenario: cavity
degree: [1, 2]
mesh:
  refinements: [4, 8]
"""

NANOWIRE_MIN = """\
scenario: nanowire
degree: 3
material:
  model: nhd
  plasma_frequency: 8.65e15
  damping: 8.65e13
  fermi_velocity: 1.07e6
mesh:
  radius: 2.0e-9
  outer_radius: 100.0e-9
  surface_divisions: 90
  growth: 1.25
sweep:
  start: 0.4
  stop: 1.4
  count: 5
contour:
  radius: 50.0e-9
"""


def write(tmp_path, text, name="run.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_minimal_cavity_config(tmp_path):
    cfg = parse_config(write(tmp_path, CAVITY_MIN))
    assert cfg.scenario == "cavity"
    assert cfg.degrees == (1, 2)
    assert cfg.material is None
    assert cfg.mesh["refinements"] == [4, 8]
    assert cfg.cavity_omega > 0.0
    assert cfg.omegas.size == 0
    assert cfg.tau_lambda == 1.0
    assert cfg.tau_eta == 1.0
    assert len(cfg.config_hash) == 64


def test_nanowire_config(tmp_path):
    cfg = parse_config(write(tmp_path, NANOWIRE_MIN))
    assert cfg.degree == 3
    assert cfg.material.model == "nhd"
    wp = cfg.material.plasma_frequency
    assert np.allclose(cfg.omegas, np.linspace(0.4, 1.4, 5) * wp)
    assert cfg.norm_length == pytest.approx(4.0e-9)
    assert cfg.direction == (1.0, 0.0)
    assert cfg.amplitude == 1.0 + 0.0j
    assert cfg.contour["shape"] == "circle"
    assert cfg.ordering == "min_degree"


def test_direction_is_normalized(tmp_path):
    text = NANOWIRE_MIN + "incidence:\n  direction: [3.0, 4.0]\n"
    cfg = parse_config(write(tmp_path, text))
    assert cfg.direction == pytest.approx((0.6, 0.8))


def test_zero_direction_rejected(tmp_path):
    text = NANOWIRE_MIN + "incidence:\n  direction: [0.0, 0.0]\n"
    with pytest.raises(ConfigError, match="direction"):
        parse_config(write(tmp_path, text))


def test_degree_out_of_range(tmp_path):
    text = NANOWIRE_MIN.replace("degree: 3", "degree: 7")
    with pytest.raises(ConfigError, match="degree"):
        parse_config(write(tmp_path, text))


def test_degree_list_rejected_for_sweeps(tmp_path):
    text = NANOWIRE_MIN.replace("degree: 3", "degree: [1, 3]")
    with pytest.raises(ConfigError, match="degree"):
        parse_config(write(tmp_path, text))


def test_unknown_top_level_key(tmp_path):
    with pytest.raises(ConfigError, match="frobnicate"):
        parse_config(write(tmp_path, CAVITY_MIN + "frobnicate: 1\n"))


def test_unknown_nested_key_names_path(tmp_path):
    text = NANOWIRE_MIN.replace("  growth: 1.25", "  growth: 1.25\n  color: red")
    with pytest.raises(ConfigError, match="mesh.color"):
        parse_config(write(tmp_path, text))


def test_unknown_scenario(tmp_path):
    text = CAVITY_MIN.replace("scenario: cavity", "scenario: sphere")
    with pytest.raises(ConfigError, match="scenario"):
        parse_config(write(tmp_path, text))


def test_cavity_rejects_sweep_keys(tmp_path):
    text = CAVITY_MIN + "sweep:\n  start: 0.4\n  stop: 1.4\n  count: 3\n"
    with pytest.raises(ConfigError, match="sweep"):
        parse_config(write(tmp_path, text))


def test_sweep_values_alternative(tmp_path):
    text = NANOWIRE_MIN.replace(
        "sweep:\n  start: 0.4\n  stop: 1.4\n  count: 5",
        "sweep:\n  values: [0.5, 0.7, 1.1]")
    cfg = parse_config(write(tmp_path, text))
    wp = cfg.material.plasma_frequency
    assert np.allclose(cfg.omegas, np.array([0.5, 0.7, 1.1]) * wp)


def test_sweep_values_and_range_conflict(tmp_path):
    text = NANOWIRE_MIN.replace("sweep:\n  start: 0.4",
                                "sweep:\n  values: [0.5]\n  start: 0.4")
    with pytest.raises(ConfigError, match="sweep"):
        parse_config(write(tmp_path, text))


def test_refinements_must_increase(tmp_path):
    text = CAVITY_MIN.replace("[4, 8]", "[8, 4]")
    with pytest.raises(ConfigError, match="refinements"):
        parse_config(write(tmp_path, text))


def test_missing_mesh_file(tmp_path):
    text = NANOWIRE_MIN.replace(
        "mesh:\n  radius: 2.0e-9\n  outer_radius: 100.0e-9\n"
        "  surface_divisions: 90\n  growth: 1.25",
        "mesh:\n  path: /nonexistent/wire.msh\n  radius: 2.0e-9")
    with pytest.raises(ConfigError, match="mesh file"):
        parse_config(write(tmp_path, text))


def test_invalid_yaml_syntax(tmp_path):
    with pytest.raises(ConfigError, match="YAML"):
        parse_config(write(tmp_path, "scenario: [unclosed\n"))


def test_nonexistent_config_path(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "missing.yaml")


def test_bad_material_model(tmp_path):
    text = NANOWIRE_MIN.replace("model: nhd", "model: perfect_metal")
    with pytest.raises(ConfigError, match="material.model"):
        parse_config(write(tmp_path, text))


def test_bad_ordering(tmp_path):
    with pytest.raises(ConfigError, match="ordering"):
        parse_config(write(tmp_path,
                           NANOWIRE_MIN + "solver:\n  ordering: magic\n"))


def test_rectangle_contour_spec(tmp_path):
    text = NANOWIRE_MIN.replace(
        "contour:\n  radius: 50.0e-9",
        "contour:\n  shape: rectangle\n  xmin: -7.5e-8\n  xmax: 7.5e-8\n"
        "  ymin: -4.5e-8\n  ymax: 4.5e-8\n  per_side: 40")
    cfg = parse_config(write(tmp_path, text))
    assert cfg.contour["shape"] == "rectangle"
    contour = build_contour(cfg.contour)
    assert isinstance(contour, Contour)
    assert contour.weights.sum() == pytest.approx(2 * (1.5e-7 + 9e-8), rel=1e-12)


def test_build_circle_contour(tmp_path):
    cfg = parse_config(write(tmp_path, NANOWIRE_MIN))
    contour = build_contour(cfg.contour)
    assert contour.weights.sum() == pytest.approx(2 * np.pi * 50e-9, rel=1e-12)


def test_golden_configs_parse():
    import glob
    import os
    root = os.path.join(os.path.dirname(__file__), "..", "configs")
    paths = sorted(glob.glob(os.path.join(root, "*.yaml")))
    assert len(paths) >= 5
    for path in paths:
        cfg = parse_config(path)
        assert cfg.scenario in ("cavity", "nanowire", "dimer", "freespace-null")
