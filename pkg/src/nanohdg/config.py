"""Run configuration: YAML schema, strict parsing, validation.

A run is described by one YAML file.  Parsing is strict: unknown keys
anywhere in the document are rejected so that typos fail loudly instead
of being silently ignored.  Frequencies are given in units of the plasma
frequency (``omega / omega_p``), matching the usual presentation of
extinction spectra.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field

import numpy as np
import yaml

SCENARIOS = ("cavity", "nanowire", "dimer", "freespace-null")

MESH_KEYS = {
    "cavity": {"refinements"},
    "nanowire": {"path", "radius", "outer_radius", "surface_divisions", "growth"},
    "dimer": {"path", "radius", "gap", "outer_distance", "surface_divisions",
              "growth"},
    "freespace-null": {"radius", "spacing"},
}

TOP_KEYS = {"scenario", "degree", "stabilization", "material", "mesh", "sweep",
            "cavity", "incidence", "contour", "norm_length", "output_dir",
            "workers", "solver", "fields_at"}


class ConfigError(ValueError):
    """Invalid or malformed run configuration."""


@dataclass(frozen=True)
class RunConfig:
    """Validated run description; all lengths in metres, omega in rad/s."""

    scenario: str
    degrees: tuple              # one entry for sweeps, several for cavity
    tau_lambda: float
    tau_eta: float
    material: "MaterialSpec"
    mesh: dict
    omegas: np.ndarray          # absolute frequencies, rad/s (empty for cavity)
    cavity_omega: float
    direction: tuple
    amplitude: complex
    contour: dict
    norm_length: float
    output_dir: str
    workers: int
    ordering: str
    fields_at: tuple            # omega/omega_p values to export fields at
    path: str
    config_hash: str
    raw: dict = field(repr=False, default_factory=dict)

    @property
    def degree(self) -> int:
        if len(self.degrees) != 1:
            raise ConfigError("scenario expects a single polynomial degree")
        return self.degrees[0]


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"missing required key '{where}.{key}'"
                          if where else f"missing required key '{key}'")
    return section[key]


def _check_keys(section: dict, allowed, where: str) -> None:
    for k in section:
        if k not in allowed:
            loc = f"{where}.{k}" if where else str(k)
            raise ConfigError(f"unknown key '{loc}'")


def _as_section(value, where: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"'{where}' must be a mapping")
    return value


def _positive(value, where: str) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"'{where}' must be a number") from None
    if not v > 0.0:
        raise ConfigError(f"'{where}' must be positive")
    return v


def _parse_material(section: dict):
    from .materials import MODELS, MaterialSpec

    _check_keys(section, {"model", "plasma_frequency", "damping",
                          "fermi_velocity", "diffusion"}, "material")
    model = _require(section, "model", "material")
    if model not in MODELS:
        raise ConfigError(f"'material.model' must be one of {MODELS}")
    wp = _positive(_require(section, "plasma_frequency", "material"),
                   "material.plasma_frequency")
    gamma = float(section.get("damping", 0.0))
    vf = float(section.get("fermi_velocity", 0.0))
    diff = float(section.get("diffusion", 0.0))
    try:
        return MaterialSpec(model=model, plasma_frequency=wp, damping=gamma,
                            fermi_velocity=vf, diffusion=diff)
    except ValueError as exc:
        raise ConfigError(f"material: {exc}") from None


def _parse_degrees(value, scenario: str) -> tuple:
    if isinstance(value, (int, float)):
        value = [value]
    if not isinstance(value, list) or not value:
        raise ConfigError("'degree' must be an integer or a nonempty list")
    out = []
    for v in value:
        if not isinstance(v, int) or isinstance(v, bool):
            raise ConfigError("'degree' entries must be integers")
        if not 1 <= v <= 4:
            raise ConfigError(f"'degree' must lie in [1, 4], got {v}")
        out.append(v)
    if scenario != "cavity" and len(out) != 1:
        raise ConfigError("'degree' must be a single value for sweep scenarios")
    return tuple(out)


def _parse_sweep(section: dict, wp: float) -> np.ndarray:
    _check_keys(section, {"start", "stop", "count", "values"}, "sweep")
    if "values" in section:
        if any(k in section for k in ("start", "stop", "count")):
            raise ConfigError("'sweep' takes either 'values' or a range, not both")
        vals = section["values"]
        if not isinstance(vals, list) or not vals:
            raise ConfigError("'sweep.values' must be a nonempty list")
        ratios = np.array([_positive(v, "sweep.values") for v in vals])
    else:
        start = _positive(_require(section, "start", "sweep"), "sweep.start")
        stop = _positive(_require(section, "stop", "sweep"), "sweep.stop")
        count = _require(section, "count", "sweep")
        if not isinstance(count, int) or count < 1:
            raise ConfigError("'sweep.count' must be a positive integer")
        if stop <= start and count > 1:
            raise ConfigError("'sweep.stop' must exceed 'sweep.start'")
        ratios = np.linspace(start, stop, count)
    return ratios * wp


def _parse_contour(section: dict) -> dict:
    shape = section.get("shape", "circle")
    if shape == "circle":
        _check_keys(section, {"shape", "center", "radius", "panels"}, "contour")
        center = section.get("center", [0.0, 0.0])
        if not (isinstance(center, list) and len(center) == 2):
            raise ConfigError("'contour.center' must be a pair [x, y]")
        return {"shape": "circle",
                "center": (float(center[0]), float(center[1])),
                "radius": _positive(_require(section, "radius", "contour"),
                                    "contour.radius"),
                "panels": int(section.get("panels", 128))}
    if shape == "rectangle":
        _check_keys(section, {"shape", "xmin", "xmax", "ymin", "ymax",
                              "per_side"}, "contour")
        box = {k: float(_require(section, k, "contour"))
               for k in ("xmin", "xmax", "ymin", "ymax")}
        if box["xmax"] <= box["xmin"] or box["ymax"] <= box["ymin"]:
            raise ConfigError("'contour' rectangle must have positive extent")
        box["shape"] = "rectangle"
        box["per_side"] = int(section.get("per_side", 64))
        return box
    raise ConfigError("'contour.shape' must be 'circle' or 'rectangle'")


def _parse_mesh(section: dict, scenario: str) -> dict:
    allowed = MESH_KEYS[scenario]
    _check_keys(section, allowed, "mesh")
    mesh = dict(section)
    if scenario == "cavity":
        refs = _require(mesh, "refinements", "mesh")
        if not isinstance(refs, list) or len(refs) < 2:
            raise ConfigError("'mesh.refinements' needs at least two entries")
        for r in refs:
            if not isinstance(r, int) or r < 1:
                raise ConfigError("'mesh.refinements' entries must be positive "
                                  "integers")
        if sorted(refs) != refs or len(set(refs)) != len(refs):
            raise ConfigError("'mesh.refinements' must be strictly increasing")
        return mesh
    if "path" in mesh:
        if not os.path.exists(mesh["path"]):
            raise ConfigError(f"mesh file not found: {mesh['path']}")
    if scenario == "nanowire":
        if "path" not in mesh:
            _positive(_require(mesh, "outer_radius", "mesh"), "mesh.outer_radius")
        _positive(_require(mesh, "radius", "mesh"), "mesh.radius")
    elif scenario == "dimer":
        _positive(_require(mesh, "radius", "mesh"), "mesh.radius")
        _positive(_require(mesh, "gap", "mesh"), "mesh.gap")
        if "path" not in mesh:
            _positive(_require(mesh, "outer_distance", "mesh"),
                      "mesh.outer_distance")
    elif scenario == "freespace-null":
        _positive(_require(mesh, "radius", "mesh"), "mesh.radius")
        _positive(_require(mesh, "spacing", "mesh"), "mesh.spacing")
    return mesh


def parse_config(path) -> RunConfig:
    """Load and validate one YAML run configuration."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        doc = yaml.safe_load(blob)
    except yaml.YAMLError as exc:
        raise ConfigError(f"YAML syntax error in {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a YAML mapping at top level")
    _check_keys(doc, TOP_KEYS, "")

    scenario = _require(doc, "scenario", "")
    if scenario not in SCENARIOS:
        raise ConfigError(f"'scenario' must be one of {SCENARIOS}")
    degrees = _parse_degrees(_require(doc, "degree", ""), scenario)

    stab = _as_section(doc.get("stabilization"), "stabilization")
    _check_keys(stab, {"tau_lambda", "tau_eta"}, "stabilization")
    tau_l = _positive(stab.get("tau_lambda", 1.0), "stabilization.tau_lambda")
    tau_e = _positive(stab.get("tau_eta", 1.0), "stabilization.tau_eta")

    if scenario == "cavity" and "material" not in doc:
        # the convergence study supplies its own beta = c material
        material = None
    else:
        material = _parse_material(
            _as_section(_require(doc, "material", ""), "material"))
    mesh = _parse_mesh(_as_section(_require(doc, "mesh", ""), "mesh"), scenario)

    cavity_omega = 0.0
    omegas = np.array([])
    contour: dict = {}
    direction, amplitude = (1.0, 0.0), 1.0 + 0.0j
    norm_length = 1.0
    if scenario == "cavity":
        cav = _as_section(doc.get("cavity"), "cavity")
        _check_keys(cav, {"omega"}, "cavity")
        cavity_omega = _positive(cav.get("omega", 3.0e15), "cavity.omega")
        for key in ("sweep", "incidence", "contour", "norm_length"):
            if key in doc:
                raise ConfigError(f"'{key}' does not apply to the cavity "
                                  "scenario")
    else:
        omegas = _parse_sweep(
            _as_section(_require(doc, "sweep", ""), "sweep"),
            material.plasma_frequency)
        inc = _as_section(doc.get("incidence"), "incidence")
        _check_keys(inc, {"direction", "amplitude"}, "incidence")
        d = inc.get("direction", [1.0, 0.0])
        if not (isinstance(d, list) and len(d) == 2):
            raise ConfigError("'incidence.direction' must be a pair [dx, dy]")
        norm = float(np.hypot(d[0], d[1]))
        if norm == 0.0:
            raise ConfigError("'incidence.direction' must be nonzero")
        direction = (float(d[0]) / norm, float(d[1]) / norm)
        amplitude = complex(inc.get("amplitude", 1.0))
        contour = _parse_contour(
            _as_section(_require(doc, "contour", ""), "contour"))
        if "norm_length" in doc:
            norm_length = _positive(doc["norm_length"], "norm_length")
        elif scenario in ("nanowire", "dimer"):
            norm_length = 2.0 * float(mesh["radius"])
        else:
            norm_length = 2.0 * float(contour.get("radius", 1.0))

    solver = _as_section(doc.get("solver"), "solver")
    _check_keys(solver, {"ordering"}, "solver")
    ordering = solver.get("ordering", "min_degree")
    from .sparselinalg import ORDERINGS
    if ordering not in ORDERINGS:
        raise ConfigError(f"'solver.ordering' must be one of "
                          f"{tuple(ORDERINGS)}")

    workers = doc.get("workers", 1)
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError("'workers' must be a positive integer")

    fields_at = doc.get("fields_at", [])
    if not isinstance(fields_at, list):
        raise ConfigError("'fields_at' must be a list of omega/omega_p values")
    fields_at = tuple(_positive(v, "fields_at") for v in fields_at)

    output_dir = doc.get("output_dir", "out")
    if not isinstance(output_dir, str) or not output_dir:
        raise ConfigError("'output_dir' must be a nonempty string")

    return RunConfig(
        scenario=scenario,
        degrees=degrees,
        tau_lambda=tau_l,
        tau_eta=tau_e,
        material=material,
        mesh=mesh,
        omegas=omegas,
        cavity_omega=cavity_omega,
        direction=direction,
        amplitude=amplitude,
        contour=contour,
        norm_length=norm_length,
        output_dir=output_dir,
        workers=workers,
        ordering=ordering,
        fields_at=fields_at,
        path=str(path),
        config_hash=hashlib.sha256(blob).hexdigest(),
        raw=doc,
    )


def build_contour(spec: dict):
    """Instantiate the integration contour described by a config section."""
    from .postprocess import circle_contour, rectangle_contour

    if spec["shape"] == "circle":
        return circle_contour(spec["center"], spec["radius"],
                              n_panels=spec["panels"])
    return rectangle_contour(spec["xmin"], spec["xmax"], spec["ymin"],
                             spec["ymax"], n_per_side=spec["per_side"])
