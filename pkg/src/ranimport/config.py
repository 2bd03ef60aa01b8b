"""Sectioned key/value configuration.

Every key has a default, so an empty file describes the reference run.
Example::

    [geometry]
    cell_radius = 10
    nucleus_radius = 4

    [model]
    advection = false
    p_Rd = 3.73

    [time]
    dt = 0.01
    t_end = 17
"""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .assembly import DEFAULT_PENALTY
from .geometry import CellGeometry
from .kinetics import SPECIES, KineticConstants
from .model import InitialConditions, ModelParameters, SpeciesProfile
from .timestepping import TimeStepperConfig


class ConfigError(ValueError):
    pass


@dataclass
class MeshConfig:
    target_h: float = 1.0
    degree: int = 1
    penalty: float = DEFAULT_PENALTY


@dataclass
class ExperimentConfig:
    preset: str = "simulate"
    levels: int = 3
    coarse_h: float = 2.0
    degrees: tuple[int, ...] = (1, 2)
    diffusion_scale: float = 1000.0
    speeds: tuple[float, ...] = (0.5, 1.0, 2.0)


@dataclass
class OutputConfig:
    directory: str = "output"
    interval: float = 0.1
    snapshot_times: tuple[float, ...] = (0.0, 17.0)
    write_mesh: bool = False


@dataclass
class SimConfig:
    geometry: CellGeometry = field(default_factory=CellGeometry)
    mesh: MeshConfig = field(default_factory=MeshConfig)
    model: ModelParameters = field(default_factory=ModelParameters)
    initial: InitialConditions = field(default_factory=InitialConditions)
    time: TimeStepperConfig = field(default_factory=TimeStepperConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def with_model(self, **changes) -> "SimConfig":
        return self.replace(model=dataclasses.replace(self.model, **changes))

    def with_time(self, **changes) -> "SimConfig":
        return self.replace(time=dataclasses.replace(self.time, **changes))


_KINETIC_KEYS = [f.name for f in dataclasses.fields(KineticConstants)]
_DEFAULT_INIT = {p.species: p for p in InitialConditions().profiles}


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


class _Section:
    """Typed access to one section that tracks which keys were consumed."""

    def __init__(self, parser: configparser.ConfigParser, name: str):
        self.name = name
        self.items = dict(parser.items(name)) if parser.has_section(name) else {}
        self.used: set[str] = set()

    def get(self, key: str, default, conv=float):
        self.used.add(key)
        raw = self.items.get(key)
        if raw is None or raw.strip() == "":
            return default
        try:
            return conv(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{self.name}] {key} = {raw!r}: {exc}") from None

    def check_unknown(self):
        unknown = set(self.items) - self.used
        if unknown:
            raise ConfigError(f"[{self.name}] unknown key(s): {', '.join(sorted(unknown))}")


def parse_config(text: str, source: str = "<config>") -> SimConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys are case-sensitive: K_M1 and k_m1 differ
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    known = {"geometry", "mesh", "model", "initial", "time", "experiment", "output"}
    extra = set(parser.sections()) - known
    if extra:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(extra))}")

    sections = {name: _Section(parser, name) for name in known}
    try:
        cfg = _build(sections)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    for s in sections.values():
        s.check_unknown()
    return cfg


def _build(sec: dict[str, _Section]) -> SimConfig:
    base = SimConfig()
    g = sec["geometry"]
    geometry = CellGeometry(
        g.get("cell_radius", base.geometry.cell_radius),
        g.get("nucleus_radius", base.geometry.nucleus_radius),
        (g.get("center_x", 0.0), g.get("center_y", 0.0)),
    )
    m = sec["mesh"]
    mesh = MeshConfig(m.get("target_h", base.mesh.target_h), m.get("degree", base.mesh.degree, int),
                      m.get("penalty", base.mesh.penalty))

    md = sec["model"]
    dm = base.model
    kin = KineticConstants(**{k: md.get(k, getattr(dm.kinetics, k)) for k in _KINETIC_KEYS})
    model = ModelParameters(
        diffusivities=tuple(md.get(f"d_{s}", d) for s, d in zip(SPECIES, dm.diffusivities)),
        permeabilities=tuple(md.get(f"p_{s}", p) for s, p in zip(SPECIES, dm.permeabilities)),
        kinetics=kin,
        advection=md.get("advection", dm.advection, _parse_bool),
        advection_speed=md.get("advection_speed", dm.advection_speed),
        cutoff_margin=md.get("cutoff_margin", dm.cutoff_margin),
        membrane_layer=md.get("membrane_layer", dm.membrane_layer),
        membrane_diffusivity_factor=md.get("membrane_diffusivity_factor", dm.membrane_diffusivity_factor),
    )

    ini = sec["initial"]
    band = ini.get("cargo_band_width", _DEFAULT_INIT["C"].band_width)
    profiles = []
    for s in SPECIES:
        d = _DEFAULT_INIT.get(s)
        amp = ini.get(s, d.amplitude if d else 0.0)
        if amp:
            profiles.append(SpeciesProfile(s, amp, kind="band" if s == "C" else "uniform",
                                           band_width=band))
    initial = InitialConditions(tuple(profiles))

    t = sec["time"]
    bt = base.time
    time = TimeStepperConfig(
        scheme=t.get("scheme", bt.scheme, str),
        dt=t.get("dt", bt.dt),
        t_end=t.get("t_end", bt.t_end),
        linear_solver=t.get("linear_solver", bt.linear_solver, str),
        linear_tol=t.get("linear_tol", bt.linear_tol),
        implicit_reaction=t.get("implicit_reaction", bt.implicit_reaction, _parse_bool),
        newton_tol=t.get("newton_tol", bt.newton_tol),
        newton_max_iter=t.get("newton_max_iter", bt.newton_max_iter, int),
    )

    e = sec["experiment"]
    be = base.experiment
    experiment = ExperimentConfig(
        preset=e.get("preset", be.preset, str),
        levels=e.get("levels", be.levels, int),
        coarse_h=e.get("coarse_h", be.coarse_h),
        degrees=e.get("degrees", be.degrees, lambda v: tuple(int(x) for x in _parse_floats(v))),
        diffusion_scale=e.get("diffusion_scale", be.diffusion_scale),
        speeds=e.get("speeds", be.speeds, _parse_floats),
    )
    o = sec["output"]
    bo = base.output
    output = OutputConfig(
        directory=o.get("directory", bo.directory, str),
        interval=o.get("interval", bo.interval),
        snapshot_times=o.get("snapshot_times", (0.0, time.t_end), _parse_floats),
        write_mesh=o.get("write_mesh", bo.write_mesh, _parse_bool),
    )
    if mesh.target_h <= 0 or mesh.degree < 1:
        raise ConfigError("[mesh] target_h must be positive and degree >= 1")
    if output.interval <= 0:
        raise ConfigError("[output] interval must be positive")
    return SimConfig(geometry, mesh, model, initial, time, experiment, output)


def load_config(path: str | Path) -> SimConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))


def dump_config(cfg: SimConfig) -> str:
    """Effective configuration as text; ``parse_config`` reproduces it."""
    g, m, md, t, e, o = cfg.geometry, cfg.mesh, cfg.model, cfg.time, cfg.experiment, cfg.output
    amps = {p.species: p for p in cfg.initial.profiles}
    band = amps["C"].band_width if "C" in amps else _DEFAULT_INIT["C"].band_width
    fl = lambda xs: ", ".join(repr(float(x)) for x in xs)
    lines = [
        "[geometry]",
        f"cell_radius = {g.cell_radius!r}",
        f"nucleus_radius = {g.nucleus_radius!r}",
        f"center_x = {float(g.center[0])!r}",
        f"center_y = {float(g.center[1])!r}",
        "", "[mesh]",
        f"target_h = {m.target_h!r}", f"degree = {m.degree}", f"penalty = {m.penalty!r}",
        "", "[model]",
        *[f"d_{s} = {float(d)!r}" for s, d in zip(SPECIES, md.diffusivities)],
        *[f"p_{s} = {float(p)!r}" for s, p in zip(SPECIES, md.permeabilities)],
        *[f"{k} = {getattr(md.kinetics, k)!r}" for k in _KINETIC_KEYS],
        f"advection = {str(md.advection).lower()}",
        f"advection_speed = {md.advection_speed!r}",
        f"cutoff_margin = {md.cutoff_margin!r}",
        f"membrane_layer = {md.membrane_layer!r}",
        f"membrane_diffusivity_factor = {md.membrane_diffusivity_factor!r}",
        "", "[initial]",
        *[f"{s} = {float(amps[s].amplitude) if s in amps else 0.0!r}" for s in SPECIES],
        f"cargo_band_width = {band!r}",
        "", "[time]",
        f"scheme = {t.scheme}", f"dt = {t.dt!r}", f"t_end = {t.t_end!r}",
        f"linear_solver = {t.linear_solver}", f"linear_tol = {t.linear_tol!r}",
        f"implicit_reaction = {str(t.implicit_reaction).lower()}",
        f"newton_tol = {t.newton_tol!r}", f"newton_max_iter = {t.newton_max_iter}",
        "", "[experiment]",
        f"preset = {e.preset}", f"levels = {e.levels}", f"coarse_h = {e.coarse_h!r}",
        f"degrees = {', '.join(str(d) for d in e.degrees)}",
        f"diffusion_scale = {e.diffusion_scale!r}", f"speeds = {fl(e.speeds)}",
        "", "[output]",
        f"directory = {o.directory}", f"interval = {o.interval!r}",
        f"snapshot_times = {fl(o.snapshot_times)}",
        f"write_mesh = {str(o.write_mesh).lower()}",
    ]
    return "\n".join(lines) + "\n"
