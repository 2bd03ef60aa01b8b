"""Simulation driver, experiment presets and file outputs."""
from __future__ import annotations

import csv
import dataclasses
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assembly import build_operators
from .config import SimConfig, dump_config
from .convergence import ConvergenceTable, ManufacturedProblem
from .convergence import run_convergence_study as _convergence_study
from .dg import DgSpace
from .geometry import CYTOPLASM, NUCLEUS, build_disk_mesh, write_mesh
from .kinetics import C, CONSERVED, N_SPECIES, RT, SPECIES, TC
from .model import build_initial_state, microtubule_velocity
from .oracle import CompartmentOracle
from .timestepping import Integrator

log = logging.getLogger(__name__)

TIMESERIES_VERSION = "ranimport-timeseries v1"
SNAPSHOT_VERSION = "ranimport-snapshot v1"
CONSERVED_NAMES = tuple(CONSERVED)


def timeseries_columns() -> list[str]:
    cols = ["t"]
    for s in SPECIES:
        cols += [f"{s}_mass_cyto", f"{s}_mass_nuc", f"{s}_avg_cyto", f"{s}_avg_nuc"]
    cols += [f"residual_{q}" for q in CONSERVED_NAMES]
    return cols


@dataclass
class TimeSeries:
    """Compartment masses (uM um^2) and averages (uM) sampled over time.

    ``residuals`` are relative drifts ``(Q(t) - Q(0)) / Q(0)`` of the
    lumped conserved quantities in ``CONSERVED`` order.
    """

    t: list = field(default_factory=list)
    mass_cyto: list = field(default_factory=list)
    mass_nuc: list = field(default_factory=list)
    avg_cyto: list = field(default_factory=list)
    avg_nuc: list = field(default_factory=list)
    residuals: list = field(default_factory=list)

    def append(self, t, mass_cyto, mass_nuc, area_cyto, area_nuc):
        mass_cyto, mass_nuc = np.asarray(mass_cyto, float), np.asarray(mass_nuc, float)
        totals = np.array([(mass_cyto + mass_nuc) @ w for w in CONSERVED.values()])
        if not self.t:
            self._q0 = totals
        q0 = self._q0
        res = np.where(q0 != 0, (totals - q0) / np.where(q0 != 0, q0, 1.0), totals - q0)
        self.t.append(float(t))
        self.mass_cyto.append(mass_cyto)
        self.mass_nuc.append(mass_nuc)
        self.avg_cyto.append(mass_cyto / area_cyto)
        self.avg_nuc.append(mass_nuc / area_nuc)
        self.residuals.append(res)

    def arrays(self) -> dict[str, np.ndarray]:
        return {"t": np.array(self.t), "mass_cyto": np.array(self.mass_cyto),
                "mass_nuc": np.array(self.mass_nuc), "avg_cyto": np.array(self.avg_cyto),
                "avg_nuc": np.array(self.avg_nuc), "residuals": np.array(self.residuals)}

    def rows(self):
        for k, t in enumerate(self.t):
            row = [t]
            for s in range(N_SPECIES):
                row += [self.mass_cyto[k][s], self.mass_nuc[k][s], self.avg_cyto[k][s], self.avg_nuc[k][s]]
            yield row + list(self.residuals[k])

    # derived observables
    @property
    def nuclear_cargo_mass(self) -> np.ndarray:
        m = np.array(self.mass_nuc)
        return m[:, C] + m[:, TC]

    @property
    def nuclear_cargo_concentration(self) -> np.ndarray:
        a = np.array(self.avg_nuc)
        return a[:, C] + a[:, TC]

    @property
    def max_residual(self) -> float:
        return float(np.abs(np.array(self.residuals)).max()) if self.residuals else 0.0


def write_timeseries(series: TimeSeries, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# {TIMESERIES_VERSION}; t in s, mass in uM*um^2, avg in uM, residual relative\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(timeseries_columns())
        for row in series.rows():
            w.writerow([f"{v:.12e}" for v in row])
    return path


def read_timeseries(path: str | Path) -> TimeSeries:
    with Path(path).open() as fh:
        header = fh.readline()
        if TIMESERIES_VERSION not in header:
            raise ValueError(f"{path}: not a {TIMESERIES_VERSION} file")
        reader = csv.reader(fh)
        cols = next(reader)
        if cols != timeseries_columns():
            raise ValueError(f"{path}: unexpected columns")
        data = np.array([[float(v) for v in row] for row in reader], ndmin=2)
    ts = TimeSeries()
    per = data[:, 1:1 + 4 * N_SPECIES].reshape(len(data), N_SPECIES, 4)
    ts.t = list(data[:, 0])
    ts.mass_cyto, ts.mass_nuc = list(per[..., 0]), list(per[..., 1])
    ts.avg_cyto, ts.avg_nuc = list(per[..., 2]), list(per[..., 3])
    ts.residuals = list(data[:, 1 + 4 * N_SPECIES:])
    return ts


def write_snapshot(state: np.ndarray, space: DgSpace, time: float, path: str | Path) -> Path:
    """Point cloud of all species at the element quadrature points."""
    vol = space.volume()
    c = np.stack([space.padded(b) for b in space.species_view(state)], axis=-1)
    vals = vol.values(c).reshape(-1, space.n_species)
    pts = vol.points.reshape(-1, 2)
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"# {SNAPSHOT_VERSION}; t={time:.6g} s; x,y in um; concentrations in uM\n")
        fh.write(",".join(["x", "y", *SPECIES]) + "\n")
        np.savetxt(fh, np.column_stack([pts, vals]), delimiter=",", fmt="%.10e")
    return path


def read_snapshot(path: str | Path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=2, ndmin=2)


@dataclass
class SimulationResult:
    series: TimeSeries
    state: np.ndarray
    n_steps: int
    files: list = field(default_factory=list)


class Simulation:
    """Mesh, discrete space, operators and initial state for one config."""

    def __init__(self, config: SimConfig):
        self.config = config
        g, mc, mp = config.geometry, config.mesh, config.model
        self.mesh = build_disk_mesh(g, mc.target_h, mc.degree,
                                    extra_radii=config.initial.band_radii(g))
        self.space = DgSpace(self.mesh, N_SPECIES)
        velocity = (lambda x: microtubule_velocity(x, mp, g)) if mp.advection else None
        self.ops = build_operators(self.space, mp.element_diffusivities(self.space), mp.permeabilities,
                                   velocity, mp.transported, mc.penalty, mp.kinetics)
        self.u0 = build_initial_state(self.space, config.initial, g)
        self.nucleus = self.mesh.subdomain == NUCLEUS
        self.cytoplasm = self.mesh.subdomain == CYTOPLASM
        self.area_cyto = self.mesh.subdomain_area(CYTOPLASM)
        self.area_nuc = self.mesh.subdomain_area(NUCLEUS)

    def record(self, series: TimeSeries, t: float, u: np.ndarray):
        series.append(t, self.ops.species_mass(u, self.cytoplasm), self.ops.species_mass(u, self.nucleus),
                      self.area_cyto, self.area_nuc)

    def run(self, output_dir: str | Path | None = None, csv_name: str = "timeseries.csv",
            snapshot_prefix: str = "snapshot") -> SimulationResult:
        cfg = self.config
        out = Path(output_dir) if output_dir is not None else None
        series = TimeSeries()
        files = []
        snap_times = sorted(set(cfg.output.snapshot_times)) if out is not None else []
        tol = 0.5 * cfg.time.dt

        def observe(t, u):
            self.record(series, t, u)
            for ts in snap_times:
                if abs(t - ts) <= tol:
                    files.append(write_snapshot(u, self.space, t, out / f"{snapshot_prefix}_t{ts:08.3f}.csv"))

        integ = Integrator.from_operators(self.ops, cfg.time, cfg.model.advection)
        res = integ.run(self.u0, cfg.time.t_end, [observe], cfg.output.interval)
        if out is not None:
            files.insert(0, write_timeseries(series, out / csv_name))
        log.info("t=%g s in %d steps; max conservation residual %.2e", res.t, res.n_steps,
                 series.max_residual)
        return SimulationResult(series, res.u, res.n_steps, files)


def _prepare(output_dir) -> Path | None:
    if output_dir is None:
        return None
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_simulation(config: SimConfig, output_dir: str | Path | None = None) -> SimulationResult:
    """Run one simulation, writing ``timeseries.csv``, snapshots and the effective config."""
    out = _prepare(output_dir)
    sim = Simulation(config)
    if out is not None:
        (out / "config.ini").write_text(dump_config(config))
        if config.output.write_mesh:
            write_mesh(sim.mesh, out / "mesh.txt")
    return sim.run(out)


@dataclass
class NocodazoleReport:
    t_end: float
    with_advection: TimeSeries
    without_advection: TimeSeries

    @property
    def cargo_ratio(self) -> float:
        """Nuclear cargo (C + Tc) concentration ratio at the final time."""
        return float(self.with_advection.nuclear_cargo_concentration[-1]
                     / self.without_advection.nuclear_cargo_concentration[-1])

    @property
    def free_cargo_ratio(self) -> float:
        return float(self.with_advection.avg_nuc[-1][C] / self.without_advection.avg_nuc[-1][C])

    def slope_difference(self, t: float = 5.0) -> float:
        """Relative difference of the nuclear cargo accumulation rates at ``t``."""
        on = accumulation_rate(self.with_advection, t)
        off = accumulation_rate(self.without_advection, t)
        return abs(on - off) / abs(off)

    def format(self) -> str:
        lines = [
            f"t_end = {self.t_end:g}",
            f"nuclear_cargo_ratio = {self.cargo_ratio:.6f}",
            f"nuclear_free_cargo_ratio = {self.free_cargo_ratio:.6f}",
            f"nuclear_cargo_avg_with_advection = {self.with_advection.nuclear_cargo_concentration[-1]:.6e}",
            f"nuclear_cargo_avg_without_advection = {self.without_advection.nuclear_cargo_concentration[-1]:.6e}",
        ]
        if self.t_end > 5.0:
            lines.append(f"accumulation_rate_difference_t5 = {self.slope_difference(5.0):.6f}")
        return "\n".join(lines) + "\n"


def accumulation_rate(series: TimeSeries, t: float) -> float:
    """Central-difference slope of the nuclear cargo mass at ``t``."""
    times = np.asarray(series.t)
    k = int(np.argmin(np.abs(times - t)))
    if k == 0 or k == len(times) - 1:
        raise ValueError(f"t={t} is not an interior output time")
    m = series.nuclear_cargo_mass
    return float((m[k + 1] - m[k - 1]) / (times[k + 1] - times[k - 1]))


def run_nocodazole_experiment(config: SimConfig, output_dir: str | Path | None = None) -> NocodazoleReport:
    """Same model with and without microtubule transport."""
    out = _prepare(output_dir)
    on = config.with_model(advection=True)
    off = config.with_model(advection=False)
    runs = {}
    for tag, cfg in (("advection_on", on), ("advection_off", off)):
        runs[tag] = Simulation(cfg).run(out, f"timeseries_{tag}.csv", f"snapshot_{tag}").series
    report = NocodazoleReport(config.time.t_end, runs["advection_on"], runs["advection_off"])
    if out is not None:
        (out / "config.ini").write_text(dump_config(config))
        (out / "nocodazole_report.txt").write_text(report.format())
    log.info("nuclear cargo ratio with/without advection: %.4f", report.cargo_ratio)
    return report


def advection_speed_sweep(config: SimConfig, speeds=None) -> dict[float, float]:
    """Nuclear cargo ratio at the final time for each advection speed."""
    speeds = config.experiment.speeds if speeds is None else speeds
    base = Simulation(config.with_model(advection=False)).run().series
    ref = base.nuclear_cargo_concentration[-1]
    out = {}
    for v in speeds:
        s = Simulation(config.with_model(advection=True, advection_speed=float(v))).run().series
        out[float(v)] = float(s.nuclear_cargo_concentration[-1] / ref)
    return out


def run_convergence_study(config: SimConfig, levels: int | None = None,
                          output_dir: str | Path | None = None,
                          problem: ManufacturedProblem | None = None) -> list[ConvergenceTable]:
    """Manufactured-solution study for every degree in ``config.experiment.degrees``."""
    levels = config.experiment.levels if levels is None else levels
    problem = problem or ManufacturedProblem(C_sigma=config.mesh.penalty)
    tables = [_convergence_study(config.geometry, problem, d, levels, config.experiment.coarse_h)
              for d in config.experiment.degrees]
    out = _prepare(output_dir)
    if out is not None:
        (out / "convergence.txt").write_text("\n\n".join(t.format() for t in tables) + "\n")
    for t in tables:
        log.info("degree %d rates %s", t.degree, ", ".join(f"{r:.2f}" for r in t.rates))
    return tables


@dataclass
class OracleComparison:
    scale: float
    max_deviation: float
    final_deviation: float
    species_final_deviation: np.ndarray
    pde: TimeSeries
    ode: TimeSeries
    warning: str | None = None


def _oracle_series(oracle: CompartmentOracle, times, states) -> TimeSeries:
    ts = TimeSeries()
    for t, y in zip(times, states):
        ts.append(t, y[:N_SPECIES] * oracle.cytoplasm_area, y[N_SPECIES:] * oracle.nucleus_area,
                  oracle.cytoplasm_area, oracle.nucleus_area)
    return ts


def run_oracle_comparison(config: SimConfig, diffusion_scale: float | None = None,
                          output_dir: str | Path | None = None, floor: float = 1e-3,
                          oracle_dt: float = 1e-3) -> OracleComparison:
    """Compare PDE compartment averages with the well-mixed ODE reduction.

    Deviation is ``|avg_pde - avg_ode| / max(avg_ode, floor)``, maximised over
    species (and over output times for ``max_deviation``).
    """
    scale = config.experiment.diffusion_scale if diffusion_scale is None else diffusion_scale
    if not scale >= 1:
        raise ValueError("diffusion scale must be >= 1")
    d = tuple(scale * x for x in config.model.diffusivities)
    cfg = config.with_model(diffusivities=d)
    warning = None
    if cfg.model.advection:
        warning = "advection is on; the compartment reduction has no transport term"
        log.warning(warning)
    out = _prepare(output_dir)
    sim = Simulation(cfg)
    pde = sim.run(out, "timeseries_pde.csv", "snapshot_pde").series
    oracle = CompartmentOracle.from_geometry(cfg.geometry, cfg.model)
    a = pde.arrays()
    y0 = np.concatenate([a["avg_cyto"][0], a["avg_nuc"][0]])
    times, states = oracle.integrate(y0, cfg.time.t_end, oracle_dt)
    idx = np.searchsorted(times, a["t"] - 1e-9)
    ode = _oracle_series(oracle, times[idx], states[idx])
    if out is not None:
        write_timeseries(ode, out / "timeseries_oracle.csv")
    b = ode.arrays()
    pde_avg = np.concatenate([a["avg_cyto"], a["avg_nuc"]], axis=1)
    ode_avg = np.concatenate([b["avg_cyto"], b["avg_nuc"]], axis=1)
    dev = np.abs(pde_avg - ode_avg) / np.maximum(np.abs(ode_avg), floor)
    per_species = dev[-1].reshape(2, N_SPECIES).max(axis=0)
    res = OracleComparison(scale, float(dev.max()), float(dev[-1].max()), per_species, pde, ode, warning)
    log.info("oracle deviation at t_end %.3e, over time %.3e", res.final_deviation, res.max_deviation)
    return res


def gradient_ratio(series: TimeSeries) -> float:
    """Nuclear over cytoplasmic RanGTP average at the last output time."""
    return float(series.avg_nuc[-1][RT] / series.avg_cyto[-1][RT])
