"""Parameters, initial state and microtubule transport of the Ran import model."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dg import DgSpace
from .geometry import CYTOPLASM, NUCLEUS, CellGeometry
from .kinetics import N_SPECIES, SPECIES, TC, KineticConstants

BOLTZMANN = 1.380649e-23  # J/K


@dataclass(frozen=True)
class ModelParameters:
    """Transport coefficients for the species in ``kinetics.SPECIES`` order.

    Diffusivities in um^2/s, permeabilities in um/s, advection speed in um/s.
    """

    diffusivities: tuple[float, ...] = (22.0, 20.0, 18.2, 14.0, 14.0, 12.4)
    permeabilities: tuple[float, ...] = (0.0, 3.73, 0.0, 1.87, 1.87, 1.87)
    kinetics: KineticConstants = field(default_factory=KineticConstants)
    advection: bool = True
    advection_speed: float = 1.0
    transported: tuple[int, ...] = (TC,)
    cutoff_margin: float = 0.5
    # optional slower diffusion in a layer under the plasma membrane
    membrane_layer: float = 0.0
    membrane_diffusivity_factor: float = 1.0

    def __post_init__(self):
        d = np.asarray(self.diffusivities, dtype=float)
        p = np.asarray(self.permeabilities, dtype=float)
        if d.shape != (N_SPECIES,) or p.shape != (N_SPECIES,):
            raise ValueError(f"need {N_SPECIES} diffusivities and permeabilities")
        if np.any(~np.isfinite(d)) or np.any(d <= 0):
            raise ValueError("diffusivities must be positive")
        if np.any(~np.isfinite(p)) or np.any(p < 0):
            raise ValueError("permeabilities must be nonnegative")
        if self.advection_speed < 0:
            raise ValueError("advection speed must be nonnegative")
        if self.cutoff_margin <= 0:
            raise ValueError("cutoff margin must be positive")
        if self.membrane_diffusivity_factor <= 0 or self.membrane_layer < 0:
            raise ValueError("invalid near-membrane diffusivity correction")

    def element_diffusivities(self, space: DgSpace) -> np.ndarray:
        """Diffusivity per species and element, shape ``(6, ne)``."""
        d = np.repeat(np.asarray(self.diffusivities, dtype=float)[:, None], space.mesh.n_elements, 1)
        geom = space.mesh.geometry
        if self.membrane_layer > 0 and self.membrane_diffusivity_factor != 1.0 and geom is not None:
            r = np.linalg.norm(space.mesh.centroids - np.asarray(geom.center), axis=1)
            d[:, r > geom.cell_radius - self.membrane_layer] *= self.membrane_diffusivity_factor
        return d


def _smootherstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6 * t - 15) + 10)


def _smootherstep_derivative(t):
    inside = (t > 0) & (t < 1)
    t = np.clip(t, 0.0, 1.0)
    return np.where(inside, 30 * t * t * (t - 1) ** 2, 0.0)


def microtubule_cutoff(r, geometry: CellGeometry, margin: float):
    """Radial profile: 0 within ``margin`` of either membrane, 1 in the bulk.

    The two ramps have width ``margin`` and are C2 (quintic smootherstep).
    Returns the profile and its radial derivative.
    """
    r = np.asarray(r, dtype=float)
    a = (r - geometry.nucleus_radius - margin) / margin
    b = (geometry.cell_radius - margin - r) / margin
    sa, sb = _smootherstep(a), _smootherstep(b)
    chi = sa * sb
    dchi = _smootherstep_derivative(a) * sb / margin - sa * _smootherstep_derivative(b) / margin
    return chi, dchi


def microtubule_velocity(x, params: ModelParameters, geometry: CellGeometry) -> np.ndarray:
    """Inward (dynein-directed) velocity field ``(..., 2)`` in um/s."""
    x = np.asarray(x, dtype=float)
    rel = x - np.asarray(geometry.center)
    r = np.linalg.norm(rel, axis=-1)
    chi, _ = microtubule_cutoff(r, geometry, params.cutoff_margin)
    safe = np.where(r > 0, r, 1.0)
    speed = params.advection_speed if params.advection else 0.0
    return -(speed * chi / safe)[..., None] * rel


def microtubule_divergence(x, params: ModelParameters, geometry: CellGeometry) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x - np.asarray(geometry.center), axis=-1)
    chi, dchi = microtubule_cutoff(r, geometry, params.cutoff_margin)
    safe = np.where(r > 0, r, 1.0)
    speed = params.advection_speed if params.advection else 0.0
    return -speed * (dchi + chi / safe)


def advection_field(x, params: ModelParameters, geometry: CellGeometry) -> np.ndarray:
    """Per-species advection field ``(..., 6, 2)``; only ``Tc`` is carried."""
    x = np.asarray(x, dtype=float)
    b = microtubule_velocity(x, params, geometry)
    out = np.zeros(x.shape[:-1] + (N_SPECIES, 2))
    for s in params.transported:
        out[..., s, :] = b
    return out


def water_viscosity(temperature: float) -> float:
    """Dynamic viscosity of water (Pa s), Vogel correlation."""
    return 2.414e-5 * 10 ** (247.8 / (temperature - 140.0))


def stokes_einstein_diffusivity(stokes_radius_nm: float, viscosity_ratio: float = 5.0,
                                temperature: float = 293.15,
                                water_viscosity_pa_s: float | None = None) -> float:
    """Diffusivity (um^2/s) of a sphere of the given Stokes radius (nm).

    The medium viscosity is ``viscosity_ratio`` times that of water at
    ``temperature`` (K).
    """
    if not stokes_radius_nm > 0:
        raise ValueError(f"Stokes radius must be positive, got {stokes_radius_nm}")
    if not viscosity_ratio > 0 or not temperature > 0:
        raise ValueError("viscosity ratio and temperature must be positive")
    eta = water_viscosity(temperature) if water_viscosity_pa_s is None else water_viscosity_pa_s
    d = BOLTZMANN * temperature / (6 * math.pi * eta * viscosity_ratio * stokes_radius_nm * 1e-9)
    return d * 1e12


def stokes_radius_nm(diffusivity: float, viscosity_ratio: float = 5.0,
                     temperature: float = 293.15,
                     water_viscosity_pa_s: float | None = None) -> float:
    """Inverse of :func:`stokes_einstein_diffusivity`."""
    return stokes_einstein_diffusivity(1.0, viscosity_ratio, temperature,
                                       water_viscosity_pa_s) / diffusivity


@dataclass(frozen=True)
class SpeciesProfile:
    """Initial amount of one species.

    ``kind`` is ``"uniform"`` (whole compartment) or ``"band"`` (peripheral
    annulus of width ``band_width`` under the plasma membrane).
    """

    species: str
    amplitude: float
    compartment: str = "cytoplasm"
    kind: str = "uniform"
    band_width: float = 2.0


@dataclass(frozen=True)
class InitialConditions:
    profiles: tuple[SpeciesProfile, ...] = (
        SpeciesProfile("Rt", 3.0),
        SpeciesProfile("Rd", 3.0),
        SpeciesProfile("C", 8.0, kind="band", band_width=2.0),
        SpeciesProfile("T", 4.0),
    )

    def band_radii(self, geometry: CellGeometry) -> list[float]:
        """Radii the mesh must resolve so band profiles are element-aligned."""
        return sorted({geometry.cell_radius - p.band_width
                       for p in self.profiles if p.kind == "band"})


def build_initial_state(space: DgSpace, ics: InitialConditions,
                        geometry: CellGeometry | None = None) -> np.ndarray:
    """Elementwise-constant initial state; unlisted species start at zero.

    An element receives a profile's amplitude when its centroid lies in the
    profile's region.  Band profiles are exact when the mesh resolves the
    band radius (see :meth:`InitialConditions.band_radii`).
    """
    geometry = geometry or space.mesh.geometry
    if geometry is None:
        raise ValueError("cell geometry required")
    mesh = space.mesh
    r = np.linalg.norm(mesh.centroids - np.asarray(geometry.center), axis=1)
    u = np.zeros((space.n_species, mesh.n_elements, space.nb))
    for prof in ics.profiles:
        if prof.species not in SPECIES:
            raise ValueError(f"unknown species {prof.species!r}")
        tag = {"cytoplasm": CYTOPLASM, "nucleus": NUCLEUS}.get(prof.compartment)
        if tag is None:
            raise ValueError(f"unknown compartment {prof.compartment!r}")
        region = mesh.subdomain == tag
        if prof.kind == "band":
            if tag != CYTOPLASM or not 0 < prof.band_width < geometry.cell_radius - geometry.nucleus_radius:
                raise ValueError(f"band profile for {prof.species} extends outside the cytoplasm")
            region &= r > geometry.cell_radius - prof.band_width
        elif prof.kind != "uniform":
            raise ValueError(f"unknown profile kind {prof.kind!r}")
        u[SPECIES.index(prof.species), region, 0] += prof.amplitude
    return np.concatenate([space.unpadded(u[s]) for s in range(space.n_species)])
