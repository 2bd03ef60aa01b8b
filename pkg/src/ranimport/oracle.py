"""Well-mixed two-compartment reduction of the import model.

Each compartment is a homogeneous reactor running the same kinetics as the
PDE; the envelope exchanges species at rate ``p * |Gamma| * (u_c - u_n)``.
Used as an independent reference for the PDE in the fast-diffusion limit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import CellGeometry
from .kinetics import CYTOPLASM, N_SPECIES, NUCLEUS, source_vector
from .model import ModelParameters


@dataclass(frozen=True)
class CompartmentOracle:
    """ODE right-hand side for 12 concentrations (6 cytoplasm, then 6 nucleus)."""

    cytoplasm_area: float
    nucleus_area: float
    envelope_length: float
    params: ModelParameters = ModelParameters()
    reactions: bool = True

    def __post_init__(self):
        if min(self.cytoplasm_area, self.nucleus_area, self.envelope_length) <= 0:
            raise ValueError("compartment sizes must be positive")

    @classmethod
    def from_geometry(cls, geometry: CellGeometry, params: ModelParameters = ModelParameters(),
                      reactions: bool = True) -> "CompartmentOracle":
        return cls(geometry.cytoplasm_area, geometry.nucleus_area, geometry.envelope_length,
                   params, reactions)

    def ode_rhs(self, state) -> np.ndarray:
        state = np.asarray(state, dtype=float)
        if np.any(np.isnan(state)):
            raise ValueError("NaN in compartment state")
        uc, un = state[..., :N_SPECIES], state[..., N_SPECIES:]
        p = np.asarray(self.params.permeabilities)
        flux = p * self.envelope_length * (uc - un)
        dc = -flux / self.cytoplasm_area
        dn = flux / self.nucleus_area
        if self.reactions:
            k = self.params.kinetics
            dc = dc + source_vector(uc, CYTOPLASM, k)
            dn = dn + source_vector(un, NUCLEUS, k)
        return np.concatenate([dc, dn], axis=-1)

    def total_mass(self, state, weights) -> np.ndarray:
        """Extensive amount ``V_c w.u_c + V_n w.u_n`` of a lumped quantity."""
        state = np.asarray(state)
        w = np.asarray(weights, dtype=float)
        return (self.cytoplasm_area * state[..., :N_SPECIES] @ w
                + self.nucleus_area * state[..., N_SPECIES:] @ w)

    def integrate(self, state0, t_end: float, dt: float = 1e-3, growth_bound: float = 1e6):
        """Classical RK4.  Returns ``(times, states)`` with one row per step."""
        y = np.array(state0, dtype=float)
        if y.shape != (2 * N_SPECIES,):
            raise ValueError(f"state must have {2 * N_SPECIES} entries")
        if t_end < 0 or dt <= 0:
            raise ValueError("need t_end >= 0 and dt > 0")
        n = int(np.ceil(t_end / dt - 1e-9)) if t_end > 0 else 0
        h = t_end / n if n else dt
        out = np.empty((n + 1, y.size))
        out[0] = y
        bound = growth_bound * max(np.abs(y).max(), 1.0)
        f = self.ode_rhs
        for k in range(n):
            k1 = f(y)
            k2 = f(y + 0.5 * h * k1)
            k3 = f(y + 0.5 * h * k2)
            k4 = f(y + h * k3)
            y = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.isfinite(y)) or np.abs(y).max() > bound:
                raise FloatingPointError(f"oracle integration unstable at t={(k + 1) * h:g}")
            out[k + 1] = y
        return np.linspace(0.0, n * h, n + 1), out
