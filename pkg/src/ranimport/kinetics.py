"""Reaction source terms of the Ran import network.

All functions are vectorised over leading axes: a state ``u`` has shape
``(..., 6)`` with species in the order of ``SPECIES``.  Negative
concentrations (DG undershoots) are clamped to zero inside the rate laws
only; callers' arrays are never modified.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

SPECIES = ("Rt", "Rd", "C", "T", "Tr", "Tc")
RT, RD, C, T, TR, TC = range(6)
N_SPECIES = len(SPECIES)

CYTOPLASM = "cytoplasm"
NUCLEUS = "nucleus"

# reaction -> compartments where it is active
LOCALIZATION = {
    "m1": (CYTOPLASM,),
    "m2": (NUCLEUS,),
    "r1": (CYTOPLASM, NUCLEUS),
    "r-1": (CYTOPLASM, NUCLEUS),
    "r2": (CYTOPLASM,),
    "r3": (NUCLEUS,),
}

# net stoichiometry (rows: reactions in LOCALIZATION order, cols: species)
STOICHIOMETRY = np.array([
    #  Rt  Rd   C   T  Tr  Tc
    [-1, +1, 0, 0, 0, 0],    # m1:  Rt -> Rd         (RanGAP)
    [+1, -1, 0, 0, 0, 0],    # m2:  Rd -> Rt         (RCC1)
    [-1, 0, 0, -1, +1, 0],   # r1:  Rt + T -> Tr
    [+1, 0, 0, +1, -1, 0],   # r-1: Tr -> Rt + T
    [0, 0, -1, -1, 0, +1],   # r2:  C + T -> Tc
    [-1, 0, +1, 0, +1, -1],  # r3:  Rt + Tc -> Tr + C
], dtype=float)


@dataclass(frozen=True)
class KineticConstants:
    """Rate constants (1/s, uM, 1/(uM s)) and fixed enzyme levels (uM)."""

    q_cat1: float = 20.1
    K_M1: float = 0.7
    q_cat2: float = 8.0
    K_M2: float = 1.1
    k1: float = 0.1
    k_m1: float = 0.3
    k2: float = 0.15
    k3: float = 0.1
    RanGAP: float = 0.5
    RCC1: float = 0.7

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"kinetic constant {f.name} must be positive, got {v}")


DEFAULT_CONSTANTS = KineticConstants()


def compartment_name(compartment) -> str:
    if compartment in (CYTOPLASM, 1):
        return CYTOPLASM
    if compartment in (NUCLEUS, 2):
        return NUCLEUS
    raise ValueError(f"unknown compartment {compartment!r}")


def _check(*arrays):
    for a in arrays:
        if np.any(np.isnan(a)):
            raise ValueError("NaN concentration passed to a rate law")


def michaelis_menten(x, q_cat, enzyme, K_M):
    x = np.asarray(x, dtype=float)
    _check(x)
    x = np.maximum(x, 0.0)
    return q_cat * enzyme * x / (K_M + x)


def _michaelis_menten_derivative(x, q_cat, enzyme, K_M):
    x = np.asarray(x, dtype=float)
    return np.where(x >= 0, q_cat * enzyme * K_M / (K_M + np.maximum(x, 0.0)) ** 2, 0.0)


def rate_m1(Rt, k: KineticConstants = DEFAULT_CONSTANTS):
    """RanGAP-catalysed hydrolysis Rt -> Rd (cytoplasm)."""
    return michaelis_menten(Rt, k.q_cat1, k.RanGAP, k.K_M1)


def rate_m2(Rd, k: KineticConstants = DEFAULT_CONSTANTS):
    """RCC1-catalysed exchange Rd -> Rt (nucleus)."""
    return michaelis_menten(Rd, k.q_cat2, k.RCC1, k.K_M2)


def rate_mass_action(constant, conc_a, conc_b=None):
    a = np.asarray(conc_a, dtype=float)
    _check(a)
    rate = constant * np.maximum(a, 0.0)
    if conc_b is not None:
        b = np.asarray(conc_b, dtype=float)
        _check(b)
        rate = rate * np.maximum(b, 0.0)
    return rate


def reaction_rates(u, compartment, k: KineticConstants = DEFAULT_CONSTANTS) -> np.ndarray:
    """Rates ``(..., 6)`` of (m1, m2, r1, r-1, r2, r3), zero where not localised."""
    u = np.asarray(u, dtype=float)
    comp = compartment_name(compartment)
    rates = np.stack([
        rate_m1(u[..., RT], k),
        rate_m2(u[..., RD], k),
        rate_mass_action(k.k1, u[..., RT], u[..., T]),
        rate_mass_action(k.k_m1, u[..., TR]),
        rate_mass_action(k.k2, u[..., C], u[..., T]),
        rate_mass_action(k.k3, u[..., RT], u[..., TC]),
    ], axis=-1)
    return rates * _mask(comp)


def _mask(comp: str) -> np.ndarray:
    return np.array([comp in loc for loc in LOCALIZATION.values()], dtype=float)


def source_vector(u, compartment, k: KineticConstants = DEFAULT_CONSTANTS) -> np.ndarray:
    """Net production rates (uM/s) of the six species."""
    return reaction_rates(u, compartment, k) @ STOICHIOMETRY


def source_jacobian(u, compartment, k: KineticConstants = DEFAULT_CONSTANTS) -> np.ndarray:
    """Analytic Jacobian ``(..., 6, 6)`` of ``source_vector`` w.r.t. ``u``."""
    u = np.asarray(u, dtype=float)
    _check(u)
    comp = compartment_name(compartment)
    p = np.maximum(u, 0.0)
    pos = (u >= 0).astype(float)
    # d(rate_r)/d(u_s), shape (..., 6 reactions, 6 species)
    drate = np.zeros(u.shape[:-1] + (6, 6))
    drate[..., 0, RT] = _michaelis_menten_derivative(u[..., RT], k.q_cat1, k.RanGAP, k.K_M1)
    drate[..., 1, RD] = _michaelis_menten_derivative(u[..., RD], k.q_cat2, k.RCC1, k.K_M2)
    drate[..., 2, RT] = k.k1 * p[..., T] * pos[..., RT]
    drate[..., 2, T] = k.k1 * p[..., RT] * pos[..., T]
    drate[..., 3, TR] = k.k_m1 * pos[..., TR]
    drate[..., 4, C] = k.k2 * p[..., T] * pos[..., C]
    drate[..., 4, T] = k.k2 * p[..., C] * pos[..., T]
    drate[..., 5, RT] = k.k3 * p[..., TC] * pos[..., RT]
    drate[..., 5, TC] = k.k3 * p[..., RT] * pos[..., TC]
    drate *= _mask(comp)[:, None]
    return np.einsum("rs,...rj->...sj", STOICHIOMETRY, drate)


# lumped conserved quantities: total Ran, total cargo, total receptor
CONSERVED = {
    "ran": np.array([1, 1, 0, 0, 1, 0], dtype=float),
    "cargo": np.array([0, 0, 1, 0, 0, 1], dtype=float),
    "receptor": np.array([0, 0, 0, 1, 1, 1], dtype=float),
}
