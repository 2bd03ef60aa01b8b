"""Interior-penalty DG operator for the multi-species transmission problem.

For species ``i`` with diffusivity ``d``, permeability ``p`` and advection
field ``b`` (vanishing on both subdomain boundaries) the bilinear form is::

    B(u, v) = sum_K int_K (d grad u - u b) . grad v
            + int_Gtr p [[u]] . [[v]]
            - int_Gint ( {d grad u - u b} . [[v]] + {d grad v} . [[u]]
                         - (sigma + |b.n|/2) [[u]] . [[v]] )

Outer-boundary faces contribute nothing (homogeneous Neumann).  With the
hierarchical basis of :mod:`ranimport.dg` the mass matrix is diagonal.
Assembly loops are vectorised over elements and faces; each face is visited
once and scattered to both neighbours.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .dg import DgSpace, FaceQuadrature
from .geometry import CYTOPLASM, NUCLEUS, FaceKind, Mesh
from .kinetics import DEFAULT_CONSTANTS, KineticConstants, source_jacobian, source_vector

DEFAULT_PENALTY = 10.0
SIDE_SIGN = np.array([1.0, -1.0])


def penalty_value(C_sigma: float, diffusivity: float, degree, h) -> float:
    return C_sigma * diffusivity * np.asarray(degree, dtype=float) ** 2 / np.asarray(h, dtype=float)


def compute_penalty(mesh: Mesh, face: int, diffusivity: float, C_sigma: float = DEFAULT_PENALTY) -> float:
    """Discontinuity penalisation ``C_sigma * d * m^2 / h`` on one face.

    ``m`` and ``h`` are face means of the neighbouring elements' degree and
    diameter.  The penalty is undefined on transmission faces.
    """
    if mesh.face_kind[face] == FaceKind.TRANSMISSION:
        raise ValueError(f"face {face} is a transmission face; no penalty is defined there")
    q = mesh.quantities()
    return float(penalty_value(C_sigma, diffusivity, q.face_m[face], q.face_h[face]))


def upwind_coefficient(velocity, normal):
    """``|b . n| / 2`` evaluated pointwise."""
    b = np.asarray(velocity, dtype=float)
    n = np.asarray(normal, dtype=float)
    return 0.5 * np.abs((b * n).sum(axis=-1))


def assemble_mass(space: DgSpace) -> sp.dia_matrix:
    """Mass matrix of the full multi-species space (diagonal: element areas)."""
    diag = np.tile(space.unpadded(np.repeat(space.areas[:, None], space.nb, 1) * space.active),
                   space.n_species)
    return sp.diags(diag)


def _scatter(rows_el, cols_el, local, space: DgSpace, out_rows, out_cols, out_vals):
    """Collect COO triplets of local blocks ``local[k, i, j]``."""
    ri = space.dof_index[rows_el]  # (k, nb)
    ci = space.dof_index[cols_el]
    R = np.broadcast_to(ri[:, :, None], local.shape)
    C = np.broadcast_to(ci[:, None, :], local.shape)
    keep = (R >= 0) & (C >= 0)
    out_rows.append(R[keep])
    out_cols.append(C[keep])
    out_vals.append(local[keep])


class _Geometry:
    """Species-independent quadrature data shared by all species blocks."""

    def __init__(self, space: DgSpace):
        mesh = space.mesh
        self.vol = space.volume()
        self.interior = FaceQuadrature(space, mesh.faces_of_kind(FaceKind.INTERIOR))
        self.transmission = FaceQuadrature(space, mesh.faces_of_kind(FaceKind.TRANSMISSION))
        q = mesh.quantities()
        f = self.interior.faces
        self.face_m2_over_h = q.face_m[f] ** 2 / q.face_h[f]


def assemble_species_operator(space: DgSpace, diffusivity, permeability: float,
                              velocity: Callable | None = None,
                              C_sigma: float = DEFAULT_PENALTY,
                              geom: _Geometry | None = None) -> sp.csr_matrix:
    """Sparse matrix ``K[i, j] = B(phi_j, phi_i)`` for one species.

    ``diffusivity`` is a scalar or an array of per-element values.
    ``velocity(points)`` returns the advection field ``(..., 2)``.
    """
    geom = geom or _Geometry(space)
    ne = space.mesh.n_elements
    d_el = np.broadcast_to(np.asarray(diffusivity, dtype=float), (ne,))
    rows, cols, vals = [], [], []

    vol = geom.vol
    local = np.einsum("eq,eqid,eqjd->eij", vol.weights * d_el[:, None], vol.dphi, vol.dphi)
    if velocity is not None:
        b = velocity(vol.points)
        local -= np.einsum("eq,eqj,eqid,eqd->eij", vol.weights, vol.phi, vol.dphi, b)
    el = np.arange(ne)
    _scatter(el, el, local, space, rows, cols, vals)

    fq = geom.interior
    if len(fq.faces):
        n = fq.normal[:, None, :]
        d_side = d_el[fq.elements.T]  # (2, nf)
        sigma = C_sigma * 0.5 * d_side.sum(axis=0) * geom.face_m2_over_h
        coef = np.broadcast_to(sigma[:, None], fq.weights.shape).copy()
        bn = None
        if velocity is not None:
            bn = (velocity(fq.points) * n).sum(axis=-1)  # (nf, nq)
            coef += 0.5 * np.abs(bn)
        dn = np.einsum("sfqbd,fqd->sfqb", fq.dphi, np.broadcast_to(n, fq.points.shape))
        w = fq.weights
        for s in range(2):
            for t in range(2):
                es, et = SIDE_SIGN[s], SIDE_SIGN[t]
                blk = -0.5 * es * np.einsum("fq,f,fqi,fqj->fij", w, d_side[t], fq.phi[s], dn[t])
                blk -= 0.5 * et * np.einsum("fq,f,fqi,fqj->fij", w, d_side[s], dn[s], fq.phi[t])
                blk += es * et * np.einsum("fq,fqi,fqj->fij", w * coef, fq.phi[s], fq.phi[t])
                if bn is not None:
                    blk += 0.5 * es * np.einsum("fq,fqi,fqj->fij", w * bn, fq.phi[s], fq.phi[t])
                _scatter(fq.elements[:, s], fq.elements[:, t], blk, space, rows, cols, vals)

    tq = geom.transmission
    if permeability and len(tq.faces):
        for s in range(2):
            for t in range(2):
                blk = (permeability * SIDE_SIGN[s] * SIDE_SIGN[t]
                       * np.einsum("fq,fqi,fqj->fij", tq.weights, tq.phi[s], tq.phi[t]))
                _scatter(tq.elements[:, s], tq.elements[:, t], blk, space, rows, cols, vals)

    K = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(space.n_dof, space.n_dof))
    return K.tocsr()


def species_residual(space: DgSpace, block: np.ndarray, diffusivity, permeability: float,
                     velocity: Callable | None = None, C_sigma: float = DEFAULT_PENALTY,
                     geom: _Geometry | None = None) -> np.ndarray:
    """Matrix-free ``B(u, phi_i)`` for every test function of one species.

    Evaluates traces, jumps and means of ``u`` at quadrature points instead
    of forming local matrices; used to cross-check the assembled operator.
    """
    geom = geom or _Geometry(space)
    ne = space.mesh.n_elements
    d_el = np.broadcast_to(np.asarray(diffusivity, dtype=float), (ne,))
    c = space.padded(block)
    res = np.zeros((ne, space.nb))

    vol = geom.vol
    flux = d_el[:, None, None] * vol.gradients(c)
    if velocity is not None:
        flux = flux - vol.values(c)[..., None] * velocity(vol.points)
    res += np.einsum("eq,eqd,eqbd->eb", vol.weights, flux, vol.dphi)

    fq = geom.interior
    if len(fq.faces):
        val, grad = fq.traces(c)
        n = fq.normal[:, None, :]
        d_side = d_el[fq.elements.T]
        jump = val[0] - val[1]
        mean_flux = 0.5 * ((d_side[0][:, None, None] * grad[0] + d_side[1][:, None, None] * grad[1]) * n).sum(-1)
        sigma = C_sigma * 0.5 * d_side.sum(axis=0) * geom.face_m2_over_h
        scalar = -mean_flux + sigma[:, None] * jump
        if velocity is not None:
            bn = (velocity(fq.points) * n).sum(-1)
            upwind_flux = bn * np.where(bn >= 0, val[0], val[1])
            scalar = scalar + upwind_flux
        for s in range(2):
            dn = (fq.dphi[s] * n[:, :, None, :]).sum(-1)
            contrib = SIDE_SIGN[s] * np.einsum("fq,fq,fqb->fb", fq.weights, scalar, fq.phi[s])
            contrib -= 0.5 * np.einsum("fq,f,fq,fqb->fb", fq.weights, d_side[s], jump, dn)
            np.add.at(res, fq.elements[:, s], contrib)

    tq = geom.transmission
    if permeability and len(tq.faces):
        val, _ = tq.traces(c)
        jump = val[0] - val[1]
        for s in range(2):
            np.add.at(res, tq.elements[:, s],
                      SIDE_SIGN[s] * permeability * np.einsum("fq,fq,fqb->fb", tq.weights, jump, tq.phi[s]))
    return space.unpadded(res * space.active)


@dataclass
class SystemOperators:
    """Assembled semidiscrete operators for all species.

    ``K_diffusion`` holds diffusion, penalty and transmission terms and
    ``K_advection`` the (linear) transport terms, both block-diagonal by
    species.  Reactions stay nonlinear and are evaluated by quadrature in
    :meth:`source_load`.
    """

    space: DgSpace
    mass_diagonal: np.ndarray
    K_diffusion: sp.csr_matrix
    K_advection: sp.csr_matrix
    kinetics: KineticConstants = DEFAULT_CONSTANTS
    diffusion_blocks: tuple = ()
    advection_blocks: tuple = ()

    @property
    def size(self) -> int:
        return self.space.size

    @property
    def M(self) -> sp.dia_matrix:
        return sp.diags(self.mass_diagonal)

    def K(self, advection_on: bool = True) -> sp.csr_matrix:
        return (self.K_diffusion + self.K_advection).tocsr() if advection_on else self.K_diffusion

    def _check(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape != (self.size,):
            raise ValueError(f"state has shape {u.shape}, expected ({self.size},)")
        if np.any(np.isnan(u)):
            raise ValueError("NaN in state vector")
        return u

    def apply(self, u, advection_on: bool = True) -> np.ndarray:
        """Discrete weak residual ``B(u, phi_i)`` for all test functions."""
        u = self._check(u)
        out = self.K_diffusion @ u
        if advection_on:
            out = out + self.K_advection @ u
        return out

    def quadrature_values(self, u) -> np.ndarray:
        """All species at volume quadrature points, shape ``(ne, nq, n_species)``."""
        space = self.space
        vol = space.volume()
        c = np.stack([space.padded(b) for b in space.species_view(u)], axis=-1)
        return vol.values(c)

    def source_load(self, u) -> np.ndarray:
        """``(f(u_h), phi_i)`` for every test function."""
        u = self._check(u)
        space = self.space
        vol = space.volume()
        vals = self.quadrature_values(u)
        f = np.empty_like(vals)
        sd = space.mesh.subdomain
        for tag in (CYTOPLASM, NUCLEUS):
            f[sd == tag] = source_vector(vals[sd == tag], tag, self.kinetics)
        load = vol.load(f)  # (ne, nb, ns)
        return np.concatenate([space.unpadded(load[..., s] * space.active) for s in range(space.n_species)])

    def source_jacobian_matrix(self, u) -> sp.csr_matrix:
        """Sparse derivative of :meth:`source_load` with respect to ``u``."""
        u = self._check(u)
        space = self.space
        vol = space.volume()
        vals = self.quadrature_values(u)
        ns = space.n_species
        J = np.empty(vals.shape + (ns,))
        sd = space.mesh.subdomain
        for tag in (CYTOPLASM, NUCLEUS):
            J[sd == tag] = source_jacobian(vals[sd == tag], tag, self.kinetics)
        local = np.einsum("eq,eqab,eqi,eqj->eaibj", vol.weights, J, vol.phi, vol.phi)
        gi = np.arange(ns)[None, :, None] * space.n_dof + space.dof_index[:, None, :]  # (ne, ns, nb)
        valid = space.dof_index[:, None, :] >= 0
        gi = np.where(np.broadcast_to(valid, gi.shape), gi, -1)
        R = np.broadcast_to(gi[:, :, :, None, None], local.shape)
        C = np.broadcast_to(gi[:, None, None, :, :], local.shape)
        keep = (R >= 0) & (C >= 0) & (local != 0)
        return sp.csr_matrix((local[keep], (R[keep], C[keep])), shape=(self.size, self.size))

    def species_mass(self, u, mask=None) -> np.ndarray:
        """Integral of every species over the elements in ``mask``."""
        return np.array([self.space.integrate(b, mask) for b in self.space.species_view(u)])


def build_operators(space: DgSpace, diffusivities, permeabilities, velocity: Callable | None = None,
                    transported=(), C_sigma: float = DEFAULT_PENALTY,
                    kinetics: KineticConstants = DEFAULT_CONSTANTS) -> SystemOperators:
    """Assemble mass and linear spatial operators for every species.

    ``diffusivities`` is ``(n_species,)`` or ``(n_species, ne)``; ``velocity``
    is applied to the species listed in ``transported``.
    """
    ns = space.n_species
    d = np.asarray(diffusivities, dtype=float)
    if d.ndim == 1:
        d = np.repeat(d[:, None], space.mesh.n_elements, 1)
    p = np.asarray(permeabilities, dtype=float)
    if d.shape != (ns, space.mesh.n_elements) or p.shape != (ns,):
        raise ValueError("coefficient arrays do not match the number of species")
    geom = _Geometry(space)
    diff_blocks, adv_blocks = [], []
    for s in range(ns):
        Kd = assemble_species_operator(space, d[s], p[s], None, C_sigma, geom)
        if velocity is not None and s in transported:
            Ka = assemble_species_operator(space, np.zeros(space.mesh.n_elements), 0.0, velocity, 0.0, geom)
            Ka.eliminate_zeros()
        else:
            Ka = sp.csr_matrix((space.n_dof, space.n_dof))
        diff_blocks.append(Kd)
        adv_blocks.append(Ka)
    mass = assemble_mass(space).diagonal()
    return SystemOperators(space, mass, sp.block_diag(diff_blocks, format="csr"),
                           sp.block_diag(adv_blocks, format="csr"), kinetics,
                           tuple(diff_blocks), tuple(adv_blocks))
