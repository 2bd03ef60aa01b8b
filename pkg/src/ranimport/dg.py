"""Discontinuous polynomial spaces on triangles.

The local basis on the reference triangle ``{(r, s): r, s >= 0, r + s <= 1}``
is obtained by orthonormalising centred monomials (ordered by total degree)
with respect to the *mean* inner product ``2 * integral(u * v)``.  Hence the
first function is the constant 1, the first ``(m+1)(m+2)/2`` functions span
P_m for every m (hierarchical), and the element mass matrix is ``area * I``.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .geometry import Mesh

REFERENCE_AREA = 0.5


def n_basis(degree: int) -> int:
    return (degree + 1) * (degree + 2) // 2


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    order: int


@functools.lru_cache(maxsize=None)
def triangle_rule(order: int) -> QuadratureRule:
    """Collapsed Gauss rule on the reference triangle, exact to ``order``."""
    n = max(1, math.ceil((order + 1) / 2))
    a, wa = roots_legendre(n)
    b, wb = roots_jacobi(n, 1.0, 0.0)
    A, B = np.meshgrid(a, b, indexing="ij")
    r = 0.25 * (1 + A) * (1 - B)
    s = 0.5 * (1 + B)
    w = np.outer(wa, wb) / 8.0
    rule = QuadratureRule(np.stack([r.ravel(), s.ravel()], axis=1), w.ravel(), order)
    rule.points.setflags(write=False)
    rule.weights.setflags(write=False)
    return rule


@functools.lru_cache(maxsize=None)
def line_rule(order: int) -> QuadratureRule:
    """Gauss-Legendre rule on [0, 1], exact to ``order``."""
    n = max(1, math.ceil((order + 1) / 2))
    x, w = roots_legendre(n)
    rule = QuadratureRule(0.5 * (x + 1), 0.5 * w, order)
    rule.points.setflags(write=False)
    rule.weights.setflags(write=False)
    return rule


def _exponents(degree: int) -> np.ndarray:
    return np.array([(k - j, j) for k in range(degree + 1) for j in range(k + 1)])


@functools.lru_cache(maxsize=None)
def _basis_coefficients(degree: int) -> np.ndarray:
    exps = _exponents(degree)
    rule = triangle_rule(2 * degree)
    mono = _monomials(rule.points, exps)[0]
    gram = np.einsum("q,qi,qj->ij", rule.weights / REFERENCE_AREA, mono, mono)
    L = np.linalg.cholesky(gram)
    coef = np.linalg.solve(L, np.eye(len(exps)))
    coef.setflags(write=False)
    return coef


def _monomials(pts: np.ndarray, exps: np.ndarray):
    x = pts[..., 0:1] - 1.0 / 3.0
    y = pts[..., 1:2] - 1.0 / 3.0
    a, b = exps[:, 0], exps[:, 1]
    val = x**a * y**b
    dx = np.where(a > 0, a * x ** np.maximum(a - 1, 0) * y**b, 0.0)
    dy = np.where(b > 0, b * x**a * y ** np.maximum(b - 1, 0), 0.0)
    return val, np.stack([dx, dy], axis=-1)


def eval_basis(degree: int, points) -> tuple[np.ndarray, np.ndarray]:
    """Values ``(..., nb)`` and reference gradients ``(..., nb, 2)`` of the basis."""
    if degree < 0:
        raise ValueError(f"degree must be nonnegative, got {degree}")
    pts = np.asarray(points, dtype=float)
    coef = _basis_coefficients(degree)
    val, grad = _monomials(pts, _exponents(degree))
    return val @ coef.T, np.einsum("...jd,ij->...id", grad, coef)


def jump_and_mean(u_plus, u_minus, n_plus):
    """Scalar jump vector ``u+ n+ + u- n-`` and mean ``(u+ + u-)/2``.

    Works elementwise on arrays; ``n_plus`` has a trailing axis of length 2.
    """
    u_plus = np.asarray(u_plus, dtype=float)
    u_minus = np.asarray(u_minus, dtype=float)
    n_plus = np.asarray(n_plus, dtype=float)
    jump = (u_plus - u_minus)[..., None] * n_plus
    return jump, 0.5 * (u_plus + u_minus)


class DgSpace:
    """Fully discontinuous space ``[S]^n`` on a mesh.

    Coefficients of one species are stored element by element; the global
    state vector stacks the species blocks, so the index of coefficient
    ``(element e, local i, species s)`` is ``s * n_dof + offsets[e] + i``.

    Basis functions are hierarchical, so every element is evaluated with the
    basis of the maximum degree and inactive functions are masked to zero.
    """

    def __init__(self, mesh: Mesh, n_species: int = 1, quad_order: int | None = None):
        self.mesh = mesh
        self.n_species = int(n_species)
        self.degrees = mesh.degree.copy()
        self.max_degree = int(self.degrees.max())
        self.nb = n_basis(self.max_degree)
        self.local_sizes = (self.degrees + 1) * (self.degrees + 2) // 2
        self.offsets = np.concatenate([[0], np.cumsum(self.local_sizes)[:-1]])
        self.n_dof = int(self.local_sizes.sum())
        self.size = self.n_species * self.n_dof
        self.active = np.arange(self.nb)[None, :] < self.local_sizes[:, None]
        self.dof_index = np.where(self.active, self.offsets[:, None] + np.arange(self.nb), -1)

        p = mesh.vertices[mesh.elements]
        self.origin = p[:, 0]
        J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
        self.jac = J
        self.det = np.linalg.det(J)
        self.inv_jac = np.linalg.inv(J)
        self.areas = np.abs(self.det) * REFERENCE_AREA
        self.quad_order = quad_order if quad_order is not None else 2 * self.max_degree + 1
        self._rules: dict[int, "VolumeQuadrature"] = {}

    # -- layout ----------------------------------------------------------
    def padded(self, block: np.ndarray) -> np.ndarray:
        """Species block ``(n_dof,)`` -> padded ``(ne, nb)`` coefficients."""
        block = np.asarray(block)
        out = np.zeros((self.mesh.n_elements, self.nb) + block.shape[1:], dtype=block.dtype)
        out[self.active] = block[self.dof_index[self.active]]
        return out

    def unpadded(self, coeffs: np.ndarray) -> np.ndarray:
        out = np.zeros((self.n_dof,) + coeffs.shape[2:], dtype=coeffs.dtype)
        out[self.dof_index[self.active]] = coeffs[self.active]
        return out

    def zeros(self) -> np.ndarray:
        return np.zeros(self.size)

    def species_view(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(u).reshape(self.n_species, self.n_dof)

    # -- geometry --------------------------------------------------------
    def to_physical(self, elements, ref_points) -> np.ndarray:
        return self.origin[elements] + np.einsum("...ij,...j->...i", self.jac[elements], ref_points)

    def to_reference(self, elements, points) -> np.ndarray:
        return np.einsum("...ij,...j->...i", self.inv_jac[elements], points - self.origin[elements])

    def physical_gradients(self, elements, ref_grads) -> np.ndarray:
        # grad = J^{-T} grad_ref
        return np.einsum("...ji,...bj->...bi", self.inv_jac[elements], ref_grads)

    def volume(self, order: int | None = None) -> "VolumeQuadrature":
        order = self.quad_order if order is None else order
        if order not in self._rules:
            self._rules[order] = VolumeQuadrature(self, order)
        return self._rules[order]

    # -- evaluation ------------------------------------------------------
    def evaluate(self, block: np.ndarray, elements, ref_points) -> np.ndarray:
        """Evaluate a species block at reference points of given elements."""
        elements = np.asarray(elements)
        phi, _ = eval_basis(self.max_degree, ref_points)
        c = self.padded(block)[elements] * self.active[elements]
        return (phi * c).sum(axis=-1)

    def element_averages(self, block: np.ndarray) -> np.ndarray:
        return self.padded(block)[:, 0]

    def integrate(self, block: np.ndarray, mask=None) -> float:
        """Integral of one species over the elements selected by ``mask``."""
        avg = self.element_averages(block) * self.areas
        return float(avg.sum() if mask is None else avg[mask].sum())


class VolumeQuadrature:
    """Quadrature data on all elements for one rule."""

    def __init__(self, space: DgSpace, order: int):
        rule = triangle_rule(order)
        ne = space.mesh.n_elements
        self.rule = rule
        self.weights = np.abs(space.det)[:, None] * rule.weights[None, :]  # (ne, nq)
        self.points = space.to_physical(np.arange(ne)[:, None], rule.points[None, :, :])
        phi, dphi = eval_basis(space.max_degree, rule.points)
        act = space.active[:, None, :]
        self.phi = phi[None, :, :] * act  # (ne, nq, nb)
        grads = space.physical_gradients(np.arange(ne)[:, None], dphi[None])
        self.dphi = grads * act[..., None]  # (ne, nq, nb, 2)

    def values(self, padded: np.ndarray) -> np.ndarray:
        return np.einsum("eqb,eb...->eq...", self.phi, padded)

    def gradients(self, padded: np.ndarray) -> np.ndarray:
        return np.einsum("eqbd,eb->eqd", self.dphi, padded)

    def load(self, vals: np.ndarray) -> np.ndarray:
        """Padded ``integral(vals * phi_b)`` per element."""
        return np.einsum("eq,eq...,eqb->eb...", self.weights, vals, self.phi)


class FaceQuadrature:
    """Face quadrature with traces of the basis from both sides.

    ``phi[s]``/``dphi[s]`` hold basis values and physical gradients seen from
    side ``s`` (0 = plus, 1 = minus).  On boundary faces the minus side
    repeats the plus element with zero weight masks.
    """

    def __init__(self, space: DgSpace, faces: np.ndarray, order: int | None = None):
        mesh = space.mesh
        order = space.quad_order if order is None else order
        rule = line_rule(order)
        self.faces = np.asarray(faces, dtype=np.int64)
        fv = mesh.vertices[mesh.face_vertices[self.faces]]
        a, b = fv[:, 0], fv[:, 1]
        length = np.linalg.norm(b - a, axis=1)
        self.length = length
        self.points = a[:, None, :] + rule.points[None, :, None] * (b - a)[:, None, :]
        self.weights = length[:, None] * rule.weights[None, :]
        self.normal = mesh.plus_normals()[self.faces]
        fe = mesh.face_elements[self.faces]
        self.has_minus = fe[:, 1] >= 0
        self.elements = np.where(fe >= 0, fe, fe[:, :1])
        phis, dphis = [], []
        for s in range(2):
            el = self.elements[:, s]
            ref = space.to_reference(el[:, None], self.points)
            phi, dphi = eval_basis(space.max_degree, ref)
            act = space.active[el][:, None, :]
            phis.append(phi * act)
            dphis.append(space.physical_gradients(el[:, None], dphi) * act[..., None])
        self.phi = np.stack(phis)  # (2, nf, nq, nb)
        self.dphi = np.stack(dphis)  # (2, nf, nq, nb, 2)

    def traces(self, padded: np.ndarray):
        """Values ``(2, nf, nq)`` and gradients ``(2, nf, nq, 2)`` of a field."""
        c = padded[self.elements.T]  # (2, nf, nb)
        val = np.einsum("sfqb,sfb->sfq", self.phi, c)
        grad = np.einsum("sfqbd,sfb->sfqd", self.dphi, c)
        return val, grad


def interpolate(space: DgSpace, f, order: int | None = None) -> np.ndarray:
    """Elementwise L2 projection of ``f(x, y)`` onto the space (one species).

    Polynomials of degree <= m_k are reproduced exactly on element k.
    """
    quad = space.volume(order if order is not None else max(space.quad_order, 2 * space.max_degree + 2))
    vals = np.asarray(f(quad.points[..., 0], quad.points[..., 1]), dtype=float)
    vals = np.broadcast_to(vals, quad.points.shape[:2])
    if not np.all(np.isfinite(vals)):
        raise ValueError("function returned non-finite values at quadrature points")
    coeffs = quad.load(vals) / space.areas[:, None]
    return space.unpadded(coeffs * space.active)


def l2_error(space: DgSpace, block: np.ndarray, f, order: int | None = None, mask=None) -> float:
    quad = space.volume(order if order is not None else 2 * space.max_degree + 4)
    uh = quad.values(space.padded(block))
    ex = np.broadcast_to(f(quad.points[..., 0], quad.points[..., 1]), uh.shape)
    err = (quad.weights * (uh - ex) ** 2).sum(axis=1)
    return float(math.sqrt(err.sum() if mask is None else err[mask].sum()))
