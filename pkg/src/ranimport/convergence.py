"""Manufactured-solution convergence study for the transmission problem.

The steady model problem on each compartment is::

    -div(d grad u - u b) + c u = F

with the Neumann and permeability conditions of the simulator.  Any smooth
pair ``(u_cyto, u_nuc)`` can be manufactured: the volume forcing ``F`` is
derived symbolically, and the boundary and interface residuals (nonzero when
the pair does not satisfy the conditions exactly on the polygonal mesh
boundary) enter as additional surface loads, so the discrete problem stays
consistent with the exact solution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
import sympy

from .assembly import DEFAULT_PENALTY, assemble_species_operator
from .dg import DgSpace, FaceQuadrature, l2_error
from .geometry import CYTOPLASM, NUCLEUS, CellGeometry, FaceKind, build_disk_mesh

_x, _y = sympy.symbols("x y")

DEFAULT_CYTO = "1 + 0.5*cos(0.4*x + 0.3)*sin(0.35*y) + 0.02*x*y"
DEFAULT_NUC = "2 + 0.3*sin(0.6*x)*cos(0.5*y - 0.2) + 0.05*x"


class _Field:
    def __init__(self, expr):
        e = sympy.sympify(expr)
        lam = lambda f: sympy.lambdify((_x, _y), f, "numpy")
        self.u = lam(e)
        self.ux = lam(sympy.diff(e, _x))
        self.uy = lam(sympy.diff(e, _y))
        self.lap = lam(sympy.diff(e, _x, 2) + sympy.diff(e, _y, 2))

    def __call__(self, x, y):
        return np.broadcast_to(self.u(x, y), np.shape(x)).astype(float)

    def grad(self, pts):
        x, y = pts[..., 0], pts[..., 1]
        gx = np.broadcast_to(self.ux(x, y), x.shape)
        gy = np.broadcast_to(self.uy(x, y), x.shape)
        return np.stack([gx, gy], axis=-1).astype(float)

    def laplacian(self, x, y):
        return np.broadcast_to(self.lap(x, y), np.shape(x)).astype(float)


@dataclass
class ManufacturedProblem:
    cyto: str = DEFAULT_CYTO
    nucleus: str = DEFAULT_NUC
    diffusivity: float = 1.0
    permeability: float = 1.0
    reaction: float = 1.0
    velocity: Callable | None = None
    divergence: Callable | None = None
    C_sigma: float = DEFAULT_PENALTY

    def __post_init__(self):
        self._fields = {CYTOPLASM: _Field(self.cyto), NUCLEUS: _Field(self.nucleus)}

    def exact(self, tag: int):
        return self._fields[tag]

    def forcing(self, tag: int, pts: np.ndarray) -> np.ndarray:
        f = self._fields[tag]
        x, y = pts[..., 0], pts[..., 1]
        F = -self.diffusivity * f.laplacian(x, y) + self.reaction * f(x, y)
        if self.velocity is not None:
            F = F + (self.velocity(pts) * f.grad(pts)).sum(-1) + f(x, y) * self.divergence(pts)
        return F

    def solve(self, space: DgSpace) -> np.ndarray:
        """Discrete solution coefficients on ``space`` (single species)."""
        mesh = space.mesh
        K = assemble_species_operator(space, self.diffusivity, self.permeability,
                                      self.velocity, self.C_sigma)
        mass = np.repeat(space.areas[:, None], space.nb, 1) * space.active
        A = K + self.reaction * sp.diags(space.unpadded(mass))

        vol = space.volume(2 * space.max_degree + 4)
        F = np.empty(vol.points.shape[:2])
        for tag in (CYTOPLASM, NUCLEUS):
            sel = mesh.subdomain == tag
            F[sel] = self.forcing(tag, vol.points[sel])
        load = vol.load(F)

        order = 2 * space.max_degree + 4
        outer = FaceQuadrature(space, mesh.faces_of_kind(FaceKind.OUTER_BOUNDARY), order)
        g = self.diffusivity * (self._fields[CYTOPLASM].grad(outer.points) * outer.normal[:, None, :]).sum(-1)
        np.add.at(load, outer.elements[:, 0], np.einsum("fq,fq,fqb->fb", outer.weights, g, outer.phi[0]))

        tr = FaceQuadrature(space, mesh.faces_of_kind(FaceKind.TRANSMISSION), order)
        uc, un = self._fields[CYTOPLASM], self._fields[NUCLEUS]
        xq, yq = tr.points[..., 0], tr.points[..., 1]
        n = tr.normal[:, None, :]
        jump = uc(xq, yq) - un(xq, yq)
        g_plus = self.diffusivity * (uc.grad(tr.points) * n).sum(-1) + self.permeability * jump
        g_minus = -self.diffusivity * (un.grad(tr.points) * n).sum(-1) - self.permeability * jump
        for s, gs in ((0, g_plus), (1, g_minus)):
            np.add.at(load, tr.elements[:, s], np.einsum("fq,fq,fqb->fb", tr.weights, gs, tr.phi[s]))

        rhs = space.unpadded(load * space.active)
        return spla.spsolve(sp.csc_matrix(A), rhs)

    def error(self, space: DgSpace, block: np.ndarray) -> float:
        total = 0.0
        for tag in (CYTOPLASM, NUCLEUS):
            e = l2_error(space, block, self._fields[tag], mask=space.mesh.subdomain == tag)
            total += e * e
        return math.sqrt(total)


@dataclass
class ConvergenceTable:
    degree: int
    h: list
    errors: list

    @property
    def rates(self) -> list:
        return [math.log(e0 / e1) / math.log(h0 / h1)
                for (h0, h1), (e0, e1) in zip(zip(self.h, self.h[1:]), zip(self.errors, self.errors[1:]))]

    def format(self) -> str:
        lines = [f"degree {self.degree}", f"{'h':>10} {'L2 error':>12} {'rate':>6}"]
        rates = [float("nan")] + self.rates
        for h, e, r in zip(self.h, self.errors, rates):
            lines.append(f"{h:10.4f} {e:12.4e} {r:6.2f}")
        return "\n".join(lines)


def run_convergence_study(geometry: CellGeometry, problem: ManufacturedProblem, degree: int,
                          levels: int = 3, h0: float = 2.0) -> ConvergenceTable:
    """Solve on ``levels`` successively halved meshes and report L2 errors.

    The mesh size used for the rates is ``sqrt(area / n_elements)``.
    """
    if levels < 3:
        raise ValueError("a convergence study needs at least 3 levels")
    hs, errs = [], []
    for k in range(levels):
        mesh = build_disk_mesh(geometry, h0 / 2**k, degree)
        space = DgSpace(mesh, quad_order=2 * degree + 2)
        u = problem.solve(space)
        hs.append(math.sqrt(mesh.element_areas.sum() / mesh.n_elements))
        errs.append(problem.error(space, u))
    return ConvergenceTable(degree, hs, errs)
