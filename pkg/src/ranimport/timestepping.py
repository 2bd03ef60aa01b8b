"""Time integration of ``M u' = -K u + F(u)``.

``K`` is the (time-independent) linear spatial operator and ``F`` the
nonlinear reaction load.  IMEX schemes treat ``K`` implicitly and ``F``
explicitly; backward Euler can optionally treat ``F`` implicitly by Newton.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

SCHEMES = ("backward-euler-imex", "crank-nicolson-imex", "ssp-rk3")


class SimulationError(RuntimeError):
    """Raised when a time step fails; ``time`` is the last good time."""

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (last good time t={time:g} s)")
        self.time = time


class LinearSolveError(SimulationError):
    def __init__(self, residual: float, tol: float, time: float):
        super().__init__(f"linear solve did not converge: relative residual {residual:.3e} > {tol:.1e}", time)
        self.residual = residual


@dataclass
class TimeStepperConfig:
    scheme: str = "backward-euler-imex"
    dt: float = 0.01
    t_end: float = 17.0
    linear_solver: str = "direct"
    linear_tol: float = 1e-10
    implicit_reaction: bool = False
    newton_tol: float = 1e-10
    newton_max_iter: int = 20

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if not (0 < self.linear_tol < 1 and 0 < self.newton_tol < 1):
            raise ValueError("tolerances must lie in (0, 1)")
        if self.linear_solver not in ("direct", "gmres", "bicgstab"):
            raise ValueError(f"unknown linear solver {self.linear_solver!r}")
        if self.implicit_reaction and self.scheme != "backward-euler-imex":
            raise ValueError("implicit reaction treatment is only available with backward Euler")


class LinearSolver:
    """Solve ``A x = b`` to a relative residual tolerance.

    ``direct`` factorises once (sparse LU); the Krylov options use an
    element-block Jacobi preconditioner.  Every solution is checked against
    the tolerance and non-convergence raises :class:`LinearSolveError`.
    """

    def __init__(self, A, method: str = "direct", tol: float = 1e-10, block_size: int | None = None):
        self.A = sp.csc_matrix(A)
        self.method = method
        self.tol = tol
        self.last_residual = 0.0
        if method == "direct":
            self._lu = spla.splu(self.A)
        else:
            self._precond = _block_jacobi(self.A, block_size) if block_size else None

    def solve(self, b: np.ndarray, x0: np.ndarray | None = None, time: float = math.nan) -> np.ndarray:
        bnorm = np.linalg.norm(b)
        if bnorm == 0:
            return np.zeros_like(b)
        if self.method == "direct":
            x = self._lu.solve(b)
        else:
            solver = spla.gmres if self.method == "gmres" else spla.bicgstab
            x, _ = solver(self.A, b, x0=x0, rtol=0.1 * self.tol, atol=0.0, M=self._precond, maxiter=1000)
        res = np.linalg.norm(self.A @ x - b) / bnorm
        self.last_residual = res
        if not res <= self.tol:
            raise LinearSolveError(res, self.tol, time)
        return x


def _block_jacobi(A: sp.csc_matrix, bs: int) -> spla.LinearOperator:
    n = A.shape[0]
    nblk = n // bs
    coo = A.tocoo()
    same = coo.row // bs == coo.col // bs
    blocks = np.zeros((nblk, bs, bs))
    np.add.at(blocks, (coo.row[same] // bs, coo.row[same] % bs, coo.col[same] % bs), coo.data[same])
    inv = np.linalg.inv(blocks)
    return spla.LinearOperator((n, n), matvec=lambda v: np.einsum("kij,kj->ki", inv, v.reshape(nblk, bs)).ravel())


@dataclass
class RunResult:
    u: np.ndarray
    t: float
    n_steps: int
    max_linear_residual: float = 0.0
    newton_iterations: int = 0
    history: list = field(default_factory=list)


class Integrator:
    """Advance ``M u' = -K u + F(u)`` with a fixed step.

    Parameters
    ----------
    mass_diagonal : array
        Diagonal of the (diagonal) mass matrix.
    K : sparse matrix
        Linear spatial operator.
    source : callable
        ``F(u)``, the reaction load vector.
    source_jacobian : callable, optional
        ``dF/du`` as a sparse matrix; required for ``implicit_reaction``.
    """

    def __init__(self, mass_diagonal, K, source: Callable, config: TimeStepperConfig,
                 source_jacobian: Callable | None = None, block_size: int | None = None):
        self.m = np.asarray(mass_diagonal, dtype=float)
        self.K = sp.csr_matrix(K)
        self.source = source
        self.source_jacobian = source_jacobian
        self.config = config
        self.block_size = block_size
        self._solvers: dict[float, LinearSolver] = {}
        self._prev_source = None
        self.max_linear_residual = 0.0
        self.newton_iterations = 0
        if config.implicit_reaction and source_jacobian is None:
            raise ValueError("implicit reaction treatment needs a source Jacobian")

    @classmethod
    def from_operators(cls, ops, config: TimeStepperConfig, advection_on: bool = True):
        return cls(ops.mass_diagonal, ops.K(advection_on), ops.source_load, config,
                   ops.source_jacobian_matrix, ops.space.nb)

    def _solver(self, theta_dt: float) -> LinearSolver:
        key = round(theta_dt, 15)
        if key not in self._solvers:
            A = sp.diags(self.m) + theta_dt * self.K
            self._solvers[key] = LinearSolver(A, self.config.linear_solver, self.config.linear_tol,
                                              self.block_size)
        return self._solvers[key]

    def explicit_dt_limit(self) -> float:
        """Conservative SSP-RK3 step bound from a Gershgorin estimate."""
        absK = abs(self.K)
        rho = float((np.asarray(absK.sum(axis=1)).ravel() / self.m).max())
        return 2.5 / rho if rho > 0 else math.inf

    def step(self, u: np.ndarray, dt: float, t: float = 0.0) -> np.ndarray:
        cfg = self.config
        m = self.m
        if cfg.scheme == "backward-euler-imex":
            if cfg.implicit_reaction:
                return self._newton_step(u, dt, t)
            solver = self._solver(dt)
            out = solver.solve(m * u + dt * self.source(u), u, t)
        elif cfg.scheme == "crank-nicolson-imex":
            f = self.source(u)
            fp = f if self._prev_source is None else self._prev_source
            self._prev_source = f
            solver = self._solver(0.5 * dt)
            rhs = m * u - 0.5 * dt * (self.K @ u) + dt * (1.5 * f - 0.5 * fp)
            out = solver.solve(rhs, u, t)
        else:
            rhs = lambda v: (self.source(v) - self.K @ v) / m
            u1 = u + dt * rhs(u)
            u2 = 0.75 * u + 0.25 * (u1 + dt * rhs(u1))
            return u / 3.0 + 2.0 / 3.0 * (u2 + dt * rhs(u2))
        self.max_linear_residual = max(self.max_linear_residual, solver.last_residual)
        return out

    def _newton_step(self, u_n, dt, t):
        cfg = self.config
        A = sp.diags(self.m) + dt * self.K
        base = self.m * u_n
        scale = max(np.linalg.norm(base), 1e-300)
        u = u_n.copy()
        for it in range(cfg.newton_max_iter):
            G = A @ u - base - dt * self.source(u)
            if np.linalg.norm(G) / scale <= cfg.newton_tol:
                return u
            J = A - dt * self.source_jacobian(u)
            du = LinearSolver(J, "direct", cfg.linear_tol).solve(-G, time=t)
            u = u + du
            self.newton_iterations += 1
        G = A @ u - base - dt * self.source(u)
        if np.linalg.norm(G) / scale <= cfg.newton_tol:
            return u
        raise SimulationError(f"Newton did not converge in {cfg.newton_max_iter} iterations", t)

    def run(self, u0, t_end: float | None = None, callbacks: Sequence[Callable] = (),
            output_interval: float | None = None) -> RunResult:
        """Integrate from ``t = 0`` to ``t_end``.

        Each callback is called as ``cb(t, u)`` at t = 0, every
        ``output_interval`` seconds, and at the final time.
        """
        cfg = self.config
        t_end = cfg.t_end if t_end is None else t_end
        u = np.array(u0, dtype=float)
        n = math.ceil(t_end / cfg.dt - 1e-9) if t_end > 0 else 0
        dt = t_end / n if n else cfg.dt
        if cfg.scheme == "ssp-rk3" and n:
            limit = self.explicit_dt_limit()
            if dt > limit:
                raise ValueError(f"dt={dt:g} exceeds the explicit stability bound {limit:.3e}")
        every = max(1, round(output_interval / dt)) if output_interval else None
        self._prev_source = None
        for cb in callbacks:
            cb(0.0, u)
        t = 0.0
        for k in range(1, n + 1):
            new = self.step(u, dt, t)
            if not np.all(np.isfinite(new)):
                raise SimulationError(f"non-finite values at t={k * dt:g} s", t)
            u, t = new, k * dt
            if (every and k % every == 0) or k == n:
                for cb in callbacks:
                    cb(t, u)
        log.debug("ran %d steps, max linear residual %.2e", n, self.max_linear_residual)
        return RunResult(u, t, n, self.max_linear_residual, self.newton_iterations)
