"""Alternating minimization of the regularized energy.

The displacement step is a convex, piecewise-quadratic problem solved by a
semismooth Newton method: the Hessian uses the active tensile branch, the
step is accepted by backtracking on the true energy.  The phase-field step
is an exact quadratic minimization.  Both linear solves use conjugate
gradients with a Jacobi preconditioner.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .energy import (
    EnergyBreakdown,
    ModelParams,
    clamp_displacement,
    density_derivatives,
    degradation_at_qp,
    energy_breakdown,
    modulated_coefficient,
    unmodulated_density,
)
from .grid import DirichletSpec, Field, Grid, qp_strains
from .tensor import SymTensor2

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolveOptions:
    tol_grad: float = 1e-8
    tol_energy: float = 1e-10
    tol_dv: float = 1e-6
    max_outer: int = 200
    max_newton: int = 50
    cg_tol: float = 1e-10
    cg_max_iter: int = 20000
    ls_factor: float = 0.5
    ls_armijo: float = 1e-4
    ls_max: int = 40
    clamp_u: bool = False

    def __post_init__(self):
        for name in ("tol_grad", "tol_energy", "tol_dv", "cg_tol", "ls_armijo"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.ls_factor < 1:
            raise ValueError("ls_factor must lie in (0, 1)")
        if self.max_outer < 1 or self.max_newton < 1 or self.cg_max_iter < 1:
            raise ValueError("iteration limits must be at least 1")


@dataclass
class CGInfo:
    iterations: int
    residual: float
    converged: bool
    breakdown: bool = False


def pcg(matvec: Callable[[np.ndarray], np.ndarray], b: np.ndarray, x0: np.ndarray,
        diag: np.ndarray, rtol: float, maxiter: int) -> tuple[np.ndarray, CGInfo]:
    """Jacobi-preconditioned conjugate gradients.

    Stops when ``|r| <= rtol * |b|``.  A non-positive curvature ``p.Ap``
    ends the iteration with ``breakdown`` set and the last iterate returned.
    """
    x = x0.copy()
    r = b - matvec(x)
    bnorm = float(np.linalg.norm(b))
    target = rtol * bnorm
    rnorm = float(np.linalg.norm(r))
    if rnorm <= target or bnorm == 0.0:
        return x, CGInfo(0, rnorm / max(bnorm, 1e-300), True)
    inv = 1.0 / diag
    z = inv * r
    p = z.copy()
    rz = float(r @ z)
    for it in range(1, maxiter + 1):
        Ap = matvec(p)
        curv = float(p @ Ap)
        if not curv > 0:
            return x, CGInfo(it, rnorm / bnorm, False, breakdown=True)
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Ap
        rnorm = float(np.linalg.norm(r))
        if rnorm <= target:
            return x, CGInfo(it, rnorm / bnorm, True)
        z = inv * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, CGInfo(maxiter, rnorm / bnorm, False)


# --- displacement step ----------------------------------------------------------------


@dataclass
class UStepInfo:
    converged: bool
    iterations: int
    residual: float
    energy: float
    flags: list[str] = field(default_factory=list)
    cg_iterations: int = 0


def _assemble_u_hessian(grid: Grid, hess: np.ndarray) -> sp.csr_matrix:
    B = grid.strain_operator
    ke = np.einsum("qci,eqcd,qdj->eij", B, hess, B, optimize=True) * grid.qp_weight
    return grid.pattern(2).assemble(ke)


def _nodal_force(grid: Grid, grad: np.ndarray) -> np.ndarray:
    fe = np.einsum("qcd,eqc->ed", grid.strain_operator, grad) * grid.qp_weight
    return np.bincount(grid.element_dofs(2).ravel(), weights=fe.ravel(), minlength=2 * grid.n_nodes)


def _strain_arrays(grid: Grid, u: np.ndarray) -> np.ndarray:
    E = qp_strains(grid, u)
    return np.stack([E.xx, E.yy, E.xy])


def _bulk_from_strain(grid: Grid, eps3: np.ndarray, gfac: np.ndarray, params: ModelParams) -> float:
    E = SymTensor2(eps3[0], eps3[1], eps3[2])
    dens = 0.5 * gfac * modulated_coefficient(params, E) + unmodulated_density(params, E)
    return grid.integrate(dens)


def solve_u(grid: Grid, v: np.ndarray, u0: np.ndarray, params: ModelParams,
            fixed: np.ndarray, values: np.ndarray, options: SolveOptions) -> tuple[np.ndarray, UStepInfo]:
    """Array-level displacement step with prescribed ``values`` on ``fixed`` dofs."""
    gfac = degradation_at_qp(grid, v, params.eta)
    free = ~fixed
    u = np.where(fixed, values, u0)

    def energy(eps3):
        return _bulk_from_strain(grid, eps3, gfac, params)

    def gradient(eps3):
        E = SymTensor2(eps3[0], eps3[1], eps3[2])
        grad, hess = density_derivatives(params, E, gfac)
        return _nodal_force(grid, grad) * free, hess

    # reference force: the load induced by the boundary data alone
    g_ref, _ = gradient(_strain_arrays(grid, np.where(fixed, values, 0.0)))
    ref = float(np.linalg.norm(g_ref))
    eps3 = _strain_arrays(grid, u)
    E_cur = energy(eps3)
    g, hess = gradient(eps3)
    gnorm = float(np.linalg.norm(g))
    scale = max(ref, gnorm)
    info = UStepInfo(False, 0, gnorm, E_cur)
    if scale == 0.0:
        info.converged = True
        return u, info
    tol = options.tol_grad * scale

    for it in range(1, options.max_newton + 1):
        if gnorm <= tol:
            info.converged = True
            break
        info.iterations = it
        H = grid.pattern(2).constrain(_assemble_u_hessian(grid, hess), fixed)
        diag = H.diagonal()
        diag = np.where(diag > 0, diag, 1.0)
        matvec = H.__matmul__

        rtol = max(options.cg_tol, min(0.1, np.sqrt(gnorm / scale)))
        d, cg = pcg(matvec, -g, np.zeros_like(u), diag, rtol, options.cg_max_iter)
        info.cg_iterations += cg.iterations
        slope = float(g @ d)
        if cg.breakdown or not slope < 0:
            info.flags.append("steepest_descent")
            d = -g / diag
            slope = float(g @ d)
        d_eps = _strain_arrays(grid, d)
        alpha = 1.0
        accepted = False
        for _ in range(options.ls_max):
            trial = energy(eps3 + alpha * d_eps)
            if trial <= E_cur + options.ls_armijo * alpha * slope:
                accepted = True
                break
            alpha *= options.ls_factor
        if not accepted:
            info.flags.append("line_search_stalled")
            break
        u = u + alpha * d
        eps3 = eps3 + alpha * d_eps
        E_cur = trial
        g, hess = gradient(eps3)
        gnorm = float(np.linalg.norm(g))
    else:
        if gnorm > tol:
            info.flags.append("newton_max_iter")
    if gnorm <= tol:
        info.converged = True
    info.residual = gnorm
    info.energy = E_cur
    if options.clamp_u and params.M is not None:
        u = clamp_displacement(u, params.M)
        u = np.where(fixed, values, u)
    return u, info


def minimize_u(v: Field, u0: Field, params: ModelParams, bc: DirichletSpec,
               options: SolveOptions = SolveOptions(), t: float = 1.0) -> tuple[Field, UStepInfo]:
    """Minimize the energy in the displacement at fixed phase field."""
    grid = v.grid
    fixed, values = bc.resolve(grid, t)
    u, info = solve_u(grid, v.values, u0.flat, params, fixed, values, options)
    if not info.converged:
        log.warning("displacement step not converged: residual %.3e, flags %s", info.residual, info.flags)
    return Field(grid, u.reshape(-1, 2)), info


# --- phase-field step -----------------------------------------------------------------


@dataclass
class VStepInfo:
    converged: bool
    iterations: int
    residual: float


def v_system(grid: Grid, u: np.ndarray, params: ModelParams) -> tuple[sp.csr_matrix, np.ndarray]:
    """Matrix and right-hand side of the phase-field optimality system."""
    A = modulated_coefficient(params, qp_strains(grid, u))
    G, eps = params.G_c, params.eps
    N = grid.shape_values
    dN = grid.shape_grads
    w = grid.qp_weight
    # driving term: the interpolated v^2 gives a diagonal element contribution
    drive = A @ N
    mass = np.einsum("qa,qb->ab", N, N)
    stiff = np.einsum("qak,qbk->ab", dN, dN)
    ke = (G / (2.0 * eps) * mass + 2.0 * G * eps * stiff)[None] * np.ones((grid.n_elements, 1, 1))
    ke[:, np.arange(4), np.arange(4)] += drive
    ke *= w
    K = grid.pattern(1).assemble(ke)
    fe = np.broadcast_to(N.sum(axis=0) * w * G / (2.0 * eps), (grid.n_elements, 4))
    rhs = np.bincount(grid.connectivity.ravel(), weights=fe.ravel(), minlength=grid.n_nodes)
    return K, rhs


def solve_v(grid: Grid, u: np.ndarray, params: ModelParams, v0: np.ndarray,
            options: SolveOptions) -> tuple[np.ndarray, VStepInfo]:
    K, rhs = v_system(grid, u, params)
    v, cg = pcg(lambda x: K @ x, rhs, v0, K.diagonal(), options.cg_tol, options.cg_max_iter)
    return v, VStepInfo(cg.converged, cg.iterations, cg.residual)


def minimize_v(u: Field, params: ModelParams, options: SolveOptions = SolveOptions(),
               v0: Optional[Field] = None) -> tuple[Field, VStepInfo]:
    """Exact minimizer of the energy in the phase field at fixed displacement.

    Starting CG from the current phase field makes every iterate lower the
    quadratic energy, so the step never increases the total energy.
    """
    grid = u.grid
    start = np.ones(grid.n_nodes) if v0 is None else v0.values
    v, info = solve_v(grid, u.flat, params, start, options)
    if not info.converged:
        log.warning("phase-field CG not converged: relative residual %.3e", info.residual)
    return Field(grid, v), info


# --- alternating minimization ---------------------------------------------------------


@dataclass
class SolveHistory:
    energies: list[EnergyBreakdown] = field(default_factory=list)
    labels: list[str] = field(default_factory=list)
    u_residuals: list[float] = field(default_factory=list)
    dv_inf: list[float] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)
    outer_iterations: int = 0
    converged: bool = False

    def record(self, label: str, e: EnergyBreakdown):
        self.labels.append(label)
        self.energies.append(e)

    @property
    def totals(self) -> np.ndarray:
        return np.array([e.total for e in self.energies])

    def max_increase(self) -> float:
        """Largest relative energy increase between consecutive records."""
        t = self.totals
        if t.size < 2:
            return 0.0
        return float(np.max(np.diff(t) / np.maximum(np.abs(t[1:]), 1e-300)))

    def outer_rows(self) -> list[EnergyBreakdown]:
        """Energy after each full outer iteration."""
        return [e for lab, e in zip(self.labels, self.energies) if lab == "v"]


def alternate_minimize(u0: Field, v0: Field, params: ModelParams, bc: DirichletSpec,
                       options: SolveOptions = SolveOptions(), t: float = 1.0):
    """Staggered minimization; returns (u, v, history) and never raises on non-convergence."""
    grid = u0.grid
    if v0.grid != grid:
        raise ValueError("displacement and phase field live on different grids")
    fixed, values = bc.resolve(grid, t)
    u = np.where(fixed, values, u0.flat)
    v = v0.values.copy()
    hist = SolveHistory()
    e_prev = energy_breakdown(grid, u, v, params)
    hist.record("init", e_prev)
    for k in range(1, options.max_outer + 1):
        hist.outer_iterations = k
        u, uinfo = solve_u(grid, v, u, params, fixed, values, options)
        hist.u_residuals.append(uinfo.residual)
        if not uinfo.converged:
            hist.flags.append(f"outer {k}: u-step " + ",".join(uinfo.flags or ["not converged"]))
        hist.record("u", energy_breakdown(grid, u, v, params))
        v_new, vinfo = solve_v(grid, u, params, v, options)
        if not vinfo.converged:
            hist.flags.append(f"outer {k}: v-step CG not converged")
        dv = float(np.max(np.abs(v_new - v)))
        v = v_new
        hist.dv_inf.append(dv)
        e_new = energy_breakdown(grid, u, v, params)
        hist.record("v", e_new)
        rel = abs(e_prev.total - e_new.total) / max(abs(e_new.total), 1e-300)
        e_prev = e_new
        if dv <= options.tol_dv or rel <= options.tol_energy:
            hist.converged = True
            break
    return Field(grid, u.reshape(-1, 2)), Field(grid, v), hist
