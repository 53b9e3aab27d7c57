"""Regularized fracture energies with unilateral constraints.

Three bulk models share the phase-field surface term
``G_c (eps |grad v|^2 + (1 - v)^2 / (4 eps))``:

* ``NON_INTERPENETRATION``: deviatoric and tensile volumetric energy are
  degraded by ``eta + v^2``; compressive volumetric energy never is.
  ``k_interp`` interpolates between this model (k = K) and the shear model
  (k = 0) through an intact ``(K - k) (div u)^2`` term; with
  ``degrade_interp=True`` that term is degraded instead.
* ``SHEAR_ONLY``: only the deviatoric energy is degraded.
* ``MASONRY``: the positive semidefinite part of the strain is degraded.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .crack import CrackConfig
from .grid import Field, Grid, qp_strains, qp_values_and_grads
from .tensor import ArrayLike, SymTensor2, deviatoric, eigen, psd_project, cross2


class Model(str, enum.Enum):
    NON_INTERPENETRATION = "non_interpenetration"
    SHEAR_ONLY = "shear_only"
    MASONRY = "masonry"


@dataclass(frozen=True)
class ModelParams:
    """Material and regularization parameters (plane setting, n = 2).

    Defaults follow the normalization mu = 1, K = 2, G_c = 1.  ``k_interp``
    defaults to K and ``eta`` to ``eps**2``.  ``degrade_interp`` moves the
    ``(K - k) d^2`` part of the non-interpenetration model under the
    degradation factor; it has no effect when k = K.
    """

    mu: float = 1.0
    bulk: float = 2.0
    G_c: float = 1.0
    eps: float = 0.05
    eta: Optional[float] = None
    k_interp: Optional[float] = None
    M: Optional[float] = None
    model: Model = Model.NON_INTERPENETRATION
    degrade_interp: bool = False

    def __post_init__(self):
        object.__setattr__(self, "model", Model(self.model))
        if self.k_interp is None:
            object.__setattr__(self, "k_interp", float(self.bulk))
        if self.eta is None:
            object.__setattr__(self, "eta", float(self.eps) ** 2)
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not self.bulk > 0:
            raise ValueError("bulk modulus K = lambda + mu must be positive")
        if not 0.0 <= self.k_interp <= self.bulk:
            raise ValueError("k_interp must lie in [0, K]")
        if not self.G_c > 0:
            raise ValueError("G_c must be positive")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not self.eta >= 0:
            raise ValueError("eta must be nonnegative")
        if self.M is not None and not self.M > 0:
            raise ValueError("M must be positive when given")
        if self.eta > self.eps:
            warnings.warn(f"eta={self.eta} exceeds eps={self.eps}", stacklevel=2)

    @classmethod
    def from_lame(cls, mu: float, lame_lambda: float, **kw) -> "ModelParams":
        if not lame_lambda > -mu:
            raise ValueError("lambda must exceed -mu in two dimensions")
        return cls(mu=mu, bulk=lame_lambda + mu, **kw)

    @property
    def lame_lambda(self) -> float:
        return self.bulk - self.mu

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class EnergyBreakdown:
    bulk_modulated: float = 0.0
    bulk_unmodulated: float = 0.0
    surface_gradient: float = 0.0
    surface_well: float = 0.0

    @property
    def bulk(self) -> float:
        return self.bulk_modulated + self.bulk_unmodulated

    @property
    def surface(self) -> float:
        return self.surface_gradient + self.surface_well

    @property
    def total(self) -> float:
        return self.bulk + self.surface

    def as_row(self) -> tuple[float, float, float, float, float]:
        return (self.bulk_modulated, self.bulk_unmodulated, self.surface_gradient,
                self.surface_well, self.total)


# --- pointwise densities ------------------------------------------------------------


def dev_norm2(E: SymTensor2) -> ArrayLike:
    return deviatoric(E).norm2()


def modulated_coefficient(params: ModelParams, E: SymTensor2) -> ArrayLike:
    """Energy multiplied by (eta + v^2)/2, i.e. the phase-field driving term."""
    mu, K, k = params.mu, params.bulk, params.k_interp
    if params.model is Model.NON_INTERPENETRATION:
        d = E.trace
        vol = K - k if params.degrade_interp else 0.0
        return 2 * mu * dev_norm2(E) + vol * d * d + k * np.maximum(d, 0.0) ** 2
    if params.model is Model.SHEAR_ONLY:
        return 2 * mu * dev_norm2(E)
    plus, _ = psd_project(E)
    return 2 * mu * plus.norm2() + params.lame_lambda * plus.trace ** 2


def unmodulated_density(params: ModelParams, E: SymTensor2) -> ArrayLike:
    if params.model is Model.NON_INTERPENETRATION:
        d = E.trace
        vol = 0.0 if params.degrade_interp else params.bulk - params.k_interp
        return 0.5 * (params.k_interp * np.maximum(-d, 0.0) ** 2 + vol * d * d)
    if params.model is Model.SHEAR_ONLY:
        return 0.5 * params.bulk * E.trace ** 2
    _, minus = psd_project(E)
    return 0.5 * (2 * params.mu * minus.norm2() + params.lame_lambda * minus.trace ** 2)


def bulk_density(params: ModelParams, E: SymTensor2, v: ArrayLike):
    """Return (density, modulated part, unmodulated part)."""
    mod = 0.5 * (params.eta + np.asarray(v) ** 2) * modulated_coefficient(params, E)
    unmod = unmodulated_density(params, E)
    return mod + unmod, mod, unmod


def sharp_elastic_density(params: ModelParams, E: SymTensor2) -> ArrayLike:
    d = E.trace
    return 0.5 * (2 * params.mu * dev_norm2(E) + params.bulk * d * d)


def surface_density(params: ModelParams, v: ArrayLike, grad_v) -> ArrayLike:
    grad_v = np.asarray(grad_v, float)
    g2 = np.sum(grad_v * grad_v, axis=-1)
    v = np.asarray(v, float)
    return params.G_c * (params.eps * g2 + (1.0 - v) ** 2 / (4.0 * params.eps))


# --- derivatives in the (xx, yy, xy) coordinates ---------------------------------------

_ONE = np.array([1.0, 1.0, 0.0])
_DEV_HESS = np.array([[1.0, -1.0, 0.0], [-1.0, 1.0, 0.0], [0.0, 0.0, 4.0]])


def density_derivatives(params: ModelParams, E: SymTensor2, g: ArrayLike):
    """Gradient (..., 3) and generalized Hessian (..., 3, 3) of the bulk density.

    ``g = eta + v^2`` is the degradation factor.  Derivatives are taken with
    respect to the independent components (xx, yy, xy).  At a trace or
    eigenvalue sign change the tensile branch is active only for strictly
    positive values.
    """
    g = np.asarray(g, float)
    xx, yy, xy = np.broadcast_arrays(*(np.asarray(c, float) for c in (E.xx, E.yy, E.xy)))
    g = np.broadcast_to(g, xx.shape)
    mu, K, k = params.mu, params.bulk, params.k_interp
    if params.model is Model.MASONRY:
        return _masonry_derivatives(params, E, g)
    dev_grad = np.stack([xx - yy, yy - xx, 4.0 * xy], -1)
    d = xx + yy
    if params.model is Model.NON_INTERPENETRATION:
        dp = np.maximum(d, 0.0)
        dm = np.maximum(-d, 0.0)
        gi = g if params.degrade_interp else np.ones_like(g)
        vol = gi * (K - k) * d + g * k * dp - k * dm
        grad = (g * mu)[..., None] * dev_grad + vol[..., None] * _ONE
        vol_h = gi * (K - k) + g * k * (d > 0) + k * (d <= 0)
    else:
        grad = (g * mu)[..., None] * dev_grad + (K * d)[..., None] * _ONE
        vol_h = np.full_like(d, K)
    hess = (g * mu)[..., None, None] * _DEV_HESS + vol_h[..., None, None] * np.outer(_ONE, _ONE)
    return grad, hess


def _masonry_derivatives(params: ModelParams, E: SymTensor2, g: np.ndarray):
    mu, lam = params.mu, params.lame_lambda
    ep = eigen(E)
    l1 = np.asarray(ep.lam1, float)
    l2 = np.asarray(ep.lam2, float)
    h1 = l1 > 0
    h2 = l2 > 0
    tp = np.maximum(l1, 0) + np.maximum(l2, 0)
    tm = np.minimum(l1, 0) + np.minimum(l2, 0)
    d1 = np.where(h1, g * (2 * mu * l1 + lam * tp), 2 * mu * l1 + lam * tm)
    d2 = np.where(h2, g * (2 * mu * l2 + lam * tp), 2 * mu * l2 + lam * tm)
    w1 = np.where(h1, g, 1.0)
    w2 = np.where(h2, g, 1.0)
    d11 = w1 * (2 * mu + lam)
    d22 = w2 * (2 * mu + lam)
    d12 = np.where(h1 & h2, g * lam, np.where(~h1 & ~h2, lam, 0.0))
    gap = l1 - l2
    scale = np.abs(l1) + np.abs(l2)
    close = gap <= 1e-12 * np.maximum(scale, 1e-300)
    # divided difference of the spectral gradient, with its limit on the diagonal
    cdd = np.where(close, d11 - d12, (d1 - d2) / np.where(close, 1.0, gap))
    c, s = np.asarray(ep.cos, float), np.asarray(ep.sin, float)
    cc, ss, cs = c * c, s * s, c * s
    T = np.stack([
        np.stack([cc, ss, 2 * cs], -1),
        np.stack([ss, cc, -2 * cs], -1),
        np.stack([-cs, cs, cc - ss], -1),
    ], -2)
    zero = np.zeros_like(d1)
    grad = np.einsum("...ij,...i->...j", T, np.stack([d1, d2, zero], -1))
    core = np.stack([
        np.stack([d11, d12, zero], -1),
        np.stack([d12, d22, zero], -1),
        np.stack([zero, zero, 2 * cdd], -1),
    ], -2)
    hess = np.einsum("...ki,...kl,...lj->...ij", T, core, T)
    return grad, hess


# --- assembled energies --------------------------------------------------------------


def _check_same_grid(u: Field, v: Field):
    if u.grid != v.grid:
        raise ValueError("displacement and phase field live on different grids")
    if u.components != 2 or v.components != 1:
        raise ValueError("expected a vector displacement and a scalar phase field")


def total_energy(u: Field, v: Field, params: ModelParams) -> EnergyBreakdown:
    _check_same_grid(u, v)
    return energy_breakdown(u.grid, u.flat, v.values, params)


def degradation_at_qp(grid: Grid, v: np.ndarray, eta: float) -> np.ndarray:
    """``eta + v^2`` at Gauss points, with v^2 interpolated from nodal values.

    Interpolating v^2 rather than squaring the interpolant makes the
    phase-field system an M-matrix, so discrete minimizers stay in [0, 1].
    """
    v = np.asarray(v, float)
    return eta + (v * v)[grid.connectivity] @ grid.shape_values.T


def energy_breakdown(grid: Grid, u: np.ndarray, v: np.ndarray, params: ModelParams) -> EnergyBreakdown:
    E = qp_strains(grid, u)
    vq, gq = qp_values_and_grads(grid, v)
    mod = 0.5 * degradation_at_qp(grid, v, params.eta) * modulated_coefficient(params, E)
    unmod = unmodulated_density(params, E)
    grad_term = params.G_c * params.eps * np.sum(gq * gq, axis=-1)
    well_term = params.G_c * (1.0 - vq) ** 2 / (4.0 * params.eps)
    return EnergyBreakdown(
        grid.integrate(mod),
        grid.integrate(unmod),
        grid.integrate(grad_term),
        grid.integrate(well_term),
    )


def energy_gradient_u(grid: Grid, u: np.ndarray, v: np.ndarray, params: ModelParams) -> np.ndarray:
    E = qp_strains(grid, u)
    grad, _ = density_derivatives(params, E, degradation_at_qp(grid, v, params.eta))
    fe = np.einsum("qcd,eqc->ed", grid.strain_operator, grad) * grid.qp_weight
    return np.bincount(grid.element_dofs(2).ravel(), weights=fe.ravel(), minlength=2 * grid.n_nodes)


def energy_gradient_v(grid: Grid, u: np.ndarray, v: np.ndarray, params: ModelParams) -> np.ndarray:
    vq, gq = qp_values_and_grads(grid, v)
    A = modulated_coefficient(params, qp_strains(grid, u))
    G, eps = params.G_c, params.eps
    ve = np.asarray(v, float)[grid.connectivity]
    fe = np.einsum("eq,qa->ea", A, grid.shape_values) * ve
    fe += np.einsum("eq,qa->ea", G * (vq - 1.0) / (2.0 * eps), grid.shape_values)
    fe += 2.0 * G * eps * np.einsum("eqk,qak->ea", gq, grid.shape_grads)
    fe *= grid.qp_weight
    return np.bincount(grid.connectivity.ravel(), weights=fe.ravel(), minlength=grid.n_nodes)


# --- sharp limit energy -------------------------------------------------------------


def sharp_energy(config: CrackConfig, params: ModelParams) -> tuple[float, bool]:
    """Limit energy of a piecewise-affine configuration and its constraint status.

    Bulk energy is the elastic density of each affine piece times its area;
    surface energy is G_c times the total crack length.  The jump is affine
    along every straight segment, so checking the constraint at both
    endpoints checks it everywhere.
    """
    config.validate()
    bulk = 0.0
    for piece in config.pieces:
        E = piece.field.strain()
        bulk += float(sharp_elastic_density(params, E)) * piece.area
    surface = params.G_c * config.path.length
    ok = all(_jump_admissible(params.model, jump, seg.normal)
             for seg, jumps in zip(config.path.segments, config.segment_jumps())
             for jump in jumps)
    return bulk + surface, ok


def _jump_admissible(model: Model, jump: np.ndarray, normal: np.ndarray, tol: float = 1e-12) -> bool:
    scale = tol * max(1.0, float(np.linalg.norm(jump)))
    normal_part = float(np.dot(jump, normal))
    if model is Model.NON_INTERPENETRATION:
        return normal_part >= -scale
    if model is Model.SHEAR_ONLY:
        return abs(normal_part) <= scale
    return normal_part >= -scale and abs(float(cross2(jump, normal))) <= scale


def homogeneous_state(params: ModelParams, E: SymTensor2) -> tuple[float, float]:
    """Phase value and energy density of the spatially constant critical point.

    For a uniform strain the phase-field optimality condition reduces to
    ``A v + G_c (v - 1) / (2 eps) = 0`` with ``A`` the modulated coefficient.
    """
    A = float(modulated_coefficient(params, E))
    v = 1.0 / (1.0 + 2.0 * params.eps * A / params.G_c)
    dens = (0.5 * (params.eta + v * v) * A + float(unmodulated_density(params, E))
            + params.G_c * (1.0 - v) ** 2 / (4.0 * params.eps))
    return v, dens


def clamp_displacement(u: np.ndarray, M: Optional[float]) -> np.ndarray:
    """Apply the optional L-infinity bound componentwise."""
    if M is None:
        return u
    return np.clip(u, -M, M)


__all__ = [
    "Model", "ModelParams", "EnergyBreakdown", "bulk_density", "surface_density",
    "density_derivatives", "modulated_coefficient", "unmodulated_density",
    "sharp_elastic_density", "total_energy", "energy_breakdown", "energy_gradient_u",
    "energy_gradient_v", "degradation_at_qp", "sharp_energy", "homogeneous_state", "clamp_displacement",
]
