"""Recovery sequences for straight-crack configurations.

Builds the phase field ``v = gamma((dist - delta)^+ / eps)`` from the
optimal one-dimensional profile ``gamma(t) = 1 - exp(-t/2)`` and the
displacement ``u = phi_delta * u_sharp`` (mollification at the
intermediate scale ``delta = sqrt(eps * eta)``), then evaluates the
regularized energy on a fine lattice and compares it with the sharp
energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .crack import CrackConfig, CrackPath
from .energy import EnergyBreakdown, ModelParams, energy_breakdown, sharp_energy
from .grid import Field, Grid, qp_strains


@dataclass(frozen=True)
class RecoveryParams:
    eps: float
    eta: Optional[float] = None
    radius_factor: float = 1.0
    refinement: int = 4

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.eta is None:
            object.__setattr__(self, "eta", self.eps ** 2)
        if not self.eta > 0:
            raise ValueError("eta must be positive for a nondegenerate mollification scale")
        if self.refinement < 1 or not self.radius_factor > 0:
            raise ValueError("refinement must be >= 1 and radius_factor positive")

    @property
    def delta(self) -> float:
        return math.sqrt(self.eps * self.eta)

    @property
    def ell(self) -> float:
        return self.delta / self.eps

    @property
    def radius(self) -> float:
        return self.radius_factor * self.delta


def optimal_profile(t):
    t = np.asarray(t, float)
    if np.any(t < 0):
        raise ValueError("profile argument must be nonnegative")
    out = -np.expm1(-0.5 * t)
    return float(out) if out.ndim == 0 else out


def profile_energy_halfline(eps: float, cutoff: float = 40.0, G_c: float = 1.0) -> float:
    """Surface energy of the optimal profile on (0, cutoff * eps), one crack side."""
    if not eps > 0:
        raise ValueError("eps must be positive")

    def integrand(x):
        t = x / eps
        dv = 0.5 * math.exp(-0.5 * t) / eps
        return eps * dv * dv + math.exp(-t) / (4.0 * eps)

    val, _ = integrate.quad(integrand, 0.0, cutoff * eps, epsabs=1e-14, epsrel=1e-12, limit=200)
    return G_c * val


def distance_field(path: CrackPath, grid: Grid) -> Field:
    """Nodal distance to the crack; +inf everywhere for an empty path."""
    return Field.unchecked(grid, path.distance(grid.nodes))


def build_v_recovery(path: CrackPath, rp: RecoveryParams, grid: Grid) -> Field:
    d = path.distance(grid.nodes)
    return Field(grid, _v_from_distance(d, rp))


def _v_from_distance(d: np.ndarray, rp: RecoveryParams) -> np.ndarray:
    arg = np.maximum(d - rp.delta, 0.0) / rp.eps
    return -np.expm1(-0.5 * arg)


def bump_kernel(radius: float, hx: float, hy: Optional[float] = None) -> tuple[np.ndarray, np.ndarray]:
    """Lattice offsets (k, 2) and weights of the normalized bump exp(-1/(1-r^2))."""
    hy = hx if hy is None else hy
    Rx, Ry = int(math.ceil(radius / hx)), int(math.ceil(radius / hy))
    ki, kj = np.meshgrid(np.arange(-Rx, Rx + 1), np.arange(-Ry, Ry + 1), indexing="ij")
    r2 = ((ki * hx) ** 2 + (kj * hy) ** 2) / radius ** 2
    inside = r2 < 1.0
    if not inside.sum() > 1:
        raise ValueError("mollifier radius is below the sampling lattice resolution")
    w = np.zeros_like(r2)
    w[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    w /= w.sum()
    sel = w > 0
    return np.column_stack([ki[sel], kj[sel]]), w[sel]


def mollify_u(u_sharp: Callable[[np.ndarray], np.ndarray], delta: float, grid: Grid,
              refinement: int = 4, radius_factor: float = 1.0) -> Field:
    """Nodal values of the mollified displacement ``phi_delta * u_sharp``.

    ``u_sharp`` is sampled on an auxiliary lattice nested in the grid, with
    spacing at most ``delta / refinement`` and padded beyond the domain by
    the mollifier radius; the discrete convolution with the normalized,
    symmetric bump is evaluated at the grid nodes only.
    """
    radius = radius_factor * delta
    h = min(grid.hx, grid.hy)
    m = max(1, int(math.ceil(refinement * h / delta)))
    hx, hy = grid.hx / m, grid.hy / m
    if max(hx, hy) > delta / refinement * (1 + 1e-12):
        raise ValueError("sampling lattice coarser than delta / refinement")
    offsets, weights = bump_kernel(radius, hx, hy)
    pad = int(np.abs(offsets).max())
    nxs, nys = grid.nx * m + 2 * pad + 1, grid.ny * m + 2 * pad + 1
    xs = (np.arange(nxs) - pad) * hx
    ys = (np.arange(nys) - pad) * hy
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    samples = np.asarray(u_sharp(np.column_stack([X.ravel(), Y.ravel()])), float)
    samples = samples.reshape(nxs, nys, 2)
    out = np.zeros((grid.nx + 1, grid.ny + 1, 2))
    for (ki, kj), w in zip(offsets, weights):
        out += w * samples[pad + ki: pad + ki + m * grid.nx + 1: m,
                           pad + kj: pad + kj + m * grid.ny + 1: m]
    # node ordering of the grid is row-major in y
    values = out.transpose(1, 0, 2).reshape(-1, 2)
    return Field(grid, values)


def negative_divergence_l2(u: Field) -> float:
    """L2 norm of the negative part of div u, by Gauss quadrature."""
    E = qp_strains(u.grid, u.flat)
    neg = np.maximum(-(E.xx + E.yy), 0.0)
    return math.sqrt(u.grid.integrate(neg * neg))


def max_strain_norm(u: Field) -> float:
    E = qp_strains(u.grid, u.flat)
    return float(np.sqrt(np.max(E.norm2())))


# --- Minkowski content ----------------------------------------------------------------


def _segments_disjoint_tubes(path: CrackPath, t: float) -> bool:
    segs = path.segments
    for i in range(len(segs)):
        for j in range(i + 1, len(segs)):
            a, b = segs[i], segs[j]
            ends = np.array([b.p, b.q])
            d = min(a.distance(ends).min(), b.distance(np.array([a.p, a.q])).min())
            if d <= 2 * t or _segments_cross(a, b):
                return False
    return True


def _segments_cross(a, b) -> bool:
    def orient(p, q, r):
        return np.sign((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]))
    return (orient(a.p, a.q, b.p) != orient(a.p, a.q, b.q)
            and orient(b.p, b.q, a.p) != orient(b.p, b.q, a.q))


def minkowski_estimate(path: CrackPath, t: float, method: str = "quadrature",
                       domain: Optional[tuple[float, float]] = None, resolution: int = 64) -> float:
    """Tube measure |{dist <= t}| divided by 2t.

    ``method="exact"`` uses 2 t L + pi t^2 per segment and requires pairwise
    disjoint tubes with no domain clipping; ``"quadrature"`` counts midpoints
    of a lattice of spacing ``t / resolution``, clipped to ``domain`` when
    given.
    """
    if not t > 0:
        raise ValueError("tube radius must be positive")
    if not path.segments:
        return 0.0
    if method == "exact":
        if domain is not None or not _segments_disjoint_tubes(path, t):
            raise ValueError("exact tube formula needs disjoint, unclipped tubes")
        area = sum(2 * t * s.length + math.pi * t * t for s in path.segments)
        return area / (2 * t)
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    pts = np.array([x for s in path.segments for x in (s.p, s.q)], float)
    lo = pts.min(axis=0) - t
    hi = pts.max(axis=0) + t
    if domain is not None:
        lo = np.maximum(lo, 0.0)
        hi = np.minimum(hi, np.asarray(domain, float))
    h = t / resolution
    n = np.maximum(np.ceil((hi - lo) / h).astype(int), 1)
    hx, hy = (hi - lo) / n
    xs = lo[0] + (np.arange(n[0]) + 0.5) * hx
    count = 0
    # process in row blocks to bound memory
    for start in range(0, n[1], 256):
        ys = lo[1] + (np.arange(start, min(start + 256, n[1])) + 0.5) * hy
        X, Y = np.meshgrid(xs, ys)
        d = path.distance(np.stack([X, Y], -1))
        count += int(np.count_nonzero(d <= t))
    return count * hx * hy / (2 * t)


# --- energy comparison ----------------------------------------------------------------


@dataclass
class RecoveryReport:
    eps: float
    eta: float
    delta: float
    ell: float
    h: float
    regularized: EnergyBreakdown
    sharp: float
    sharp_surface: float
    ratio: float
    surface_ratio: float
    surface_bound: float
    div_minus_l2: float
    strain_constant: float
    extra: dict = field(default_factory=dict)


def recovery_fields(config: CrackConfig, rp: RecoveryParams, grid: Grid) -> tuple[Field, Field]:
    v = build_v_recovery(config.path, rp, grid)
    u = mollify_u(config.displacement, rp.delta, grid, rp.refinement, rp.radius_factor)
    return u, v


def recovery_energy_check(config: CrackConfig, params: ModelParams, rp: RecoveryParams,
                          h: Optional[float] = None) -> RecoveryReport:
    """Regularized energy of the recovery pair against the sharp energy.

    Refuses configurations that violate the model's jump constraint, since
    the upper bound only holds on admissible displacements.
    """
    E_sharp, ok = sharp_energy(config, params)
    if not ok:
        raise ValueError("configuration violates the jump constraint of the chosen model")
    h = rp.eps / 8 if h is None else h
    grid = Grid(int(math.ceil(config.lx / h)), int(math.ceil(config.ly / h)), config.lx, config.ly)
    p = params.with_(eps=rp.eps, eta=rp.eta)
    u, v = recovery_fields(config, rp, grid)
    br = energy_breakdown(grid, u.flat, v.values, p)
    sharp_surface = params.G_c * config.path.length
    M = float(np.max(np.abs(u.values))) if u.values.size else 0.0
    strain_c = max_strain_norm(u) * rp.delta / M if M > 0 else 0.0
    return RecoveryReport(
        eps=rp.eps, eta=rp.eta, delta=rp.delta, ell=rp.ell, h=grid.hx,
        regularized=br, sharp=E_sharp, sharp_surface=sharp_surface,
        ratio=br.total / E_sharp if E_sharp > 0 else math.nan,
        surface_ratio=br.surface / sharp_surface if sharp_surface > 0 else math.nan,
        surface_bound=1.0 + rp.ell / 2.0,
        div_minus_l2=negative_divergence_l2(u),
        strain_constant=strain_c,
    )


def recovery_sweep(config: CrackConfig, params: ModelParams, eps_values: Sequence[float],
                   eta_of_eps: Callable[[float], float] = lambda e: e * e) -> list[RecoveryReport]:
    return [recovery_energy_check(config, params, RecoveryParams(e, eta_of_eps(e))) for e in eps_values]
