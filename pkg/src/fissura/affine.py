"""Rescaling affine approximants under an L-infinity bound.

Given an affine map ``A`` that approximates a bounded field ``u`` on a
square ``Q_R`` in L^p, the map is shrunk radially so that it respects
``sup |u|`` on the concentric inner square ``Q_r`` while staying L^p-close
to ``u`` away from a small exceptional set.  ``lemma_trials`` checks the
construction on random data by dense lattice sampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .tensor import SymTensor2

DIM = 2


@dataclass(frozen=True)
class AffineMap:
    """x -> W x + c."""

    W: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.W, float).reshape(2, 2)
        c = np.asarray(self.c, float).reshape(2)
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(c))):
            raise ValueError("affine map entries must be finite")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "c", c)

    @classmethod
    def constant(cls, c) -> "AffineMap":
        return cls(np.zeros((2, 2)), c)

    @classmethod
    def linear(cls, W) -> "AffineMap":
        return cls(W, np.zeros(2))

    def __call__(self, pts) -> np.ndarray:
        return np.asarray(pts, float) @ self.W.T + self.c

    def scaled(self, s: float) -> "AffineMap":
        return AffineMap(s * self.W, s * self.c)

    def strain(self) -> SymTensor2:
        W = self.W
        return SymTensor2(W[0, 0], W[1, 1], 0.5 * (W[0, 1] + W[1, 0]))

    @property
    def is_skew(self) -> bool:
        return bool(np.all(self.W + self.W.T == 0.0))


@dataclass(frozen=True)
class Square:
    """Open square ``center + (-side/2, side/2)^2``."""

    center: tuple[float, float]
    side: float

    def __post_init__(self):
        if not self.side > 0:
            raise ValueError("square side must be positive")

    def vertices(self) -> np.ndarray:
        """Corners in lexicographic order."""
        h = 0.5 * self.side
        cx, cy = self.center
        return np.array([[cx - h, cy - h], [cx - h, cy + h], [cx + h, cy - h], [cx + h, cy + h]])

    def lattice(self, n: int) -> tuple[np.ndarray, float]:
        """Cell centres of an n x n subdivision (row-major, y slowest) and the cell area."""
        h = self.side / n
        t = (np.arange(n) + 0.5) * h - 0.5 * self.side
        xx, yy = np.meshgrid(self.center[0] + t, self.center[1] + t)
        return np.column_stack([xx.ravel(), yy.ravel()]), h * h


def vertex_max(A: AffineMap, square: Square) -> tuple[np.ndarray, float]:
    """Vertex where |A| attains its maximum over the square.

    |A| is convex, so the supremum over the closed square sits at a corner.
    Ties within relative 1e-12 go to the lexicographically smallest corner.
    """
    verts = square.vertices()
    vals = np.linalg.norm(A(verts), axis=1)
    top = vals.max()
    k = int(np.flatnonzero(vals >= top - 1e-12 * max(top, 1e-300))[0])
    return verts[k], float(vals[k])


def lp_constant(R: float, r: float, p: float, n: int = DIM) -> float:
    """Explicit constant of the L^p estimate.

    The comparison of an affine map on Q_R with its norm on Q_r uses the
    factor ``((2R - r)/R)^p`` (Jensen on the centred square) in front of
    ``(R/r)^(n+p)``; a triangle inequality adds 1.
    """
    chain = 2.0 ** (n + 1) * R ** (n + p) / (r ** p * (R - r) ** n)
    return 1.0 + ((2.0 * R - r) / R) * chain ** (1.0 / p)


@dataclass(frozen=True)
class LemmaCertificate:
    rescaled: bool
    scale: float
    vertex: Optional[np.ndarray]
    sup_u: float
    sup_A_inner: float
    constant: float
    p: float


def rescale_affine(A: AffineMap, u: Union[float, np.ndarray], inner: Square, outer: Square,
                   p: float = 2.0) -> tuple[AffineMap, LemmaCertificate]:
    """Shrink ``A`` so that its sup over ``inner`` does not exceed ``sup |u|``.

    ``u`` is either the sup norm itself or samples of the field with shape
    (..., 2).
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if not np.allclose(inner.center, outer.center) or not inner.side < outer.side:
        raise ValueError("inner square must be concentric and strictly smaller")
    if np.ndim(u) == 0:
        sup_u = float(u)
    else:
        sup_u = float(np.max(np.linalg.norm(np.asarray(u, float).reshape(-1, 2), axis=1)))
    vertex, sup_A = vertex_max(A, inner)
    c = lp_constant(outer.side, inner.side, p)
    if sup_A <= sup_u:
        return A, LemmaCertificate(False, 1.0, None, sup_u, sup_A, c, p)
    scale = sup_u / sup_A
    return A.scaled(scale), LemmaCertificate(True, scale, vertex, sup_u, sup_A, c, p)


def corner_cube(vertex: np.ndarray, inner: Square, outer: Square) -> Square:
    """The square between the inner vertex and the matching outer corner."""
    R, r = outer.side, inner.side
    rel = np.asarray(vertex, float) - np.asarray(outer.center, float)
    centre = np.asarray(outer.center) + (R + r) / (2 * r) * rel
    return Square(tuple(centre), 0.5 * (R - r))


# --- randomized verification ----------------------------------------------------------


@dataclass
class LemmaTrialReport:
    trials: int
    rescaled: int
    linf_violations: int
    lp_violations: int
    key_violations: int
    skew_violations: int
    max_lp_ratio: float
    max_ratio_over_constant: float
    ratios: list = field(default_factory=list)


def _lp(values: np.ndarray, weight: float, p: float) -> float:
    return float((np.sum(np.linalg.norm(values, axis=-1) ** p) * weight) ** (1.0 / p))


def lemma_trials(n_trials: int = 1000, p: float = 2.0, lattice: int = 64, seed: int = 0,
                 slack: float = 1e-3) -> LemmaTrialReport:
    """Random instances of the rescaling construction, checked by lattice sampling.

    The inner square is aligned with the sampling lattice so the corner cube
    and the exceptional set are unions of lattice cells; every norm is a
    midpoint sum over the lattice on ``Q_R``.
    """
    rng = np.random.default_rng(seed)
    N = lattice
    rep = LemmaTrialReport(n_trials, 0, 0, 0, 0, 0, 0.0, 0.0)
    for _ in range(n_trials):
        R = rng.uniform(0.5, 2.0)
        j = int(rng.integers(max(1, N // 10), 4 * N // 10 + 1))
        r = R * (N - 2 * j) / N
        centre = tuple(rng.uniform(-1, 1, 2))
        outer, inner = Square(centre, R), Square(centre, r)
        w = rng.uniform(-3, 3)
        A = AffineMap([[0.0, -w], [w, 0.0]], rng.normal(0, 2, 2))
        pts, cell = outer.lattice(N)
        u = A(pts) + rng.normal(0, rng.uniform(0, 1), pts.shape)
        cap = rng.uniform(0.1, 1.2) * float(np.max(np.linalg.norm(A(pts), axis=1)))
        norms = np.linalg.norm(u, axis=1)
        u *= np.minimum(1.0, cap / np.maximum(norms, 1e-300))[:, None]

        a, cert = rescale_affine(A, u, inner, outer, p)

        # exceptional set: at most half of the corner cube, in lattice cells
        omega = np.zeros(N * N, bool)
        budget = (j * j) // 2
        count = int(rng.integers(0, budget + 1))
        if cert.rescaled and rng.random() < 0.5:
            q = corner_cube(cert.vertex, inner, outer)
            lo = np.asarray(q.center) - 0.5 * q.side
            in_q = np.all((pts > lo) & (pts < lo + q.side), axis=1)
            choices = np.flatnonzero(in_q)
        else:
            choices = np.arange(N * N)
        omega[rng.choice(choices, size=min(count, choices.size), replace=False)] = True
        keep = ~omega

        inner_pts, _ = inner.lattice(N)
        sup_a = max(float(np.max(np.linalg.norm(a(inner_pts), axis=1))),
                    float(np.max(np.linalg.norm(a(inner.vertices()), axis=1))))
        if sup_a > cert.sup_u * (1 + 1e-12):
            rep.linf_violations += 1

        err_A = _lp(u[keep] - A(pts[keep]), cell, p)
        err_a = _lp(u[keep] - a(pts[keep]), cell, p)
        if err_a > cert.constant * (1 + slack) * err_A:
            rep.lp_violations += 1
        if err_A > 0:
            ratio = err_a / err_A
            rep.max_lp_ratio = max(rep.max_lp_ratio, ratio)
            rep.max_ratio_over_constant = max(rep.max_ratio_over_constant, ratio / cert.constant)
            rep.ratios.append(ratio / cert.constant)

        if cert.rescaled:
            rep.rescaled += 1
            q = corner_cube(cert.vertex, inner, outer)
            lhs = 0.5 * q.side ** 2 * (cert.sup_A_inner - cert.sup_u) ** p
            rhs = _lp(u[keep] - A(pts[keep]), cell, p) ** p
            if lhs > rhs * (1 + 1e-12):
                rep.key_violations += 1
        if A.is_skew and not a.is_skew:
            rep.skew_violations += 1
    return rep
