"""Closed-form algebra of 2x2 symmetric tensors.

All functions accept scalar components or numpy arrays of matching shape,
so the same code evaluates a single tensor or every quadrature point of a
mesh at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

ArrayLike = Union[float, np.ndarray]

# relative gap below which two eigenvalues are treated as repeated
REPEATED_EIG_TOL = 1e-14


@dataclass(frozen=True)
class SymTensor2:
    """Symmetric 2x2 tensor stored as its three independent components."""

    xx: ArrayLike
    yy: ArrayLike
    xy: ArrayLike

    @classmethod
    def from_matrix(cls, m) -> "SymTensor2":
        m = np.asarray(m, dtype=float)
        return cls(m[..., 0, 0], m[..., 1, 1], 0.5 * (m[..., 0, 1] + m[..., 1, 0]))

    @classmethod
    def identity(cls, scale: ArrayLike = 1.0) -> "SymTensor2":
        return cls(scale, scale, 0.0 * np.asarray(scale))

    @classmethod
    def zeros_like(cls, t: "SymTensor2") -> "SymTensor2":
        z = np.zeros_like(np.asarray(t.xx, dtype=float))
        return cls(z, z.copy(), z.copy())

    def as_matrix(self) -> np.ndarray:
        xx, yy, xy = np.broadcast_arrays(
            np.asarray(self.xx, float), np.asarray(self.yy, float), np.asarray(self.xy, float)
        )
        return np.stack([np.stack([xx, xy], -1), np.stack([xy, yy], -1)], -2)

    def __add__(self, other: "SymTensor2") -> "SymTensor2":
        return SymTensor2(self.xx + other.xx, self.yy + other.yy, self.xy + other.xy)

    def __sub__(self, other: "SymTensor2") -> "SymTensor2":
        return SymTensor2(self.xx - other.xx, self.yy - other.yy, self.xy - other.xy)

    def __mul__(self, s: ArrayLike) -> "SymTensor2":
        return SymTensor2(self.xx * s, self.yy * s, self.xy * s)

    __rmul__ = __mul__

    def __neg__(self) -> "SymTensor2":
        return SymTensor2(-self.xx, -self.yy, -self.xy)

    @property
    def trace(self) -> ArrayLike:
        return self.xx + self.yy

    @property
    def det(self) -> ArrayLike:
        return self.xx * self.yy - self.xy * self.xy

    def norm2(self) -> ArrayLike:
        """Squared Frobenius norm, off-diagonal entry counted twice."""
        return self.xx * self.xx + self.yy * self.yy + 2.0 * self.xy * self.xy

    def dot(self, other: "SymTensor2") -> ArrayLike:
        """Frobenius inner product."""
        return self.xx * other.xx + self.yy * other.yy + 2.0 * self.xy * other.xy

    def allclose(self, other: "SymTensor2", atol: float = 1e-12) -> bool:
        return bool(np.all(np.sqrt((self - other).norm2()) <= atol))


@dataclass(frozen=True)
class EigenPair2:
    """Eigen-decomposition with lam1 >= lam2 and e1 = (cos, sin), e2 = (-sin, cos)."""

    lam1: ArrayLike
    lam2: ArrayLike
    cos: ArrayLike
    sin: ArrayLike

    @property
    def e1(self) -> np.ndarray:
        return np.stack(np.broadcast_arrays(self.cos, self.sin), -1)

    @property
    def e2(self) -> np.ndarray:
        return np.stack(np.broadcast_arrays(-np.asarray(self.sin), self.cos), -1)

    def reconstruct(self) -> SymTensor2:
        c, s = self.cos, self.sin
        return SymTensor2(
            self.lam1 * c * c + self.lam2 * s * s,
            self.lam1 * s * s + self.lam2 * c * c,
            (self.lam1 - self.lam2) * c * s,
        )


def deviatoric(t: SymTensor2) -> SymTensor2:
    half_tr = 0.5 * (t.xx + t.yy)
    return SymTensor2(t.xx - half_tr, t.yy - half_tr, t.xy)


def trace_split(t: SymTensor2) -> tuple[ArrayLike, ArrayLike]:
    """Return (positive part, negative part) of the trace, both >= 0."""
    d = t.trace
    return np.maximum(d, 0.0), np.maximum(-d, 0.0)


def eigen(t: SymTensor2) -> EigenPair2:
    """Closed-form eigenpairs (mean +/- radius).

    When the two eigenvalues coincide to relative precision
    ``REPEATED_EIG_TOL`` the eigenvectors are the coordinate axes.
    """
    mean = 0.5 * (t.xx + t.yy)
    half_diff = 0.5 * (t.xx - t.yy)
    radius = np.hypot(half_diff, t.xy)
    scale = np.sqrt(t.norm2())
    repeated = 2.0 * radius <= REPEATED_EIG_TOL * scale
    theta = 0.5 * np.arctan2(t.xy, half_diff)
    theta = np.where(repeated, 0.0, theta)
    return EigenPair2(mean + radius, mean - radius, np.cos(theta), np.sin(theta))


def _spectral_split(t: SymTensor2) -> tuple[SymTensor2, EigenPair2]:
    ep = eigen(t)
    p1 = np.maximum(ep.lam1, 0.0)
    p2 = np.maximum(ep.lam2, 0.0)
    plus = EigenPair2(p1, p2, ep.cos, ep.sin).reconstruct()
    return plus, ep


def psd_project(t: SymTensor2) -> tuple[SymTensor2, SymTensor2]:
    """Split ``t`` into its nearest positive semidefinite part and the remainder."""
    plus, _ = _spectral_split(t)
    # the remainder is formed by subtraction so that plus + minus == t exactly
    return plus, t - plus


def sym_rank_one(a, b) -> SymTensor2:
    """Symmetrized product (a (x) b + b (x) a) / 2."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return SymTensor2(a[..., 0] * b[..., 0], a[..., 1] * b[..., 1],
                      0.5 * (a[..., 0] * b[..., 1] + a[..., 1] * b[..., 0]))


def cross2(a, b) -> ArrayLike:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
