"""Straight-segment crack geometry and piecewise-affine displacement configurations."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .affine import AffineMap


@dataclass(frozen=True)
class Segment:
    """Straight crack segment from ``p`` to ``q``.

    The unit normal defaults to the direction of ``q - p`` rotated by +90
    degrees; the "plus" side is the one the normal points into.
    """

    p: tuple[float, float]
    q: tuple[float, float]
    normal: tuple[float, float] | None = None

    def __post_init__(self):
        p = np.asarray(self.p, float)
        q = np.asarray(self.q, float)
        t = q - p
        length = float(np.hypot(*t))
        if length == 0:
            raise ValueError("degenerate crack segment")
        if self.normal is None:
            object.__setattr__(self, "normal", (-t[1] / length, t[0] / length))
        n = np.asarray(self.normal, float)
        if abs(np.hypot(*n) - 1.0) > 1e-12 or abs(np.dot(n, t)) > 1e-12 * length:
            raise ValueError("segment normal must be a unit vector orthogonal to the segment")

    @property
    def length(self) -> float:
        return float(np.hypot(self.q[0] - self.p[0], self.q[1] - self.p[1]))

    @property
    def unit_normal(self) -> np.ndarray:
        return np.asarray(self.normal, float)

    def distance(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, float)
        p = np.asarray(self.p, float)
        t = np.asarray(self.q, float) - p
        s = np.clip(((pts - p) @ t) / (t @ t), 0.0, 1.0)
        return np.linalg.norm(pts - (p + s[..., None] * t), axis=-1)


@dataclass(frozen=True)
class CrackPath:
    segments: tuple[Segment, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))

    @property
    def length(self) -> float:
        return sum(s.length for s in self.segments)

    def distance(self, pts: np.ndarray) -> np.ndarray:
        """Distance to the union of segments, +inf for an empty path."""
        pts = np.asarray(pts, float)
        out = np.full(pts.shape[:-1], np.inf)
        for s in self.segments:
            np.minimum(out, s.distance(pts), out=out)
        return out

    def inside(self, lx: float, ly: float) -> bool:
        tol = 1e-12 * max(lx, ly)
        for s in self.segments:
            for x, y in (s.p, s.q):
                if not (-tol <= x <= lx + tol and -tol <= y <= ly + tol):
                    return False
        return True


@dataclass(frozen=True)
class AffinePiece:
    """Convex polygonal region carrying an affine displacement."""

    polygon: np.ndarray
    field: AffineMap

    @property
    def area(self) -> float:
        x, y = self.polygon[:, 0], self.polygon[:, 1]
        return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))

    def contains(self, pts: np.ndarray) -> np.ndarray:
        # convex, counter-clockwise polygon: inside means left of every edge
        pts = np.asarray(pts, float)
        a = self.polygon
        b = np.roll(a, -1, axis=0)
        edge = b - a
        rel = pts[:, None, :] - a[None]
        cross = edge[None, :, 0] * rel[..., 1] - edge[None, :, 1] * rel[..., 0]
        scale = 1e-12 * max(1.0, float(np.abs(a).max()))
        return np.all(cross >= -scale * np.linalg.norm(edge, axis=1), axis=1)


@dataclass(frozen=True)
class CrackConfig:
    """A crack path together with the affine pieces it separates.

    ``sides[i] = (minus_piece, plus_piece)`` names, for segment ``i``, the
    pieces on either side relative to the segment normal.
    """

    path: CrackPath
    pieces: tuple[AffinePiece, ...]
    sides: tuple[tuple[int, int], ...]
    lx: float = 1.0
    ly: float = 1.0
    meta: dict = field(default_factory=dict, compare=False)

    def validate(self):
        if not self.path.inside(self.lx, self.ly):
            raise ValueError("crack segment leaves the domain")
        if len(self.sides) != len(self.path.segments):
            raise ValueError("every segment needs a (minus, plus) piece pair")

    def segment_jumps(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Jump plus - minus at both endpoints of each segment."""
        out = []
        for seg, (im, ip) in zip(self.path.segments, self.sides):
            minus, plus = self.pieces[im].field, self.pieces[ip].field
            out.append(tuple(plus(np.asarray(x, float)) - minus(np.asarray(x, float))
                             for x in (seg.p, seg.q)))
        return out

    def piece_index(self, pts: np.ndarray) -> np.ndarray:
        """Index of the piece holding each point; the first match wins on shared edges."""
        pts = np.asarray(pts, float)
        idx = np.full(pts.shape[0], -1)
        for i, piece in enumerate(self.pieces):
            hit = (idx < 0) & piece.contains(pts)
            idx[hit] = i
        return idx

    def displacement(self, pts: np.ndarray) -> np.ndarray:
        """Sharp displacement; points outside every piece use the nearest piece by region test
        on the clamped point, which extends the pieces slightly beyond the domain."""
        pts = np.asarray(pts, float)
        clamped = np.column_stack([np.clip(pts[:, 0], 0, self.lx), np.clip(pts[:, 1], 0, self.ly)])
        idx = self.piece_index(clamped)
        if np.any(idx < 0):
            raise ValueError("configuration pieces do not cover the domain")
        out = np.empty_like(pts)
        for i, piece in enumerate(self.pieces):
            m = idx == i
            out[m] = piece.field(pts[m])
        return out


def _clip_halfplane(poly: np.ndarray, point: np.ndarray, normal: np.ndarray) -> np.ndarray:
    """Keep the part of a convex polygon where (x - point) . normal >= 0."""
    out = []
    n = len(poly)
    for k in range(n):
        a, b = poly[k], poly[(k + 1) % n]
        sa, sb = (a - point) @ normal, (b - point) @ normal
        if sa >= 0:
            out.append(a)
        if (sa >= 0) != (sb >= 0):
            out.append(a + (b - a) * (sa / (sa - sb)))
    return np.array(out)


def through_crack(point, direction, minus: AffineMap, plus: AffineMap,
                  lx: float = 1.0, ly: float = 1.0) -> CrackConfig:
    """Straight crack cutting the whole rectangle along the line ``point + s * direction``."""
    point = np.asarray(point, float)
    d = np.asarray(direction, float)
    d = d / np.linalg.norm(d)
    normal = np.array([-d[1], d[0]])
    rect = np.array([[0, 0], [lx, 0], [lx, ly], [0, ly]], float)
    up = _clip_halfplane(rect, point, normal)
    down = _clip_halfplane(rect, point, -normal)
    if len(up) < 3 or len(down) < 3:
        raise ValueError("line does not cut the domain")
    # endpoints: intersections of the line with the rectangle boundary
    pts = [x for x in up if abs((x - point) @ normal) <= 1e-12 * max(lx, ly)]
    s = sorted(((x - point) @ d, tuple(x)) for x in pts)
    seg = Segment(s[0][1], s[-1][1], tuple(normal))
    return CrackConfig(CrackPath((seg,)), (AffinePiece(down, minus), AffinePiece(up, plus)),
                       ((0, 1),), lx, ly)


def horizontal_crack(y0: float, below: AffineMap, above: AffineMap,
                     lx: float = 1.0, ly: float = 1.0) -> CrackConfig:
    return through_crack((0.0, y0), (1.0, 0.0), below, above, lx, ly)


def opening_crack(c: float, y0: float = 0.5, lx: float = 1.0, ly: float = 1.0) -> CrackConfig:
    """Rigid translations (0, -c) below and (0, +c) above a horizontal crack."""
    return horizontal_crack(y0, AffineMap.constant((0.0, -c)), AffineMap.constant((0.0, c)), lx, ly)


def uncracked(field: AffineMap, lx: float = 1.0, ly: float = 1.0) -> CrackConfig:
    rect = np.array([[0, 0], [lx, 0], [lx, ly], [0, ly]], float)
    return CrackConfig(CrackPath(()), (AffinePiece(rect, field),), (), lx, ly)


def path_of(segments: Sequence[tuple]) -> CrackPath:
    return CrackPath(tuple(Segment(tuple(p), tuple(q)) for p, q in segments))
