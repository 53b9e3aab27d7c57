"""Field and table output: legacy-VTK structured points and CSV logs."""

from __future__ import annotations

import csv
import io as _io
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .energy import EnergyBreakdown
from .grid import Field, Grid

HISTORY_HEADER = ("iter", "bulk_mod", "bulk_unmod", "surf_grad", "surf_well", "total")
SUMMARY_HEADER = ("quantity", "computed", "reference", "rel_error", "status")


def _fmt(x: float) -> str:
    # 17 significant digits round-trip every double exactly
    return format(float(x), ".17g")


def write_fields(u: Field, v: Field, grid: Grid, path) -> str:
    """Write ``u`` and ``v`` as a legacy-VTK ASCII STRUCTURED_POINTS file.

    Point data carries ``displacement`` (padded to three components) and
    ``phase``.  Nodes are written x-fastest, which is the grid's own order.
    """
    if u.grid != grid or v.grid != grid:
        raise ValueError("fields do not live on the given grid")
    if u.components != 2 or v.components != 1:
        raise ValueError("expected a 2-vector displacement and a scalar phase field")
    n = grid.n_nodes
    lines = [
        "# vtk DataFile Version 3.0",
        "fissura fields",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {grid.nx + 1} {grid.ny + 1} 1",
        "ORIGIN 0 0 0",
        f"SPACING {_fmt(grid.hx)} {_fmt(grid.hy)} 1",
        f"POINT_DATA {n}",
        "VECTORS displacement double",
    ]
    lines += [f"{_fmt(a)} {_fmt(b)} 0" for a, b in u.values]
    lines += ["SCALARS phase double 1", "LOOKUP_TABLE default"]
    lines += [_fmt(x) for x in v.values]
    text = "\n".join(lines) + "\n"
    path = os.fspath(path)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return path


@dataclass
class VTKFields:
    grid: Grid
    displacement: np.ndarray
    phase: np.ndarray


def read_fields(path) -> VTKFields:
    """Parse a file produced by :func:`write_fields`."""
    with open(path) as fh:
        tokens = fh.read().split("\n")
    header = {}
    k = 0
    while k < len(tokens) and not tokens[k].startswith("VECTORS"):
        parts = tokens[k].split()
        if parts:
            header[parts[0]] = parts[1:]
        k += 1
    try:
        nxp, nyp, _ = (int(s) for s in header["DIMENSIONS"])
        hx, hy, _ = (float(s) for s in header["SPACING"])
        n = int(header["POINT_DATA"][0])
    except (KeyError, ValueError) as exc:
        raise ValueError(f"malformed VTK header in {path}") from exc
    disp = np.array([[float(s) for s in tokens[k + 1 + i].split()[:2]] for i in range(n)])
    k += 1 + n
    if not tokens[k].startswith("SCALARS phase"):
        raise ValueError("phase array missing")
    phase = np.array([float(tokens[k + 2 + i]) for i in range(n)])
    grid = Grid(nxp - 1, nyp - 1, hx * (nxp - 1), hy * (nyp - 1))
    return VTKFields(grid, disp, phase)


def history_rows(energies: Sequence[EnergyBreakdown]) -> list[tuple]:
    return [(i,) + e.as_row() for i, e in enumerate(energies)]


def write_history(energies: Sequence[EnergyBreakdown], path) -> str:
    """Energy history CSV, one row per recorded state."""
    path = os.fspath(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_HEADER)
        for row in history_rows(energies):
            w.writerow([row[0]] + [_fmt(x) for x in row[1:]])
    return path


@dataclass(frozen=True)
class SummaryRow:
    """One computed quantity against its reference.

    ``reference`` may be NaN for purely informational rows; ``status`` is
    PASS/FAIL when a tolerance applies and INFO otherwise.
    """

    quantity: str
    computed: float
    reference: float
    tol: float | None = None
    relative: bool = True
    status_override: str | None = None

    @property
    def rel_error(self) -> float:
        if not np.isfinite(self.reference):
            return float("nan")
        denom = abs(self.reference) if self.relative and self.reference != 0 else 1.0
        return abs(self.computed - self.reference) / denom

    @property
    def status(self) -> str:
        if self.status_override is not None:
            return self.status_override
        if self.tol is None:
            return "INFO"
        return "PASS" if self.rel_error <= self.tol else "FAIL"


def render_summary(rows: Iterable[SummaryRow]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    for r in rows:
        w.writerow([r.quantity, _fmt(r.computed), _fmt(r.reference), _fmt(r.rel_error), r.status])
    return buf.getvalue()


def write_summary(rows: Iterable[SummaryRow], path) -> str:
    path = os.fspath(path)
    with open(path, "w", newline="") as fh:
        fh.write(render_summary(rows))
    return path
