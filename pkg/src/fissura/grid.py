"""Structured Q1 grids on rectangles.

Nodes are numbered row by row, ``n = j * (nx + 1) + i`` with ``x = i * hx``
and ``y = j * hy``.  Element ``e = j * nx + i`` has the counter-clockwise
nodes ``(i, j), (i+1, j), (i+1, j+1), (i, j+1)``.  Displacement degrees of
freedom are interleaved: ``2 n`` for the x component, ``2 n + 1`` for y.
All bulk and surface integrals use 2x2 Gauss quadrature.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, NamedTuple, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .tensor import SymTensor2

log = logging.getLogger(__name__)

_G = 1.0 / np.sqrt(3.0)
# reference coordinates of the element nodes and of the Gauss points
NODE_REF = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
QP_REF = NODE_REF * _G


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError(f"grid needs at least 2 elements per direction, got {self.nx}x{self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("grid side lengths must be positive")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def n_nodes(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @property
    def n_elements(self) -> int:
        return self.nx * self.ny

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def qp_weight(self) -> float:
        return 0.25 * self.hx * self.hy

    @cached_property
    def nodes(self) -> np.ndarray:
        """Nodal coordinates, shape (n_nodes, 2)."""
        x = np.linspace(0.0, self.lx, self.nx + 1)
        y = np.linspace(0.0, self.ly, self.ny + 1)
        xx, yy = np.meshgrid(x, y)
        return np.column_stack([xx.ravel(), yy.ravel()])

    @cached_property
    def connectivity(self) -> np.ndarray:
        """Element node indices, shape (n_elements, 4)."""
        i, j = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        n0 = (j * (self.nx + 1) + i).ravel()
        return np.column_stack([n0, n0 + 1, n0 + self.nx + 2, n0 + self.nx + 1])

    @cached_property
    def shape_values(self) -> np.ndarray:
        """N[q, a]: value of shape function a at Gauss point q."""
        return 0.25 * (1 + QP_REF[:, None, 0] * NODE_REF[None, :, 0]) * (
            1 + QP_REF[:, None, 1] * NODE_REF[None, :, 1]
        )

    @cached_property
    def shape_grads(self) -> np.ndarray:
        """dN[q, a, k]: physical derivative d/dx_k of shape function a at Gauss point q."""
        xi, eta = QP_REF[:, None, 0], QP_REF[:, None, 1]
        xa, ea = NODE_REF[None, :, 0], NODE_REF[None, :, 1]
        dxi = 0.25 * xa * (1 + eta * ea) * (2.0 / self.hx)
        deta = 0.25 * ea * (1 + xi * xa) * (2.0 / self.hy)
        return np.stack([dxi, deta], axis=-1)

    @cached_property
    def strain_operator(self) -> np.ndarray:
        """B[q, c, d]: maps the 8 element dofs to (exx, eyy, exy) at Gauss point q."""
        dN = self.shape_grads
        B = np.zeros((4, 3, 8))
        B[:, 0, 0::2] = dN[:, :, 0]
        B[:, 1, 1::2] = dN[:, :, 1]
        B[:, 2, 0::2] = 0.5 * dN[:, :, 1]
        B[:, 2, 1::2] = 0.5 * dN[:, :, 0]
        return B

    @cached_property
    def qp_coords(self) -> np.ndarray:
        """Physical Gauss point coordinates, shape (n_elements, 4, 2)."""
        return np.einsum("qa,eak->eqk", self.shape_values, self.nodes[self.connectivity])

    def element_dofs(self, components: int) -> np.ndarray:
        if components == 1:
            return self.connectivity
        conn = self.connectivity
        out = np.empty((conn.shape[0], 8), dtype=np.int64)
        out[:, 0::2] = 2 * conn
        out[:, 1::2] = 2 * conn + 1
        return out

    def pattern(self, components: int) -> "SparsityPattern":
        if components == 1:
            return self._pattern1
        if components == 2:
            return self._pattern2
        raise ValueError("components must be 1 or 2")

    @cached_property
    def _pattern1(self) -> "SparsityPattern":
        return SparsityPattern.build(self.element_dofs(1), self.n_nodes)

    @cached_property
    def _pattern2(self) -> "SparsityPattern":
        return SparsityPattern.build(self.element_dofs(2), 2 * self.n_nodes)

    def boundary_nodes(self, side: str) -> np.ndarray:
        x, y = self.nodes[:, 0], self.nodes[:, 1]
        tol = 1e-12 * max(self.lx, self.ly)
        masks = {
            "left": np.abs(x) <= tol,
            "right": np.abs(x - self.lx) <= tol,
            "bottom": np.abs(y) <= tol,
            "top": np.abs(y - self.ly) <= tol,
        }
        if side == "boundary":
            m = masks["left"] | masks["right"] | masks["bottom"] | masks["top"]
        elif side in masks:
            m = masks[side]
        else:
            raise ValueError(f"unknown boundary side {side!r}")
        return np.flatnonzero(m)

    def integrate(self, values_at_qp: np.ndarray) -> float:
        """Quadrature sum of an (n_elements, 4) array of point values."""
        return float(np.sum(values_at_qp) * self.qp_weight)


@dataclass(frozen=True)
class SparsityPattern:
    """CSR layout of an assembled Q1 operator and the scatter map into it."""

    indptr: np.ndarray
    indices: np.ndarray
    scatter: np.ndarray  # element entry -> position in data
    row_of_entry: np.ndarray
    diag_pos: np.ndarray
    size: int

    @classmethod
    def build(cls, edofs: np.ndarray, size: int) -> "SparsityPattern":
        nd = edofs.shape[1]
        rows = np.repeat(edofs, nd, axis=1).ravel()
        cols = np.tile(edofs, (1, nd)).ravel()
        keys = rows.astype(np.int64) * size + cols
        uniq, inverse = np.unique(keys, return_inverse=True)
        r = uniq // size
        c = uniq % size
        indptr = np.zeros(size + 1, dtype=np.int64)
        np.cumsum(np.bincount(r, minlength=size), out=indptr[1:])
        diag_pos = np.flatnonzero(r == c)
        return cls(indptr, c.astype(np.int64), inverse.ravel(), r, diag_pos, size)

    @property
    def nnz(self) -> int:
        return self.indices.size

    def constrain(self, matrix: sp.csr_matrix, fixed: np.ndarray) -> sp.csr_matrix:
        """Zero the rows and columns of ``fixed`` dofs and put 1 on their diagonal.

        ``matrix`` must have been produced by :meth:`assemble` on this pattern.
        """
        keep = ~(fixed[self.row_of_entry] | fixed[self.indices])
        data = matrix.data * keep
        data[self.diag_pos[fixed]] = 1.0
        return sp.csr_matrix((data, self.indices, self.indptr), shape=matrix.shape)

    def assemble(self, element_matrices: np.ndarray) -> sp.csr_matrix:
        data = np.bincount(self.scatter, weights=element_matrices.ravel(), minlength=self.nnz)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.size, self.size))


@dataclass
class Field:
    """Nodal values of a Q1 field; ``values`` has shape (n_nodes,) or (n_nodes, 2)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape not in ((self.grid.n_nodes,), (self.grid.n_nodes, 2)):
            raise ValueError(
                f"field shape {self.values.shape} does not match grid with {self.grid.n_nodes} nodes"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")

    @classmethod
    def unchecked(cls, grid: Grid, values: np.ndarray) -> "Field":
        """Wrap values that may be infinite (e.g. distances to an empty crack)."""
        f = object.__new__(cls)
        f.grid = grid
        f.values = np.asarray(values, float)
        return f

    @property
    def components(self) -> int:
        return 1 if self.values.ndim == 1 else 2

    @classmethod
    def constant(cls, grid: Grid, value: float = 0.0, components: int = 1) -> "Field":
        shape = (grid.n_nodes,) if components == 1 else (grid.n_nodes, components)
        return cls(grid, np.full(shape, float(value)))

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable) -> "Field":
        """Sample ``fn(x, y)`` at the nodes; a 2-tuple result gives a vector field."""
        out = fn(grid.nodes[:, 0], grid.nodes[:, 1])
        if isinstance(out, tuple):
            vals = np.column_stack([np.broadcast_to(np.asarray(c, float), (grid.n_nodes,)) for c in out])
        else:
            vals = np.broadcast_to(np.asarray(out, float), (grid.n_nodes,)).copy()
        return cls(grid, vals)

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def as_image(self) -> np.ndarray:
        """Values reshaped to (ny+1, nx+1[, 2]) with row index along y."""
        g = self.grid
        return self.values.reshape((g.ny + 1, g.nx + 1) + self.values.shape[1:])


# --- pointwise evaluation at Gauss points ------------------------------------------


def qp_strains(grid: Grid, u: np.ndarray) -> SymTensor2:
    """Symmetric gradient at every Gauss point, components shaped (n_elements, 4)."""
    ue = np.asarray(u, float).reshape(-1)[grid.element_dofs(2)]
    eps = np.einsum("qcd,ed->ecq", grid.strain_operator, ue)
    return SymTensor2(eps[:, 0], eps[:, 1], eps[:, 2])


def qp_values_and_grads(grid: Grid, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Interpolated values (n_elements, 4) and gradients (n_elements, 4, 2) of a scalar field."""
    ve = np.asarray(v, float)[grid.connectivity]
    vals = ve @ grid.shape_values.T
    grads = np.einsum("qak,ea->eqk", grid.shape_grads, ve)
    return vals, grads


def _check_index(grid: Grid, element: int, qp: int):
    if not 0 <= element < grid.n_elements:
        raise IndexError(f"element {element} out of range [0, {grid.n_elements})")
    if not 0 <= qp < 4:
        raise IndexError(f"quadrature point {qp} out of range [0, 4)")


def strain_at_qp(u: Field, element: int, qp: int) -> SymTensor2:
    if u.components != 2:
        raise ValueError("strain needs a 2-component displacement field")
    grid = u.grid
    _check_index(grid, element, qp)
    ue = u.flat[grid.element_dofs(2)[element]]
    e = grid.strain_operator[qp] @ ue
    return SymTensor2(float(e[0]), float(e[1]), float(e[2]))


def value_and_grad_at_qp(v: Field, element: int, qp: int) -> tuple[float, np.ndarray]:
    if v.components != 1:
        raise ValueError("expected a scalar field")
    grid = v.grid
    _check_index(grid, element, qp)
    ve = v.values[grid.connectivity[element]]
    return float(grid.shape_values[qp] @ ve), grid.shape_grads[qp].T @ ve


# --- Dirichlet data -----------------------------------------------------------------

Where = Union[str, Callable[[np.ndarray, np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class DirichletCondition:
    """Prescribe ``value(x, y, t) -> (ux, uy)`` on the masked components of selected nodes.

    ``where`` is a side name (left, right, bottom, top, boundary) or a
    vectorized predicate ``f(x, y) -> bool array``.
    """

    where: Where
    value: Callable
    components: tuple[bool, bool] = (True, True)

    def nodes(self, grid: Grid) -> np.ndarray:
        if isinstance(self.where, str):
            return grid.boundary_nodes(self.where)
        return np.flatnonzero(self.where(grid.nodes[:, 0], grid.nodes[:, 1]))


@dataclass(frozen=True)
class DirichletSpec:
    conditions: Sequence[DirichletCondition] = field(default_factory=tuple)

    def resolve(self, grid: Grid, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Return (fixed dof mask, prescribed dof values) at load parameter ``t``."""
        fixed = np.zeros(2 * grid.n_nodes, dtype=bool)
        values = np.zeros(2 * grid.n_nodes)
        for cond in self.conditions:
            nodes = cond.nodes(grid)
            if nodes.size == 0:
                warnings.warn(f"Dirichlet condition on {cond.where!r} selects no nodes", stacklevel=2)
                continue
            xy = grid.nodes[nodes]
            ux, uy = cond.value(xy[:, 0], xy[:, 1], t)
            for comp, val in ((0, ux), (1, uy)):
                if not cond.components[comp]:
                    continue
                val = np.broadcast_to(np.asarray(val, float), nodes.shape)
                if not np.all(np.isfinite(val)):
                    raise ValueError("prescribed displacement is not finite")
                fixed[2 * nodes + comp] = True
                values[2 * nodes + comp] = val
        return fixed, values


def affine_boundary(matrix, offset=(0.0, 0.0), where: Where = "boundary") -> DirichletSpec:
    """Full-boundary data w(x) = t * (W x + c)."""
    W = np.asarray(matrix, float)
    c = np.asarray(offset, float)

    def value(x, y, t):
        return t * (W[0, 0] * x + W[0, 1] * y + c[0]), t * (W[1, 0] * x + W[1, 1] * y + c[1])

    return DirichletSpec((DirichletCondition(where, value),))


class LinearSystem(NamedTuple):
    matrix: sp.csr_matrix
    rhs: np.ndarray


def apply_dirichlet(spec: DirichletSpec, t: float, system: LinearSystem, grid: Grid) -> LinearSystem:
    """Eliminate prescribed dofs symmetrically.

    Constrained rows and columns are zeroed with a unit diagonal, the
    right-hand side of constrained rows carries the prescribed value and
    free rows are corrected by the lifted column contribution.
    """
    fixed, values = spec.resolve(grid, t)
    if not fixed.any():
        return system
    return eliminate(system, fixed, values)


def eliminate(system: LinearSystem, fixed: np.ndarray, values: np.ndarray) -> LinearSystem:
    K = system.matrix.tocsr()
    lifted = np.where(fixed, values, 0.0)
    rhs = system.rhs - K @ lifted
    rhs = np.where(fixed, values, rhs)
    K = K.tocoo()
    keep = ~(fixed[K.row] | fixed[K.col])
    n = K.shape[0]
    idx = np.flatnonzero(fixed)
    rows = np.concatenate([K.row[keep], idx])
    cols = np.concatenate([K.col[keep], idx])
    data = np.concatenate([K.data[keep], np.ones(idx.size)])
    return LinearSystem(sp.csr_matrix((data, (rows, cols)), shape=(n, n)), rhs)
