"""Uniform tensor-product grids and the discrete spatial operators on them.

The domain is a box in 1 or 2 dimensions. All operators impose homogeneous
Neumann (zero-flux) boundary conditions through mirror ghost nodes, which
keeps the discrete Laplacian symmetric with respect to the trapezoid
quadrature inner product and makes summation-by-parts exact. Those two
properties are what the discrete energy inequalities rely on, so they are
treated as hard invariants here and property-tested in the suite.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .exceptions import InvalidExponentError, UnsupportedDimensionError

__all__ = [
    "Grid",
    "Field",
    "laplacian_neumann",
    "p_laplacian_1d",
    "integrate",
    "grad_sq_integral",
    "inner",
    "laplacian_matrix",
    "save_field",
    "load_field",
    "write_field",
    "read_field",
]

FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class Grid:
    """Uniform node-centered grid on a box.

    Attributes:
        dim: space dimension, 1 or 2
        extents: physical side length per axis
        nodes: node count per axis (>= 3 so an interior stencil exists)
    """

    dim: int
    extents: tuple[float, ...]
    nodes: tuple[int, ...]

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise UnsupportedDimensionError(f"dim must be 1 or 2, got {self.dim}")
        object.__setattr__(self, "extents", tuple(float(e) for e in self.extents))
        object.__setattr__(self, "nodes", tuple(int(n) for n in self.nodes))
        if len(self.extents) != self.dim or len(self.nodes) != self.dim:
            raise ValueError("extents and nodes must have one entry per axis")
        if any(e <= 0 for e in self.extents):
            raise ValueError(f"extents must be positive, got {self.extents}")
        if any(n < 3 for n in self.nodes):
            raise ValueError(f"need at least 3 nodes per axis, got {self.nodes}")

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(e / (n - 1) for e, n in zip(self.extents, self.nodes))

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.nodes))

    @property
    def measure(self) -> float:
        return float(np.prod(self.extents))

    def axis_coords(self, axis: int) -> np.ndarray:
        return np.linspace(0.0, self.extents[axis], self.nodes[axis])

    def coords(self) -> tuple[np.ndarray, ...]:
        """Node coordinate arrays shaped like the grid (meshgrid, 'ij')."""
        axes = [self.axis_coords(a) for a in range(self.dim)]
        if self.dim == 1:
            return (axes[0],)
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def quad_weights(self) -> np.ndarray:
        """Trapezoid quadrature weights, flattened row-major. Sum equals |Omega|."""
        return _quad_weights(self)


class Field:
    """Scalar nodal values on a Grid, stored flat in row-major order."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        values = np.asarray(values, dtype=float).reshape(-1)
        if values.size != grid.num_nodes:
            raise ValueError(
                f"expected {grid.num_nodes} values for grid {grid.nodes}, got {values.size}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        self.grid = grid
        self.values = values

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "Field":
        return cls(grid, fn(*grid.coords()).reshape(-1))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "Field":
        return cls(grid, np.full(grid.num_nodes, float(value)))

    def shaped(self) -> np.ndarray:
        return self.values.reshape(self.grid.nodes)

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())

    def __repr__(self):
        return f"Field(grid={self.grid.nodes}, |values|_inf={np.abs(self.values).max():.3g})"


@lru_cache(maxsize=32)
def _quad_weights(grid: Grid) -> np.ndarray:
    per_axis = []
    for h, n in zip(grid.spacing, grid.nodes):
        w = np.full(n, h)
        w[0] = w[-1] = h / 2
        per_axis.append(w)
    if grid.dim == 1:
        w = per_axis[0]
    else:
        w = np.outer(per_axis[0], per_axis[1]).reshape(-1)
    w.flags.writeable = False
    return w


def _lap_1d_matrix(n: int, h: float) -> sp.csr_matrix:
    # Standard 3-point stencil; mirror ghost at both ends doubles the
    # off-diagonal entry, which is what makes the row sum to zero and the
    # weighted matrix symmetric.
    main = np.full(n, -2.0)
    off = np.ones(n - 1)
    lap = sp.diags([off, main, off], [-1, 0, 1], format="lil")
    lap[0, 1] = 2.0
    lap[n - 1, n - 2] = 2.0
    return (lap * (1.0 / h**2)).tocsr()


@lru_cache(maxsize=32)
def laplacian_matrix(grid: Grid) -> sp.csr_matrix:
    """Sparse Neumann Laplacian acting on flattened row-major fields."""
    if grid.dim == 1:
        return _lap_1d_matrix(grid.nodes[0], grid.spacing[0])
    lx = _lap_1d_matrix(grid.nodes[0], grid.spacing[0])
    ly = _lap_1d_matrix(grid.nodes[1], grid.spacing[1])
    ix = sp.identity(grid.nodes[0], format="csr")
    iy = sp.identity(grid.nodes[1], format="csr")
    return (sp.kron(lx, iy) + sp.kron(ix, ly)).tocsr()


def laplacian_neumann(f: Field) -> Field:
    """Discrete Laplacian with homogeneous Neumann flux (mirror ghosts)."""
    return Field(f.grid, laplacian_matrix(f.grid) @ f.values)


def integrate(f: Field) -> float:
    """Trapezoid quadrature of f over the box; exact for per-axis affine fields."""
    return float(f.grid.quad_weights() @ f.values)


def inner(f: Field, g: Field) -> float:
    """Quadrature inner product <f, g>."""
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    return float(f.grid.quad_weights() @ (f.values * g.values))


def grad_sq_integral(f: Field) -> float:
    """Discrete Dirichlet energy via half-node differences.

    Compatible with the stencil: equals -<f, laplacian_neumann(f)> exactly
    up to round-off, so the discrete integration-by-parts identities used by
    the energy estimates telescope without consistency error.
    """
    grid = f.grid
    if grid.dim == 1:
        h = grid.spacing[0]
        d = np.diff(f.values)
        return float(np.sum(d * d) / h)
    hx, hy = grid.spacing
    v = f.shaped()
    # x-edges carry trapezoid weight in y and vice versa
    wy = _axis_trapezoid(grid, 1)
    wx = _axis_trapezoid(grid, 0)
    dx = np.diff(v, axis=0)
    dy = np.diff(v, axis=1)
    sx = np.sum((dx * dx) @ wy) / hx
    sy = np.sum(wx @ (dy * dy)) / hy
    return float(sx + sy)


def _axis_trapezoid(grid: Grid, axis: int) -> np.ndarray:
    h = grid.spacing[axis]
    n = grid.nodes[axis]
    w = np.full(n, h)
    w[0] = w[-1] = h / 2
    return w


def p_flux(s: np.ndarray, p: float) -> np.ndarray:
    """Nonlinear flux |s|^(p-2) s, continuously extended by 0 at s = 0."""
    out = np.zeros_like(s)
    nz = s != 0.0
    out[nz] = np.abs(s[nz]) ** (p - 2.0) * s[nz]
    return out


def p_laplacian_1d(f: Field, p: float) -> Field:
    """1-D p-Laplacian (|f'|^{p-2} f')' in flux form with zero-flux boundaries.

    Reduces to laplacian_neumann at p = 2, and its quadrature integral
    vanishes identically (discrete divergence theorem).
    """
    if f.grid.dim != 1:
        raise UnsupportedDimensionError("p_laplacian_1d requires a 1-D grid")
    if p < 2:
        raise InvalidExponentError(f"exponent must satisfy p >= 2, got {p}")
    h = f.grid.spacing[0]
    slope = np.diff(f.values) / h
    flux = p_flux(slope, p)
    out = np.empty_like(f.values)
    out[1:-1] = np.diff(flux) / h
    # boundary control volumes have width h/2 and zero outward flux
    out[0] = flux[0] / (h / 2)
    out[-1] = -flux[-1] / (h / 2)
    return Field(f.grid, out)


def p_laplacian_jacobian_1d(f: Field, p: float) -> sp.csr_matrix:
    """Jacobian of p_laplacian_1d at f: div((p-1)|f'|^{p-2} grad .)."""
    if f.grid.dim != 1:
        raise UnsupportedDimensionError("p_laplacian_jacobian_1d requires a 1-D grid")
    h = f.grid.spacing[0]
    slope = np.diff(f.values) / h
    c = (p - 1.0) * np.abs(slope) ** (p - 2.0) if p > 2 else np.ones_like(slope)
    return weighted_divergence_matrix_1d(f.grid, c)


def weighted_divergence_matrix_1d(grid: Grid, half_node_coeff: np.ndarray) -> sp.csr_matrix:
    """div(c grad .) with coefficients given directly on half-nodes (1-D)."""
    n = grid.nodes[0]
    h = grid.spacing[0]
    c = np.asarray(half_node_coeff, dtype=float)
    if c.size != n - 1:
        raise ValueError(f"expected {n - 1} half-node coefficients, got {c.size}")
    lower = np.empty(n - 1)
    upper = np.empty(n - 1)
    main = np.empty(n)
    main[1:-1] = -(c[:-1] + c[1:]) / h**2
    lower[:-1] = c[:-1] / h**2
    upper[1:] = c[1:] / h**2
    # boundary rows: control volume h/2, single interior flux
    main[0] = -c[0] * 2.0 / h**2
    upper[0] = c[0] * 2.0 / h**2
    main[-1] = -c[-1] * 2.0 / h**2
    lower[-1] = c[-1] * 2.0 / h**2
    return sp.diags([lower, main, upper], [-1, 0, 1], format="csr")


# -- snapshot I/O -------------------------------------------------------------

def write_field(f: Field, stream: io.TextIOBase) -> None:
    grid = f.grid
    nodes = ",".join(str(n) for n in grid.nodes)
    extent = ",".join(FLOAT_FMT % e for e in grid.extents)
    stream.write(f"# grid: dim={grid.dim} nodes={nodes} extent={extent}\n")
    for v in f.values:
        stream.write(FLOAT_FMT % v)
        stream.write("\n")


def read_field(stream: io.TextIOBase) -> Field:
    header = stream.readline().strip()
    prefix = "# grid:"
    if not header.startswith(prefix):
        raise ValueError(f"malformed snapshot header: {header!r}")
    entries = dict(item.split("=", 1) for item in header[len(prefix):].split())
    dim = int(entries["dim"])
    nodes = tuple(int(n) for n in entries["nodes"].split(","))
    extents = tuple(float(e) for e in entries["extent"].split(","))
    grid = Grid(dim=dim, extents=extents, nodes=nodes)
    values = np.array([float(line) for line in stream if line.strip()])
    return Field(grid, values)


def save_field(f: Field, path) -> None:
    with open(path, "w", newline="\n") as fh:
        write_field(f, fh)


def load_field(path) -> Field:
    with open(path) as fh:
        return read_field(fh)
