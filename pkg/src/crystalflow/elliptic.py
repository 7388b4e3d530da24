"""Neumann elliptic solvers for the two linear sub-problems of the time step.

Both systems are symmetric positive definite: the zero-order shift tau > 0
removes the constant kernel of the Neumann operator, and the diffusion
weight (the cosh coefficient of the weighted problem) is bounded below.
The default backend is a sparse Cholesky-style direct factorization; a
Jacobi-preconditioned conjugate gradient backend is available behind the
same contract. Either way the returned solution is checked against the
infinity-norm residual contract and diagnostics are returned to the caller.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import InvalidCoefficientError, SolverFailure
from .grid import Field, Grid, laplacian_matrix, weighted_divergence_matrix_1d

__all__ = [
    "SolveDiagnostics",
    "solve_helmholtz_neumann",
    "solve_weighted_helmholtz",
    "helmholtz_matrix",
    "weighted_helmholtz_matrix",
]

DEFAULT_RTOL = 1e-10


@dataclass
class SolveDiagnostics:
    """What the solver actually did: backend, iterations, final residual."""

    backend: str
    iterations: int
    residual_inf: float


def helmholtz_matrix(grid: Grid, tau: float) -> sp.csr_matrix:
    """(-Laplacian + tau I) on the flattened grid."""
    n = grid.num_nodes
    return (-laplacian_matrix(grid) + tau * sp.identity(n, format="csr")).tocsr()


def _half_node_means(c: np.ndarray, axis: int) -> np.ndarray:
    lo = [slice(None)] * c.ndim
    hi = [slice(None)] * c.ndim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    return 0.5 * (c[tuple(lo)] + c[tuple(hi)])


def weighted_divergence_matrix(grid: Grid, c: Field) -> sp.csr_matrix:
    """div(c grad .) with arithmetic-mean half-node coefficients.

    The arithmetic mean keeps the operator symmetric under the trapezoid
    quadrature weights, which the discrete energy identity tests rely on.
    """
    if grid.dim == 1:
        half = _half_node_means(c.values, 0)
        return weighted_divergence_matrix_1d(grid, half)

    nx, ny = grid.nodes
    cs = c.shaped()
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    flat = (ii * ny + jj).astype(np.int64)
    rows, cols, vals = [], [], []

    for axis, h in enumerate(grid.spacing):
        half = _half_node_means(cs, axis)  # one coefficient per edge along axis
        nline = grid.nodes[axis]
        idx_along = ii if axis == 0 else jj
        if axis == 0:
            lo, hi = flat[:-1, :], flat[1:, :]
            pos_lo, pos_hi = idx_along[:-1, :], idx_along[1:, :]
        else:
            lo, hi = flat[:, :-1], flat[:, 1:]
            pos_lo, pos_hi = idx_along[:, :-1], idx_along[:, 1:]
        # boundary control volumes have half width, doubling the flux scale
        scale_lo = np.where(pos_lo == 0, 2.0, 1.0) / h**2
        scale_hi = np.where(pos_hi == nline - 1, 2.0, 1.0) / h**2
        for r, cc, v in (
            (lo, hi, half * scale_lo),
            (lo, lo, -half * scale_lo),
            (hi, lo, half * scale_hi),
            (hi, hi, -half * scale_hi),
        ):
            rows.append(r.reshape(-1))
            cols.append(cc.reshape(-1))
            vals.append(v.reshape(-1))

    n = grid.num_nodes
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    return mat.tocsr()


def weighted_helmholtz_matrix(grid: Grid, tau: float, c: Field) -> sp.csr_matrix:
    """(-div(c grad .) + tau I) with arithmetic-mean half-node coefficients."""
    n = grid.num_nodes
    return (-weighted_divergence_matrix(grid, c) + tau * sp.identity(n, format="csr")).tocsr()


def _jacobi_cg(A: sp.csr_matrix, b: np.ndarray, q: np.ndarray, rtol: float, maxiter: int):
    """Jacobi-preconditioned CG with an infinity-norm stopping test.

    The stencil matrix is self-adjoint only under the trapezoid quadrature
    weights q, so CG runs on the symmetrized system diag(q) A x = diag(q) b;
    convergence is judged on the residual of the original system.
    """
    W = A.multiply(q[:, None]).tocsr()
    wb = q * b
    inv_diag = 1.0 / W.diagonal()
    x = np.zeros_like(b)
    r = wb.copy()
    target = rtol * max(np.abs(b).max(), np.finfo(float).tiny)
    if np.abs(r / q).max() <= target:
        return x, 0
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        Wp = W @ p
        alpha = rz / (p @ Wp)
        x += alpha * p
        r -= alpha * Wp
        if np.abs(r / q).max() <= target:
            return x, it
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return None, maxiter


def _solve(A: sp.csr_matrix, rhs: np.ndarray, q: np.ndarray, rtol: float, maxiter, backend: str):
    norm_rhs = max(np.abs(rhs).max(), np.finfo(float).tiny)
    if maxiter is None:
        maxiter = 10 * rhs.size
    if backend == "cg":
        x, it = _jacobi_cg(A, rhs, q, rtol, maxiter)
        if x is None:
            raise SolverFailure(
                f"CG did not converge in {maxiter} iterations",
                residual=float("nan"),
                iterations=maxiter,
            )
        res = np.abs(A @ x - rhs).max()
        return x, SolveDiagnostics("cg", it, float(res))
    if backend == "direct":
        x = spla.spsolve(A.tocsc(), rhs)
        res = np.abs(A @ x - rhs).max()
        it = 0
        # one step of iterative refinement if round-off left us short
        if res > rtol * norm_rhs:
            x = x + spla.spsolve(A.tocsc(), rhs - A @ x)
            res = np.abs(A @ x - rhs).max()
            it = 1
        if res > rtol * norm_rhs:
            raise SolverFailure(
                f"direct solve residual {res:.3e} above {rtol * norm_rhs:.3e}",
                residual=float(res),
                iterations=it,
            )
        return x, SolveDiagnostics("direct", it, float(res))
    raise ValueError(f"unknown backend {backend!r}")


def solve_helmholtz_neumann(
    grid: Grid,
    tau: float,
    rhs: Field,
    rtol: float = DEFAULT_RTOL,
    maxiter: int | None = None,
    backend: str = "direct",
) -> tuple[Field, SolveDiagnostics]:
    """Solve (-Laplacian + tau I) u = rhs with homogeneous Neumann flux."""
    if tau <= 0:
        raise ValueError(f"shift tau must be positive, got {tau}")
    A = helmholtz_matrix(grid, tau)
    x, diag = _solve(A, rhs.values, grid.quad_weights(), rtol, maxiter, backend)
    return Field(grid, x), diag


def solve_weighted_helmholtz(
    grid: Grid,
    tau: float,
    c: Field,
    rhs: Field,
    rtol: float = DEFAULT_RTOL,
    maxiter: int | None = None,
    backend: str = "direct",
    coefficient_floor: float = 1.0,
) -> tuple[Field, SolveDiagnostics]:
    """Solve (-div(c grad .) + tau I) w = rhs.

    The default floor c >= 1 encodes the cosh coefficient structure of the
    weighted sub-problem; callers solving the pure-exponential variant relax
    it to any positive floor.
    """
    if tau <= 0:
        raise ValueError(f"shift tau must be positive, got {tau}")
    cmin = c.values.min()
    if cmin < coefficient_floor:
        raise InvalidCoefficientError(
            f"coefficient minimum {cmin:.6g} below required floor {coefficient_floor:.6g}"
        )
    A = weighted_helmholtz_matrix(grid, tau, c)
    x, diag = _solve(A, rhs.values, grid.quad_weights(), rtol, maxiter, backend)
    return Field(grid, x), diag
