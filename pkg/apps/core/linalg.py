"""
Sparse symmetric positive definite linear algebra.

Matrices are scipy.sparse CSR matrices with sorted column indices and no
stored zeros. The solver is scipy's conjugate gradient method with a Jacobi
preconditioner; SpdSystem adds an optional cached sparse factorization for the
repeated solves of an ADMM run.
"""
import logging
from typing import Iterable, Optional, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import AssemblyError, SolverError

logger = logging.getLogger(__name__)

SparseMatrix = sp.csr_matrix

DEFAULT_REL_TOL = 1e-12
DEFAULT_MAX_ITER_FACTOR = 10

# Normwise backward error at which a solve counts as converged even when
# rel_tol * ||b|| lies below the floating point floor of the residual.
_BACKWARD_ERROR_FLOOR = 64 * np.finfo(float).eps


def finalize(matrix: sp.spmatrix) -> SparseMatrix:
    """Convert to CSR with summed duplicates, sorted indices and no stored zeros."""
    csr = sp.csr_matrix(matrix, dtype=float)
    csr.sum_duplicates()
    csr.eliminate_zeros()
    csr.sort_indices()
    return csr


def assemble_coo(n: int, rows, cols, values) -> SparseMatrix:
    """
    Assemble an n x n matrix from parallel index/value arrays.

    Duplicate (row, col) pairs are summed.

    Raises:
        AssemblyError: If an index lies outside [0, n)
    """
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    values = np.asarray(values, dtype=float).ravel()

    if not (rows.size == cols.size == values.size):
        raise AssemblyError(
            f"Triplet arrays differ in length: {rows.size}, {cols.size}, {values.size}"
        )
    if rows.size and (
        rows.min() < 0 or cols.min() < 0 or rows.max() >= n or cols.max() >= n
    ):
        raise AssemblyError(f"Triplet index out of range for a {n} x {n} matrix")

    return finalize(sp.coo_matrix((values, (rows, cols)), shape=(n, n)))


def assemble_from_triplets(
    n: int,
    triplets: Iterable[Tuple[int, int, float]]
) -> SparseMatrix:
    """
    Assemble an n x n sparse matrix from (row, col, value) triplets.

    Args:
        n: Matrix dimension
        triplets: Iterable of (row, col, value); duplicates are summed

    Returns:
        CSR matrix with deterministic entry order
    """
    triplets = list(triplets)
    if not triplets:
        return sp.csr_matrix((n, n), dtype=float)
    rows, cols, values = zip(*triplets)
    return assemble_coo(n, rows, cols, values)


def _converged(residual_norm, b_norm, a_norm, x_norm, rel_tol):
    if residual_norm <= rel_tol * b_norm:
        return True
    return residual_norm <= _BACKWARD_ERROR_FLOOR * (a_norm * x_norm + b_norm)


def _jacobi(A: sp.spmatrix) -> spla.LinearOperator:
    inv_diag = 1.0 / A.diagonal()
    return spla.LinearOperator(A.shape, matvec=lambda r: inv_diag * r, dtype=float)


def solve_spd(
    A: sp.spmatrix,
    b: np.ndarray,
    rel_tol: float = DEFAULT_REL_TOL,
    x0: Optional[np.ndarray] = None,
    max_iter: Optional[int] = None,
) -> np.ndarray:
    """
    Solve Ax = b for symmetric positive definite A.

    Jacobi-preconditioned conjugate gradients (scipy.sparse.linalg.cg),
    accepted on the true residual ||Ax - b|| <= rel_tol * ||b||. When that
    bound lies below what double precision can resolve, a normwise backward
    error of a few machine epsilons is accepted instead.

    Args:
        A: SPD matrix
        b: Right-hand side
        rel_tol: Relative residual tolerance
        x0: Optional initial guess (warm start)
        max_iter: Iteration cap, default 10 * n

    Returns:
        Solution vector

    Raises:
        SolverError: If the cap is reached; carries the achieved residual
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    b_norm = np.linalg.norm(b)

    if b_norm == 0.0:
        return np.zeros(n)

    if max_iter is None:
        max_iter = DEFAULT_MAX_ITER_FACTOR * n

    a_norm = abs(A).sum(axis=1).max()
    preconditioner = _jacobi(A)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    iterations = 0

    def count(_xk):
        nonlocal iterations
        iterations += 1

    # cg stops on its recursively updated residual; every pass is checked
    # against the true residual and re-seeded from it if needed.
    while True:
        residual_norm = np.linalg.norm(b - A @ x)
        x_norm = np.linalg.norm(x)
        if _converged(residual_norm, b_norm, a_norm, x_norm, rel_tol):
            return x
        remaining = max_iter - iterations
        if remaining <= 0:
            break
        before = iterations
        x, info = spla.cg(
            A, b, x0=x, rtol=rel_tol,
            atol=_BACKWARD_ERROR_FLOOR * (a_norm * x_norm + b_norm),
            maxiter=remaining, M=preconditioner, callback=count,
        )
        if info < 0:
            raise SolverError(f"CG breakdown (info = {info})", residual=residual_norm / b_norm,
                              iterations=iterations)
        if iterations == before:
            break

    relres = np.linalg.norm(b - A @ x) / b_norm
    logger.error(f"CG stopped after {iterations} iterations with relres = {relres:.3e}")
    raise SolverError(
        f"Maximum number of iterations exceeded. Number of iters: {iterations}. "
        f"relres = {relres:e}",
        residual=relres,
        iterations=iterations,
    )


class SpdSystem:
    """
    A fixed SPD matrix with repeated right-hand sides.

    With method='direct' the matrix is factorized once (scipy's sparse LU)
    and every solve is finished by solve_spd, which returns immediately when
    the factorized solution already meets the tolerance. With method='cg'
    every solve is plain preconditioned CG, warm started from the guess.
    """

    def __init__(self, matrix: sp.spmatrix, method: str = 'direct',
                 rel_tol: float = DEFAULT_REL_TOL, max_iter_factor: int = DEFAULT_MAX_ITER_FACTOR):
        if method not in ('direct', 'cg'):
            raise ValueError(f"Unknown linear solver method: {method}")
        self.matrix = finalize(matrix)
        self.method = method
        self.rel_tol = rel_tol
        self.max_iter = max_iter_factor * self.matrix.shape[0]
        self._factor = None

    def solve(self, b: np.ndarray, guess: Optional[np.ndarray] = None) -> np.ndarray:
        if self.method == 'direct':
            if self._factor is None:
                self._factor = spla.factorized(sp.csc_matrix(self.matrix))
            guess = self._factor(np.asarray(b, dtype=float))
        return solve_spd(self.matrix, b, rel_tol=self.rel_tol, x0=guess, max_iter=self.max_iter)
