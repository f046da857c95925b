"""
Discrete spaces on a Triangulation and their products.

Nodal functions (S^1) are float arrays of length N, element fields (L^0)^r
are arrays of shape (M,) or (M, 2). Products:

    (v, w)_h = sum_z beta_z v(z) w(z)          mass-lumped, beta_z = int phi_z
    (p, q)_w = h^2 sum_T |T| p_T . q_T          weighted, d = 2
    (v, w)   = v^T M w                          consistent P1 mass matrix

Assembled matrices are cached per mesh and must not be modified in place.
"""
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.sparse as sp

from apps.core.exceptions import MeshError
from apps.core.linalg import SparseMatrix, assemble_coo, finalize

from .mesh import Triangulation, check_elementwise, check_nodal


def lumped_weights(mesh: Triangulation) -> np.ndarray:
    """beta_z = |patch(z)| / 3; the weights sum to |Omega| = 1."""
    return np.bincount(
        mesh.elements.ravel(),
        weights=np.repeat(mesh.areas / 3.0, 3),
        minlength=mesh.num_nodes,
    )


def inner_lumped(v: np.ndarray, w: np.ndarray, beta: np.ndarray) -> float:
    v, w, beta = (np.asarray(a, dtype=float) for a in (v, w, beta))
    if not (v.shape == w.shape == beta.shape):
        raise MeshError(
            f"Lumped product of mismatched shapes {v.shape}, {w.shape}, {beta.shape}"
        )
    return float(np.sum(beta * v * w))


def norm_lumped(v: np.ndarray, beta: np.ndarray) -> float:
    return float(np.sqrt(max(inner_lumped(v, v, beta), 0.0)))


def inner_weighted(p: np.ndarray, q: np.ndarray, mesh: Triangulation) -> float:
    """
    Weighted product (p, q)_w = h^2 * sum_T |T| p_T . q_T of element fields.

    Raises:
        MeshError: If p and q do not match the mesh or each other
    """
    p = check_elementwise(mesh, p)
    q = check_elementwise(mesh, q)
    if p.shape != q.shape:
        raise MeshError(f"Weighted product of mismatched shapes {p.shape}, {q.shape}")
    pointwise = p * q if p.ndim == 1 else np.sum(p * q, axis=1)
    return float(mesh.h ** 2 * np.sum(mesh.areas * pointwise))


def norm_weighted(p: np.ndarray, mesh: Triangulation) -> float:
    return float(np.sqrt(max(inner_weighted(p, p, mesh), 0.0)))


@lru_cache(maxsize=None)
def stiffness_matrix(mesh: Triangulation, dirichlet: bool = False) -> SparseMatrix:
    """
    Assemble the P1 stiffness matrix (grad phi_i, grad phi_j).

    With dirichlet=True, rows and columns of boundary nodes are replaced by
    identity rows so the matrix acts on S^1_0 within the global index space.
    """
    grads = mesh.basis_gradients
    local = mesh.areas[:, None, None] * np.einsum('tik,tjk->tij', grads, grads)
    rows = np.repeat(mesh.elements, 3, axis=1)
    cols = np.tile(mesh.elements, (1, 3))
    matrix = assemble_coo(mesh.num_nodes, rows, cols, local.reshape(-1, 9))

    if dirichlet:
        interior = sp.diags(mesh.interior_mask.astype(float))
        boundary = sp.diags(mesh.boundary_mask.astype(float))
        matrix = finalize(interior @ matrix @ interior + boundary)
    return matrix


@lru_cache(maxsize=None)
def mass_matrix(mesh: Triangulation) -> SparseMatrix:
    """Consistent P1 mass matrix, |T|/12 * (1 + delta_ij) per element."""
    reference = (np.ones((3, 3)) + np.eye(3)) / 12.0
    local = mesh.areas[:, None, None] * reference[None, :, :]
    rows = np.repeat(mesh.elements, 3, axis=1)
    cols = np.tile(mesh.elements, (1, 3))
    return assemble_coo(mesh.num_nodes, rows, cols, local.reshape(-1, 9))


def inner_l2(v: np.ndarray, w: np.ndarray, mesh: Triangulation) -> float:
    v = check_nodal(mesh, v)
    w = check_nodal(mesh, w)
    return float(v @ (mass_matrix(mesh) @ w))


def norm_l2(v: np.ndarray, mesh: Triangulation) -> float:
    return float(np.sqrt(max(inner_l2(v, v, mesh), 0.0)))


def inner_energy(v: np.ndarray, w: np.ndarray, mesh: Triangulation) -> float:
    """(grad v, grad w) over Omega."""
    v = check_nodal(mesh, v)
    w = check_nodal(mesh, w)
    return float(v @ (stiffness_matrix(mesh) @ w))


@lru_cache(maxsize=None)
def gradient_operator(mesh: Triangulation) -> sp.csr_matrix:
    """
    Sparse (2M, N) matrix D with (D u)[2T + k] = d_k u on element T.
    """
    grads = mesh.basis_gradients
    rows = (2 * np.arange(mesh.num_elements)[:, None, None]
            + np.arange(2)[None, None, :])
    rows = np.broadcast_to(rows, grads.shape)
    cols = np.broadcast_to(mesh.elements[:, :, None], grads.shape)
    operator = sp.coo_matrix(
        (grads.ravel(), (rows.ravel(), cols.ravel())),
        shape=(2 * mesh.num_elements, mesh.num_nodes),
    )
    return finalize(operator)


def gradient(mesh: Triangulation, u: np.ndarray) -> np.ndarray:
    """Elementwise constant gradient of the nodal interpolant, shape (M, 2)."""
    u = check_nodal(mesh, u)
    return (gradient_operator(mesh) @ u).reshape(mesh.num_elements, 2)


def divergence(mesh: Triangulation, q: np.ndarray) -> np.ndarray:
    """
    Discrete divergence defined by duality with the weighted product:

        (gradient(u), q)_w = -u . divergence(q)   for all nodal u.
    """
    q = check_elementwise(mesh, q)
    weighted = mesh.h ** 2 * mesh.areas[:, None] * q.reshape(mesh.num_elements, 2)
    return -(gradient_operator(mesh).T @ weighted.ravel())


def integrate_against_gradients(mesh: Triangulation, q: np.ndarray) -> np.ndarray:
    """Vector with entries (q, grad phi_z) in the unweighted L^2 product."""
    q = check_elementwise(mesh, q)
    weighted = mesh.areas[:, None] * q.reshape(mesh.num_elements, 2)
    return gradient_operator(mesh).T @ weighted.ravel()


def interpolate(mesh: Triangulation, f: Callable) -> np.ndarray:
    """
    Nodal interpolant of f.

    Args:
        mesh: Triangulation
        f: Vectorized callable f(x, y) evaluated at the node coordinates

    Returns:
        Array of nodal values
    """
    values = f(mesh.nodes[:, 0], mesh.nodes[:, 1])
    return np.array(np.broadcast_to(values, (mesh.num_nodes,)), dtype=float)


def zero_boundary(mesh: Triangulation, v: np.ndarray) -> np.ndarray:
    """Copy of v with Dirichlet boundary values set to exactly 0."""
    v = check_nodal(mesh, v).copy()
    v[mesh.boundary_nodes] = 0.0
    return v
