"""
Uniform triangulations of the unit square.

The coarse mesh T_0 splits (0,1)^2 along the diagonal from (0,0) to (1,1);
T_l is obtained by l red refinements, each splitting every triangle into
four congruent children through its edge midpoints. New nodes are appended
after the nodes of the parent mesh, so meshes are nested by index and
prolongation only has to fill in edge midpoints.
"""
import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import TextIO, Tuple

import numpy as np

from apps.core.exceptions import MeshError
from apps.core.validators import MAX_LEVEL, validate_level

logger = logging.getLogger(__name__)

_COARSE_NODES = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
_COARSE_ELEMENTS = np.array([[0, 1, 2], [0, 2, 3]])


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Triangulation:
    """
    Triangulation T_l of the unit square.

    Attributes:
        level: Number of uniform refinements of T_0
        nodes: (N, 2) node coordinates, exact dyadic grid points k * 2^-l
        elements: (M, 3) counterclockwise vertex indices
        boundary_nodes: Indices of nodes on the boundary of the square
        h: Maximal element diameter (sqrt(2) * 2^-l)
        h_min: Minimal element diameter
        parent_edges: (N - N_parent, 2) parent-mesh endpoints of every node
            created by the last refinement; empty for T_0
    """
    level: int
    nodes: np.ndarray
    elements: np.ndarray
    boundary_nodes: np.ndarray
    h: float
    h_min: float
    parent_edges: np.ndarray

    def __str__(self):
        return (
            f"T_{self.level}: {self.num_nodes} nodes, {self.num_elements} elements, "
            f"h = {self.h:.6g}"
        )

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def num_elements(self) -> int:
        return self.elements.shape[0]

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.num_nodes, dtype=bool)
        mask[self.boundary_nodes] = True
        return _readonly(mask)

    @cached_property
    def interior_mask(self) -> np.ndarray:
        return _readonly(~self.boundary_mask)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.elements]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return _readonly(0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]))

    @property
    def areas(self) -> np.ndarray:
        return self.signed_areas

    @cached_property
    def basis_gradients(self) -> np.ndarray:
        """(M, 3, 2) constant gradients of the three local hat functions."""
        p = self.nodes[self.elements]
        x, y = p[..., 0], p[..., 1]
        twice_area = 2.0 * self.signed_areas
        grads = np.empty((self.num_elements, 3, 2))
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            grads[:, i, 0] = (y[:, j] - y[:, k]) / twice_area
            grads[:, i, 1] = (x[:, k] - x[:, j]) / twice_area
        return _readonly(grads)


def _diameters(nodes: np.ndarray, elements: np.ndarray) -> np.ndarray:
    p = nodes[elements]
    edge_lengths = np.stack([
        np.linalg.norm(p[:, 1] - p[:, 0], axis=1),
        np.linalg.norm(p[:, 2] - p[:, 1], axis=1),
        np.linalg.norm(p[:, 0] - p[:, 2], axis=1),
    ], axis=1)
    return edge_lengths.max(axis=1)


def _red_refine(
    nodes: np.ndarray,
    elements: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split every triangle into four; returns (nodes, elements, parent_edges)."""
    num_elements = elements.shape[0]
    edges = np.vstack([elements[:, [0, 1]], elements[:, [1, 2]], elements[:, [2, 0]]])
    edges = np.sort(edges, axis=1)
    unique_edges, inverse = np.unique(edges, axis=0, return_inverse=True)
    midpoint = (nodes.shape[0] + np.asarray(inverse).ravel()).reshape(3, num_elements)

    new_nodes = np.vstack([
        nodes,
        0.5 * (nodes[unique_edges[:, 0]] + nodes[unique_edges[:, 1]]),
    ])

    a, b, c = elements[:, 0], elements[:, 1], elements[:, 2]
    m_ab, m_bc, m_ca = midpoint
    new_elements = np.vstack([
        np.column_stack([a, m_ab, m_ca]),
        np.column_stack([m_ab, b, m_bc]),
        np.column_stack([m_ca, m_bc, c]),
        np.column_stack([m_ab, m_bc, m_ca]),
    ])
    return new_nodes, new_elements, unique_edges


@lru_cache(maxsize=None)
def build_mesh(level: int) -> Triangulation:
    """
    Build T_level by red refinement of the two-triangle coarse mesh.

    Meshes are cached; a Triangulation and all its arrays are read-only.

    Raises:
        ValidationError: If level is outside [0, 12]
    """
    validate_level(level, 0, MAX_LEVEL)

    nodes, elements = _COARSE_NODES.copy(), _COARSE_ELEMENTS.copy()
    parent_edges = np.empty((0, 2), dtype=np.int64)
    for _ in range(level):
        nodes, elements, parent_edges = _red_refine(nodes, elements)

    x, y = nodes[:, 0], nodes[:, 1]
    boundary = np.flatnonzero((x == 0.0) | (x == 1.0) | (y == 0.0) | (y == 1.0))
    diameters = _diameters(nodes, elements)

    mesh = Triangulation(
        level=level,
        nodes=_readonly(nodes),
        elements=_readonly(elements.astype(np.int64)),
        boundary_nodes=_readonly(boundary),
        h=float(diameters.max()),
        h_min=float(diameters.min()),
        parent_edges=_readonly(parent_edges.astype(np.int64)),
    )
    logger.debug(f"Built mesh {mesh}")
    return mesh


def check_nodal(mesh: Triangulation, values: np.ndarray) -> np.ndarray:
    """Return values as a float array, raising MeshError on a length mismatch."""
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.num_nodes,):
        raise MeshError(
            f"Nodal function has shape {values.shape}, mesh T_{mesh.level} "
            f"has {mesh.num_nodes} nodes"
        )
    return values


def check_elementwise(mesh: Triangulation, values: np.ndarray) -> np.ndarray:
    """Return values as a float array of length M (r = 1) or shape (M, 2) (r = 2)."""
    values = np.asarray(values, dtype=float)
    if values.shape[:1] != (mesh.num_elements,) or values.ndim > 2:
        raise MeshError(
            f"Element field has shape {values.shape}, mesh T_{mesh.level} "
            f"has {mesh.num_elements} elements"
        )
    return values


def prolongate(coarse_values: np.ndarray, coarse_level: int, fine_level: int) -> np.ndarray:
    """
    Evaluate a piecewise affine function on T_coarse at the nodes of T_fine.

    Args:
        coarse_values: Nodal values on T_coarse_level
        coarse_level: Level of the given function
        fine_level: Target level (>= coarse_level)

    Returns:
        Nodal values on T_fine_level

    Raises:
        MeshError: If fine_level < coarse_level or the values do not match
    """
    if fine_level < coarse_level:
        raise MeshError(
            f"Cannot prolongate from level {coarse_level} to coarser level {fine_level}"
        )
    values = check_nodal(build_mesh(coarse_level), coarse_values).copy()

    for level in range(coarse_level + 1, fine_level + 1):
        mesh = build_mesh(level)
        parents = mesh.parent_edges
        values = np.concatenate([
            values,
            0.5 * (values[parents[:, 0]] + values[parents[:, 1]]),
        ])
    return values


def dump_mesh(mesh: Triangulation, stream: TextIO) -> None:
    """Write one `x y` line per node followed by one `i j k` line per element."""
    for x, y in mesh.nodes:
        stream.write(f"{float(x)!r} {float(y)!r}\n")
    for i, j, k in mesh.elements:
        stream.write(f"{i} {j} {k}\n")
