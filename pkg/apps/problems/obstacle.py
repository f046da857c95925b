"""
Obstacle problem with P1 finite elements.

    minimize  1/2 ||grad u||^2 - (f, u)_h   over u in S^1_0 with u >= chi

split as F(Bu) + G(u) with B the inclusion S^1_0 -> S^1_0, F the indicator
of K = {v >= chi}, X = (S^1_0, (grad., grad.)) and Y = (S^1_0, (., .)_h).
Nodal functions are arrays over all mesh nodes with zero boundary values.
"""
import logging
import math
from typing import Callable, Dict, Optional, Union

import numpy as np
import scipy.sparse as sp
from django.core.exceptions import ValidationError

from apps.admm.problem import ConvexityConstants, SplittingProblem
from apps.core.linalg import DEFAULT_MAX_ITER_FACTOR, DEFAULT_REL_TOL, SpdSystem
from apps.fem.mesh import Triangulation, check_nodal
from apps.fem.spaces import (
    inner_energy,
    inner_lumped,
    interpolate,
    lumped_weights,
    mass_matrix,
    norm_lumped,
    stiffness_matrix,
)

logger = logging.getLogger(__name__)

DEFAULT_SOURCE = -5.0
DEFAULT_OBSTACLE = -0.25

# Poincare constant of the unit square, c_P <= sqrt(2)/pi.
POINCARE_CONSTANT = math.sqrt(2.0) / math.pi

FEASIBILITY_TOL = 1e-12

NodalData = Union[float, np.ndarray, Callable]


def _nodal_data(mesh: Triangulation, data: NodalData) -> np.ndarray:
    if callable(data):
        return interpolate(mesh, data)
    values = np.broadcast_to(np.asarray(data, dtype=float), (mesh.num_nodes,))
    return np.array(values)


def obstacle_constants(h: float) -> ConvexityConstants:
    """alpha_G = 1/2, L_G = 1, alpha_B = h/2 and c_B = 2 c_P."""
    return ConvexityConstants(alpha_g=0.5, l_g=1.0, alpha_b=0.5 * h, c_b=2.0 * POINCARE_CONSTANT)


def obstacle_p_step(u_prev: np.ndarray, lam_prev: np.ndarray, tau: float, chi: np.ndarray,
                    boundary_nodes: np.ndarray) -> np.ndarray:
    """Nodewise projection p = max(chi, u + lam / tau), zero on the boundary."""
    p = np.maximum(chi, u_prev + lam_prev / tau)
    p[boundary_nodes] = 0.0
    return p


class ObstacleProblem(SplittingProblem):
    """
    Args:
        mesh: Triangulation of the unit square
        f: Source term (constant, nodal array or callable f(x, y))
        chi: Obstacle, must be <= 0 on the boundary
        lumped_source: Assemble (f, v) with the lumped product (default) or
            the consistent mass matrix
        solver_method: 'direct' or 'cg' for the u-step systems
        rel_tol: Residual tolerance of the u-step solves
        max_iter_factor: CG iteration cap per unknown
    """
    name = 'obstacle'

    def __init__(
        self,
        mesh: Triangulation,
        f: NodalData = DEFAULT_SOURCE,
        chi: NodalData = DEFAULT_OBSTACLE,
        lumped_source: bool = True,
        solver_method: str = 'direct',
        rel_tol: float = DEFAULT_REL_TOL,
        max_iter_factor: int = DEFAULT_MAX_ITER_FACTOR,
    ):
        self.mesh = mesh
        self.f = _nodal_data(mesh, f)
        self.chi = _nodal_data(mesh, chi)
        if np.any(self.chi[mesh.boundary_nodes] > 0.0):
            raise ValidationError("The obstacle must be non-positive on the boundary")
        self.lumped_source = lumped_source
        self.solver_method = solver_method
        self.rel_tol = rel_tol
        self.max_iter_factor = max_iter_factor

        self.beta = lumped_weights(mesh)
        self.interior_beta = self.beta * mesh.interior_mask
        self.stiffness = stiffness_matrix(mesh)
        self.stiffness_dirichlet = stiffness_matrix(mesh, dirichlet=True)
        if lumped_source:
            self.load = self.beta * self.f
        else:
            self.load = mass_matrix(mesh) @ self.f
        self._constants = obstacle_constants(mesh.h)
        self._systems: Dict[float, SpdSystem] = {}

    def __str__(self):
        return f"ObstacleProblem on {self.mesh}"

    @property
    def constants(self) -> ConvexityConstants:
        return self._constants

    def zero_primal(self) -> np.ndarray:
        return np.zeros(self.mesh.num_nodes)

    def zero_dual(self) -> np.ndarray:
        return np.zeros(self.mesh.num_nodes)

    def apply_b(self, u: np.ndarray) -> np.ndarray:
        return u

    def inner_x(self, v: np.ndarray, w: np.ndarray) -> float:
        return inner_energy(v, w, self.mesh)

    def inner_y(self, p: np.ndarray, q: np.ndarray) -> float:
        return inner_lumped(p, q, self.beta)

    def solve_p(self, u_prev: np.ndarray, lam_prev: np.ndarray, tau: float) -> np.ndarray:
        return obstacle_p_step(u_prev, lam_prev, tau, self.chi, self.mesh.boundary_nodes)

    def system(self, tau: float) -> SpdSystem:
        """A + tau diag(beta) on the interior nodes, identity rows on the boundary."""
        key = float(tau)
        if key not in self._systems:
            matrix = self.stiffness_dirichlet + tau * sp.diags(self.interior_beta)
            self._systems[key] = SpdSystem(
                matrix, method=self.solver_method, rel_tol=self.rel_tol,
                max_iter_factor=self.max_iter_factor,
            )
            logger.debug(f"Assembled obstacle u-step system for tau={key:.6g}")
        return self._systems[key]

    def u_step_rhs(self, p: np.ndarray, lam_prev: np.ndarray, tau: float) -> np.ndarray:
        rhs = self.load + self.beta * (tau * p - lam_prev)
        rhs[self.mesh.boundary_nodes] = 0.0
        return rhs

    def solve_u(self, p: np.ndarray, lam_prev: np.ndarray, tau: float,
                guess: Optional[np.ndarray] = None) -> np.ndarray:
        u = self.system(tau).solve(self.u_step_rhs(p, lam_prev, tau), guess)
        u[self.mesh.boundary_nodes] = 0.0
        return u

    def c0_bound(self, state) -> float:
        """C0~ = max(1, ||lam||_h / tau + ||u||_h)."""
        return max(
            1.0,
            norm_lumped(state.lam, self.beta) / state.tau + norm_lumped(state.u, self.beta),
        )

    def g_value(self, u: np.ndarray) -> float:
        """G(u) = 1/2 ||grad u||^2 - (f, u)."""
        u = check_nodal(self.mesh, u)
        return 0.5 * float(u @ (self.stiffness @ u)) - float(self.load @ u)

    def g_derivative(self, v: np.ndarray, direction: np.ndarray) -> float:
        """G'(v)[direction] = (grad v, grad direction) - (f, direction)."""
        v = check_nodal(self.mesh, v)
        return float(direction @ (self.stiffness @ v)) - float(self.load @ direction)

    def gradient_g(self, v: np.ndarray) -> np.ndarray:
        """Riesz representative of G'(v) in X, i.e. w in S^1_0 with (grad w, grad phi) = G'(v)[phi]."""
        v = check_nodal(self.mesh, v)
        rhs = self.stiffness @ v - self.load
        rhs[self.mesh.boundary_nodes] = 0.0
        return self.system_dirichlet().solve(rhs)

    def system_dirichlet(self) -> SpdSystem:
        return self.system(0.0)

    def is_feasible(self, u: np.ndarray) -> bool:
        return bool(np.all(u >= self.chi - FEASIBILITY_TOL))

    def energy(self, u: np.ndarray) -> float:
        """I(u) = G(u) if u >= chi (up to 1e-12), +inf otherwise."""
        if not self.is_feasible(u):
            return math.inf
        return self.g_value(u)
