"""
ROF (TV-L2) denoising with P1 finite elements.

    minimize  int |grad u| + alpha/2 ||u - g||^2   over u in S^1

split with B = grad into Y = ((L^0)^2, (., .)_w) and X = (S^1, L^2 product).
"""
import logging
from typing import Dict, Optional

import numpy as np

from apps.admm.problem import ConvexityConstants, SplittingProblem
from apps.core.linalg import DEFAULT_MAX_ITER_FACTOR, DEFAULT_REL_TOL, SpdSystem
from apps.fem.mesh import Triangulation, check_nodal
from apps.fem.spaces import (
    gradient,
    inner_l2,
    inner_weighted,
    integrate_against_gradients,
    mass_matrix,
    norm_weighted,
    stiffness_matrix,
)

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 20.0

# Lower bound of C0~ for step sizes tau >= 1, as for the obstacle problem;
# 0 keeps the bare two-term maximum.
DEFAULT_C0_FLOOR = 1.0


def shrink(v: np.ndarray, threshold: float) -> np.ndarray:
    """
    Rowwise minimizer of threshold |p| + 1/2 |p - v|^2, i.e.
    max(0, |v| - threshold) v / |v| with 0 for v = 0.
    """
    magnitude = np.linalg.norm(v, axis=1)
    scale = np.zeros_like(magnitude)
    nonzero = magnitude > 0.0
    scale[nonzero] = np.maximum(0.0, magnitude[nonzero] - threshold) / magnitude[nonzero]
    return scale[:, None] * v


def rof_p_step(grad_u: np.ndarray, lam_prev: np.ndarray, tau: float, h: float) -> np.ndarray:
    """Elementwise shrinkage of v = grad u + lam / tau with threshold h^-2 / tau."""
    return shrink(grad_u + lam_prev / tau, h ** -2 / tau)


class RofProblem(SplittingProblem):
    name = 'rof'

    def __init__(
        self,
        mesh: Triangulation,
        g: np.ndarray,
        alpha: float = DEFAULT_ALPHA,
        solver_method: str = 'direct',
        rel_tol: float = DEFAULT_REL_TOL,
        max_iter_factor: int = DEFAULT_MAX_ITER_FACTOR,
        c0_floor: float = DEFAULT_C0_FLOOR,
    ):
        self.mesh = mesh
        self.g = check_nodal(mesh, g).copy()
        self.alpha = float(alpha)
        self.solver_method = solver_method
        self.rel_tol = rel_tol
        self.max_iter_factor = max_iter_factor
        self.c0_floor = float(c0_floor)
        self.h = mesh.h

        self.mass = mass_matrix(mesh)
        self.stiffness = stiffness_matrix(mesh)
        self.fidelity_load = self.alpha * (self.mass @ self.g)
        self._constants = ConvexityConstants(alpha_g=0.5 * self.alpha, l_g=self.alpha)
        self._systems: Dict[float, SpdSystem] = {}

    def __str__(self):
        return f"RofProblem(alpha={self.alpha:g}) on {self.mesh}"

    @property
    def constants(self) -> ConvexityConstants:
        return self._constants

    def zero_primal(self) -> np.ndarray:
        return np.zeros(self.mesh.num_nodes)

    def zero_dual(self) -> np.ndarray:
        return np.zeros((self.mesh.num_elements, 2))

    def apply_b(self, u: np.ndarray) -> np.ndarray:
        return gradient(self.mesh, u)

    def inner_x(self, v: np.ndarray, w: np.ndarray) -> float:
        return inner_l2(v, w, self.mesh)

    def inner_y(self, p: np.ndarray, q: np.ndarray) -> float:
        return inner_weighted(p, q, self.mesh)

    def solve_p(self, u_prev: np.ndarray, lam_prev: np.ndarray, tau: float) -> np.ndarray:
        return rof_p_step(gradient(self.mesh, u_prev), lam_prev, tau, self.h)

    def system(self, tau: float) -> SpdSystem:
        """alpha M + tau h^2 A."""
        key = float(tau)
        if key not in self._systems:
            matrix = self.alpha * self.mass + (tau * self.h ** 2) * self.stiffness
            self._systems[key] = SpdSystem(
                matrix, method=self.solver_method, rel_tol=self.rel_tol,
                max_iter_factor=self.max_iter_factor,
            )
            logger.debug(f"Assembled ROF u-step system for tau={key:.6g}")
        return self._systems[key]

    def u_step_rhs(self, p: np.ndarray, lam_prev: np.ndarray, tau: float) -> np.ndarray:
        return self.fidelity_load + self.h ** 2 * integrate_against_gradients(
            self.mesh, tau * p - lam_prev
        )

    def solve_u(self, p: np.ndarray, lam_prev: np.ndarray, tau: float,
                guess: Optional[np.ndarray] = None) -> np.ndarray:
        return self.system(tau).solve(self.u_step_rhs(p, lam_prev, tau), guess)

    def c0_bound(self, state) -> float:
        """C0~ = max(c0_floor, 1 / (h tau), ||lam||_w / tau + ||grad u||_w)."""
        return max(
            self.c0_floor,
            1.0 / (self.h * state.tau),
            norm_weighted(state.lam, self.mesh) / state.tau
            + norm_weighted(gradient(self.mesh, state.u), self.mesh),
        )

    def total_variation(self, u: np.ndarray) -> float:
        magnitudes = np.linalg.norm(gradient(self.mesh, u), axis=1)
        return float(np.sum(self.mesh.areas * magnitudes))

    def g_value(self, u: np.ndarray) -> float:
        """G(u) = alpha/2 ||u - g||^2."""
        diff = check_nodal(self.mesh, u) - self.g
        return 0.5 * self.alpha * float(diff @ (self.mass @ diff))

    def g_derivative(self, v: np.ndarray, direction: np.ndarray) -> float:
        diff = check_nodal(self.mesh, v) - self.g
        return self.alpha * float(direction @ (self.mass @ diff))

    def energy(self, u: np.ndarray) -> float:
        return self.total_variation(u) + self.g_value(u)
