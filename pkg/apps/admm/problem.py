"""
Abstract description of a splitting problem

    inf_u  F(Bu) + G(u)

over Hilbert spaces X (primal) and Y (multipliers), solved by ADMM on the
augmented Lagrangian

    L_tau(u, p; lam) = F(p) + G(u) + (lam, Bu - p)_Y + tau/2 ||Bu - p||_Y^2.
"""
import abc
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class ConvexityConstants:
    """
    Strong convexity and Lipschitz data of a problem.

    alpha_g is the coercivity constant of G in X (rho_G(v, w) = alpha_g ||v - w||_X^2),
    l_g the Lipschitz constant of grad G, alpha_b and c_b the lower and upper
    bounds of B. Constants that are not known for a problem are None.
    """
    alpha_g: float
    l_g: Optional[float] = None
    alpha_b: Optional[float] = None
    c_b: Optional[float] = None

    @property
    def complete(self) -> bool:
        return None not in (self.l_g, self.alpha_b, self.c_b)


class SplittingProblem(abc.ABC):
    """Interface consumed by apps.admm.solver.run."""

    name = 'abstract'

    @property
    @abc.abstractmethod
    def constants(self) -> ConvexityConstants:
        ...

    @abc.abstractmethod
    def zero_primal(self) -> np.ndarray:
        """Zero element of X."""

    @abc.abstractmethod
    def zero_dual(self) -> np.ndarray:
        """Zero element of Y."""

    @abc.abstractmethod
    def apply_b(self, u: np.ndarray) -> np.ndarray:
        ...

    @abc.abstractmethod
    def inner_x(self, v: np.ndarray, w: np.ndarray) -> float:
        ...

    @abc.abstractmethod
    def inner_y(self, p: np.ndarray, q: np.ndarray) -> float:
        ...

    def norm_x(self, v: np.ndarray) -> float:
        return math.sqrt(max(self.inner_x(v, v), 0.0))

    def norm_y(self, p: np.ndarray) -> float:
        return math.sqrt(max(self.inner_y(p, p), 0.0))

    @abc.abstractmethod
    def solve_p(self, u_prev: np.ndarray, lam_prev: np.ndarray, tau: float) -> np.ndarray:
        """Minimizer of p -> L_tau(u_prev, p; lam_prev)."""

    @abc.abstractmethod
    def solve_u(self, p: np.ndarray, lam_prev: np.ndarray, tau: float,
                guess: Optional[np.ndarray] = None) -> np.ndarray:
        """Minimizer of u -> L_tau(u, p; lam_prev); guess may warm start a solver."""

    @abc.abstractmethod
    def c0_bound(self, state) -> float:
        """Computable surrogate C0~ for the constant of the residual error bound."""

    @abc.abstractmethod
    def energy(self, u: np.ndarray) -> float:
        """I(u) = F(Bu) + G(u)."""

    def rho_g(self, v: np.ndarray, w: np.ndarray) -> float:
        """Symmetrized coercivity functional 2 alpha_G ||v - w||_X^2."""
        return 2.0 * self.constants.alpha_g * self.norm_x(v - w) ** 2

    def error(self, u_ref: np.ndarray, u: np.ndarray) -> float:
        """E = rho_G(u_ref, u)^(1/2)."""
        return math.sqrt(self.rho_g(u_ref, u))
