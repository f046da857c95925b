"""
Stopping rules of the ADMM loop.
"""
import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np
from django.core.exceptions import ValidationError

from apps.core.validators import validate_max_iter, validate_positive


class StopCriterion(str, enum.Enum):
    REF_ERROR = 'ref-error'
    RESIDUAL = 'residual'
    DUAL_ONLY = 'dual-only'
    PRIMAL_ONLY = 'primal-only'


@dataclass(frozen=True, eq=False)
class StopRule:
    """
    Termination test plus the iteration cap.

    ref-error     rho_G(u_ref, u^j)^(1/2) <= eps
    residual      R_j <= eps / C0~
    dual-only     ||lam^j - lam^(j-1)||_Y <= eps / C0~
    primal-only   tau_j ||B(u^j - u^(j-1))||_Y <= eps / C0~
    """
    kind: StopCriterion
    epsilon: float
    max_iter: int
    reference: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, 'kind', StopCriterion(self.kind))
        validate_positive(self.epsilon, 'epsilon')
        validate_max_iter(self.max_iter)
        if self.kind is StopCriterion.REF_ERROR and self.reference is None:
            raise ValidationError("The ref-error criterion needs a reference solution")

    @classmethod
    def ref_error(cls, reference: np.ndarray, epsilon: float, max_iter: int) -> 'StopRule':
        return cls(StopCriterion.REF_ERROR, epsilon, max_iter, reference)

    @classmethod
    def residual(cls, epsilon: float, max_iter: int) -> 'StopRule':
        return cls(StopCriterion.RESIDUAL, epsilon, max_iter)

    @classmethod
    def dual_only(cls, epsilon: float, max_iter: int) -> 'StopRule':
        return cls(StopCriterion.DUAL_ONLY, epsilon, max_iter)

    @classmethod
    def primal_only(cls, epsilon: float, max_iter: int) -> 'StopRule':
        return cls(StopCriterion.PRIMAL_ONLY, epsilon, max_iter)

    @property
    def needs_c0(self) -> bool:
        return self.kind is not StopCriterion.REF_ERROR

    def measure(self, state, problem) -> float:
        """Quantity compared against the threshold."""
        if self.kind is StopCriterion.REF_ERROR:
            return problem.error(self.reference, state.u)
        if self.kind is StopCriterion.RESIDUAL:
            return state.R
        if self.kind is StopCriterion.DUAL_ONLY:
            return state.R_dual
        return state.R_primal

    def threshold(self, c0: float) -> float:
        if self.kind is StopCriterion.REF_ERROR:
            return self.epsilon
        return self.epsilon / c0

    def is_met(self, state, problem, c0: float) -> bool:
        return self.measure(state, problem) <= self.threshold(c0)
