"""
Configuration of a single experiment run.
"""
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

from django.conf import settings
from django.core.exceptions import ValidationError

from apps.admm.stopping import StopCriterion
from apps.core.validators import (
    validate_level,
    validate_max_iter,
    validate_positive,
    validate_tau_exponent,
)

OBSTACLE = 'obstacle'
ROF = 'rof'
PROBLEMS = (OBSTACLE, ROF)

ADMM = 'admm'
FAST = 'fast'
VARIABLE = 'variable'
ALGORITHMS = (ADMM, FAST, VARIABLE)

STOP_CHOICES = tuple(criterion.value for criterion in StopCriterion)

MIN_LEVEL = {OBSTACLE: 1, ROF: 3}
MAX_EXPERIMENT_LEVEL = 9


@dataclass(frozen=True)
class RunConfig:
    """
    Attributes:
        problem: 'obstacle' or 'rof'
        level: Refinement level of the mesh
        tau_exponent: m in tau_bar = h^-m, None for a run at tau_opt
        algorithm: 'admm', 'fast' or 'variable'
        stop: Stop criterion id
        epsilon: Tolerance; None selects the problem default
        seed: Noise seed of the ROF datum
        max_iter: Iteration cap; None selects the problem default
        output: Trace CSV path
        tau_opt: Run at the optimized step size instead of h^-m
    """
    problem: str
    level: int
    tau_exponent: Optional[int] = 1
    algorithm: str = ADMM
    stop: str = StopCriterion.RESIDUAL.value
    epsilon: Optional[float] = None
    seed: Optional[int] = None
    max_iter: Optional[int] = None
    output: Optional[Path] = None
    tau_opt: bool = False

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValidationError(f"Unknown problem {self.problem!r}, expected one of {PROBLEMS}")
        if self.algorithm not in ALGORITHMS:
            raise ValidationError(
                f"Unknown algorithm {self.algorithm!r}, expected one of {ALGORITHMS}"
            )
        if self.stop not in STOP_CHOICES:
            raise ValidationError(f"Unknown stop criterion {self.stop!r}")
        validate_level(self.level, MIN_LEVEL[self.problem], MAX_EXPERIMENT_LEVEL)
        if self.tau_opt:
            object.__setattr__(self, 'tau_exponent', None)
        else:
            validate_tau_exponent(self.tau_exponent)
        if self.epsilon is not None:
            validate_positive(self.epsilon, 'epsilon')
        if self.max_iter is None:
            object.__setattr__(self, 'max_iter', default_max_iter(self.problem))
        validate_max_iter(self.max_iter)
        if self.seed is None:
            object.__setattr__(self, 'seed', settings.ADMM_DEFAULT_SEED)
        if self.output is not None:
            object.__setattr__(self, 'output', Path(self.output))

    @property
    def m_label(self) -> str:
        return 'opt' if self.tau_opt else str(self.tau_exponent)

    def to_dict(self) -> dict:
        data = asdict(self)
        data['output'] = None if self.output is None else str(self.output)
        return data


def default_max_iter(problem: str) -> int:
    if problem == OBSTACLE:
        return settings.ADMM_OBSTACLE_MAX_ITER
    return settings.ADMM_ROF_MAX_ITER


def default_epsilon(problem: str, stop: str, h: float) -> float:
    """
    ref-error: 1e-3 (obstacle), 1e-2 (ROF); residual-type criteria: h^2
    (obstacle), h (ROF).
    """
    if stop == StopCriterion.REF_ERROR.value:
        return 1e-3 if problem == OBSTACLE else 1e-2
    return h ** 2 if problem == OBSTACLE else h


def error_scale(problem: str, h: float) -> float:
    """Mesh-size scale of the error: E_h/h (obstacle), E_h/sqrt(h) (ROF)."""
    return h if problem == OBSTACLE else h ** 0.5
