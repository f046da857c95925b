import math
from typing import NamedTuple

from django.core.exceptions import ValidationError

from apps.core.validators import validate_positive


class OptimalStep(NamedTuple):
    tau: float
    gamma: float


def optimal_step_size(alpha_g: float, l_g: float, alpha_b: float, c_b: float) -> OptimalStep:
    """
    Step size minimizing the linear contraction factor of ADMM and that factor:

        tau_opt   = (2 alpha_G L_G / (alpha_B^2 c_B^2))^(1/2)
        gamma_opt = 1 / (1 + (2 alpha_G L_G alpha_B^2 / c_B^2)^(1/2))

    Raises:
        ValidationError: If a constant is not positive
    """
    for value, name in ((alpha_g, 'alpha_g'), (l_g, 'l_g'), (alpha_b, 'alpha_b'), (c_b, 'c_b')):
        validate_positive(value, name)
    tau = math.sqrt(2.0 * alpha_g * l_g / (alpha_b ** 2 * c_b ** 2))
    gamma = 1.0 / (1.0 + math.sqrt(2.0 * alpha_g * l_g * alpha_b ** 2 / c_b ** 2))
    return OptimalStep(tau, gamma)


def optimal_step_for(problem) -> OptimalStep:
    """optimal_step_size for a problem whose convexity constants are all known."""
    constants = problem.constants
    if not constants.complete:
        raise ValidationError(f"The {problem.name} problem does not provide L_G, alpha_B and c_B")
    return optimal_step_size(constants.alpha_g, constants.l_g, constants.alpha_b, constants.c_b)
