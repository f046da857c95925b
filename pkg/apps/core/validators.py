"""
Parameter validators for meshes, step-size policies and stopping rules.
"""
import math
import numbers

from django.core.exceptions import ValidationError

MAX_LEVEL = 12


def validate_level(level: int, min_level: int = 0, max_level: int = MAX_LEVEL) -> None:
    """
    Validate a refinement level.

    Raises:
        ValidationError: If level is not an integer in [min_level, max_level]
    """
    if isinstance(level, bool) or not isinstance(level, numbers.Integral):
        raise ValidationError(f"Refinement level must be an integer, got {level!r}")
    if level < min_level or level > max_level:
        raise ValidationError(
            f"Refinement level must lie in [{min_level}, {max_level}], got {level}"
        )


def validate_tau_exponent(m: int) -> None:
    """Step-size exponents m select tau_bar = h^-m with m in {0, 1, 2, 3}."""
    if m not in (0, 1, 2, 3):
        raise ValidationError(f"Step-size exponent must be one of 0, 1, 2, 3, got {m}")


def validate_positive(value: float, name: str) -> None:
    if not (isinstance(value, numbers.Real) and math.isfinite(value) and value > 0):
        raise ValidationError(f"{name} must be a positive number, got {value!r}")


def validate_max_iter(max_iter: int) -> None:
    if isinstance(max_iter, bool) or not isinstance(max_iter, numbers.Integral) or max_iter < 1:
        raise ValidationError(f"max_iter must be an integer >= 1, got {max_iter!r}")


def validate_step_bounds(tau_min: float, tau_max: float) -> None:
    """
    Validate 0 < tau_min <= tau_max.

    Raises:
        ValidationError: If the bounds are not positive or not ordered
    """
    validate_positive(tau_min, 'tau_min')
    validate_positive(tau_max, 'tau_max')
    if tau_min > tau_max:
        raise ValidationError(
            f"tau_min ({tau_min}) must not exceed tau_max ({tau_max})"
        )


def validate_contraction_bounds(gamma_min: float, gamma_max: float) -> None:
    """Validate 0 < gamma_min <= gamma_max < 1."""
    if not 0 < gamma_min <= gamma_max < 1:
        raise ValidationError(
            f"Contraction factors must satisfy 0 < gamma_min <= gamma_max < 1, "
            f"got {gamma_min}, {gamma_max}"
        )


def validate_fraction(value: float, name: str) -> None:
    """Validate value in the open interval (0, 1)."""
    if not 0 < value < 1:
        raise ValidationError(f"{name} must lie in (0, 1), got {value}")
