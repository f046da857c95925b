"""
Step-size policies for the generalized ADMM.

FixedPolicy      tau_j = tau for all j (plain ADMM).
VariablePolicy   contraction-driven decrease of tau with restarts that relax
                 the contraction target gamma (Variable-ADMM).
FastPolicy       fixed tau with Nesterov-type extrapolation of (u, lam) and a
                 residual-based restart (Fast-ADMM).

Each policy turns the outcome of iteration j into a Transition: the pair the
next subproblems consume, the residual stored for the next contraction test,
and the trace event.
"""
import abc
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np

from apps.core.validators import (
    validate_contraction_bounds,
    validate_fraction,
    validate_positive,
    validate_step_bounds,
)

logger = logging.getLogger(__name__)

EVENT_NONE = 'none'
EVENT_TAU_DECREASED = 'tau-decreased'
EVENT_RESTARTED = 'restarted'
EVENT_GAMMA_INCREASED = 'gamma-increased'
EVENT_FAST_RESTARTED = 'fast-restarted'

ACTION_KEEP = 'keep'
ACTION_DECREASE = 'tau-decreased'
ACTION_RESTART = 'restart'
ACTION_RELAX = 'gamma-increased'

# Logarithms of ratios of exact powers land a few ulps off an integer.
LOG_ROUNDING_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class Transition:
    """Outcome of step (7) of an iteration."""
    event: str
    u_next: np.ndarray
    lam_next: np.ndarray
    u_current: np.ndarray
    lam_current: np.ndarray
    stored_residual: float


class StepPolicy(abc.ABC):
    """Base class; run() calls reset() once and after_iteration() per kept iteration."""

    name = 'abstract'

    def __init__(self):
        self.tau = None
        self.gamma = None
        self.n_tau = 0
        self.n_gamma = 0
        self.n_re = 0

    @abc.abstractmethod
    def reset(self) -> None:
        ...

    @abc.abstractmethod
    def after_iteration(self, state, residual_prev: float, init: Tuple[np.ndarray, np.ndarray],
                        previous: Tuple[np.ndarray, np.ndarray]) -> Transition:
        """
        Args:
            state: AdmmState of the finished iteration j
            residual_prev: Stored residual R_{j-1}
            init: (u^0, lam^0)
            previous: Previous outputs (u^{j-1}, lam^{j-1})
        """

    def _keep(self, state, event: str = EVENT_NONE) -> Transition:
        return Transition(event, state.u, state.lam, state.u, state.lam, state.R)


class FixedPolicy(StepPolicy):
    name = 'admm'

    def __init__(self, tau: float):
        super().__init__()
        validate_positive(tau, 'tau')
        self.tau_fixed = float(tau)
        self.reset()

    def reset(self) -> None:
        self.tau = self.tau_fixed

    def after_iteration(self, state, residual_prev, init, previous) -> Transition:
        return self._keep(state)


def variable_policy_update(
    tau: float,
    gamma: float,
    residual: float,
    residual_prev: float,
    tau_min: float,
    tau_max: float,
    delta: float,
    gamma_max: float,
) -> Tuple[float, float, str]:
    """
    Step (7) of the Variable-ADMM.

    Returns:
        (tau_next, gamma_next, action) with action one of
        'keep'             contraction R_j <= gamma_j R_{j-1} holds, or tau and
                           gamma are both at their limits
        'tau-decreased'    tau_next = max(delta tau_j, tau_min)
        'restart'          tau_next = tau_max, gamma_next = min((gamma_j + 1)/2, gamma_max)
        'gamma-increased'  as 'restart' when tau_min == tau_max; the caller keeps
                           the iterates since a restart would repeat them
    """
    at_tau_min = tau <= tau_min
    if residual <= gamma * residual_prev or (at_tau_min and gamma >= gamma_max):
        return tau, gamma, ACTION_KEEP
    if not at_tau_min:
        return max(delta * tau, tau_min), gamma, ACTION_DECREASE

    gamma_next = min(0.5 * (gamma + 1.0), gamma_max)
    if tau_max <= tau_min:
        return tau_max, gamma_next, ACTION_RELAX
    return tau_max, gamma_next, ACTION_RESTART


class VariablePolicy(StepPolicy):
    """
    Contraction-adaptive step sizes.

    n_tau counts tau-adjustments since the last restart, n_gamma counts all
    gamma-adjustments (the number of restarts when tau_max > tau_min).
    """
    name = 'variable'

    def __init__(self, tau_max: float, tau_min: float = 1.0, delta: float = 0.5,
                 gamma_min: float = 0.5, gamma_max: float = 0.999,
                 r_bar: float = 1e30):
        super().__init__()
        validate_step_bounds(tau_min, tau_max)
        validate_fraction(delta, 'delta')
        validate_contraction_bounds(gamma_min, gamma_max)
        validate_positive(r_bar, 'r_bar')
        self.tau_max = float(tau_max)
        self.tau_min = float(tau_min)
        self.delta = float(delta)
        self.gamma_min = float(gamma_min)
        self.gamma_max = float(gamma_max)
        self.r_bar = float(r_bar)
        self.reset()

    def reset(self) -> None:
        self.tau = self.tau_max
        self.gamma = self.gamma_min
        self.n_tau = 0
        self.n_gamma = 0

    def after_iteration(self, state, residual_prev, init, previous) -> Transition:
        tau_next, gamma_next, action = variable_policy_update(
            self.tau, self.gamma, state.R, residual_prev,
            self.tau_min, self.tau_max, self.delta, self.gamma_max,
        )
        self.tau, self.gamma = tau_next, gamma_next

        if action == ACTION_KEEP:
            return self._keep(state)
        if action == ACTION_DECREASE:
            self.n_tau += 1
            logger.debug(f"j={state.j}: tau decreased to {tau_next:.6g}")
            return self._keep(state, EVENT_TAU_DECREASED)

        self.n_gamma += 1
        if action == ACTION_RELAX:
            logger.debug(f"j={state.j}: gamma relaxed to {gamma_next:.6g}")
            return self._keep(state, EVENT_GAMMA_INCREASED)

        self.n_tau = 0
        logger.debug(
            f"j={state.j}: restart with tau={tau_next:.6g}, gamma={gamma_next:.6g}"
        )
        u0, lam0 = init
        return Transition(EVENT_RESTARTED, u0, lam0, u0, lam0, self.r_bar)


class FastUpdate(NamedTuple):
    theta: float
    u_hat: np.ndarray
    lam_hat: np.ndarray
    restarted: bool
    stored_residual: float


def next_theta(theta_prev: float) -> float:
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta_prev ** 2))


def fast_policy_update(
    theta_prev: float,
    gamma: float,
    u: np.ndarray,
    u_prev: np.ndarray,
    lam: np.ndarray,
    lam_prev: np.ndarray,
    residual: float,
    residual_prev: float,
) -> FastUpdate:
    """
    Step (7) of the Fast-ADMM.

    If R_j < gamma R_{j-1} the momentum parameter advances and (u, lam) are
    extrapolated along the last step; otherwise the extrapolation restarts
    from (u^{j-1}, lam^{j-1}) with theta = 1 and the stored residual becomes
    R_{j-1} / gamma.
    """
    if residual < gamma * residual_prev:
        theta = next_theta(theta_prev)
        weight = (theta_prev - 1.0) / theta
        return FastUpdate(
            theta,
            u + weight * (u - u_prev),
            lam + weight * (lam - lam_prev),
            False,
            residual,
        )
    return FastUpdate(1.0, u_prev, lam_prev, True, residual_prev / gamma)


class FastPolicy(StepPolicy):
    name = 'fast'

    def __init__(self, tau: float, gamma: float = 0.999):
        super().__init__()
        validate_positive(tau, 'tau')
        validate_fraction(gamma, 'gamma')
        self.tau_fixed = float(tau)
        self.gamma_fixed = float(gamma)
        self.reset()

    def reset(self) -> None:
        self.tau = self.tau_fixed
        self.gamma = self.gamma_fixed
        self.theta = 1.0
        self.n_re = 0

    def after_iteration(self, state, residual_prev, init, previous) -> Transition:
        u_prev, lam_prev = previous
        update = fast_policy_update(
            self.theta, self.gamma, state.u, u_prev, state.lam, lam_prev,
            state.R, residual_prev,
        )
        self.theta = update.theta
        event = EVENT_NONE
        if update.restarted:
            self.n_re += 1
            event = EVENT_FAST_RESTARTED
            logger.debug(f"j={state.j}: extrapolation restarted")
        return Transition(
            event, update.u_hat, update.lam_hat, state.u, state.lam, update.stored_residual,
        )


class RestartBounds(NamedTuple):
    max_restarts: int
    min_iters_between: int
    max_iters_between: Optional[int]


def _ceil(value: float) -> int:
    return int(math.ceil(value - LOG_ROUNDING_SLACK))


def restart_bounds(
    gamma_min: float,
    gamma_max: float,
    delta: float,
    tau_min: float,
    tau_max: float,
    eps_stop: Optional[float] = None,
    residual_first: Optional[float] = None,
) -> RestartBounds:
    """
    A priori bounds on the restarts of the Variable-ADMM.

    max_restarts       ceil(log((gamma_min - 1)/(gamma_max - 1)) / log 2)
    min_iters_between  ceil(log(tau_min/tau_max) / log delta)
    max_iters_between  min_iters_between + floor(log(eps_stop/R_1) / log gamma_max);
                       gamma_max is the slowest contraction between restarts.
                       None when eps_stop or R_1 is not given.
    """
    validate_contraction_bounds(gamma_min, gamma_max)
    validate_fraction(delta, 'delta')
    validate_step_bounds(tau_min, tau_max)

    max_restarts = max(_ceil(math.log((gamma_min - 1.0) / (gamma_max - 1.0)) / math.log(2.0)), 0)
    min_between = max(_ceil(math.log(tau_min / tau_max) / math.log(delta)), 0)

    max_between = None
    if eps_stop is not None and residual_first is not None:
        validate_positive(eps_stop, 'eps_stop')
        validate_positive(residual_first, 'residual_first')
        decay = math.floor(
            math.log(eps_stop / residual_first) / math.log(gamma_max) + LOG_ROUNDING_SLACK
        )
        max_between = min_between + max(decay, 0)
    return RestartBounds(max_restarts, min_between, max_between)
