"""
The generalized ADMM iteration.

Given a SplittingProblem, a StepPolicy and a StopRule, run() performs

    (2) p^j   = argmin_p L_tau(u_hat, p; lam_hat)
    (3) u^j   = argmin_u L_tau(u, p^j; lam_hat)
    (4) lam^j = lam_hat + tau_j (B u^j - p^j)
    (5) R_j   = (||lam^j - lam_hat||_Y^2 + tau_j^2 ||B(u^j - u_hat)||_Y^2)^(1/2)
    (6) stop test
    (7) step-size update by the policy

where (u_hat, lam_hat) is the pair handed over by the policy: the previous
iterate, the initial pair after a restart, or an extrapolated pair.
"""
import logging
import math
import time
from typing import Callable, Optional, Tuple

import numpy as np

from apps.core.exceptions import RunAborted, SolverError

from .policies import EVENT_NONE, StepPolicy
from .problem import SplittingProblem
from .reports import TERMINATED_BY_CAP, TERMINATED_BY_ERROR, RunReport, TraceRecord
from .state import AdmmState
from .stopping import StopRule

logger = logging.getLogger(__name__)

DEFAULT_R_BAR = 1e30

Pair = Tuple[np.ndarray, np.ndarray]


def residual(prev: Pair, cur: Pair, tau: float, problem: SplittingProblem) -> Tuple[float, float, float]:
    """
    Residual R of step (5) and its dual and primal parts.

    Returns:
        (R, ||lam - lam_prev||_Y, tau ||B(u - u_prev)||_Y)
    """
    u_prev, lam_prev = prev
    u, lam = cur
    dual = problem.norm_y(lam - lam_prev)
    primal = tau * problem.norm_y(problem.apply_b(u - u_prev))
    return math.hypot(dual, primal), dual, primal


def distance_to_saddle(state, ref: Pair, problem: SplittingProblem, tau: Optional[float] = None) -> float:
    """D_j = (||lam - lam^j||_Y^2 + tau^2 ||B(u - u^j)||_Y^2)^(1/2) for a saddle point (u, lam)."""
    if tau is None:
        tau = state.tau
    u_ref, lam_ref = ref
    return math.hypot(
        problem.norm_y(lam_ref - state.lam),
        tau * problem.norm_y(problem.apply_b(u_ref - state.u)),
    )


def _initial_pair(problem: SplittingProblem, init: Optional[Pair]) -> Pair:
    if init is None:
        return problem.zero_primal(), problem.zero_dual()
    u0, lam0 = init
    return np.array(u0, dtype=float), np.array(lam0, dtype=float)


def run(
    problem: SplittingProblem,
    policy: StepPolicy,
    stop: StopRule,
    init: Optional[Pair] = None,
    r_bar: float = DEFAULT_R_BAR,
    callback: Optional[Callable[[AdmmState], None]] = None,
) -> RunReport:
    """
    Run the ADMM until the stop rule holds or stop.max_iter iterations are done.

    Args:
        problem: Splitting problem providing the subproblem solvers and norms
        policy: Step-size policy; it is reset before the first iteration
        stop: Stopping rule and iteration cap
        init: (u^0, lam^0), default (0, 0)
        r_bar: Stored residual before the first iteration and after a restart
        callback: Called with the state of every iteration before the stop test

    Returns:
        RunReport with one trace record per iteration

    Raises:
        RunAborted: If a subproblem solver fails; carries the partial report
    """
    policy.reset()
    report = RunReport(policy=policy.name)
    u0, lam0 = _initial_pair(problem, init)
    u_hat, lam_hat = u0, lam0
    u_out, lam_out = u0, lam0
    stored_residual = r_bar
    started = time.perf_counter()

    logger.info(
        f"Starting {policy.name} on {problem.name}: tau={policy.tau:.6g}, "
        f"stop={stop.kind.value}, eps={stop.epsilon:.3g}, max_iter={stop.max_iter}"
    )

    try:
        for j in range(1, stop.max_iter + 1):
            tau, gamma = policy.tau, policy.gamma

            p = problem.solve_p(u_hat, lam_hat, tau)
            u = problem.solve_u(p, lam_hat, tau, guess=u_out)
            lam = lam_hat + tau * (problem.apply_b(u) - p)

            R, dual, primal = residual((u_hat, lam_hat), (u, lam), tau, problem)
            state = AdmmState(
                j=j, u=u, u_prev=u_hat, p=p, lam=lam, lam_prev=lam_hat,
                tau=tau, gamma=gamma, R=R, R_dual=dual, R_primal=primal,
            )
            c0 = problem.c0_bound(state) if stop.needs_c0 else None
            report.final_state = state
            if callback is not None:
                callback(state)
            logger.debug(f"j={j}: tau={tau:.6g}, R={R:.6e} (dual {dual:.3e}, primal {primal:.3e})")

            if stop.is_met(state, problem, c0):
                report.trace.append(TraceRecord(j, tau, gamma, R, dual, primal, EVENT_NONE, c0))
                report.terminated_by = stop.kind.value
                break

            transition = policy.after_iteration(state, stored_residual, (u0, lam0), (u_out, lam_out))
            report.trace.append(TraceRecord(j, tau, gamma, R, dual, primal, transition.event, c0))
            u_out, lam_out = transition.u_current, transition.lam_current
            u_hat, lam_hat = transition.u_next, transition.lam_next
            stored_residual = transition.stored_residual
        else:
            report.terminated_by = TERMINATED_BY_CAP
    except SolverError as exc:
        report.terminated_by = TERMINATED_BY_ERROR
        report.error = str(exc)
        _finish(report, policy, started)
        logger.error(f"{policy.name} on {problem.name} aborted after {report.N} iterations: {exc}")
        raise RunAborted(f"Subproblem solver failed in iteration {report.N + 1}: {exc}", report) from exc

    _finish(report, policy, started)
    level = logging.WARNING if report.hit_cap else logging.INFO
    logger.log(level, f"Finished {problem.name}: {report.summary()}")
    return report


def _finish(report: RunReport, policy: StepPolicy, started: float) -> None:
    report.n_tau = policy.n_tau
    report.n_gamma = policy.n_gamma
    report.n_re = policy.n_re
    report.wall_time = time.perf_counter() - started
