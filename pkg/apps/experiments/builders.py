"""
Factories turning a RunConfig into problem, policy and stop rule.
"""
import logging
from functools import lru_cache
from typing import Optional

import numpy as np
from django.conf import settings

from apps.admm.policies import FastPolicy, FixedPolicy, StepPolicy, VariablePolicy
from apps.admm.problem import SplittingProblem
from apps.admm.stopping import StopCriterion, StopRule
from apps.fem.mesh import build_mesh
from apps.problems.data import make_rof_data
from apps.problems.obstacle import ObstacleProblem
from apps.problems.rof import RofProblem
from apps.problems.step_size import optimal_step_for

from .config import ADMM, FAST, OBSTACLE, RunConfig, default_epsilon

logger = logging.getLogger(__name__)


def mesh_size(level: int) -> float:
    return build_mesh(level).h


def tau_bar(h: float, m: int) -> float:
    """Initial step size h^-m."""
    return float(h ** -m)


@lru_cache(maxsize=32)
def _cached_problem(name: str, level: int, seed: int, alpha: float, lumped_source: bool,
                    solver_method: str, rel_tol: float, max_iter_factor: int) -> SplittingProblem:
    mesh = build_mesh(level)
    solver = dict(solver_method=solver_method, rel_tol=rel_tol, max_iter_factor=max_iter_factor)
    if name == OBSTACLE:
        return ObstacleProblem(mesh, lumped_source=lumped_source, **solver)
    data = make_rof_data(level, seed)
    return RofProblem(mesh, data.g, alpha=alpha, **solver)


def build_problem(name: str, level: int, seed: Optional[int] = None) -> SplittingProblem:
    """
    Problem instance for the experiments; instances are shared between runs
    so that factorized u-step systems are reused.
    """
    if name == OBSTACLE:
        seed = 0
    elif seed is None:
        seed = settings.ADMM_DEFAULT_SEED
    return _cached_problem(
        name, level, int(seed), float(settings.ADMM_ROF_ALPHA), bool(settings.ADMM_LUMPED_SOURCE),
        settings.ADMM_SOLVER_METHOD, float(settings.ADMM_CG_REL_TOL), int(settings.ADMM_CG_MAX_ITER_FACTOR),
    )


def initial_step(config: RunConfig, problem: SplittingProblem) -> float:
    if config.tau_opt:
        return optimal_step_for(problem).tau
    return tau_bar(problem.mesh.h, config.tau_exponent)


def build_policy(algorithm: str, tau: float) -> StepPolicy:
    if algorithm == ADMM:
        return FixedPolicy(tau)
    if algorithm == FAST:
        return FastPolicy(tau, gamma=settings.ADMM_FAST_GAMMA)
    return VariablePolicy(
        tau_max=tau,
        tau_min=min(settings.ADMM_TAU_MIN, tau),
        delta=settings.ADMM_DELTA,
        gamma_min=settings.ADMM_GAMMA_MIN,
        gamma_max=settings.ADMM_GAMMA_MAX,
        r_bar=settings.ADMM_R_BAR,
    )


def build_stop_rule(config: RunConfig, h: float, reference: Optional[np.ndarray] = None) -> StopRule:
    epsilon = config.epsilon
    if epsilon is None:
        epsilon = default_epsilon(config.problem, config.stop, h)
    return StopRule(StopCriterion(config.stop), epsilon, config.max_iter, reference)
