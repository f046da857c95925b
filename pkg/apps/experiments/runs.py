"""
Execution of one configured run and its summary line.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from django.conf import settings
from django.core.exceptions import ValidationError

from apps.admm.reports import RunReport
from apps.admm.solver import run
from apps.admm.stopping import StopCriterion
from apps.core.exceptions import AdmmError, RunAborted
from apps.core.utils import format_count, format_real, format_scientific

from .builders import build_policy, build_problem, build_stop_rule, initial_step
from .config import RunConfig, error_scale
from .references import Reference, get_reference

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ['problem', 'level', 'm', 'alg', 'N', 'N_tau', 'N_gamma', 'N_re', 'E_h', 'ratio']


@dataclass(eq=False)
class RunOutcome:
    config: RunConfig
    report: Optional[RunReport]
    tau: Optional[float]
    h: Optional[float]
    error: Optional[float] = None
    failure: Optional[str] = None

    @property
    def hit_cap(self) -> bool:
        return self.report is not None and self.report.hit_cap

    @property
    def ok(self) -> bool:
        return self.failure is None and self.report is not None and self.report.converged

    @property
    def ratio(self) -> Optional[float]:
        if self.error is None:
            return None
        return self.error / error_scale(self.config.problem, self.h)

    def as_dict(self) -> dict:
        """JSON-serializable cell summary; None marks a capped or failed run."""
        report = self.report
        ok = self.ok
        return {
            'problem': self.config.problem,
            'level': self.config.level,
            'm': self.config.m_label,
            'alg': self.config.algorithm,
            'stop': self.config.stop,
            'N': report.N if ok else None,
            'N_tau': report.n_tau if ok else None,
            'N_gamma': report.n_gamma if ok else None,
            'N_re': report.n_re if ok else None,
            'E_h': self.error if ok else None,
            'ratio': self.ratio if ok else None,
            'tau': self.tau,
            'terminated_by': None if report is None else report.terminated_by,
            'failure': self.failure,
        }

    def summary_values(self) -> list:
        data = self.as_dict()
        return [
            data['problem'], str(data['level']), data['m'], data['alg'],
            format_count(data['N']), format_count(data['N_tau']),
            format_count(data['N_gamma']), format_count(data['N_re']),
            format_scientific(data['E_h']), format_real(data['ratio']),
        ]

    def summary_line(self) -> str:
        return ','.join(self.summary_values())


def execute_run(config: RunConfig, cache_dir: Optional[Path] = None,
                with_error: bool = True) -> RunOutcome:
    """
    Run one configuration; the reference is loaded or computed when the stop
    rule or the error E_h needs it.

    Raises:
        ValidationError: For configurations that cannot be built
        AdmmError: If the reference cannot be computed
    """
    problem = build_problem(config.problem, config.level, config.seed)
    h = problem.mesh.h
    tau = initial_step(config, problem)

    reference: Optional[Reference] = None
    if with_error or config.stop == StopCriterion.REF_ERROR.value:
        reference = get_reference(config.problem, config.level, config.seed, cache_dir)

    stop = build_stop_rule(config, h, None if reference is None else reference.u)
    policy = build_policy(config.algorithm, tau)
    outcome = RunOutcome(config, None, tau, h)
    try:
        outcome.report = run(problem, policy, stop, r_bar=settings.ADMM_R_BAR)
    except RunAborted as exc:
        outcome.report = exc.report
        outcome.failure = str(exc)
        _write_trace(config, exc.report)
        return outcome

    if reference is not None:
        outcome.error = problem.error(reference.u, outcome.report.final_state.u)
    _write_trace(config, outcome.report)
    return outcome


def _write_trace(config: RunConfig, report: RunReport) -> None:
    if config.output is None:
        return
    config.output.parent.mkdir(parents=True, exist_ok=True)
    report.to_csv(config.output)
    logger.info(f"Wrote trace of {report.N} iterations to {config.output}")


def run_cell(config: RunConfig, cache_dir: Optional[Path] = None) -> dict:
    """Table cell: like execute_run, but failures become hyphen cells."""
    try:
        outcome = execute_run(config, cache_dir)
    except (AdmmError, ValidationError) as exc:
        logger.error(
            f"Cell {config.problem} l={config.level} m={config.m_label} "
            f"{config.algorithm} failed: {exc}"
        )
        outcome = RunOutcome(config, None, None, None, failure=str(exc))
    return outcome.as_dict()
