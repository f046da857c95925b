"""
Celery tasks for table cells and reference solutions.
"""
import logging
from typing import Optional

from celery import shared_task

from apps.experiments.config import RunConfig
from apps.experiments.references import get_reference, reference_path
from apps.experiments.runs import run_cell

logger = logging.getLogger(__name__)


@shared_task
def run_table_cell(config: dict, cache_dir: Optional[str] = None) -> dict:
    """
    Run one table cell.

    Args:
        config: RunConfig.to_dict() of the cell
        cache_dir: Reference cache directory, default ADMM_CACHE_DIR

    Returns:
        Cell summary (see apps.experiments.runs.RunOutcome.as_dict)
    """
    cell = RunConfig(**config)
    logger.info(
        f"Running cell {cell.problem} l={cell.level} m={cell.m_label} {cell.algorithm}"
    )
    return run_cell(cell, cache_dir)


@shared_task
def compute_reference_task(problem: str, level: int, seed: Optional[int] = None,
                           cache_dir: Optional[str] = None, force: bool = False) -> str:
    """Compute (or load) a reference solution and return its cache path."""
    get_reference(problem, level, seed, cache_dir, force=force)
    return str(reference_path(problem, level, seed, cache_dir))
