"""
Reference solutions (u_ref, lam_ref) and their on-disk cache.

References are computed with fixed-step ADMM and the residual criterion,
tau = h^-1, eps = 1e-9 for the obstacle problem and tau = h^-3/2,
eps = 1e-4 for ROF. A cache file holds a header line

    problem level tau eps seed

followed by one value of u per line and then the multiplier: one value per
line (obstacle) or one `x y` pair per element (ROF). File names carry a
hash of the header values, so a change of parameters never reuses a stale
file.
"""
import logging
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, TextIO, Tuple

import numpy as np
from django.conf import settings
from django.core.exceptions import ValidationError

from apps.admm.policies import FixedPolicy
from apps.admm.reports import RunReport
from apps.admm.solver import run
from apps.admm.stopping import StopRule
from apps.core.exceptions import ReferenceNotConverged
from apps.core.utils import content_hash
from apps.core.validators import validate_level

from .builders import build_problem, mesh_size
from .config import MAX_EXPERIMENT_LEVEL, MIN_LEVEL, OBSTACLE, PROBLEMS

logger = logging.getLogger(__name__)

REFERENCE_EPSILON = {OBSTACLE: 1e-9, 'rof': 1e-4}
REFERENCE_TAU_EXPONENT = {OBSTACLE: 1.0, 'rof': 1.5}


@dataclass(frozen=True, eq=False)
class Reference:
    problem: str
    level: int
    tau: float
    epsilon: float
    seed: int
    u: np.ndarray
    lam: np.ndarray
    report: Optional[RunReport] = None

    @property
    def pair(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.u, self.lam


def reference_parameters(problem: str, level: int) -> Tuple[float, float]:
    """(tau, eps) of the reference run."""
    h = mesh_size(level)
    return float(h ** -REFERENCE_TAU_EXPONENT[problem]), REFERENCE_EPSILON[problem]


def _normalized_seed(problem: str, seed: Optional[int]) -> int:
    if problem == OBSTACLE:
        return 0
    return settings.ADMM_DEFAULT_SEED if seed is None else int(seed)


def _validate(problem: str, level: int) -> None:
    if problem not in PROBLEMS:
        raise ValidationError(f"Unknown problem {problem!r}")
    validate_level(level, MIN_LEVEL[problem], MAX_EXPERIMENT_LEVEL)


def reference_path(problem: str, level: int, seed: Optional[int] = None,
                   cache_dir: Optional[Path] = None) -> Path:
    seed = _normalized_seed(problem, seed)
    tau, epsilon = reference_parameters(problem, level)
    cache_dir = Path(cache_dir or settings.ADMM_CACHE_DIR)
    key = content_hash(problem, level, seed, tau, epsilon)
    return cache_dir / f"{problem}-l{level}-s{seed}-{key}.txt"


def compute_reference(problem: str, level: int, seed: Optional[int] = None,
                      max_iter: Optional[int] = None) -> Reference:
    """
    Run fixed-step ADMM to the reference tolerance.

    Raises:
        ReferenceNotConverged: If the iteration cap is reached first
    """
    _validate(problem, level)
    seed = _normalized_seed(problem, seed)
    tau, epsilon = reference_parameters(problem, level)
    max_iter = max_iter or settings.ADMM_REFERENCE_MAX_ITER

    instance = build_problem(problem, level, seed)
    logger.info(f"Computing {problem} reference on level {level} (tau={tau:.6g}, eps={epsilon:g})")
    report = run(instance, FixedPolicy(tau), StopRule.residual(epsilon, max_iter),
                 r_bar=settings.ADMM_R_BAR)
    if not report.converged:
        raise ReferenceNotConverged(
            f"{problem} reference on level {level} did not reach R <= {epsilon:g}/C0 "
            f"within {max_iter} iterations"
        )
    state = report.final_state
    return Reference(problem, level, tau, epsilon, seed, state.u, state.lam, report)


def write_reference(reference: Reference, stream: TextIO) -> None:
    stream.write(
        f"{reference.problem} {reference.level} {reference.tau!r} "
        f"{reference.epsilon!r} {reference.seed}\n"
    )
    for value in reference.u:
        stream.write(f"{float(value)!r}\n")
    lam = np.asarray(reference.lam)
    if lam.ndim == 1:
        for value in lam:
            stream.write(f"{float(value)!r}\n")
    else:
        for x, y in lam:
            stream.write(f"{float(x)!r} {float(y)!r}\n")


def save_reference(reference: Reference, path: Path) -> Path:
    """Write to a temporary file in the cache directory and move it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix='.tmp-', suffix='.txt')
    try:
        with os.fdopen(fd, 'w') as stream:
            write_reference(reference, stream)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return path


def load_reference(path: Path) -> Reference:
    """
    Read a cache file.

    Raises:
        ValueError: If the file does not match its mesh
    """
    with open(path) as stream:
        problem, level, tau, epsilon, seed = stream.readline().split()
        lines = stream.read().splitlines()

    level = int(level)
    instance = build_problem(problem, level, int(seed))
    num_nodes = instance.mesh.num_nodes
    u = np.array([float(line) for line in lines[:num_nodes]])
    lam_lines = lines[num_nodes:]
    if problem == OBSTACLE:
        lam = np.array([float(line) for line in lam_lines])
        expected = num_nodes
    else:
        lam = np.array([[float(v) for v in line.split()] for line in lam_lines]).reshape(-1, 2)
        expected = instance.mesh.num_elements
    if u.size != num_nodes or lam.shape[0] != expected:
        raise ValueError(f"Reference file {path} does not match the mesh of level {level}")
    return Reference(problem, level, float(tau), float(epsilon), int(seed), u, lam)


def get_reference(problem: str, level: int, seed: Optional[int] = None,
                  cache_dir: Optional[Path] = None, force: bool = False) -> Reference:
    """Load the cached reference or compute and cache it."""
    path = reference_path(problem, level, seed, cache_dir)
    if path.exists() and not force:
        logger.info(f"Reference cache hit: {path}")
        return load_reference(path)
    logger.info(f"Reference cache miss: {path}")
    reference = compute_reference(problem, level, seed)
    save_reference(reference, path)
    return reference
