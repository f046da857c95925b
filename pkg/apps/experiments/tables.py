"""
Iteration tables.

    1  obstacle, ||grad(u_ref - u^j)|| <= 1e-3
    2  obstacle, R_j <= h^2 / C0~, with E_h/h
    3  ROF, sqrt(alpha) ||u_ref - u^j|| <= 1e-2
    4  ROF, R_j <= h / C0~, with E_h/sqrt(h)
    5  single-component criteria: obstacle dual-only at tau = h^-3,
       ROF primal-only at tau = 1, with the error ratios; its cells run up
       to 10^4 iterations for both problems

Tables 1 to 4 have one row per (algorithm, level) and per step size m the
columns N, the annotation (N_re for Fast-ADMM, (N_tau,N_gamma) for
Variable-ADMM) and, for 2 and 4, the error ratio. Table 5 has one row per
(problem, level) and per algorithm the columns N and ratio.
"""
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import pandas as pd
from django.core.exceptions import ValidationError

from apps.admm.stopping import StopCriterion
from apps.core.utils import HYPHEN, format_count, format_pair, format_real

from .config import ALGORITHMS, FAST, OBSTACLE, ROF, VARIABLE, RunConfig

LEVELS = tuple(range(3, 10))
TAU_EXPONENTS = (0, 1, 2, 3)

# Dual-only stopping at tau = h^-3 needs a few thousand iterations on the
# finer obstacle meshes.
SINGLE_COMPONENT_MAX_ITER = 10 ** 4


@dataclass(frozen=True)
class TableBlock:
    """max_iter None selects the problem default of RunConfig."""
    problem: str
    stop: str
    tau_exponents: Tuple[int, ...] = TAU_EXPONENTS
    max_iter: Optional[int] = None


@dataclass(frozen=True)
class TableSpec:
    table_id: int
    blocks: Tuple[TableBlock, ...]
    levels: Tuple[int, ...] = LEVELS
    algorithms: Tuple[str, ...] = ALGORITHMS
    show_ratio: bool = False

    @property
    def by_problem(self) -> bool:
        """Rows keyed by problem (table 5) instead of algorithm."""
        return len(self.blocks) > 1

    def cells(self, seed: Optional[int] = None, levels: Optional[Iterable[int]] = None) -> List[RunConfig]:
        """Run configurations of all cells, sorted by (level, m, algorithm)."""
        levels = self.levels if levels is None else tuple(levels)
        unknown = set(levels) - set(self.levels)
        if unknown:
            raise ValidationError(f"Table {self.table_id} has no rows for levels {sorted(unknown)}")
        configs = [
            RunConfig(
                problem=block.problem, level=level, tau_exponent=m,
                algorithm=algorithm, stop=block.stop, seed=seed, max_iter=block.max_iter,
            )
            for block in self.blocks
            for level in levels
            for m in block.tau_exponents
            for algorithm in self.algorithms
        ]
        return sorted(configs, key=cell_sort_key)

    def ratio_label(self) -> str:
        if self.by_problem:
            return 'ratio'
        return 'E_h/h' if self.blocks[0].problem == OBSTACLE else 'E_h/sqrt(h)'


TABLES: Dict[int, TableSpec] = {
    1: TableSpec(1, (TableBlock(OBSTACLE, StopCriterion.REF_ERROR.value),)),
    2: TableSpec(2, (TableBlock(OBSTACLE, StopCriterion.RESIDUAL.value),), show_ratio=True),
    3: TableSpec(3, (TableBlock(ROF, StopCriterion.REF_ERROR.value),)),
    4: TableSpec(4, (TableBlock(ROF, StopCriterion.RESIDUAL.value),), show_ratio=True),
    5: TableSpec(
        5,
        (
            TableBlock(OBSTACLE, StopCriterion.DUAL_ONLY.value, (3,), SINGLE_COMPONENT_MAX_ITER),
            TableBlock(ROF, StopCriterion.PRIMAL_ONLY.value, (0,), SINGLE_COMPONENT_MAX_ITER),
        ),
        levels=tuple(range(3, 8)),
        show_ratio=True,
    ),
}


def get_table(table_id: int) -> TableSpec:
    try:
        return TABLES[int(table_id)]
    except (KeyError, ValueError):
        raise ValidationError(f"Unknown table {table_id!r}, expected one of {sorted(TABLES)}")


def cell_sort_key(cell) -> Tuple:
    """Sort key (level, m, algorithm, problem) for RunConfigs and cell dicts."""
    if isinstance(cell, RunConfig):
        return (cell.level, cell.m_label, ALGORITHMS.index(cell.algorithm), cell.problem)
    return (cell['level'], str(cell['m']), ALGORITHMS.index(cell['alg']), cell['problem'])


def annotation(cell: dict) -> str:
    if cell['alg'] == FAST:
        return f"({format_count(cell['N_re'])})"
    if cell['alg'] == VARIABLE:
        return format_pair(cell['N_tau'], cell['N_gamma'])
    return ''


def build_table(spec: TableSpec, cells: Sequence[dict]) -> pd.DataFrame:
    """
    Wide table from cell summaries (as returned by runs.run_cell).

    Cells of capped or failed runs, and cells that were not computed, are
    rendered with the hyphen.
    """
    ratio_label = spec.ratio_label()
    columns = _column_order(spec)
    indexed = {}
    for cell in cells:
        indexed[(_row_key(spec, cell), cell['level'], _column_key(spec, cell))] = cell

    levels = sorted({cell['level'] for cell in cells})
    rows = []
    for key in _row_keys(spec):
        for level in levels:
            row = {'problem' if spec.by_problem else 'algorithm': key, 'level': level}
            for column in columns:
                cell = indexed.get((key, level, column))
                row[f"N [{column}]"] = HYPHEN if cell is None else format_count(cell['N'])
                if not spec.by_problem:
                    row[f"annotation [{column}]"] = '' if cell is None else annotation(cell)
                if spec.show_ratio:
                    row[f"{ratio_label} [{column}]"] = (
                        HYPHEN if cell is None else format_real(cell['ratio'])
                    )
            rows.append(row)
    return pd.DataFrame(rows)


def _row_key(spec: TableSpec, cell: dict) -> str:
    return cell['problem'] if spec.by_problem else cell['alg']


def _column_key(spec: TableSpec, cell: dict) -> str:
    return cell['alg'] if spec.by_problem else f"tau=h^-{cell['m']}"


def _row_keys(spec: TableSpec) -> List[str]:
    if spec.by_problem:
        return [block.problem for block in spec.blocks]
    return list(spec.algorithms)


def _column_order(spec: TableSpec) -> List[str]:
    if spec.by_problem:
        return list(spec.algorithms)
    return [f"tau=h^-{m}" for m in spec.blocks[0].tau_exponents]
