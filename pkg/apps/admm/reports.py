"""
Per-iteration trace and the final report of an ADMM run.
"""
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import pandas as pd

TRACE_COLUMNS = ['j', 'tau', 'gamma', 'R', 'R_dual', 'R_primal', 'event']

TERMINATED_BY_CAP = 'cap'
TERMINATED_BY_ERROR = 'error'


@dataclass(frozen=True)
class TraceRecord:
    j: int
    tau: float
    gamma: Optional[float]
    R: float
    R_dual: float
    R_primal: float
    event: str
    c0: Optional[float] = None

    def as_row(self) -> dict:
        return {
            'j': self.j,
            'tau': self.tau,
            'gamma': self.gamma,
            'R': self.R,
            'R_dual': self.R_dual,
            'R_primal': self.R_primal,
            'event': self.event,
        }


@dataclass
class RunReport:
    """
    Outcome of one call to apps.admm.solver.run.

    N is the number of iterations performed, including iterations discarded
    by Variable-ADMM restarts. terminated_by is the stop criterion id,
    'cap' or 'error'.
    """
    policy: str
    trace: List[TraceRecord] = field(default_factory=list)
    terminated_by: Optional[str] = None
    final_state: object = None
    n_tau: int = 0
    n_gamma: int = 0
    n_re: int = 0
    wall_time: float = 0.0
    error: Optional[str] = None

    @property
    def N(self) -> int:
        return len(self.trace)

    @property
    def hit_cap(self) -> bool:
        return self.terminated_by == TERMINATED_BY_CAP

    @property
    def converged(self) -> bool:
        return self.terminated_by not in (None, TERMINATED_BY_CAP, TERMINATED_BY_ERROR)

    @property
    def residuals(self) -> List[float]:
        return [record.R for record in self.trace]

    def event_counts(self) -> Counter:
        return Counter(record.event for record in self.trace)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([record.as_row() for record in self.trace], columns=TRACE_COLUMNS)

    def to_csv(self, path_or_buffer: Union[str, Path, object]) -> None:
        """Write the trace with header j,tau,gamma,R,R_dual,R_primal,event."""
        self.to_frame().to_csv(path_or_buffer, index=False, float_format='%.17g')

    def summary(self) -> str:
        return (
            f"{self.policy}: N={self.N}, N_tau={self.n_tau}, N_gamma={self.n_gamma}, "
            f"N_re={self.n_re}, terminated_by={self.terminated_by}, "
            f"wall_time={self.wall_time:.2f}s"
        )
