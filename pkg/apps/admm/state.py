"""
Iterate container of the ADMM loop.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True, eq=False)
class AdmmState:
    """
    Iterate (u^j, p^j; lam^j) after step (5) of iteration j.

    u_prev and lam_prev are the pair the subproblems of iteration j consumed;
    for fixed and variable step sizes this is (u^{j-1}, lam^{j-1}), for the
    accelerated policy the extrapolated pair. R^2 = R_dual^2 + R_primal^2.
    """
    j: int
    u: np.ndarray
    u_prev: np.ndarray
    p: Optional[np.ndarray]
    lam: np.ndarray
    lam_prev: np.ndarray
    tau: float
    gamma: Optional[float]
    R: float
    R_dual: float
    R_primal: float

    @property
    def components(self):
        return self.R_dual, self.R_primal
