"""Result containers and feasibility predicates shared by the solvers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "SolveOutcome",
    "CertificateReport",
    "in_simplex",
    "in_box",
]

_SIMPLEX_TOL = 1e-9


def in_simplex(x: np.ndarray, tol: float = _SIMPLEX_TOL) -> bool:
    """True when x is entrywise nonnegative and sums to one, up to tol."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or not np.all(np.isfinite(x)):
        return False
    return bool(x.min() >= -tol and abs(x.sum() - 1.0) <= tol * max(1.0, x.size))


def in_box(x: np.ndarray, alpha: float, slack: float, tol: float = _SIMPLEX_TOL) -> bool:
    """True when x lies in the simplex with every entry at most
    slack * (1 + alpha) / n."""
    x = np.asarray(x, dtype=np.float64)
    if not in_simplex(x, tol):
        return False
    bound = slack * (1.0 + alpha) / x.size
    return bool(x.max() <= bound + tol)


@dataclass
class SolveOutcome:
    """What a packing solve produced.

    verdict is "primal", "dual", "infeasible", or "undecided" (the last only
    when the caller imposed an iteration budget below the certified cap).
    x is the primal point in the original index space, with zeros at
    positions removed by preprocessing. y is the dual witness: a vector for
    the LP solvers, a symmetric matrix for the Schatten solver, None
    otherwise. trace, when requested, has one row per visited iterate with
    the potential in column 0 and weight mass in column 1.
    """

    verdict: str
    x: Optional[np.ndarray]
    y: Optional[np.ndarray]
    iterations: int
    eps: float
    p: float
    exit_reason: str
    removed: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.intp))
    trace: Optional[np.ndarray] = None
    value: Optional[float] = None
    iteration_cap: Optional[int] = None


@dataclass
class CertificateReport:
    """Outcome of re-checking a certificate against the full instance.

    worst_index and violation describe the binding coordinate or constraint:
    for a primal check the amount by which the objective exceeds its bound,
    for a dual check the largest shortfall below 1 - eps. ok means every
    clause of the certificate held within tolerance.
    """

    ok: bool
    kind: str
    value: float
    bound: float
    worst_index: int
    violation: float
    message: str

    def __str__(self) -> str:
        status = "ok" if self.ok else "FAILED"
        return f"{self.kind} certificate {status}: {self.message}"
