"""Dense brute-force references for verification.

Nothing here is shared with the production solvers: the transient step uses
a matrix exponential, the stationary law a direct linear solve and the
Poisson cdf an extended-precision sum.
"""

from __future__ import annotations

import math

import mpmath
import numpy as np
import scipy.linalg

from .stationary import ProbabilityVector

MAX_DENSE = 501  # states, i.e. n <= 500


def _as_dense(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ValueError("expected a square matrix")
    if q.shape[0] > MAX_DENSE:
        raise ValueError(f"dense oracle limited to {MAX_DENSE} states, got {q.shape[0]}")
    if not np.all(np.isfinite(q)):
        raise ValueError("matrix has non-finite entries")
    return q


def expm_step(p: ProbabilityVector, q_dense, delta: float) -> ProbabilityVector:
    """``p exp(Q delta)`` by Pade scaling and squaring."""
    q = _as_dense(q_dense)
    if len(p) != q.shape[0]:
        raise ValueError("dimension mismatch")
    out = p.values @ scipy.linalg.expm(q * delta)
    return ProbabilityVector(out, p.defect)


def dense_stationary(q_dense) -> ProbabilityVector:
    """Solve ``pi Q = 0``, ``sum(pi) = 1`` with one balance equation replaced by normalization."""
    q = _as_dense(q_dense)
    a = q.T.copy()
    a[-1, :] = 1.0
    b = np.zeros(q.shape[0])
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(a, b)
        # one round of refinement
        pi += np.linalg.solve(a, b - a @ pi)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"stationary system is singular: {exc}") from None
    return ProbabilityVector(pi)


def _poisson_sum(alpha_t: float, k: int, dps: int = 40) -> mpmath.mpf:
    with mpmath.workdps(dps):
        x = mpmath.mpf(alpha_t)
        if k < 0:
            return mpmath.mpf(0)
        # terms more than ~60 standard deviations below the mean are below 1e-700
        start = max(0, int(alpha_t - 60 * math.sqrt(alpha_t) - 50))
        if start > k:
            start = max(0, k - 10_000)
        term = mpmath.exp(-x + start * mpmath.log(x) - mpmath.loggamma(start + 1)) if start else mpmath.exp(-x)
        total = term
        for i in range(start + 1, k + 1):
            term = term * x / i
            total += term
        return total


def poisson_cdf_reference(alpha_t: float, k: int) -> float:
    """``sum_{i<=k} beta(alpha_t, i)`` summed in 40-digit arithmetic."""
    if alpha_t == 0:
        return 1.0 if k >= 0 else 0.0
    return float(_poisson_sum(alpha_t, k))


def poisson_upper_tail_reference(alpha_t: float, k: int) -> float:
    """``1 - sum_{i<=k} beta(alpha_t, i)`` without cancellation in double precision."""
    if alpha_t == 0:
        return 0.0 if k >= 0 else 1.0
    with mpmath.workdps(40):
        return float(1 - _poisson_sum(alpha_t, k))
