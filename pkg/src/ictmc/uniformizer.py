"""One homogeneous step of the piecewise-constant chain by uniformization.

The step output is the Poisson mixture ``sum_i beta(alpha*delta, i) * x_i``
of the iterates ``x_{i+1} = x_i P`` of the uniformized DTMC with
``P = I + Q/alpha``. Optionally the iteration stops early once the iterates
are provably close to the known stationary vector, which is then returned in
place of the mixture.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import Generator
from .stationary import ProbabilityVector

log = logging.getLogger(__name__)

# Unnormalized Poisson terms below this fraction of the modal term are not
# generated at all; their total mass is far below any usable epsilon.
_POISSON_CUTOFF = 1e-40
# Number of trailing iterates over which the distance to the stationary
# vector must be nonincreasing before detection may fire.
MONOTONE_WINDOW = 5
FIXED_POINT_TOL = 1e-10
TAIL_BOUNDS = ("observed", "rigorous")


class StationaryMismatchError(ValueError):
    """The vector supplied as stationary is not a fixed point of P."""


@dataclass(frozen=True, eq=False)
class PoissonWindow:
    """Retained Poisson weights ``beta(alpha_t, i)`` for ``left <= i <= right``."""

    left: int
    right: int
    weights: np.ndarray
    mass_deficit: float  # prefix + right tail
    cdf_prefix: float  # mass strictly below ``left``

    @property
    def tail(self) -> float:
        return self.mass_deficit - self.cdf_prefix


@dataclass(frozen=True, eq=False)
class StepResult:
    p_out: ProbabilityVector
    mvm_count: int
    steady_detected: bool
    error_charged: float
    rate_estimate: Optional[float] = None
    # max_i |x_S[i] - x_{S-1}[i]| / |x_S[i]| at the stopping iterate S;
    # only computed when detection fired after at least one MVM
    relative_change: Optional[float] = None


def _poisson_terms(alpha_t: float):
    """Unnormalized Poisson terms around the mode, generated outward."""
    mode = int(math.floor(alpha_t))
    down = []
    w = 1.0
    i = mode
    while i > 0:
        w *= i / alpha_t
        if w < _POISSON_CUTOFF:
            break
        down.append(w)
        i -= 1
    up = []
    w = 1.0
    i = mode
    while True:
        w *= alpha_t / (i + 1)
        if w < _POISSON_CUTOFF:
            break
        up.append(w)
        i += 1
    lo = mode - len(down)
    terms = np.array(down[::-1] + [1.0] + up)
    return lo, terms


def poisson_window(alpha_t: float, epsilon: float) -> PoissonWindow:
    """Truncation points and weights for a Poisson(alpha_t) mixture.

    ``left`` is the largest index whose strict prefix mass is at most
    ``epsilon/2``; ``right`` the smallest index whose upper tail is at most
    ``epsilon/2``.
    """
    if not math.isfinite(alpha_t) or alpha_t < 0:
        raise ValueError(f"alpha_t must be finite and nonnegative, got {alpha_t!r}")
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    if alpha_t == 0:
        return PoissonWindow(0, 0, np.ones(1), 0.0, 0.0)

    lo, terms = _poisson_terms(alpha_t)
    total = math.fsum(terms)
    beta = terms / total
    half = epsilon / 2

    # prefix[j] = mass of indices lo .. lo+j-1
    prefix = np.concatenate(([0.0], np.cumsum(beta)))
    # tail[j] = mass of indices above lo+j
    tail = np.concatenate((np.cumsum(beta[::-1])[::-1][1:], [0.0]))
    j_left = int(np.nonzero(prefix[:-1] <= half)[0][-1])
    j_right = int(np.nonzero(tail <= half)[0][0])
    j_right = max(j_right, j_left)

    cdf_prefix = float(prefix[j_left])
    deficit = cdf_prefix + float(tail[j_right])
    weights = beta[j_left:j_right + 1].copy()
    weights.flags.writeable = False
    return PoissonWindow(lo + j_left, lo + j_right, weights, deficit, cdf_prefix)


class _Stepper:
    """Preallocated tridiagonal product ``x -> x P``."""

    def __init__(self, gen: Generator):
        a = gen.alpha
        self.stay = 1.0 + gen.diag / a
        self.up = gen.upper / a
        self.down = gen.lower / a
        self._tmp = np.empty(max(gen.size - 1, 0))

    def __call__(self, x: np.ndarray, out: np.ndarray) -> np.ndarray:
        np.multiply(x, self.stay, out=out)
        if self._tmp.size:
            np.multiply(x[:-1], self.up, out=self._tmp)
            out[1:] += self._tmp
            np.multiply(x[1:], self.down, out=self._tmp)
            out[:-1] += self._tmp
        return out


def dtmc_step(p: ProbabilityVector, gen: Generator) -> ProbabilityVector:
    """One product with the uniformized matrix, ``p + (p Q)/alpha``."""
    if len(p) != gen.size:
        raise ValueError(f"vector has {len(p)} entries, generator has {gen.size} states")
    if gen.alpha == 0:
        return p
    out = _Stepper(gen)(p.values, np.empty(gen.size))
    return ProbabilityVector(out, p.defect)


def _check_fixed_point(pi: ProbabilityVector, gen: Generator) -> None:
    if gen.alpha == 0:
        return
    moved = _Stepper(gen)(pi.values, np.empty(gen.size))
    gap = float(np.max(np.abs(moved - pi.values)))
    if gap > FIXED_POINT_TOL:
        raise StationaryMismatchError(
            f"supplied stationary vector moves by {gap:.3g} under one DTMC step"
        )


def solve_step(
    p_in: ProbabilityVector,
    gen: Generator,
    delta: float,
    epsilon_step: float,
    delta_threshold: float = 0.0,
    pi_inf: Optional[ProbabilityVector] = None,
    tail_bound: str = "observed",
) -> StepResult:
    """Advance ``p_in`` over a step of length ``delta``.

    With ``delta_threshold > 0`` the distance ``d_i`` of every iterate to
    ``pi_inf`` is tracked together with the bound

        B_i = sum_{j<=i} beta_j d_j + (1 - sum_{j<=i} beta_j) T_i

    on the error of returning ``pi_inf``, where ``T_i`` stands in for the
    distances not computed yet. With ``tail_bound="observed"`` it is
    ``d_i``, which holds while the iterates keep contracting as observed.
    With ``"rigorous"`` it is ``_future_distance_bound``, valid for every
    later iterate; that is evaluated only once the observed bound passes. The iteration stops at the first
    ``i`` with ``B_i <= delta_threshold * max(pi_inf)`` while ``d`` has not
    increased over the last few iterates; the charged error is then
    ``B_i + epsilon_step``. Otherwise the truncated mixture is returned and
    ``epsilon_step`` is charged.
    """
    if len(p_in) != gen.size:
        raise ValueError(f"vector has {len(p_in)} entries, generator has {gen.size} states")
    if delta_threshold < 0:
        raise ValueError("delta_threshold must be nonnegative")
    if tail_bound not in TAIL_BOUNDS:
        raise ValueError(f"unknown tail bound {tail_bound!r}; known: {TAIL_BOUNDS}")
    detect = delta_threshold > 0
    if detect:
        if pi_inf is None:
            raise ValueError("detection needs the stationary vector")
        if len(pi_inf) != gen.size:
            raise ValueError("stationary vector has the wrong length")
    if pi_inf is not None:
        _check_fixed_point(pi_inf, gen)

    if gen.alpha == 0:
        return StepResult(p_in, 0, False, 0.0)

    win = poisson_window(gen.alpha * delta, epsilon_step)
    step = _Stepper(gen)
    n = gen.size
    x = np.array(p_in.values)
    y = np.empty(n)
    acc = np.zeros(n)
    scratch = np.empty(n)

    if detect:
        pi = pi_inf.values
        limit = delta_threshold * pi_inf.sup_norm
        prefix = win.cdf_prefix
        weighted = 0.0  # sum of beta_j d_j over l <= j <= i
        window_mass = 0.0  # sum of beta_j over l <= j <= i
        d_max_pre = 0.0  # max d_j over j < l
        tail_cap = np.inf  # bound on d_j for all later j, refreshed lazily
        cap_ratio = 1.0  # last tail_cap / d, predicts when a refresh can pass
        recent = deque(maxlen=MONOTONE_WINDOW + 1)
        dists = []

    for i in range(win.right + 1):
        if i >= win.left:
            w = win.weights[i - win.left]
            np.multiply(x, w, out=scratch)
            acc += scratch
        if detect:
            np.subtract(x, pi, out=scratch)
            np.abs(scratch, out=scratch)
            d = float(scratch.max())
            dists.append(d)
            recent.append(d)
            if i >= win.left:
                weighted += w * d
                window_mass += w
                rest = max(0.0, 1.0 - prefix - window_mass)
            else:
                d_max_pre = max(d_max_pre, d)
                rest = 1.0 - prefix
            bound = _mixture_bound(i >= win.left, prefix, d_max_pre, weighted, rest, d)
            monotone = all(a >= b for a, b in zip(recent, list(recent)[1:]))
            if bound <= limit and monotone and tail_bound == "rigorous":
                if _mixture_bound(i >= win.left, prefix, d_max_pre, weighted, rest, cap_ratio * d) <= limit:
                    fresh = _future_distance_bound(x - pi, pi, pi_inf.sup_norm)
                    cap_ratio = fresh / d if d > 0 else 1.0
                    tail_cap = min(tail_cap, fresh)
                bound = _mixture_bound(i >= win.left, prefix, d_max_pre, weighted, rest, tail_cap)
            if bound <= limit and monotone:
                rel = None
                if i > 0:
                    with np.errstate(divide="ignore", invalid="ignore"):
                        r = np.abs(x - y) / np.abs(x)
                    rel = float(np.max(np.where(x == y, 0.0, r)))
                    log.debug(
                        "steady state at iterate %d (l=%d, k=%d), bound %.3g, relative change %.3g",
                        i, win.left, win.right, bound, rel,
                    )
                return StepResult(
                    p_out=pi_inf,
                    mvm_count=i,
                    steady_detected=True,
                    error_charged=bound + epsilon_step,
                    rate_estimate=_rate_estimate(dists),
                    relative_change=rel,
                )
        if i < win.right:
            step(x, out=y)
            x, y = y, x

    defect = p_in.defect + p_in.mass * win.mass_deficit
    return StepResult(
        p_out=ProbabilityVector(acc, defect),
        mvm_count=win.right,
        steady_detected=False,
        error_charged=epsilon_step,
        rate_estimate=_rate_estimate(dists) if detect else None,
    )


def _mixture_bound(inside, prefix, d_max_pre, weighted, rest, tail) -> float:
    """Error bound of returning the stationary vector, ``tail`` covering unseen iterates."""
    if inside:
        return prefix * d_max_pre + weighted + rest * tail
    # iterates between i and l are not seen yet
    return prefix * max(d_max_pre, tail) + rest * tail


def _clipped_excess(u: np.ndarray, pi: np.ndarray, pi_max: float) -> float:
    """``min over tau >= 0`` of ``pi_max * tau + sum((u - tau * pi)+)`` for ``u >= 0``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(u > 0, u / pi, 0.0)
    order = np.argsort(ratio, kind="stable")[::-1]
    covered = np.cumsum(pi[order])
    m = int(np.searchsorted(covered, pi_max))
    tau = float(ratio[order[m]]) if m < order.size else 0.0
    if not np.isfinite(tau):
        # stationary mass underflowed where u is not
        return float(np.sum(u))
    return pi_max * tau + float(np.sum(np.maximum(u - tau * pi, 0.0)))


def _future_distance_bound(diff: np.ndarray, pi: np.ndarray, pi_max: float) -> float:
    """Bound on ``max|x P^m - pi|`` for all ``m >= 0`` given ``diff = x - pi``.

    Split ``diff`` into a part ``g * pi`` with ``-tau_lo <= g <= tau_hi`` and a
    remainder ``v``. The chain is reversible, so ``g`` evolves by ``P``
    acting on columns, an averaging step that keeps it inside its range.
    Every entry of ``v P^m`` lies between ``-sum(v-)`` and ``sum(v+)``. The
    upward and downward deviations are then bounded separately, each
    minimized over its own clipping level.
    """
    up = _clipped_excess(np.maximum(diff, 0.0), pi, pi_max)
    down = _clipped_excess(np.maximum(-diff, 0.0), pi, pi_max)
    return max(up, down)


def _rate_estimate(dists) -> Optional[float]:
    """Median contraction factor of successive distances to the stationary vector."""
    if len(dists) < 3:
        return None
    d = np.asarray(dists)
    prev, cur = d[:-1], d[1:]
    ok = prev > 0
    if not np.any(ok):
        return None
    return float(np.median(cur[ok] / prev[ok]))
