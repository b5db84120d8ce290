"""Probability vectors and the exact stationary law of a birth-death chain."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .model import BirthDeathModel

# Ratios are multiplied out in blocks of this length before the running
# scale is folded into a log offset.
_RENORM_EVERY = 64


class ReducibleChainError(ValueError):
    """The stationary vector is not unique on {0..n}."""


@dataclass(frozen=True, eq=False)
class ProbabilityVector:
    """Distribution over {0..n}.

    ``defect`` is the probability mass dropped by truncation so far; the
    entries sum to ``1 - defect`` up to rounding.
    """

    values: np.ndarray
    defect: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("probability vector must be a nonempty 1-d array")
        if not np.all(np.isfinite(v)):
            raise ValueError("probability vector has non-finite entries")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "defect", float(self.defect))

    @classmethod
    def point_mass(cls, n_states: int, state: int = 0) -> ProbabilityVector:
        v = np.zeros(n_states)
        v[state] = 1.0
        return cls(v)

    def __len__(self):
        return self.values.size

    @property
    def mass(self) -> float:
        return float(np.sum(self.values))

    @cached_property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def check(self, tol: float = 1e-12) -> None:
        """Raise ValueError unless entries are nonnegative and the mass matches the defect."""
        if np.any(self.values < -tol):
            raise ValueError("negative probability entry")
        m = self.mass
        if not (1.0 - self.defect - tol <= m <= 1.0 + tol):
            raise ValueError(f"mass {m!r} inconsistent with defect {self.defect!r}")


def stationary_distribution(model: BirthDeathModel) -> ProbabilityVector:
    """Solve detailed balance ``pi[k+1] * death[k] = pi[k] * birth[k]``.

    The ratios birth/death are multiplied out in blocks; each block carries
    a log offset so long products neither overflow nor flush a later
    increasing stretch to zero.
    """
    birth = model.birth
    death = model.death
    n = model.size
    if n == 0:
        return ProbabilityVector(np.ones(1))

    # a state with no way down is only a problem if mass can flow into it
    stuck = (death == 0) & (birth > 0)
    if np.any(stuck):
        # flow reaches k+1 only if every birth below it is positive
        reach = np.cumprod(birth > 0).astype(bool)
        bad = np.nonzero(stuck & reach)[0]
        if bad.size:
            raise ReducibleChainError(
                f"state {bad[0] + 1} has zero death rate but is reachable from 0"
            )

    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(birth > 0, birth / np.where(death > 0, death, 1.0), 0.0)

    local = np.empty(n + 1)
    offsets = np.empty(n + 1)
    local[0] = 1.0
    offsets[0] = 0.0
    offset = 0.0
    with np.errstate(divide="ignore", under="ignore", over="ignore"):
        for start in range(0, n, _RENORM_EVERY):
            block = ratio[start:start + _RENORM_EVERY]
            local[start + 1:start + 1 + block.size] = np.cumprod(block)
            offsets[start + 1:start + 1 + block.size] = offset
            offset = offset + float(np.sum(np.log(block)))
        logs = np.log(local) + offsets
    if not np.all(np.isfinite(local)):
        # ratios above ~1e4 can overflow inside a block; go fully to logs
        with np.errstate(divide="ignore"):
            logs = np.concatenate(([0.0], np.cumsum(np.log(ratio))))
        local = np.ones(n + 1)
        offsets = logs
    top = np.max(logs)
    with np.errstate(under="ignore"):
        pi = local * np.exp(offsets - top)
    pi /= np.sum(pi)
    return ProbabilityVector(pi)
