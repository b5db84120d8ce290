"""Birth-death model of a multiserver queue with balking and abandonment.

Rates are piecewise constant over a schedule of equal-length steps. Within a
step the number of calls in the system is a birth-death chain on {0..n}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List

import numpy as np


@dataclass(frozen=True)
class StepProfile:
    """Arrival rate, per-server service rate and staffing for one step."""

    lam: float
    mu: float
    servers: int

    def __post_init__(self):
        for name in ("lam", "mu"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {v!r}")
        if self.mu <= 0:
            raise ValueError(f"mu must be positive, got {self.mu!r}")
        if int(self.servers) != self.servers or self.servers < 1:
            raise ValueError(f"servers must be an integer >= 1, got {self.servers!r}")

    @property
    def load(self) -> float:
        return self.lam / (self.servers * self.mu)


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete description of one experiment over a finite horizon."""

    horizon: float
    step_length: float
    steps: List[StepProfile]
    gamma: float
    eta: float
    queue_capacity: int
    epsilon_step: float
    epsilon_total: float
    detection_enabled: bool = True
    budget_policy: str = "restart"
    tail_bound: str = "observed"

    def __post_init__(self):
        object.__setattr__(self, "steps", list(self.steps))
        if self.budget_policy not in ("restart", "additive"):
            raise ValueError(f"budget_policy must be 'restart' or 'additive', got {self.budget_policy!r}")
        if self.tail_bound not in ("observed", "rigorous"):
            raise ValueError(f"tail_bound must be 'observed' or 'rigorous', got {self.tail_bound!r}")
        if not self.steps:
            raise ValueError("scenario needs at least one step")
        if not (self.step_length > 0 and math.isfinite(self.step_length)):
            raise ValueError(f"step_length must be positive, got {self.step_length!r}")
        if self.horizon != len(self.steps) * self.step_length:
            raise ValueError(
                f"horizon {self.horizon} != {len(self.steps)} steps x {self.step_length}"
            )
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma!r}")
        if not (self.eta >= 0 and math.isfinite(self.eta)):
            raise ValueError(f"eta must be finite and nonnegative, got {self.eta!r}")
        if int(self.queue_capacity) != self.queue_capacity or self.queue_capacity < 0:
            raise ValueError(f"queue_capacity must be a nonnegative integer, got {self.queue_capacity!r}")
        if not self.epsilon_step > 0:
            raise ValueError(f"epsilon_step must be positive, got {self.epsilon_step!r}")
        if self.epsilon_total < self.n_steps * self.epsilon_step:
            raise ValueError(
                f"epsilon_total {self.epsilon_total:g} is below the truncation floor "
                f"{self.n_steps} x {self.epsilon_step:g}"
            )

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    @property
    def size(self) -> int:
        """Largest state n; held fixed for the whole horizon."""
        return max(p.servers for p in self.steps) + int(self.queue_capacity)


@dataclass(frozen=True, eq=False)
class BirthDeathModel:
    """State-dependent rates on {0..n}.

    ``birth[k]`` is the rate k -> k+1 for k = 0..n-1 and ``death[k-1]`` the
    rate k -> k-1 for k = 1..n.
    """

    birth: np.ndarray
    death: np.ndarray

    def __post_init__(self):
        birth = np.array(self.birth, dtype=float)
        death = np.array(self.death, dtype=float)
        if birth.ndim != 1 or birth.shape != death.shape:
            raise ValueError("birth and death must be 1-d vectors of equal length n")
        if not (np.all(np.isfinite(birth)) and np.all(np.isfinite(death))):
            raise ValueError("rates must be finite")
        if np.any(birth < 0) or np.any(death < 0):
            raise ValueError("rates must be nonnegative")
        birth.flags.writeable = False
        death.flags.writeable = False
        object.__setattr__(self, "birth", birth)
        object.__setattr__(self, "death", death)

    @property
    def size(self) -> int:
        return len(self.birth)

    def __eq__(self, other):
        if not isinstance(other, BirthDeathModel):
            return NotImplemented
        return np.array_equal(self.birth, other.birth) and np.array_equal(self.death, other.death)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Generator:
    """Tridiagonal infinitesimal generator and its uniformization rate."""

    lower: np.ndarray  # q[k, k-1] for k = 1..n
    diag: np.ndarray
    upper: np.ndarray  # q[k, k+1] for k = 0..n-1
    alpha: float
    model: BirthDeathModel = field(repr=False)

    @property
    def size(self) -> int:
        """Number of states, n + 1."""
        return len(self.diag)

    def dense(self) -> np.ndarray:
        q = np.diag(self.diag)
        idx = np.arange(len(self.upper))
        q[idx, idx + 1] = self.upper
        q[idx + 1, idx] = self.lower
        return q


def build_rates(profile: StepProfile, gamma: float, eta: float, n: int) -> BirthDeathModel:
    """Birth and death rate vectors for one step on the state space {0..n}.

    Below ``s`` every arrival enters service; from ``s`` on an arrival joins
    the queue with probability ``gamma`` and every queued call abandons at
    rate ``eta``.
    """
    s = profile.servers
    if n < s:
        raise ValueError(f"state space size n={n} is smaller than servers s={s}")
    if not (math.isfinite(gamma) and 0.0 <= gamma <= 1.0):
        raise ValueError(f"gamma must lie in [0, 1], got {gamma!r}")
    if not (math.isfinite(eta) and eta >= 0):
        raise ValueError(f"eta must be finite and nonnegative, got {eta!r}")

    k = np.arange(n, dtype=float)
    birth = np.where(k <= s - 1, profile.lam, gamma * profile.lam)
    j = np.arange(1, n + 1, dtype=float)
    death = np.where(j <= s - 1, j * profile.mu, s * profile.mu + (j - s) * eta)
    return BirthDeathModel(birth, death)


def build_generator(model: BirthDeathModel) -> Generator:
    out_rate = np.zeros(model.size + 1)
    out_rate[:-1] += model.birth
    out_rate[1:] += model.death
    alpha = float(out_rate.max()) if out_rate.size else 0.0
    return Generator(
        lower=model.death,
        diag=-out_rate,
        upper=model.birth,
        alpha=alpha,
        model=model,
    )
