"""Multi-step recursion over a piecewise-constant horizon with a global error budget."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional

from .model import ScenarioConfig, build_generator, build_rates
from .stationary import ProbabilityVector, stationary_distribution
from .uniformizer import StepResult, solve_step

log = logging.getLogger(__name__)


BUDGET_POLICIES = ("restart", "additive")


@dataclass(frozen=True)
class ErrorLedger:
    """Error spent so far against the total budget.

    ``remaining_steps`` counts the step about to be solved, so a reserve of
    ``epsilon_step`` per remaining step is always held back for truncation.

    ``consumed`` is the error bound carried by the current distribution.
    Under the ``additive`` policy every charge is added to it. Under
    ``restart`` a step that returned the stationary vector replaces it with
    that step's own charge, since the substituted vector does not depend on
    the distribution the step started from. ``charged_total`` always holds
    the plain sum of all charges.
    """

    epsilon_total: float
    epsilon_step: float
    remaining_steps: int
    consumed: float = 0.0
    detection_enabled: bool = True
    policy: str = "restart"
    charged_total: float = 0.0

    def __post_init__(self):
        if self.policy not in BUDGET_POLICIES:
            raise ValueError(f"unknown budget policy {self.policy!r}; known: {BUDGET_POLICIES}")

    @property
    def reserve(self) -> float:
        return self.remaining_steps * self.epsilon_step

    def charge(self, amount: float, steady: bool = False) -> ErrorLedger:
        if steady and self.policy == "restart":
            consumed = amount
        else:
            consumed = self.consumed + amount
        return replace(
            self,
            consumed=consumed,
            charged_total=self.charged_total + amount,
            remaining_steps=max(self.remaining_steps - 1, 0),
        )


def detection_threshold(ledger: ErrorLedger) -> float:
    """Slack left once the truncation reserve for the remaining steps is set aside."""
    if not ledger.detection_enabled:
        return 0.0
    return max(0.0, ledger.epsilon_total - ledger.consumed - ledger.reserve)


@dataclass(frozen=True)
class HorizonResult:
    distributions: List[ProbabilityVector]
    step_results: List[StepResult]
    ledger_final: ErrorLedger
    # ledger.consumed after each step
    consumed_series: List[float] = field(default_factory=list)

    @property
    def total_mvm(self) -> int:
        return sum(r.mvm_count for r in self.step_results)


def solve_horizon(config: ScenarioConfig, p0: Optional[ProbabilityVector] = None) -> HorizonResult:
    """Solve every step in order, each starting from the previous step's output.

    ``p0`` defaults to the empty system.
    """
    n = config.size
    if p0 is None:
        p0 = ProbabilityVector.point_mass(n + 1)
    if len(p0) != n + 1:
        raise ValueError(f"initial vector has {len(p0)} entries, expected {n + 1}")
    p0.check()

    ledger = ErrorLedger(
        epsilon_total=config.epsilon_total,
        epsilon_step=config.epsilon_step,
        remaining_steps=config.n_steps,
        detection_enabled=config.detection_enabled,
        policy=config.budget_policy,
    )
    p = p0
    dists, results, consumed = [], [], []
    prev_profile = None
    gen = pi = None
    for j, profile in enumerate(config.steps):
        if profile != prev_profile:
            model = build_rates(profile, config.gamma, config.eta, n)
            gen = build_generator(model)
            pi = stationary_distribution(model)
            prev_profile = profile
        threshold = detection_threshold(ledger)
        res = solve_step(p, gen, config.step_length, config.epsilon_step, threshold, pi, config.tail_bound)
        ledger = ledger.charge(res.error_charged, res.steady_detected)
        if res.steady_detected:
            log.debug("step %d: steady state after %d MVMs, charged %.3g", j, res.mvm_count, res.error_charged)
        p = res.p_out
        dists.append(p)
        results.append(res)
        consumed.append(ledger.consumed)
    return HorizonResult(dists, results, ledger, consumed)
