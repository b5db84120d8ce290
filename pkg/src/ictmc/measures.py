"""Performance measures computed from distributions at step boundaries."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .horizon import HorizonResult
from .model import ScenarioConfig
from .stationary import ProbabilityVector


def expected_state(p: ProbabilityVector) -> float:
    v = p.values
    return float(np.dot(np.arange(v.size, dtype=float), v))


def p_immediate_service(p: ProbabilityVector, servers: int) -> float:
    """Probability that an arrival finds a free server (PASTA)."""
    if servers > len(p):
        raise ValueError(f"servers={servers} exceeds the number of states {len(p)}")
    return float(np.sum(p.values[:servers]))


def max_tail_probability(series: Sequence[ProbabilityVector]) -> float:
    if not series:
        raise ValueError("empty series")
    return max(float(p.values[-1]) for p in series)


@dataclass
class MeasureSeries:
    times: np.ndarray
    expected_state: np.ndarray
    p_immediate: np.ndarray
    p_tail: np.ndarray
    load: np.ndarray
    mvm_per_step: np.ndarray
    steady_flags: np.ndarray

    def __len__(self):
        return len(self.times)


def measure_series(config: ScenarioConfig, result: HorizonResult) -> MeasureSeries:
    dists = result.distributions
    times = config.step_length * np.arange(1, len(dists) + 1)
    return MeasureSeries(
        times=times,
        expected_state=np.array([expected_state(p) for p in dists]),
        p_immediate=np.array(
            [p_immediate_service(p, prof.servers) for p, prof in zip(dists, config.steps)]
        ),
        p_tail=np.array([float(p.values[-1]) for p in dists]),
        load=np.array([prof.load for prof in config.steps]),
        mvm_per_step=np.array([r.mvm_count for r in result.step_results]),
        steady_flags=np.array([r.steady_detected for r in result.step_results]),
    )


def relative_error_series(test: MeasureSeries, reference: MeasureSeries) -> np.ndarray:
    """Pointwise ``|ES_test - ES_ref| / ES_ref``.

    Where the reference is zero the entry is 0 if the test is zero as well
    and ``inf`` otherwise.
    """
    if len(test) != len(reference) or not np.array_equal(test.times, reference.times):
        raise ValueError("series are not aligned on the same time grid")
    es, ref = test.expected_state, reference.expected_state
    diff = np.abs(es - ref)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = diff / ref
    rel = np.where(ref == 0, np.where(diff == 0, 0.0, np.inf), rel)
    return rel


def sup_error_series(test: HorizonResult, reference: HorizonResult) -> List[float]:
    """``max_i |p_test(t_j)[i] - p_ref(t_j)[i]|`` for every step boundary."""
    if len(test.distributions) != len(reference.distributions):
        raise ValueError("results have different numbers of steps")
    return [
        float(np.max(np.abs(a.values - b.values)))
        for a, b in zip(test.distributions, reference.distributions)
    ]
