from dataclasses import replace

import numpy as np
import pytest

from ictmc.horizon import ErrorLedger, detection_threshold, solve_horizon
from ictmc.model import ScenarioConfig, StepProfile, build_generator, build_rates
from ictmc.oracle import expm_step
from ictmc.scenario import builtin_scenario
from ictmc.stationary import ProbabilityVector
from ictmc.uniformizer import solve_step


def test_threshold_example():
    led = ErrorLedger(3e-2, 1e-7, 100, consumed=1e-3)
    assert detection_threshold(led) == pytest.approx(2.899e-2, rel=1e-12)


def test_threshold_exhausted_budget():
    assert detection_threshold(ErrorLedger(3e-2, 1e-7, 10, consumed=3e-2)) == 0


def test_threshold_no_slack():
    assert detection_threshold(ErrorLedger(288e-7, 1e-7, 288)) == 0


def test_threshold_disabled():
    assert detection_threshold(ErrorLedger(1.0, 1e-7, 5, detection_enabled=False)) == 0


def test_ledger_policies():
    add = ErrorLedger(1.0, 1e-3, 3, policy="additive").charge(0.1, steady=True).charge(0.2, steady=True)
    assert add.consumed == pytest.approx(0.3) and add.remaining_steps == 1
    rst = ErrorLedger(1.0, 1e-3, 3, policy="restart").charge(0.1).charge(0.2, steady=True)
    assert rst.consumed == 0.2 and rst.charged_total == pytest.approx(0.3)
    with pytest.raises(ValueError):
        ErrorLedger(1.0, 1e-3, 3, policy="greedy")


def tiny_config(**kw):
    base = dict(horizon=1.0, step_length=1.0, steps=[StepProfile(1.0, 1.0, 1)], gamma=1.0, eta=0.0,
                queue_capacity=0, epsilon_step=1e-9, epsilon_total=1e-9)
    base.update(kw)
    return ScenarioConfig(**base)


def test_single_step_equals_solve_step():
    cfg = tiny_config()
    h = solve_horizon(cfg)
    gen = build_generator(build_rates(cfg.steps[0], 1.0, 0.0, 1))
    r = solve_step(ProbabilityVector.point_mass(2), gen, 1.0, 1e-9)
    assert np.array_equal(h.distributions[0].values, r.p_out.values)
    assert h.ledger_final.consumed == r.error_charged


def test_baseline_budget_is_the_truncation_floor():
    cfg = builtin_scenario(150, epsilon_step=1e-5, epsilon_total=288 * 1e-5, detection=False)
    assert cfg.n_steps == 288
    assert cfg.epsilon_total == pytest.approx(2.88e-3, rel=1e-12)


@pytest.fixture(scope="module")
def small_runs():
    """Size-54 day at a few budgets plus an eps=1e-13 reference."""
    ref = solve_horizon(builtin_scenario(54, epsilon_step=1e-13, epsilon_total=288e-13, detection=False))
    runs = {}
    for policy in ("restart", "additive"):
        for et in (5e-3, 3e-2, 1e-1):
            cfg = builtin_scenario(54, epsilon_step=1e-7, epsilon_total=et, budget_policy=policy)
            runs[policy, et] = solve_horizon(cfg)
    return ref, runs


def test_additivity(small_runs):
    _, runs = small_runs
    for (policy, _), h in runs.items():
        total = 0.0
        for r in h.step_results:
            total += r.error_charged
        assert h.ledger_final.charged_total == total
        if policy == "additive":
            assert h.ledger_final.consumed == total


def test_budget_never_exceeded(small_runs):
    _, runs = small_runs
    for (_, et), h in runs.items():
        assert max(h.consumed_series) <= et
        assert len(h.distributions) == 288


def test_additive_budget_safety_every_prefix(small_runs):
    ref, runs = small_runs
    for (policy, _), h in runs.items():
        if policy != "additive":
            continue
        for a, b, c in zip(h.distributions, ref.distributions, h.consumed_series):
            assert np.max(np.abs(a.values - b.values)) <= c


def test_global_error_within_budget(small_runs):
    ref, runs = small_runs
    for (_, et), h in runs.items():
        err = max(np.max(np.abs(a.values - b.values)) for a, b in zip(h.distributions, ref.distributions))
        assert err <= et


def test_more_budget_never_costs_more_work(small_runs):
    _, runs = small_runs
    for policy in ("restart", "additive"):
        mvm = [runs[policy, et].total_mvm for et in (5e-3, 3e-2, 1e-1)]
        assert mvm == sorted(mvm, reverse=True)


def test_rigorous_tail_bound_over_a_day(small_runs):
    ref, runs = small_runs
    for policy in ("restart", "additive"):
        cfg = builtin_scenario(54, epsilon_step=1e-7, epsilon_total=3e-2, budget_policy=policy,
                               tail_bound="rigorous")
        h = solve_horizon(cfg)
        assert h.total_mvm >= runs[policy, 3e-2].total_mvm
        errs = [np.max(np.abs(a.values - b.values)) for a, b in zip(h.distributions, ref.distributions)]
        assert max(errs) <= 3e-2
        if policy == "additive":
            assert all(e <= c for e, c in zip(errs, h.consumed_series))


def test_no_detection_independent_of_budget():
    a = solve_horizon(builtin_scenario(54, epsilon_total=1e-2, detection=False))
    b = solve_horizon(builtin_scenario(54, epsilon_total=5e-2, detection=False))
    for x, y in zip(a.distributions, b.distributions):
        assert np.array_equal(x.values, y.values)


def test_two_steps_against_expm():
    steps = [StepProfile(3.0, 1.0, 2), StepProfile(0.5, 1.0, 2), StepProfile(2.0, 0.7, 3)]
    cfg = ScenarioConfig(3.0, 1.0, steps, 0.8, 0.3, 4, 1e-10, 3e-10)
    h = solve_horizon(cfg)
    p = ProbabilityVector.point_mass(cfg.size + 1)
    for prof, got in zip(steps, h.distributions):
        q = build_generator(build_rates(prof, 0.8, 0.3, cfg.size)).dense()
        p = expm_step(p, q, 1.0)
        assert np.max(np.abs(got.values - p.values)) <= 1e-9


def test_initial_vector_checked():
    with pytest.raises(ValueError):
        solve_horizon(tiny_config(), ProbabilityVector([1.0, 0.0, 0.0]))
