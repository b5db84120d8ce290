import math

import numpy as np
import pytest

from ictmc.model import (
    BirthDeathModel,
    ScenarioConfig,
    StepProfile,
    build_generator,
    build_rates,
)


def mmsn_rates(lam, mu, s, n):
    # plain M/M/s/n written out state by state
    birth = [lam] * n
    death = [min(k, s) * mu for k in range(1, n + 1)]
    return birth, death


@pytest.mark.parametrize(
    "lam, mu, s, gamma, eta, n, birth, death",
    [
        (1.0, 0.5, 2, 0.5, 0.25, 4, [1.0, 1.0, 0.5, 0.5], [0.5, 1.0, 1.25, 1.5]),
        (2, 1, 3, 1, 0, 5, [2, 2, 2, 2, 2], [1, 2, 3, 3, 3]),
        (0, 1, 1, 0.97, 0.25, 2, [0, 0], [1, 1.25]),
    ],
)
def test_build_rates_examples(lam, mu, s, gamma, eta, n, birth, death):
    m = build_rates(StepProfile(lam, mu, s), gamma, eta, n)
    np.testing.assert_array_equal(m.birth, birth)
    np.testing.assert_array_equal(m.death, death)


def test_build_rates_rejects_small_state_space():
    with pytest.raises(ValueError):
        build_rates(StepProfile(1.0, 1.0, 5), 0.9, 0.1, 4)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -1.0])
def test_profile_rejects_bad_rates(bad):
    with pytest.raises(ValueError):
        StepProfile(bad, 1.0, 1)
    with pytest.raises(ValueError):
        StepProfile(1.0, bad, 1)


def test_build_rates_rejects_bad_gamma_and_eta():
    with pytest.raises(ValueError):
        build_rates(StepProfile(1, 1, 1), 1.5, 0.1, 3)
    with pytest.raises(ValueError):
        build_rates(StepProfile(1, 1, 1), 0.5, math.nan, 3)


def test_reduces_to_mmsn():
    for s, n in [(1, 1), (3, 10), (20, 35)]:
        m = build_rates(StepProfile(2.7, 0.4, s), 1.0, 0.0, n)
        birth, death = mmsn_rates(2.7, 0.4, s, n)
        np.testing.assert_allclose(m.birth, birth, rtol=0, atol=0)
        np.testing.assert_allclose(m.death, death, rtol=1e-15)


def test_generator_example():
    g = build_generator(build_rates(StepProfile(1.0, 0.5, 2), 0.5, 0.25, 4))
    np.testing.assert_allclose(g.diag, [-1.0, -1.5, -1.5, -1.75, -1.5])
    assert g.alpha == 1.75


def test_generator_zero_rates():
    g = build_generator(BirthDeathModel(np.zeros(3), np.zeros(3)))
    assert g.alpha == 0
    assert not np.any(g.dense())


def test_generator_two_state(two_state):
    np.testing.assert_array_equal(two_state.dense(), [[-1, 1], [1, -1]])
    # the largest exit rate, with no inflation
    assert two_state.alpha == 1


def test_generator_rows_sum_to_zero(rng):
    for _ in range(20):
        n = int(rng.integers(1, 60))
        m = build_rates(StepProfile(rng.uniform(0, 50), rng.uniform(0.1, 2), int(rng.integers(1, n + 1))),
                        rng.uniform(), rng.uniform(0, 1), n)
        q = build_generator(m).dense()
        rows = q.sum(axis=1)
        ulp = 2 * np.spacing(np.abs(q).max(axis=1))
        assert np.all(np.abs(rows) <= ulp)
        off = q - np.diag(np.diag(q))
        assert np.all(off >= 0) and np.all(np.diag(q) <= 0)
        assert build_generator(m).alpha >= np.abs(np.diag(q)).max()


def test_birth_monotone_in_lambda():
    lo = build_rates(StepProfile(3.0, 0.5, 4), 0.8, 0.2, 12)
    hi = build_rates(StepProfile(3.5, 0.5, 4), 0.8, 0.2, 12)
    assert np.all(hi.birth >= lo.birth)


def test_scenario_invariants():
    steps = [StepProfile(1.0, 1.0, 2)] * 4
    cfg = ScenarioConfig(20.0, 5.0, steps, 0.9, 0.1, 3, 1e-6, 4e-6)
    assert cfg.size == 5 and cfg.n_steps == 4
    with pytest.raises(ValueError):
        ScenarioConfig(21.0, 5.0, steps, 0.9, 0.1, 3, 1e-6, 4e-6)
    with pytest.raises(ValueError):
        ScenarioConfig(20.0, 5.0, steps, 0.9, 0.1, 3, 1e-6, 3e-6)
    with pytest.raises(ValueError):
        ScenarioConfig(20.0, 5.0, steps, 1.1, 0.1, 3, 1e-6, 4e-6)


def test_state_space_uses_max_servers():
    steps = [StepProfile(1.0, 1.0, 2), StepProfile(1.0, 1.0, 5)]
    cfg = ScenarioConfig(2.0, 1.0, steps, 0.9, 0.1, 3, 1e-6, 1e-2)
    assert cfg.size == 8
