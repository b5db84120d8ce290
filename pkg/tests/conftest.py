import numpy as np
import pytest

from ictmc.model import BirthDeathModel, StepProfile, build_generator, build_rates


def random_birth_death(rng, n, scale=2.0):
    """Random irreducible birth-death model on {0..n}."""
    birth = rng.uniform(0.05, scale, size=n)
    death = rng.uniform(0.05, scale, size=n)
    return BirthDeathModel(birth, death)


def random_queue_model(rng, max_states=500):
    """Random queue of the call-center form with at most max_states + 1 states."""
    s = int(rng.integers(1, max_states - 99))
    q = int(rng.integers(0, min(100, max_states - s) + 1))
    mu = rng.uniform(0.05, 1.0)
    lam = rng.uniform(0.3, 1.5) * s * mu
    return build_rates(StepProfile(lam, mu, s), rng.uniform(0.5, 1.0), 1.0 / rng.uniform(1.0, 30.0), s + q)


def queue_model(s, q, load=0.85, mu=0.2, gamma=0.97, eta=0.25):
    return build_rates(StepProfile(load * s * mu, mu, s), gamma, eta, s + q)


@pytest.fixture
def rng():
    return np.random.default_rng(20150111)


@pytest.fixture
def two_state():
    return build_generator(BirthDeathModel([1.0], [1.0]))


_CRITERIA = []


@pytest.fixture
def criterion():
    """Record one acceptance line; the assert stays in the test."""

    def record(name, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {name}  {detail}".rstrip()
        _CRITERIA.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
