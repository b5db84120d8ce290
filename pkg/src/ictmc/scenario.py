"""Scenario files and the built-in call-center experiments.

A scenario file is either a JSON object or line-oriented ``key: value`` text
whose values are JSON literals (bare words such as ``on``/``off``/``empty``
are accepted as strings). Keys:

    horizon_minutes, step_minutes, servers, mu_per_min, gamma,
    patience_mean_minutes (or abandonment_rate_per_min), queue_capacity,
    epsilon_step, epsilon_total, detection, budget_policy, tail_bound,
    lambda_per_min  or  arrival: {"sinusoidal": {"base", "amplitude", "cycles"}},
    initial_state

``servers`` and ``mu_per_min`` may be scalars or per-step lists.
"""

from __future__ import annotations

import json
import math
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from scipy.integrate import quad

from .model import ScenarioConfig, StepProfile

# label -> (servers, queue capacity)
BUILTIN_SIZES: Dict[int, Tuple[int, int]] = {
    54: (30, 24),
    150: (100, 50),
    390: (300, 90),
    1200: (1000, 200),
    3300: (3000, 300),
    1250: (1000, 250),
    1300: (1000, 300),
    1400: (1000, 400),
}

# band -> (base, amplitude) of the load rho(t) = base + amplitude * sin(3 pi t / T)
LOAD_BANDS: Dict[str, Tuple[float, float]] = {
    "wide": (0.85, 0.2),
    "narrow": (1.0, 0.05),
}

# Mean handle time 5 minutes. Only the load shape is given for the experiments,
# so mu is a free choice and lambda follows from rho * s * mu.
DEFAULT_MU = 0.2
HORIZON_MINUTES = 24 * 60.0
STEP_MINUTES = 5.0
CYCLES = 1.5


class ScenarioError(ValueError):
    """A scenario file could not be parsed."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class InfeasibleScenarioError(ScenarioError):
    """The file parsed but the values do not form a valid scenario."""


def clamp_budget(data: Dict[str, Any], n_steps: int) -> Optional[str]:
    """Raise ``epsilon_total`` to the truncation floor; returns a warning if it had to."""
    eps_step, eps_total = data.get("epsilon_step"), data.get("epsilon_total")
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in (eps_step, eps_total)):
        return None
    floor = n_steps * eps_step
    if eps_total < floor:
        data["epsilon_total"] = floor
        return (
            f"epsilon_total {eps_total:g} is below {n_steps} x epsilon_step = {floor:g}; "
            "using the floor, steady-state detection will not fire"
        )
    return None


def sinusoidal_rates(
    servers,
    mu,
    base: float,
    amplitude: float,
    n_steps: int,
    step: float,
    cycles: float = CYCLES,
    averaging: str = "midpoint",
) -> np.ndarray:
    """Per-step arrival rates ``s mu (base + amplitude sin(2 pi cycles t / T))``."""
    horizon = n_steps * step
    servers = np.broadcast_to(np.asarray(servers, dtype=float), (n_steps,))
    mu = np.broadcast_to(np.asarray(mu, dtype=float), (n_steps,))
    omega = 2 * math.pi * cycles / horizon

    if averaging == "midpoint":
        t_mid = (np.arange(n_steps) + 0.5) * step
        shape = base + amplitude * np.sin(omega * t_mid)
    elif averaging == "integral":
        shape = np.array([
            quad(lambda t: base + amplitude * math.sin(omega * t), j * step, (j + 1) * step)[0] / step
            for j in range(n_steps)
        ])
    else:
        raise ValueError(f"unknown averaging {averaging!r}")
    return servers * mu * shape


def builtin_scenario(
    size_label: Union[int, Tuple[int, int]] = 150,
    load_band: str = "wide",
    gamma: float = 0.97,
    patience_mean: float = 4.0,
    epsilon_step: float = 1e-7,
    epsilon_total: float = 3e-2,
    detection: bool = True,
    mu: float = DEFAULT_MU,
    averaging: str = "midpoint",
    budget_policy: str = "restart",
    tail_bound: str = "observed",
) -> ScenarioConfig:
    """The 24 h, 288-step call-center day with a two-peak sinusoidal load.

    ``size_label`` is one of ``BUILTIN_SIZES`` or an explicit ``(servers, queue)``
    pair; ``load_band`` selects the sinusoid of the load from ``LOAD_BANDS``.
    Per-step rates are the sinusoid at the step midpoint unless
    ``averaging="integral"``.
    """
    if isinstance(size_label, tuple):
        s, q = size_label
    else:
        try:
            s, q = BUILTIN_SIZES[int(size_label)]
        except KeyError:
            raise ValueError(
                f"unknown size label {size_label!r}; known: {sorted(BUILTIN_SIZES)}"
            ) from None
    try:
        base, amplitude = LOAD_BANDS[load_band]
    except KeyError:
        raise ValueError(f"unknown load band {load_band!r}; known: {sorted(LOAD_BANDS)}") from None

    n_steps = int(round(HORIZON_MINUTES / STEP_MINUTES))
    lam = sinusoidal_rates(s, mu, base, amplitude, n_steps, STEP_MINUTES, averaging=averaging)
    eta = 0.0 if math.isinf(patience_mean) else 1.0 / patience_mean
    return ScenarioConfig(
        horizon=n_steps * STEP_MINUTES,
        step_length=STEP_MINUTES,
        steps=[StepProfile(float(l), mu, s) for l in lam],
        gamma=gamma,
        eta=eta,
        queue_capacity=q,
        epsilon_step=epsilon_step,
        epsilon_total=epsilon_total,
        detection_enabled=detection,
        budget_policy=budget_policy,
        tail_bound=tail_bound,
    )


def scenario_to_dict(config: ScenarioConfig) -> Dict[str, Any]:
    return {
        "horizon_minutes": config.horizon,
        "step_minutes": config.step_length,
        "servers": [p.servers for p in config.steps],
        "mu_per_min": [p.mu for p in config.steps],
        "lambda_per_min": [p.lam for p in config.steps],
        "gamma": config.gamma,
        "abandonment_rate_per_min": config.eta,
        "queue_capacity": config.queue_capacity,
        "epsilon_step": config.epsilon_step,
        "epsilon_total": config.epsilon_total,
        "detection": "on" if config.detection_enabled else "off",
        "budget_policy": config.budget_policy,
        "tail_bound": config.tail_bound,
        "initial_state": "empty",
    }


def dumps_scenario(config: ScenarioConfig) -> str:
    return json.dumps(scenario_to_dict(config), indent=1)


def _parse_lines(text: str) -> Tuple[Dict[str, Any], Dict[str, int]]:
    data, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition(":")
        key = key.strip()
        if not sep or not key:
            raise ScenarioError(f"expected 'key: value', got {raw!r}", lineno)
        value = value.strip()
        try:
            data[key] = json.loads(value)
        except json.JSONDecodeError:
            if value and all(c.isalnum() or c in "_-." for c in value):
                data[key] = value
            else:
                raise ScenarioError(f"cannot parse value for {key!r}: {value!r}", lineno) from None
        lines[key] = lineno
    return data, lines


def parse_scenario_text(text: str, on_warning=None) -> ScenarioConfig:
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioError(exc.msg, exc.lineno) from None
        lines = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            for key in data:
                if f'"{key}"' in raw:
                    lines.setdefault(key, lineno)
    else:
        data, lines = _parse_lines(text)
    if not isinstance(data, dict):
        raise ScenarioError("top level must be an object of key/value pairs", 1)
    return scenario_from_dict(data, lines, on_warning=on_warning)


def load_scenario(path, on_warning=None) -> ScenarioConfig:
    """Read a scenario file.

    With ``on_warning`` given, a total budget below the truncation floor is
    raised to the floor and the message is passed to ``on_warning`` instead
    of failing.
    """
    with open(path, encoding="utf-8") as fh:
        return parse_scenario_text(fh.read(), on_warning=on_warning)


_FLAGS = {"on": True, "off": False, "true": True, "false": False, "yes": True, "no": False}


def scenario_from_dict(
    data: Dict[str, Any], lines: Optional[Dict[str, int]] = None, on_warning=None
) -> ScenarioConfig:
    lines = lines or {}
    data = dict(data)

    def fail(key, message):
        raise ScenarioError(f"{key}: {message}", lines.get(key))

    def need(key):
        if key not in data:
            raise ScenarioError(f"missing required key {key!r}")
        return data[key]

    def number(key, value=None):
        value = need(key) if value is None else value
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            fail(key, f"expected a number, got {value!r}")
        return float(value)

    known = {
        "horizon_minutes", "step_minutes", "servers", "mu_per_min", "gamma",
        "patience_mean_minutes", "abandonment_rate_per_min", "queue_capacity",
        "epsilon_step", "epsilon_total", "detection", "arrival", "lambda_per_min",
        "initial_state", "budget_policy", "tail_bound",
    }
    for key in data:
        if key not in known:
            fail(key, "unknown key")

    horizon = number("horizon_minutes")
    step = number("step_minutes")
    if step <= 0:
        fail("step_minutes", "must be positive")
    n_steps = int(round(horizon / step))
    if n_steps < 1 or n_steps * step != horizon:
        fail("horizon_minutes", f"{horizon} is not a whole number of {step}-minute steps")

    def per_step(key, cast):
        value = need(key)
        if isinstance(value, list):
            if len(value) != n_steps:
                fail(key, f"list has {len(value)} entries, expected {n_steps}")
            return [cast(key, v) for v in value]
        return [cast(key, value)] * n_steps

    def as_int(key, v):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
            fail(key, f"expected an integer, got {v!r}")
        return int(v)

    servers = per_step("servers", as_int)
    mu = per_step("mu_per_min", lambda k, v: number(k, v))

    if "lambda_per_min" in data and "arrival" in data:
        fail("arrival", "give either lambda_per_min or arrival, not both")
    if "lambda_per_min" in data:
        lam = per_step("lambda_per_min", lambda k, v: number(k, v))
    elif "arrival" in data:
        spec = data["arrival"]
        if not (isinstance(spec, dict) and set(spec) == {"sinusoidal"} and isinstance(spec["sinusoidal"], dict)):
            fail("arrival", 'expected {"sinusoidal": {"base": .., "amplitude": .., "cycles": ..}}')
        sin = spec["sinusoidal"]
        extra = set(sin) - {"base", "amplitude", "cycles", "averaging"}
        if extra:
            fail("arrival", f"unknown sinusoidal fields {sorted(extra)}")
        try:
            lam = list(sinusoidal_rates(
                servers, mu, float(sin["base"]), float(sin["amplitude"]), n_steps, step,
                cycles=float(sin.get("cycles", CYCLES)),
                averaging=sin.get("averaging", "midpoint"),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            fail("arrival", f"bad sinusoidal spec ({exc})")
    else:
        raise ScenarioError("missing arrival: give lambda_per_min or arrival")

    if "abandonment_rate_per_min" in data:
        eta = number("abandonment_rate_per_min")
    else:
        patience = data.get("patience_mean_minutes")
        if patience is None or patience == "inf":
            eta = 0.0
        else:
            patience = number("patience_mean_minutes")
            if patience <= 0:
                fail("patience_mean_minutes", "must be positive")
            eta = 1.0 / patience

    detection = data.get("detection", True)
    if isinstance(detection, str):
        if detection.lower() not in _FLAGS:
            fail("detection", f"expected on/off, got {detection!r}")
        detection = _FLAGS[detection.lower()]
    elif not isinstance(detection, bool):
        fail("detection", f"expected on/off, got {detection!r}")

    initial = data.get("initial_state", "empty")
    if initial != "empty":
        fail("initial_state", f"only 'empty' is supported, got {initial!r}")

    queue = as_int("queue_capacity", need("queue_capacity"))
    if on_warning is not None:
        msg = clamp_budget(data, n_steps)
        if msg:
            on_warning(msg)
    try:
        steps = [StepProfile(l, m, s) for l, m, s in zip(lam, mu, servers)]
        return ScenarioConfig(
            horizon=horizon,
            step_length=step,
            steps=steps,
            gamma=number("gamma"),
            eta=eta,
            queue_capacity=queue,
            epsilon_step=number("epsilon_step"),
            epsilon_total=number("epsilon_total"),
            detection_enabled=detection,
            budget_policy=data.get("budget_policy", "restart"),
            tail_bound=data.get("tail_bound", "observed"),
        )
    except ValueError as exc:
        raise InfeasibleScenarioError(str(exc)) from None
