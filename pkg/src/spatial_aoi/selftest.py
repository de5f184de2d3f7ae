"""Quick numerical checks of an installation (seconds, no files written)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from . import analytics
from .age_dynamics import age_series
from .channel import NetworkParams, constant_C, succ_prob_spatial_average
from .geometry import Realization
from .monte_carlo import SimConfig, derive_stream, run_instance
from .util import LOG


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _close(value: float, expected: float, tol: float) -> bool:
    return math.isfinite(value) and abs(value - expected) <= tol


def _gamma_constant() -> CheckResult:
    value = constant_C(1.0, 4.0)
    return CheckResult("C(theta=1, beta=4) = pi/2", _close(value, math.pi / 2, 1e-12), f"{value!r}")


def _aob_bound() -> CheckResult:
    value = analytics.aob_upper_bound(10.0, NetworkParams())
    ok = _close(value, 57.5, 0.2)
    return CheckResult("broadcast bound at defaults ~ 57.5", ok, f"{value:.6g}")


def _aoc_bound() -> CheckResult:
    params = NetworkParams()
    value = analytics.aoc_upper_bound(1, 10.0, 1.0, params)
    expected = 1.0 / succ_prob_spatial_average(10.0, params)
    ok = _close(value, expected, 1e-9)
    return CheckResult("collection bound n=1 is 1/mu(r)", ok, f"{value:.6g}")


def _collector() -> CheckResult:
    value = analytics.collector_expectation([1 / 3, 1 / 3, 1 / 3])
    return CheckResult("uniform collector n=3 = 5.5", _close(value, 5.5, 1e-12), f"{value!r}")


def _independent_max() -> CheckResult:
    value = analytics.independent_geometric_max_mean([0.5, 0.5])
    return CheckResult(
        "max of two Geom(0.5) = 8/3", _close(value, 8.0 / 3.0, 1e-12), f"{value!r}"
    )


def _max_min() -> CheckResult:
    value = analytics.max_min_identity([2, 5, 7])
    return CheckResult("max-min identity {2,5,7} = 7", value == 7, f"{value!r}")


def _correlated_broadcast() -> CheckResult:
    nodes = np.array([[1.0, 0.0], [0.0, 2.0], [-3.0, -1.0]])
    realization = Realization(nodes, np.zeros((0, 2)), 10.0, 20.0)
    value = analytics.exact_eaob(realization, NetworkParams())
    return CheckResult(
        "interference-free broadcast EAoB = 1/p", _close(value, 5.0, 1e-8), f"{value!r}"
    )


def _sawtooth() -> CheckResult:
    received = np.array([[False], [True], [False], [False]])
    ages, _ = age_series(received)
    ok = ages[:, 0].tolist() == [2, 1, 2, 3]
    return CheckResult("age recursion sawtooth", ok, str(ages[:, 0].tolist()))


def _streams() -> CheckResult:
    a = derive_stream(11, (1, 2, 3)).random(100)
    b = derive_stream(11, (1, 2, 3)).random(100)
    c = derive_stream(11, (1, 2, 4)).random(100)
    ok = bool(np.array_equal(a, b) and not np.array_equal(a, c))
    return CheckResult("seeded streams reproducible and distinct", ok, "")


def _certain_reception() -> CheckResult:
    realization = Realization(np.array([[2.0, 0.0]]), np.zeros((0, 2)), 10.0, 20.0)
    config = SimConfig(NetworkParams(p=1.0), slots_per_trial=2000, warmup_slots=10, trials=2)
    value = run_instance(realization, config).mean_age
    return CheckResult("p=1 without interferers: age 1", value == 1.0, f"{value!r}")


CHECKS: List[Callable[[], CheckResult]] = [
    _gamma_constant,
    _aob_bound,
    _aoc_bound,
    _collector,
    _independent_max,
    _max_min,
    _correlated_broadcast,
    _sawtooth,
    _streams,
    _certain_reception,
]


def run_selftest() -> List[CheckResult]:
    """Run every check; exceptions count as failures."""
    results = []
    for check in CHECKS:
        try:
            result = check()
        except Exception as e:  # pylint: disable=broad-except
            result = CheckResult(check.__name__.lstrip("_"), False, f"{type(e).__name__}: {e}")
        if not result.passed:
            LOG.warning("Self-test failed: %s (%s)", result.name, result.detail)
        results.append(result)
    return results
