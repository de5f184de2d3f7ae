"""Parameter sweeps over radius, density and medium access probability.

Provides:
    - SweepSpec: swept parameter, grid, base run settings and requested outputs
    - run_sweep(): evaluates every output at every grid point
    - SweepResult / SweepRow: the resulting table
    - emit_csv(): writes the table in the fixed CSV schema

CSV schema::

    sweep_param,value,output,mean,ci95,seed,slots,trials,realizations,runtime_s

Floats are written with 9 significant digits. Failed points (see
POINT_FAILURES) are kept as rows with empty mean/ci95 and the sweep continues.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from .analytics import (
    AnalyticsConfig,
    CapacityError,
    ProbabilityMassError,
    aob_upper_bound,
    exact_eaoc,
    exact_eaob,
    expected_aoc_bound,
    independent_bound_eaob,
)
from .channel import BROADCAST, COLLECTION, RAYLEIGH, NetworkParams
from .geometry import Realization
from .monte_carlo import (
    SimConfig,
    SimulationTimeoutError,
    confidence_half_width,
    indexed_realization,
    run_spatial_average,
)
from .util import LOG, ensure_dir

SWEEP_PARAMETERS = ("r", "lambda", "p")

# Requested output -> value of the CSV ``output`` column, in emission order.
OUTPUT_COLUMNS: Dict[str, str] = {
    "mc_broadcast": "mc_aob",
    "mc_collection": "mc_aoc",
    "exact_broadcast": "exact_aob",
    "exact_collection": "exact_aoc",
    "bound_broadcast": "bound_aob_diffeq",
    "bound_collection": "bound_aoc_cc",
    "conjecture_bound": "conj_indep_aob",
}
BOUND_OUTPUTS = ("bound_broadcast", "bound_collection")

# Errors that fail a single grid point; the sweep records NaN and moves on.
POINT_FAILURES = (CapacityError, ProbabilityMassError, SimulationTimeoutError)

CSV_COLUMNS = [
    "sweep_param",
    "value",
    "output",
    "mean",
    "ci95",
    "seed",
    "slots",
    "trials",
    "realizations",
    "runtime_s",
]

_PARAM_FIELDS = {"r": "r", "lambda": "lam", "p": "p"}


@dataclass(frozen=True)
class SweepSpec:
    """One sweep: a parameter, its grid and what to compute at each point.

    Attributes:
        parameter: "r", "lambda" or "p"
        grid: Strictly increasing parameter values
        base: Run settings; the swept field of base.params is replaced per point
        outputs: Requested outputs (keys of OUTPUT_COLUMNS), emitted in canonical order
        analytics: Closed-form settings
        record_runtime: Fill the runtime_s column (makes CSVs run-dependent)
    """

    parameter: str = "r"
    grid: Tuple[float, ...] = (10.0,)
    base: SimConfig = field(default_factory=SimConfig)
    outputs: Tuple[str, ...] = tuple(OUTPUT_COLUMNS)
    analytics: AnalyticsConfig = field(default_factory=AnalyticsConfig)
    record_runtime: bool = False

    def __post_init__(self) -> None:
        if self.parameter not in SWEEP_PARAMETERS:
            raise ValueError(
                f"parameter must be one of {SWEEP_PARAMETERS}, got {self.parameter!r}"
            )
        grid = tuple(float(v) for v in self.grid)
        if not grid:
            raise ValueError("grid must not be empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError(f"grid must be strictly increasing, got {list(grid)}")
        object.__setattr__(self, "grid", grid)

        unknown = [o for o in self.outputs if o not in OUTPUT_COLUMNS]
        if unknown:
            raise ValueError(f"unknown output(s) {unknown}; choose from {list(OUTPUT_COLUMNS)}")
        if not self.outputs:
            raise ValueError("outputs must not be empty")
        ordered = tuple(o for o in OUTPUT_COLUMNS if o in self.outputs)
        object.__setattr__(self, "outputs", ordered)

        for value in grid:
            params = self.params_at(value)
            if "bound_collection" in ordered and not self.analytics.epsilon < params.r:
                raise ValueError(
                    f"epsilon ({self.analytics.epsilon}) must be < r ({params.r}) "
                    "for the collection bound"
                )

    def params_at(self, value: float) -> NetworkParams:
        """Network parameters at one grid point (validated)."""
        return replace(self.base.params, **{_PARAM_FIELDS[self.parameter]: value})

    def config_at(self, value: float, mode: Optional[str] = None) -> SimConfig:
        return replace(self.base, params=self.params_at(value), mode=mode or self.base.mode)


@dataclass(frozen=True)
class SweepRow:
    """One CSV row; mean and ci95 are NaN for a failed point."""

    sweep_param: str
    value: float
    output: str
    mean: float
    ci95: float
    seed: int
    slots: int
    trials: int
    realizations: int
    runtime_s: Optional[float] = None


@dataclass
class SweepResult:
    """Rows of a sweep in grid-then-output order.

    Attributes:
        rows: One row per grid point per output
        failures: Rows recorded as NaN after one of POINT_FAILURES
    """

    rows: List[SweepRow] = field(default_factory=list)
    failures: int = 0

    def to_frame(self) -> pd.DataFrame:
        data = [
            {**asdict(row), "runtime_s": np.nan if row.runtime_s is None else row.runtime_s}
            for row in self.rows
        ]
        return pd.DataFrame(data, columns=CSV_COLUMNS)


def emit_csv(result: SweepResult, path: str | Path) -> Path:
    """Write ``result`` in the CSV schema (header only when empty).

    Missing values (failed points, unrecorded runtime) are written empty.
    Identical results give byte-identical files.
    """
    out = ensure_dir(Path(path).parent) / Path(path).name
    frame = result.to_frame()
    for col in ("seed", "slots", "trials", "realizations"):
        frame[col] = frame[col].astype("int64")
    frame.to_csv(out, index=False, float_format="%.9g", na_rep="", lineterminator="\n")
    return out


class _PointCache:
    """Per-realization values at one grid point, shared between outputs."""

    def __init__(self, config: SimConfig):
        self.config = config
        self._realizations: Dict[int, Realization] = {}
        self.values: Dict[str, List[float]] = {}

    def realization(self, index: int) -> Realization:
        if index not in self._realizations:
            self._realizations[index] = indexed_realization(self.config, index)
        return self._realizations[index]

    def per_realization(self, key: str, fn: Callable[[Realization], float]) -> List[float]:
        if key not in self.values:
            self.values[key] = [
                fn(self.realization(k)) for k in range(self.config.realizations)
            ]
        return self.values[key]


def _check_conjecture(cache: _PointCache, value: float, form: str) -> None:
    exact = cache.values.get("exact_broadcast")
    bound = cache.values.get("conjecture_bound")
    if exact is None or bound is None:
        return
    if form != RAYLEIGH:
        # exact_eaob always uses the rayleigh joint table
        LOG.debug("Independent-reception check skipped for factor form %r", form)
        return
    for k, (e, b) in enumerate(zip(exact, bound)):
        if e > b * (1.0 + 1e-9):
            LOG.warning(
                "Independent-reception bound violated at value=%g realization %d: "
                "exact %.9g > bound %.9g",
                value,
                k,
                e,
                b,
            )


def _evaluate(
    output: str, spec: SweepSpec, value: float, cache: _PointCache
) -> Tuple[float, float, int, int, int]:
    """(mean, ci95, slots, trials, realizations) of one output at one grid point."""
    cfg = cache.config
    params = cfg.params
    an = spec.analytics
    if output in ("mc_broadcast", "mc_collection"):
        mode = BROADCAST if output == "mc_broadcast" else COLLECTION
        res = run_spatial_average(replace(cfg, mode=mode))
        return res.mean_age, res.ci_half_width, res.slots, res.trials, res.realization_count
    if output == "bound_broadcast":
        return aob_upper_bound(params.r, params), 0.0, 0, 0, 0
    if output == "bound_collection":
        bound = expected_aoc_bound(params.r, params, an.epsilon, an.factor_form)
        return bound, 0.0, 0, 0, 0

    fns: Dict[str, Callable[[Realization], float]] = {
        "exact_broadcast": lambda rz: exact_eaob(
            rz, params, an.tail_tol, an.broadcast_node_cap
        ),
        "exact_collection": lambda rz: exact_eaoc(
            rz, params, an.collection_mu, an.factor_form, an.collection_node_cap
        ),
        "conjecture_bound": lambda rz: independent_bound_eaob(
            rz, params, an.factor_form, an.collection_node_cap
        ),
    }
    values = cache.per_realization(output, fns[output])
    if output in ("exact_broadcast", "conjecture_bound"):
        _check_conjecture(cache, value, an.factor_form)
    return float(np.mean(values)), confidence_half_width(values), 0, 0, len(values)


def run_sweep(spec: SweepSpec, csv_path: Optional[str | Path] = None) -> SweepResult:
    """Evaluate every requested output at every grid point, in grid order.

    With ``csv_path`` the table is rewritten after each row so that an
    interrupted sweep leaves its finished rows on disk.
    """
    result = SweepResult()
    seed = spec.base.master_seed
    LOG.info(
        "Sweep over %s: %d point(s) x %d output(s)",
        spec.parameter,
        len(spec.grid),
        len(spec.outputs),
    )
    for value in spec.grid:
        cache = _PointCache(spec.config_at(value))
        LOG.info("Point %s=%g", spec.parameter, value)
        for output in spec.outputs:
            started = time.perf_counter()
            try:
                mean, ci95, slots, trials, reals = _evaluate(output, spec, value, cache)
            except POINT_FAILURES as e:
                LOG.warning("%s at %s=%g failed: %s", output, spec.parameter, value, e)
                result.failures += 1
                mean, ci95, slots, trials, reals = math.nan, math.nan, 0, 0, 0
            runtime = time.perf_counter() - started
            result.rows.append(
                SweepRow(
                    sweep_param=spec.parameter,
                    value=value,
                    output=OUTPUT_COLUMNS[output],
                    mean=mean,
                    ci95=ci95,
                    seed=seed,
                    slots=slots,
                    trials=trials,
                    realizations=reals,
                    runtime_s=runtime if spec.record_runtime else None,
                )
            )
            LOG.info("  %-17s %.9g +- %.3g (%.1fs)", OUTPUT_COLUMNS[output], mean, ci95, runtime)
            if csv_path is not None:
                emit_csv(result, csv_path)
    return result
