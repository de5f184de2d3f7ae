"""Sweep configuration files (TOML).

Handles loading, validating and writing the settings of a sweep:
    - [network]: physical-layer constants
    - [simulation]: Monte Carlo run settings
    - [analytics]: closed-form settings
    - [sweep]: swept parameter, grid and outputs

Every key is optional; an empty file gives the defaults. Unknown keys are
rejected so typos do not silently fall back to a default.

Configuration structure:
    [network]
    lambda = 0.01
    theta = 5.0
    p = 0.2
    beta = 4.0
    r = 10.0

    [simulation]
    mode = "broadcast"
    slots_per_trial = 250000
    warmup_slots = "auto"

    [sweep]
    parameter = "r"
    grid = [2.0, 4.0, 6.0, 8.0, 10.0]
    outputs = ["mc_broadcast", "bound_broadcast"]
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Any, Callable, Dict, Mapping

from tomlkit import comment, document, dumps, nl, parse, table
from tomlkit.exceptions import ParseError

from .analytics import AnalyticsConfig
from .channel import NetworkParams
from .experiment import OUTPUT_COLUMNS, SweepSpec
from .monte_carlo import SimConfig
from .util import ensure_dir

APP_NAME = "spatial-aoi"
DEFAULT_CONFIG_PATH = Path.home() / ".config" / APP_NAME / "config.toml"


class ConfigError(ValueError):
    """Malformed or invalid configuration; the message names the file and key.

    Attributes:
        line / col: Position of a TOML syntax error (None otherwise)
    """

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        super().__init__(message)
        self.line = line
        self.col = col


def _is_int(v: Any) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _as_float(key: str, v: Any) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{key}: expected a finite number, got {v!r}")
    return float(v)


def _as_int(key: str, v: Any) -> int:
    if not _is_int(v):
        raise ConfigError(f"{key}: expected an integer, got {v!r}")
    return int(v)


def _as_str(key: str, v: Any) -> str:
    if not isinstance(v, str):
        raise ConfigError(f"{key}: expected a string, got {v!r}")
    return v


def _as_bool(key: str, v: Any) -> bool:
    if not isinstance(v, bool):
        raise ConfigError(f"{key}: expected true or false, got {v!r}")
    return v


def _as_warmup(key: str, v: Any) -> int | None:
    if v == "auto":
        return None
    if not _is_int(v):
        raise ConfigError(f'{key}: expected an integer or "auto", got {v!r}')
    return int(v)


def _as_float_list(key: str, v: Any) -> tuple[float, ...]:
    if not isinstance(v, list):
        raise ConfigError(f"{key}: expected an array of numbers, got {v!r}")
    return tuple(_as_float(f"{key}[{i}]", x) for i, x in enumerate(v))


def _as_str_list(key: str, v: Any) -> tuple[str, ...]:
    if not isinstance(v, list):
        raise ConfigError(f"{key}: expected an array of strings, got {v!r}")
    return tuple(_as_str(f"{key}[{i}]", x) for i, x in enumerate(v))


# section -> TOML key -> (dataclass field, converter)
_SCHEMA: Dict[str, Dict[str, tuple[str, Callable[[str, Any], Any]]]] = {
    "network": {
        "lambda": ("lam", _as_float),
        "theta": ("theta", _as_float),
        "p": ("p", _as_float),
        "beta": ("beta", _as_float),
        "r": ("r", _as_float),
        "interferer_lambda": ("interferer_lambda", _as_float),
    },
    "simulation": {
        "mode": ("mode", _as_str),
        "slots_per_trial": ("slots_per_trial", _as_int),
        "warmup_slots": ("warmup_slots", _as_warmup),
        "trials": ("trials", _as_int),
        "realizations": ("realizations", _as_int),
        "master_seed": ("master_seed", _as_int),
        "truncation_rel_tol": ("truncation_rel_tol", _as_float),
        "workers": ("workers", _as_int),
        "max_delay_slots": ("max_delay_slots", _as_int),
        "batch_elements": ("batch_elements", _as_int),
    },
    "analytics": {
        "tail_tol": ("tail_tol", _as_float),
        "broadcast_node_cap": ("broadcast_node_cap", _as_int),
        "collection_node_cap": ("collection_node_cap", _as_int),
        "epsilon": ("epsilon", _as_float),
        "factor_form": ("factor_form", _as_str),
        "collection_mu": ("collection_mu", _as_str),
    },
    "sweep": {
        "parameter": ("parameter", _as_str),
        "grid": ("grid", _as_float_list),
        "outputs": ("outputs", _as_str_list),
        "record_runtime": ("record_runtime", _as_bool),
    },
}


def _section(raw: Mapping[str, Any], name: str, source: str) -> Dict[str, Any]:
    data = raw.get(name, {})
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: [{name}] must be a table")
    schema = _SCHEMA[name]
    out: Dict[str, Any] = {}
    for key, value in data.items():
        if key not in schema:
            raise ConfigError(
                f"{source}: unknown key '{name}.{key}' (known: {', '.join(schema)})"
            )
        attr, convert = schema[key]
        out[attr] = convert(f"{name}.{key}", value)
    return out


def _build(kind: str, factory: Callable[..., Any], kwargs: Dict[str, Any], source: str) -> Any:
    try:
        return factory(**kwargs)
    except ValueError as e:
        raise ConfigError(f"{source}: [{kind}] {e}") from e


def parse_sweep_spec(text: str, source: str = "<config>") -> SweepSpec:
    """Parse TOML text into a validated SweepSpec.

    Raises:
        ConfigError: Syntax error (with line/column), unknown key, wrong type
            or a value outside its invariant
    """
    try:
        raw = parse(text).unwrap()
    except ParseError as e:
        raise ConfigError(f"{source}: {e}", line=e.line, col=e.col) from e

    unknown = [name for name in raw if name not in _SCHEMA]
    if unknown:
        raise ConfigError(f"{source}: unknown section(s) {unknown} (known: {', '.join(_SCHEMA)})")

    params = _build("network", NetworkParams, _section(raw, "network", source), source)
    sim_kwargs = _section(raw, "simulation", source)
    base = _build("simulation", SimConfig, {**sim_kwargs, "params": params}, source)
    analytics = _build("analytics", AnalyticsConfig, _section(raw, "analytics", source), source)

    sweep_kwargs = _section(raw, "sweep", source)
    sweep_kwargs.setdefault("grid", (getattr(params, _grid_field(sweep_kwargs)),))
    sweep_kwargs.update(base=base, analytics=analytics)
    return _build("sweep", SweepSpec, sweep_kwargs, source)


def _grid_field(sweep_kwargs: Mapping[str, Any]) -> str:
    return {"r": "r", "lambda": "lam", "p": "p"}.get(sweep_kwargs.get("parameter", "r"), "r")


def load_config(path: Path = DEFAULT_CONFIG_PATH) -> SweepSpec:
    """Load a sweep configuration file.

    Raises:
        FileNotFoundError: If the file doesn't exist
        ConfigError: If the file is malformed or invalid

    Example:
        >>> spec = load_config(Path("configs/radius_desk.toml"))
        >>> spec.parameter, spec.grid[:2]
        ('r', (2.0, 4.0))
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    return parse_sweep_spec(path.read_text(encoding="utf-8"), str(path))


def dump_sweep_spec(spec: SweepSpec) -> str:
    """TOML text that ``parse_sweep_spec`` reads back into an equal spec."""
    params, base, an = spec.base.params, spec.base, spec.analytics
    doc = document()

    network = table()
    network["lambda"] = params.lam
    network["theta"] = params.theta
    network["p"] = params.p
    network["beta"] = params.beta
    network["r"] = params.r
    if params.interferer_lambda is not None:
        network["interferer_lambda"] = params.interferer_lambda
    doc["network"] = network

    sim = table()
    sim["mode"] = base.mode
    sim["slots_per_trial"] = base.slots_per_trial
    sim["warmup_slots"] = "auto" if base.warmup_slots is None else base.warmup_slots
    sim["trials"] = base.trials
    sim["realizations"] = base.realizations
    sim["master_seed"] = base.master_seed
    sim["truncation_rel_tol"] = base.truncation_rel_tol
    sim["workers"] = base.workers
    sim["max_delay_slots"] = base.max_delay_slots
    sim["batch_elements"] = base.batch_elements
    doc["simulation"] = sim

    analytics = table()
    analytics["tail_tol"] = an.tail_tol
    analytics["broadcast_node_cap"] = an.broadcast_node_cap
    analytics["collection_node_cap"] = an.collection_node_cap
    analytics["epsilon"] = an.epsilon
    analytics["factor_form"] = an.factor_form
    analytics["collection_mu"] = an.collection_mu
    doc["analytics"] = analytics

    sweep = table()
    sweep["parameter"] = spec.parameter
    sweep["grid"] = list(spec.grid)
    sweep["outputs"] = list(spec.outputs)
    sweep["record_runtime"] = spec.record_runtime
    doc["sweep"] = sweep
    return dumps(doc)


def save_config(spec: SweepSpec, path: Path) -> None:
    """Write ``spec`` to ``path`` (parent directories created)."""
    path = ensure_dir(Path(path).parent) / Path(path).name
    path.write_text(dump_sweep_spec(spec), encoding="utf-8")


def write_default_config(path: Path = DEFAULT_CONFIG_PATH) -> bool:
    """Create a commented default config if ``path`` is missing.

    Returns:
        True if the file was created, False if it already existed (never overwritten)
    """
    path = Path(path)
    if path.exists():
        return False
    ensure_dir(path.parent)

    doc = parse(dump_sweep_spec(SweepSpec()))
    header = document()
    header.add(comment(f"{APP_NAME} sweep configuration; every key is optional."))
    header.add(comment("Defaults: lambda=0.01, theta=5, p=0.2, beta=4, r=10."))
    header.add(comment('warmup_slots = "auto" picks max(1e4, 20 H_n / mu_min), capped at 1e6.'))
    header.add(comment(f"outputs: any of {', '.join(OUTPUT_COLUMNS)}"))
    header.add(nl())
    path.write_text(dumps(header) + dumps(doc), encoding="utf-8")
    return True
