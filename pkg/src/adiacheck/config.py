"""Run configuration: parsing, validation and Hamiltonian construction."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

from . import hamiltonian as ham
from .conditions import Thresholds
from .propagate import PropagatorOptions

SCENARIO_FIELDS = {
    "amin": ("epsilon", "V", "omega0"),
    "landau_zener": ("v", "delta"),
    "constant": ("matrix",),
    "custom_csv": ("path",),
    "dual_of": ("scenario",),
    "random_smooth": ("dim", "seed"),
}
OPTIONAL_FIELDS = {
    "constant": ("matrix_imag",),
    "random_smooth": ("amplitude", "n_modes"),
}


class ConfigError(ValueError):
    """Invalid or unreadable configuration."""


@dataclass
class RunConfig:
    scenario: Dict[str, Any]
    horizon: Optional[float] = None
    initial_level: int = 0
    propagator: Dict[str, Any] = field(default_factory=lambda: {"dt": None, "refinement": False, "unitarity_tol": 1e-10})
    thresholds: Dict[str, float] = field(default_factory=lambda: asdict(Thresholds()))
    outputs: Dict[str, Optional[str]] = field(default_factory=lambda: {"csv_dir": None, "json_path": None})
    sweep: Optional[Dict[str, Any]] = None

    def to_dict(self) -> Dict[str, Any]:
        return copy.deepcopy(asdict(self))

    @property
    def options(self) -> PropagatorOptions:
        return PropagatorOptions(**self.propagator)

    @property
    def threshold_values(self) -> Thresholds:
        return Thresholds(**self.thresholds)


def _number(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{name} must be finite")
    return float(value)


def _validate_scenario(sc: Any, where: str = "scenario") -> None:
    if not isinstance(sc, dict) or "kind" not in sc:
        raise ConfigError(f"{where} must be an object with a 'kind'")
    kind = sc["kind"]
    if kind not in SCENARIO_FIELDS:
        raise ConfigError(f"{where}: unknown kind {kind!r}; expected one of {sorted(SCENARIO_FIELDS)}")
    allowed = set(SCENARIO_FIELDS[kind]) | set(OPTIONAL_FIELDS.get(kind, ())) | {"kind"}
    for key in sc:
        if key not in allowed:
            raise ConfigError(f"{where}: unexpected field {key!r} for kind {kind!r}")
    for key in SCENARIO_FIELDS[kind]:
        if key not in sc:
            raise ConfigError(f"{where}: missing field {key!r} for kind {kind!r}")
    if kind == "amin":
        for k in ("epsilon", "V", "omega0"):
            _number(sc[k], f"{where}.{k}")
        if sc["V"] <= 0 or sc["omega0"] <= 0:
            raise ConfigError(f"{where}: V and omega0 must be positive")
    elif kind == "landau_zener":
        _number(sc["v"], f"{where}.v")
        if _number(sc["delta"], f"{where}.delta") == 0:
            raise ConfigError(f"{where}.delta must be non-zero")
    elif kind == "constant":
        try:
            import numpy as np
            M = np.array(sc["matrix"], dtype=float)
            if "matrix_imag" in sc:
                M = M + 1j * np.array(sc["matrix_imag"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}.matrix: {exc}") from None
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ConfigError(f"{where}.matrix must be square")
    elif kind == "custom_csv":
        if not isinstance(sc["path"], str):
            raise ConfigError(f"{where}.path must be a string")
    elif kind == "dual_of":
        _validate_scenario(sc["scenario"], f"{where}.scenario")
    elif kind == "random_smooth":
        for k in ("dim", "seed"):
            if isinstance(sc[k], bool) or not isinstance(sc[k], int) or sc[k] < 0:
                raise ConfigError(f"{where}.{k} must be a non-negative integer")
        if sc["dim"] < 1:
            raise ConfigError(f"{where}.dim must be positive")
        if "amplitude" in sc:
            _number(sc["amplitude"], f"{where}.amplitude")


def from_dict(data: Dict[str, Any]) -> RunConfig:
    """Build and validate a config; unspecified fields take their defaults."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    known = {"scenario", "horizon", "T", "initial_level", "propagator", "thresholds", "outputs", "sweep"}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown config fields: {sorted(extra)}")
    if "scenario" not in data:
        raise ConfigError("config has no 'scenario'")
    cfg = RunConfig(scenario=copy.deepcopy(data["scenario"]))
    horizon = data.get("horizon", data.get("T"))
    cfg.horizon = None if horizon is None else _number(horizon, "horizon")
    cfg.initial_level = data.get("initial_level", 0)
    for name in ("propagator", "thresholds", "outputs"):
        block = data.get(name, {}) or {}
        if not isinstance(block, dict):
            raise ConfigError(f"{name} must be an object")
        target = getattr(cfg, name)
        for key, value in block.items():
            if key not in target:
                raise ConfigError(f"unknown field {name}.{key}")
            target[key] = value
    cfg.sweep = copy.deepcopy(data.get("sweep"))
    validate(cfg)
    return cfg


def load(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from None
    return from_dict(data)


def validate(cfg: RunConfig) -> None:
    _validate_scenario(cfg.scenario)
    if cfg.scenario["kind"] != "custom_csv" or cfg.horizon is not None:
        if cfg.horizon is None:
            raise ConfigError("horizon (T) is required")
        if cfg.horizon <= 0:
            raise ConfigError("horizon must be positive")
    lvl = cfg.initial_level
    if isinstance(lvl, bool) or not isinstance(lvl, int) or lvl < 0:
        raise ConfigError("initial_level must be a non-negative integer")
    dim = scenario_dim(cfg.scenario)
    if dim is not None and lvl >= dim:
        raise ConfigError(f"initial_level {lvl} >= dimension {dim}")
    p = cfg.propagator
    if p.get("dt") is not None and _number(p["dt"], "propagator.dt") <= 0:
        raise ConfigError("propagator.dt must be positive")
    if not isinstance(p.get("refinement"), bool):
        raise ConfigError("propagator.refinement must be a boolean")
    _number(p.get("unitarity_tol"), "propagator.unitarity_tol")
    for k, v in cfg.thresholds.items():
        if _number(v, f"thresholds.{k}") < 0:
            raise ConfigError(f"thresholds.{k} must be non-negative")
    for k, v in cfg.outputs.items():
        if v is not None and not isinstance(v, str):
            raise ConfigError(f"outputs.{k} must be a path string")
    if cfg.sweep is not None:
        _validate_sweep(cfg)


def _validate_sweep(cfg: RunConfig) -> None:
    sw = cfg.sweep
    if not isinstance(sw, dict) or set(sw) != {"parameter", "values"}:
        raise ConfigError("sweep must be an object with exactly 'parameter' and 'values'")
    values = sw["values"]
    if not isinstance(values, list) or not values:
        raise ConfigError("sweep.values must be a non-empty list")
    for v in values:
        _number(v, "sweep value")
    get_path(cfg.to_dict(), sw["parameter"])  # must resolve to a number
    for v in values:
        validate(with_parameter(cfg, sw["parameter"], v, check=False))


def scenario_dim(sc: Dict[str, Any]) -> Optional[int]:
    kind = sc["kind"]
    if kind in ("amin", "landau_zener"):
        return 2
    if kind == "constant":
        return len(sc["matrix"])
    if kind == "random_smooth":
        return sc["dim"]
    if kind == "dual_of":
        return scenario_dim(sc["scenario"])
    return None


def get_path(data: Dict[str, Any], path: str) -> float:
    node: Any = data
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"sweep parameter {path!r} does not resolve")
        node = node[part]
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise ConfigError(f"sweep parameter {path!r} is not numeric")
    return node


def with_parameter(cfg: RunConfig, path: str, value: float, check: bool = True) -> RunConfig:
    """Copy of ``cfg`` with the dotted ``path`` set to ``value`` and no sweep block."""
    data = cfg.to_dict()
    data.pop("sweep", None)
    parts = path.split(".")
    node = data
    for part in parts[:-1]:
        node = node[part]
    old = node[parts[-1]]
    node[parts[-1]] = int(value) if isinstance(old, int) and float(value).is_integer() else value
    new = RunConfig(**data)
    if check:
        validate(new)
    return new


def build_hamiltonian(scenario: Dict[str, Any], horizon: Optional[float],
                      opts: Optional[PropagatorOptions] = None) -> ham.TimeDependentHamiltonian:
    kind = scenario["kind"]
    if kind == "amin":
        return ham.amin(scenario["epsilon"], scenario["V"], scenario["omega0"], horizon)
    if kind == "landau_zener":
        return ham.landau_zener(scenario["v"], scenario["delta"], horizon)
    if kind == "constant":
        import numpy as np
        M = np.array(scenario["matrix"], dtype=complex)
        if "matrix_imag" in scenario:
            M = M + 1j * np.array(scenario["matrix_imag"], dtype=float)
        return ham.constant(M, horizon)
    if kind == "custom_csv":
        try:
            H = ham.read_csv(scenario["path"])
        except OSError as exc:
            raise ConfigError(f"cannot read {scenario['path']}: {exc}") from None
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if horizon is not None and abs(horizon - H.T) > 1e-12 * H.T:
            raise ConfigError(f"horizon {horizon} differs from the CSV horizon {H.T}")
        return H
    if kind == "random_smooth":
        return ham.random_smooth(scenario["dim"], scenario["seed"], horizon,
                                 scenario.get("amplitude", 0.05), scenario.get("n_modes", 2))
    if kind == "dual_of":
        from .dual import build_dual
        base = build_hamiltonian(scenario["scenario"], horizon, opts)
        return build_dual(base, opts).h_b
    raise ConfigError(f"unknown scenario kind {kind!r}")


def parse_values(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse sweep values {text!r}") from None
