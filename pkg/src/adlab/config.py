"""Declarative experiment configuration (versioned JSON).

A config is a single JSON object; parse -> serialize -> parse is the
identity. schema_version is mandatory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ConfigError

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ExperimentConfig:
    schema_version: int
    experiment: str
    family: dict
    epsilon_grid: tuple[float, ...]
    grid_size: int = 65
    tol: float = 1e-8
    q_max: int = 25
    gap_floor: float = 0.5
    seed: int = 0
    outputs: tuple = ()
    options: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "schema_version": self.schema_version,
            "experiment": self.experiment,
            "family": self.family,
            "epsilon_grid": list(self.epsilon_grid),
            "grid_size": self.grid_size,
            "tol": self.tol,
            "q_max": self.q_max,
            "gap_floor": self.gap_floor,
            "seed": self.seed,
            "outputs": [dict(o) for o in self.outputs],
        }
        if self.options:
            d["options"] = self.options
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _require(cond: bool, message: str):
    if not cond:
        raise ConfigError(message)


def validate_config(raw: dict) -> ExperimentConfig:
    _require(isinstance(raw, dict), "config root must be a JSON object")
    _require("schema_version" in raw, "missing required field 'schema_version'")
    _require(raw["schema_version"] == SCHEMA_VERSION,
             f"unsupported schema_version {raw['schema_version']!r}")
    for key in ("experiment", "family", "epsilon_grid"):
        _require(key in raw, f"missing required field {key!r}")
    eps = raw["epsilon_grid"]
    _require(isinstance(eps, list) and eps, "'epsilon_grid' must be a non-empty list")
    _require(all(isinstance(e, (int, float)) and 0.0 < e <= 1.0 for e in eps),
             "'epsilon_grid' entries must lie in (0, 1]")
    _require(len(set(eps)) == len(eps), "'epsilon_grid' entries must be distinct")
    _require(all(a > b for a, b in zip(eps, eps[1:])),
             "'epsilon_grid' must be strictly descending")
    n = raw.get("grid_size", 65)
    _require(isinstance(n, int) and n >= 33 and n % 2 == 1,
             "'grid_size' must be an odd integer >= 33")
    tol = raw.get("tol", 1e-8)
    _require(isinstance(tol, (int, float)) and tol > 0, "'tol' must be positive")
    q_max = raw.get("q_max", 25)
    _require(isinstance(q_max, int) and q_max >= 0, "'q_max' must be a nonnegative integer")
    gap_floor = raw.get("gap_floor", 0.5)
    _require(isinstance(gap_floor, (int, float)) and gap_floor > 0,
             "'gap_floor' must be positive")
    seed = raw.get("seed", 0)
    _require(isinstance(seed, int), "'seed' must be an integer")
    outputs = raw.get("outputs", [])
    _require(isinstance(outputs, list), "'outputs' must be a list")
    for o in outputs:
        _require(isinstance(o, dict) and "kind" in o and "path" in o,
                 "each output needs 'kind' and 'path'")
        _require(o["kind"] in ("json", "csv"), f"unknown output kind {o.get('kind')!r}")
    options = raw.get("options", {})
    _require(isinstance(options, dict), "'options' must be an object")
    known = {"schema_version", "experiment", "family", "epsilon_grid", "grid_size",
             "tol", "q_max", "gap_floor", "seed", "outputs", "options"}
    unknown = set(raw) - known
    _require(not unknown, f"unknown config fields: {sorted(unknown)}")
    return ExperimentConfig(
        schema_version=SCHEMA_VERSION,
        experiment=str(raw["experiment"]),
        family=dict(raw["family"]),
        epsilon_grid=tuple(float(e) for e in eps),
        grid_size=n,
        tol=float(tol),
        q_max=q_max,
        gap_floor=float(gap_floor),
        seed=seed,
        outputs=tuple(outputs),
        options=dict(options),
    )


def parse_config(text: str) -> ExperimentConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: line {exc.lineno}, "
                          f"column {exc.colno}: {exc.msg}") from exc
    return validate_config(raw)


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
