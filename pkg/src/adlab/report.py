"""Machine-readable reports: canonical JSON plus a fixed CSV dialect.

Identical config and seed produce byte-identical JSON. Floats are
emitted in their shortest round-trip form; any magnitude that can exceed
double range is stored as a (value, log_scale) pair.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .fitting import GrowthFit

REPORT_SCHEMA_VERSION = 1


def scaled_pair(value: float, log_scale: float = 0.0) -> dict:
    """Canonical (value, log_scale) representation of a raw magnitude."""
    return {"value": float(value), "log_scale": float(log_scale)}


def fit_to_dict(fit: GrowthFit | None) -> dict | None:
    if fit is None:
        return None
    return {
        "model": fit.model,
        "params": {k: float(v) for k, v in fit.params.items()},
        "r_squared": float(fit.r_squared),
        "aux": {k: (float(v) if isinstance(v, (int, float)) else v)
                for k, v in fit.aux.items()},
    }


def _sanitize(obj):
    """Make every numeric leaf JSON-safe and deterministic."""
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, complex):
        return {"re": _sanitize(obj.real), "im": _sanitize(obj.imag)}
    try:
        return _sanitize(float(obj))
    except (TypeError, ValueError):
        return str(obj)


@dataclass(frozen=True)
class Report:
    experiment: str
    records: list
    fits: dict = field(default_factory=dict)
    environment: dict = field(default_factory=dict)
    schema_version: int = REPORT_SCHEMA_VERSION

    def to_dict(self) -> dict:
        return _sanitize({
            "schema_version": self.schema_version,
            "experiment": self.experiment,
            "records": self.records,
            "fits": self.fits,
            "environment": self.environment,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True,
                          separators=(",", ": "), indent=1) + "\n"


def format_cell(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(path: str, header, rows):
    """Comma-separated, header row, UTF-8, LF endings, no quoting."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_cell(x) for x in row))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_report(report: Report, outputs, csv_table=None):
    """Write the report to each configured output target."""
    for out in outputs:
        if out["kind"] == "json":
            with open(out["path"], "w", encoding="utf-8", newline="") as fh:
                fh.write(report.to_json())
        elif out["kind"] == "csv":
            if csv_table is None:
                raise ValueError("this experiment produces no CSV table")
            header, rows = csv_table
            write_csv(out["path"], header, rows)
