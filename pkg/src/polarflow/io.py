"""Flat config files, CSV/JSON artifacts and run manifests.

Numbers are written with 17 significant digits so doubles round-trip.
"""

import csv
import hashlib
import io
import json
import math
from pathlib import Path

import numpy as np

from .dynamics import ConfigError, ScenarioConfig

AXES = ("x", "y", "z")

_CONFIG_TYPES = {
    "domain": str,
    "n_per_axis": int,
    "epsilon": float,
    "dt": float,
    "t_final": float,
    "velocity_field": str,
    "omega": float,
    "velocity_table": str,
    "velocity_noise": float,
    "refresh": str,
    "switching": str,
    "seed": int,
    "snapshot_every": int,
    "diagnostic_every": int,
}


def fmt(value):
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return format(float(value), ".17g")


def _parse_value(key, raw, kind):
    if kind is str:
        return raw
    if key in ("epsilon", "dt") and raw.lower() in ("auto", "h"):
        return None
    if key == "omega" and raw.lower() in ("pi", "π"):
        return math.pi
    try:
        if kind is int:
            return int(raw)
        return float(raw)
    except ValueError:
        raise ConfigError(key, f"expected {kind.__name__}, got {raw!r}") from None


def parse_config(text, base_dir=None):
    """Read ``key = value`` lines (``#`` comments, blank lines ignored)."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_TYPES:
            raise ConfigError(key, f"unknown key (line {lineno})")
        if key in values:
            raise ConfigError(key, f"duplicate key (line {lineno})")
        values[key] = _parse_value(key, raw.strip("\"'"), _CONFIG_TYPES[key])
    table = values.pop("velocity_table", None)
    if table is not None:
        path = Path(table)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        try:
            values["velocity_table"] = read_points_csv(path)
        except (OSError, ValueError) as exc:
            raise ConfigError("velocity_table", str(exc)) from None
    return ScenarioConfig(**values).resolved()


def load_config(path):
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), base_dir=path.parent)


def config_text(cfg):
    lines = []
    for key, value in cfg.as_dict().items():
        if key == "velocity_table" or value is None:
            continue
        lines.append(f"{key} = {fmt(value) if isinstance(value, (int, float)) else value}")
    return "\n".join(lines) + "\n"


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
    return path


def write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_points_csv(path):
    """Points from a CSV with a header row.

    Columns named ``m_x``/``m_y``/``m_z`` are used if present, otherwise
    every column except ``index``. Errors name the offending line.
    """
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    wanted = [i for i, h in enumerate(header) if h in ("m_x", "m_y", "m_z")]
    if not wanted:
        wanted = [i for i, h in enumerate(header) if h != "index"]
    if not wanted:
        raise ValueError(f"{path}:1: no coordinate columns in header")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            out.append([float(row[i]) for i in wanted])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-numeric value in {row!r}") from None
    if not out:
        raise ValueError(f"{path}: no data rows")
    return np.array(out)


def sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def axis_names(prefix, dim):
    return [f"{prefix}_{AXES[k]}" for k in range(dim)]
