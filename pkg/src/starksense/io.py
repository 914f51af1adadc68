"""Run-configuration parsing and deterministic CSV/JSON output.

Configuration files are flat ``key = value`` text. Keys are dotted
(``simulation.T1 = 250``); a ``[section]`` header prefixes the keys that
follow it. ``#`` starts a comment. Values are numbers, comma-separated
number lists, ``true``/``false`` or bare strings.
"""

from __future__ import annotations

import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError


@dataclass
class RunConfig:
    """Parsed configuration: ``values[key]`` plus the line each key came from."""

    values: Dict[str, Any] = field(default_factory=dict)
    lines: Dict[str, int] = field(default_factory=dict)
    source: str = "<config>"

    def __contains__(self, key):
        return key in self.values

    def where(self, key) -> str:
        if key in self.lines:
            return f"{self.source}:{self.lines[key]}"
        return f"{self.source}"

    def error(self, key, message) -> ConfigError:
        return ConfigError(f"{self.where(key)}: {key}: {message}")

    def get(self, key, default=None):
        return self.values.get(key, default)

    def number(self, key, default=None, positive=False) -> Optional[float]:
        if key not in self.values:
            if default is None:
                return None
            return float(default)
        v = self.values[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise self.error(key, f"expected a number, got {v!r}")
        if positive and not v > 0:
            raise self.error(key, "must be positive")
        return float(v)

    def integer(self, key, default=None) -> Optional[int]:
        if key not in self.values:
            return default
        v = self.values[key]
        if isinstance(v, bool) or not isinstance(v, int):
            raise self.error(key, f"expected an integer, got {v!r}")
        return v

    def flag(self, key, default=False) -> bool:
        v = self.values.get(key, default)
        if not isinstance(v, bool):
            raise self.error(key, f"expected true or false, got {v!r}")
        return v

    def number_list(self, key) -> Optional[List[float]]:
        if key not in self.values:
            return None
        v = self.values[key]
        items = v if isinstance(v, list) else [v]
        if not items or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in items):
            raise self.error(key, f"expected a list of numbers, got {v!r}")
        return [float(x) for x in items]

    def axis(self, prefix: str) -> Optional[np.ndarray]:
        """Axis from ``<prefix>s`` (explicit list) or ``<prefix>_start/stop/step``."""
        listed = self.number_list(prefix + "s")
        keys = [f"{prefix}_{s}" for s in ("start", "stop", "step")]
        present = [k for k in keys if k in self.values]
        if listed is not None and present:
            raise self.error(prefix + "s", "give either a list or start/stop/step, not both")
        if listed is not None:
            return np.array(listed)
        if not present:
            return None
        if len(present) != 3:
            missing = sorted(set(keys) - set(present))
            raise self.error(present[0], f"missing {', '.join(missing)}")
        start, stop, step = (self.number(k) for k in keys)
        if not step > 0:
            raise self.error(keys[2], "step must be positive")
        if stop < start:
            raise self.error(keys[1], "stop lies below start")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return start + step * np.arange(n)

    def section(self, name: str) -> Dict[str, Any]:
        p = name + "."
        return {k[len(p):]: v for k, v in self.values.items() if k.startswith(p)}

    def set(self, key: str, value: Any, line: Optional[int] = None):
        self.values[key] = value
        if line is not None:
            self.lines[key] = line
        else:
            self.lines.pop(key, None)

    def resolved(self) -> Dict[str, Any]:
        """Sorted plain dictionary, suitable for JSON sidecars."""
        return {k: self.values[k] for k in sorted(self.values)}


def parse_value(text: str) -> Any:
    t = text.strip()
    low = t.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if "," in t:
        return [parse_value(x) for x in t.split(",") if x.strip()]
    for conv in (int, float):
        try:
            return conv(t)
        except ValueError:
            pass
    if len(t) >= 2 and t[0] == t[-1] and t[0] in "\"'":
        return t[1:-1]
    return t


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse configuration text.

    Raises
    ------
    ConfigError
        On malformed lines or duplicate keys, naming the source line.
    """
    cfg = RunConfig(source=source)
    prefix = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ConfigError(f"{source}:{lineno}: malformed section header {raw.strip()!r}")
            prefix = line[1:-1].strip() + "."
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = line.split("=", 1)
        key = prefix + key.strip()
        if not key or any(c.isspace() for c in key) or key.endswith("."):
            raise ConfigError(f"{source}:{lineno}: invalid key {key!r}")
        if not value.strip():
            raise ConfigError(f"{source}:{lineno}: {key}: missing value")
        if key in cfg.values:
            raise ConfigError(
                f"{source}:{lineno}: {key}: duplicate key (first set on line {cfg.lines[key]})"
            )
        cfg.set(key, parse_value(value), lineno)
    return cfg


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{p}: cannot read configuration: {exc.strerror}") from None
    return parse_config(text, str(p))


def apply_overrides(cfg: RunConfig, overrides: Iterable[str]) -> RunConfig:
    """Apply ``key=value`` strings on top of a configuration."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key=value")
        key, value = item.split("=", 1)
        cfg.set(key.strip(), parse_value(value))
    return cfg


def format_number(x) -> str:
    """Shortest round-tripping text for a float; NaN is ``nan``."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return format_number(v)
    return v


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence[Any]]):
    """Write rows with ``.`` decimals and ``nan`` for missing values.

    ``path=None`` writes to standard output.
    """
    if path is None:
        _write_rows(sys.stdout, header, rows)
        return
    with open(path, "w", newline="") as fh:
        _write_rows(fh, header, rows)


def _write_rows(fh, header, rows):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])


def read_csv(path) -> Tuple[List[str], List[List[str]]]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        return [], []
    return [c.strip() for c in rows[0]], [[c.strip() for c in r] for r in rows[1:]]


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _clean(o):
    """Replace non-finite floats with strings so the JSON stays standard."""
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, np.ndarray):
        return _clean(o.tolist())
    if isinstance(o, (float, np.floating)) and not math.isfinite(o):
        return format_number(o)
    return o


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, default=_json_default)


def write_json(path, obj):
    Path(path).write_text(dumps(obj) + "\n")


def sidecar_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_suffix(".json")


def write_spectrum(grid, path, config: Optional[Dict[str, Any]] = None, version: str = ""):
    """Spectrum CSV (``probe_ghz`` plus one column per drive setting) and JSON sidecar."""
    header = ["probe_ghz"] + [f"{grid.drive_label}={format_number(d)}" for d in grid.drive_values]
    rows = ([f] + list(grid.values[i]) for i, f in enumerate(grid.probe_frequencies))
    write_csv(path, header, rows)
    failed = np.argwhere(grid.failed).tolist()
    write_json(sidecar_path(path), {
        "config": config or {},
        "drive_axis": {"label": grid.drive_label, "values": list(grid.drive_values)},
        "normalized": bool(grid.normalized),
        "failed_cells": failed,
        "version": version,
    })
