"""Tabular emitters and the run manifest.

Column sets are a frozen public contract:

=========================  ==========================================
``t,xc,pc``                cavity quadrature trajectory
``x,p``                    homodyne probability density
``t,IF``                   classical Fisher information
``t,HQ``                   quantum Fisher information
``t,S``                    linear entropy of the reduced cavity
``t,IF,kappa_bar``         CFI under cavity loss
``t,IF,gamma_bar``         environment-mode CFI in the leaky model
=========================  ==========================================
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy

from .constants import TOL

SCHEMAS = {
    "trajectory": ("t", "xc", "pc"),
    "pdf": ("x", "p"),
    "cfi": ("t", "IF"),
    "qfi": ("t", "HQ"),
    "entropy": ("t", "S"),
    "lindblad": ("t", "IF", "kappa_bar"),
    "leaky": ("t", "IF", "gamma_bar"),
    "sensitivity": ("label", "kbar", "fisher", "delta_g", "delta_g_per_root_hz", "cycle_time"),
    "compare": ("source", "name", "delta_g", "delta_g_per_root_hz", "time", "kbar"),
}


class Table:
    """Named columns with rows; rendered as CSV or JSON."""

    def __init__(self, columns: Sequence[str], rows: Iterable[Sequence] = ()):
        self.columns = tuple(columns)
        self.rows = [tuple(r) for r in rows]
        for r in self.rows:
            if len(r) != len(self.columns):
                raise ValueError(f"row of length {len(r)} does not match columns {self.columns}")

    @classmethod
    def from_schema(cls, schema: str, rows) -> "Table":
        return cls(SCHEMAS[schema], rows)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def prepend(self, name: str, value) -> "Table":
        return Table((name,) + self.columns, [(value,) + r for r in self.rows])


def _cell(v):
    if isinstance(v, (np.floating, float)):
        return repr(float(v))
    if isinstance(v, (np.integer, int)):
        return str(int(v))
    return str(v)


def _json_value(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_table(table: Table, path: Path, fmt: str = "csv") -> Path:
    """Write ``table`` to ``path`` plus the format extension (``path`` is a stem)."""
    path = Path(path)
    path = path.parent / f"{path.name}.{fmt}"
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(table.columns)
            w.writerows([_cell(v) for v in r] for r in table.rows)
    elif fmt == "json":
        rows = [{c: _json_value(v) for c, v in zip(table.columns, r)} for r in table.rows]
        path.write_text(json.dumps({"columns": list(table.columns), "rows": rows}, indent=1))
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return path


def read_table(path: Path) -> Table:
    """Parse a file written by :func:`write_table`; numeric cells come back as floats."""
    path = Path(path)
    if path.suffix == ".json":
        data = json.loads(path.read_text())
        cols = data["columns"]
        return Table(cols, [tuple(math.nan if r[c] is None else r[c] for c in cols) for r in data["rows"]])
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))

    def parse(v):
        try:
            return float(v)
        except ValueError:
            return v

    return Table(rows[0], [tuple(parse(v) for v in r) for r in rows[1:]])


def sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def environment_versions() -> dict:
    from . import __version__

    return {
        "optograv": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "platform": platform.platform(),
    }


def write_manifest(out_dir: Path, command: str, config: dict, outputs: Sequence[Path], extra: dict | None = None) -> Path:
    """Record everything needed to rerun: resolved config, tolerances, versions and output digests."""
    out_dir = Path(out_dir)
    manifest = {
        "command": command,
        "config": config,
        "tolerances": asdict(TOL),
        "versions": environment_versions(),
        "outputs": {Path(p).name: sha256(p) for p in outputs},
    }
    if extra:
        manifest.update(extra)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True, default=str))
    return path
