"""Command-line front end.

Usage::

    optograv COMMAND [--config PATH] [--out DIR] [--format csv|json]
                     [--preset NAME] [--cutoff N] [--jobs K] [--KEY VALUE ...]

Every run reads an optional flat JSON config (a manifest written by an
earlier run is accepted too), applies ``--KEY VALUE`` overrides, validates,
writes its tables to ``--out`` and finishes with ``manifest.json``.
Times and angles accept a ``pi`` suffix: ``2pi``, ``pi/2``, ``0.5pi``.

Exit status: 0 on success, 1 for configuration errors (the message names
the field), 2 for numerical failures (the message names the invariant and
the time).
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io, systems
from .errors import ConfigError, NumericalError
from .evolution import DimensionlessParams, evolve_closed_form, homodyne_pdf, quadrature_trajectory, reduced_cavity
from .homodyne import HomodyneGrid
from .metrology import cfi_homodyne, qfi_coherent, qfi_pure
from .openquantum import (
    LeakyConfig,
    LindbladConfig,
    cfi_mixed,
    cfi_trajectory,
    environment_cfi_trajectory,
    evolve_lindblad,
    five_point_derivative,
)
from .states import linear_entropy

COMMANDS = ("qfi", "cfi", "evolve", "entropy", "lindblad", "leaky", "sensitivity", "sweep", "compare")
DYNAMIC = ("qfi", "cfi", "evolve", "entropy", "lindblad", "leaky")

FLOAT, INT, COMPLEX, STR, LIST = "float", "int", "complex", "str", "list"

# key -> (type, default); None defaults are resolved per command
FIELDS = {
    "kbar": (FLOAT, 1.0),
    "gbar": (FLOAT, 1.0),
    "alpha": (COMPLEX, 1.0),
    "photons": (FLOAT, None),
    "beta": (COMPLEX, 1.0),
    "t_start": (FLOAT, 0.0),
    "t_end": (FLOAT, 2 * math.pi),
    "samples": (INT, 65),
    "lambda": (FLOAT, math.pi / 2),
    "x_max": (FLOAT, None),
    "x_points": (INT, 2001),
    "cavity_cutoff": (INT, None),
    "osc_cutoff": (INT, 80),
    "frame_cutoff": (INT, None),
    "kappa_bar": (FLOAT, 0.1),
    "gamma_bar": (FLOAT, 0.1),
    "env_cutoff": (INT, 8),
    "rel_tol": (FLOAT, 1e-8),
    "abs_tol": (FLOAT, 1e-10),
    "max_step": (FLOAT, math.pi / 50),
    "integrator": (STR, "rkf45_adaptive"),
    "derivative": (STR, "coupled"),
    "fd_step": (FLOAT, 1e-3),
    "qfi_method": (STR, "closed_form"),
    "preset": (STR, None),
    "retention": (FLOAT, None),
    "n_photons": (INT, None),
    "sweep_mode": (STR, "qfi"),
    "sweep_field": (STR, None),
    "sweep_values": (LIST, None),
    "jobs": (INT, 1),
}
CLOSED_CAVITY_CUTOFF = 30
OPEN_CAVITY_CUTOFF = 10
FRAME_CUTOFF = {"lindblad": 48, "leaky": 40}

_PI = re.compile(r"^\s*([+-]?)((?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?\s*\*?\s*pi\s*(?:/\s*(\d+\.?\d*))?\s*$")


def parse_number(value, field: str = "value") -> float:
    """Float from a number or a string such as ``2pi``, ``pi/2`` or ``0.25pi``."""
    if isinstance(value, bool):
        raise ConfigError(field, f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip().lower()
    m = _PI.match(text)
    if m:
        coef = (-1.0 if m.group(1) == "-" else 1.0) * (float(m.group(2)) if m.group(2) else 1.0)
        div = float(m.group(3)) if m.group(3) else 1.0
        if div == 0:
            raise ConfigError(field, "division by zero")
        return coef * math.pi / div
    try:
        return float(text)
    except ValueError:
        raise ConfigError(field, f"cannot parse {value!r} as a number") from None


def _convert(field: str, kind: str, value):
    if value is None:
        return None
    if kind == FLOAT:
        v = parse_number(value, field)
        if not math.isfinite(v):
            raise ConfigError(field, f"must be finite, got {value!r}")
        return v
    if kind == INT:
        v = parse_number(value, field)
        if v != int(v):
            raise ConfigError(field, f"must be an integer, got {value!r}")
        return int(v)
    if kind == COMPLEX:
        if isinstance(value, (list, tuple)) and len(value) == 2:
            return complex(parse_number(value[0], field), parse_number(value[1], field))
        try:
            return complex(parse_number(value, field))
        except ConfigError:
            try:
                return complex(str(value).replace(" ", ""))
            except ValueError:
                raise ConfigError(field, f"cannot parse {value!r} as a complex number") from None
    if kind == LIST:
        items = value if isinstance(value, list) else [v for v in str(value).split(",") if v.strip()]
        if not items:
            raise ConfigError(field, "must list at least one value")
        return list(items)
    return str(value)


def _jsonable(v):
    if isinstance(v, complex):
        return v.real if v.imag == 0 else [v.real, v.imag]
    return v


class Config(dict):
    """Resolved flat configuration with attribute access."""

    def __getattr__(self, name):
        try:
            return self[name]
        except KeyError:
            raise AttributeError(name) from None

    def jsonable(self) -> dict:
        return {k: _jsonable(v) for k, v in self.items()}


def build_config(command: str, raw: dict) -> Config:
    unknown = sorted(set(raw) - set(FIELDS) - {"mode"})
    if unknown:
        raise ConfigError(unknown[0], "unknown configuration key")
    cfg = Config({k: _convert(k, kind, raw.get(k, default)) for k, (kind, default) in FIELDS.items()})
    mode = command if command != "sweep" else cfg.sweep_mode
    if cfg.cavity_cutoff is None:
        cfg["cavity_cutoff"] = OPEN_CAVITY_CUTOFF if mode in ("lindblad", "leaky") else CLOSED_CAVITY_CUTOFF
    if cfg.frame_cutoff is None:
        cfg["frame_cutoff"] = FRAME_CUTOFF.get(mode, 48)
    if cfg.photons is not None:
        if cfg.photons < 0:
            raise ConfigError("photons", f"must be nonnegative, got {cfg.photons}")
        cfg["alpha"] = complex(math.sqrt(cfg.photons))
    if cfg.samples < 2:
        raise ConfigError("samples", f"need at least 2 time samples, got {cfg.samples}")
    if not cfg.t_end > cfg.t_start:
        raise ConfigError("t_end", f"must exceed t_start ({cfg.t_start}), got {cfg.t_end}")
    if cfg.t_start < 0:
        raise ConfigError("t_start", "must be nonnegative")
    for key in ("cavity_cutoff", "osc_cutoff", "frame_cutoff"):
        if cfg[key] < 2:
            raise ConfigError(key, f"must be at least 2, got {cfg[key]}")
    if cfg.jobs < 1:
        raise ConfigError("jobs", f"must be at least 1, got {cfg.jobs}")
    if cfg.derivative not in ("coupled", "five_point"):
        raise ConfigError("derivative", f"must be 'coupled' or 'five_point', got {cfg.derivative!r}")
    if cfg.qfi_method not in ("closed_form", "numeric"):
        raise ConfigError("qfi_method", f"must be 'closed_form' or 'numeric', got {cfg.qfi_method!r}")
    if cfg.retention is not None and not 0 < cfg.retention <= 1:
        raise ConfigError("retention", f"must lie in (0, 1], got {cfg.retention}")
    if command == "sweep":
        if cfg.sweep_mode not in COMMANDS or cfg.sweep_mode in ("sweep", "compare"):
            raise ConfigError("sweep_mode", f"cannot sweep command {cfg.sweep_mode!r}")
        if cfg.sweep_field is None or cfg.sweep_field not in FIELDS or cfg.sweep_field.startswith("sweep"):
            raise ConfigError("sweep_field", f"must name one configuration key, got {cfg.sweep_field!r}")
        if cfg.sweep_values is None:
            raise ConfigError("sweep_values", "required for sweep")
        kind = FIELDS[cfg.sweep_field][0]
        cfg["sweep_values"] = [_convert(cfg.sweep_field, kind, v) for v in cfg.sweep_values]
    if mode in DYNAMIC and cfg.preset is not None:
        raise ConfigError("preset", "presets apply to the sensitivity and compare commands only")
    if mode in DYNAMIC:
        params(cfg)  # validate dimensionless parameters early
    return cfg


def params(cfg: Config) -> DimensionlessParams:
    try:
        return DimensionlessParams(kbar=cfg.kbar, gbar=cfg.gbar, alpha=cfg.alpha, beta=cfg.beta)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError("kbar", str(exc)) from None


def times(cfg: Config) -> np.ndarray:
    return np.linspace(cfg.t_start, cfg.t_end, cfg.samples)


def grid(cfg: Config) -> HomodyneGrid:
    try:
        return HomodyneGrid(cfg.x_max, cfg.x_points)
    except ValueError as exc:
        raise ConfigError("x_max" if "x_max" in str(exc) else "x_points", str(exc)) from None


def lindblad_config(cfg: Config) -> LindbladConfig:
    return LindbladConfig(cfg.kappa_bar, cfg.rel_tol, cfg.abs_tol, cfg.max_step, cfg.integrator)


def leaky_config(cfg: Config) -> LeakyConfig:
    return LeakyConfig(cfg.gamma_bar, cfg.env_cutoff, cfg.rel_tol, cfg.abs_tol, cfg.max_step, cfg.integrator)


# Each runner returns {stem: Table}


def run_qfi(cfg):
    p = params(cfg)
    if cfg.qfi_method == "closed_form":
        return {"qfi": io.Table.from_schema("qfi", [(t, qfi_coherent(p, t).dimensionless_value) for t in times(cfg)])}

    def state(g):
        return evolve_closed_form(p.with_gbar(g), t, cfg.cavity_cutoff, cfg.osc_cutoff)

    rows = []
    for t in times(cfg):
        rows.append((t, qfi_pure(state, p.gbar, cfg.fd_step).dimensionless_value))
    return {"qfi": io.Table.from_schema("qfi", rows)}


def run_cfi(cfg):
    p, g = params(cfg), grid(cfg)
    rows = [(t, cfi_homodyne(p, t, cfg["lambda"], g, cfg.cavity_cutoff).dimensionless_value) for t in times(cfg)]
    return {"cfi": io.Table.from_schema("cfi", rows)}


def run_evolve(cfg):
    p = params(cfg)
    traj = quadrature_trajectory(p, times(cfg), cfg.cavity_cutoff)
    x, pdf = homodyne_pdf(p, cfg.t_end, cfg["lambda"], grid(cfg), cfg.cavity_cutoff)
    return {
        "trajectory": io.Table.from_schema("trajectory", traj.tolist()),
        "pdf": io.Table.from_schema("pdf", np.column_stack([x, pdf]).tolist()),
    }


def run_entropy(cfg):
    p = params(cfg)
    rows = [(t, linear_entropy(reduced_cavity(p, t, cfg.cavity_cutoff))) for t in times(cfg)]
    return {"entropy": io.Table.from_schema("entropy", rows)}


def run_lindblad(cfg):
    p, lc, ts, g = params(cfg), lindblad_config(cfg), times(cfg), grid(cfg)
    kw = dict(cavity_cutoff=cfg.cavity_cutoff, frame_cutoff=cfg.frame_cutoff)
    if cfg.derivative == "coupled":
        vals = cfi_trajectory(p, lc, ts, cfg["lambda"], grid=g, **kw)
    else:

        def solve(gb):
            return np.stack([s.reduced_cavity().data for s in evolve_lindblad(p.with_gbar(gb), lc, ts[-1], ts, **kw)])

        centre = solve(p.gbar)
        deriv = five_point_derivative(solve, p.gbar, cfg.fd_step)
        vals = [cfi_mixed(centre[i], deriv[i], cfg["lambda"], g).dimensionless_value for i in range(len(ts))]
    rows = [(t, v, cfg.kappa_bar) for t, v in zip(ts, vals)]
    return {"lindblad": io.Table.from_schema("lindblad", rows)}


def run_leaky(cfg):
    p, ts = params(cfg), times(cfg)
    vals = environment_cfi_trajectory(
        p, leaky_config(cfg), ts, cfg["lambda"], h=cfg.fd_step, grid=grid(cfg), jobs=cfg.jobs,
        cavity_cutoff=cfg.cavity_cutoff, frame_cutoff=cfg.frame_cutoff,
    )
    return {"leaky": io.Table.from_schema("leaky", [(t, v, cfg.gamma_bar) for t, v in zip(ts, vals)])}


def run_sensitivity(cfg):
    names = [cfg.preset] if cfg.preset else list(systems.COMPUTED_PRESETS)
    rows = []
    for name in names:
        phys = systems.load_preset(name)
        rep = systems.ideal_sensitivity(phys)
        rows.append(tuple(rep.row().values()))
        retention = cfg.retention if cfg.retention is not None else (0.1 if name == "realistic_fp" else None)
        if retention is not None:
            real = systems.realistic_scenario(retention, name)
            rows.append((f"{name} assumed_retention={retention:g}", rep.kbar, rep.fisher.value * retention,
                         real.retained_delta_g, real.retained_delta_g_per_root_hz, rep.cycle_time))
        if cfg.n_photons is not None:
            h = systems.heisenberg_sensitivity(phys, cfg.n_photons)
            rows.append(tuple(h.row().values()))
    return {"sensitivity": io.Table.from_schema("sensitivity", rows)}


def run_compare(cfg):
    names = [cfg.preset] if cfg.preset else list(systems.COMPUTED_PRESETS)
    rows = systems.comparison_table(names)
    print(systems.format_table(rows))
    return {"compare": io.Table.from_schema("compare", [tuple(r[c] for c in io.SCHEMAS["compare"]) for r in rows])}


RUNNERS = {
    "qfi": run_qfi,
    "cfi": run_cfi,
    "evolve": run_evolve,
    "entropy": run_entropy,
    "lindblad": run_lindblad,
    "leaky": run_leaky,
    "sensitivity": run_sensitivity,
    "compare": run_compare,
}


def _value_tag(v) -> str:
    if isinstance(v, complex):
        v = v.real if v.imag == 0 else f"{v.real:g}{v.imag:+g}j"
    return f"{v:g}" if isinstance(v, float) else str(v)


def _cell(args):
    """Run one sweep cell; returns (value, tables or None, error message, exit code)."""
    mode, cfg, value = args
    try:
        cell = Config(cfg)
        cell[cfg["sweep_field"]] = value
        if cfg["sweep_field"] == "photons":
            cell["alpha"] = complex(math.sqrt(value))
        cell["jobs"] = 1
        return value, RUNNERS[mode](cell), None, 0
    except ConfigError as exc:
        return value, None, f"config error: {exc}", 1
    except NumericalError as exc:
        return value, None, f"numerical error: {exc}", 2


def run_sweep(cfg, out: Path, fmt: str):
    field, mode = cfg.sweep_field, cfg.sweep_mode
    tasks = [(mode, dict(cfg), v) for v in cfg.sweep_values]
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.jobs, len(tasks))) as pool:
            results = list(pool.map(_cell, tasks))
    else:
        results = [_cell(t) for t in tasks]
    outputs, merged, failures, status = [], {}, {}, 0
    for value, tables, err, code in results:
        tag = _value_tag(value)
        if tables is None:
            failures[tag] = err
            print(f"sweep cell {field}={tag}: {err}", file=sys.stderr)
            status = max(status, code)
            continue
        for stem, table in tables.items():
            outputs.append(io.write_table(table, out / f"{stem}_{field}={tag}", fmt))
            keyed = table if field in table.columns else table.prepend(field, _jsonable(value))
            if stem in merged:
                merged[stem].rows.extend(keyed.rows)
            else:
                merged[stem] = io.Table(keyed.columns, keyed.rows)
    for stem, table in merged.items():
        outputs.append(io.write_table(table, out / f"{stem}_sweep", fmt))
    return outputs, status, {"failed_cells": failures}


def _overrides(tokens: list[str]) -> dict:
    """Parse ``--key value``, ``--key=value`` and ``key=value`` tokens."""
    out, i = {}, 0
    while i < len(tokens):
        tok = tokens[i]
        if tok.startswith("--"):
            key = tok[2:]
            if "=" in key:
                key, val = key.split("=", 1)
            elif i + 1 < len(tokens):
                i += 1
                val = tokens[i]
            else:
                raise ConfigError(key, "missing value")
        elif "=" in tok:
            key, val = tok.split("=", 1)
        else:
            raise ConfigError(tok, "expected --key value")
        out[key.replace("-", "_")] = val
        i += 1
    return out


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"{path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be an object")
    # a manifest nests the resolved config
    return dict(data["config"]) if "config" in data and "tolerances" in data else data


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="optograv", description="Optomechanical gravimetry simulator")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON file with flat configuration keys (or a previous manifest)")
    ap.add_argument("--out", default="optograv_out", help="output directory")
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    ap.add_argument("--preset", help="platform preset name (sensitivity, compare)")
    ap.add_argument("--cutoff", type=int, help="cavity Fock cutoff")
    ap.add_argument("--jobs", type=int, help="parallel worker processes")
    return ap


def run(argv: list[str] | None = None) -> int:
    ap = make_parser()
    ns, rest = ap.parse_known_args(argv)
    try:
        raw = _load_config(ns.config)
        if "mode" in raw and raw["mode"] != ns.command:
            raise ConfigError("mode", f"config is for {raw['mode']!r}, command is {ns.command!r}")
        raw.update(_overrides(rest))
        if ns.preset is not None:
            raw["preset"] = ns.preset
        if ns.cutoff is not None:
            raw["cavity_cutoff"] = ns.cutoff
        if ns.jobs is not None:
            raw["jobs"] = ns.jobs
        if ns.preset is not None and ns.preset not in systems.available_presets():
            systems.load_preset(ns.preset)  # raises naming the field
        cfg = build_config(ns.command, raw)
        out = Path(ns.out)
        out.mkdir(parents=True, exist_ok=True)
        extra = {}
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            if ns.command == "sweep":
                outputs, status, extra = run_sweep(cfg, out, ns.format)
            else:
                tables = RUNNERS[ns.command](cfg)
                outputs = [io.write_table(t, out / stem, ns.format) for stem, t in tables.items()]
                status = 0
        extra["warnings"] = sorted({str(w.message) for w in caught})
        for msg in extra["warnings"]:
            print(f"warning: {msg}", file=sys.stderr)
        extra["format"] = ns.format
        manifest = io.write_manifest(out, ns.command, dict(cfg.jsonable(), mode=ns.command), outputs, extra)
        for p in outputs + [manifest]:
            print(p)
        return status
    except ConfigError as exc:
        print(f"optograv: config error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        when = f" at t={exc.time:.6g}" if exc.time is not None else ""
        print(f"optograv: numerical error: invariant '{exc.invariant}' violated{when}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
