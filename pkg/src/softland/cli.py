"""Batch front end: flat key=value configs, mode dispatch, CSV/JSON artifacts.

Usage:
    softland <mode> [--config FILE] [--set key=value]... [--out DIR] [--workers N]

Modes: simulate, sweep, curves, bangbang, compare, cot.  Flag values override
file values.  Outputs land in the output directory as the mode's CSV files
plus summary.json; identical configs produce byte-identical CSV files.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass, replace

from . import __version__, energy, optimize
from .model import (BangBang, ConstantForce, Controller, Impedance, Params,
                    PhysicalParams, Rigid, Scales, to_dimensionless)
from .sim import SimOptions, simulate

MODES = ("simulate", "sweep", "curves", "bangbang", "compare", "cot")

_DIMLESS_KEYS = ("r_m", "s", "u_max", "l0", "v0")
_PHYSICAL_KEYS = ("m_b", "m_f", "k_g", "g", "S", "U_max", "V0")

_KNOWN_KEYS = set(_DIMLESS_KEYS) | set(_PHYSICAL_KEYS) | {
    "mode", "controller", "k_p", "k_d", "saturate", "switch_times", "u",
    "k_p_min", "k_p_max", "k_p_count", "k_d_min", "k_d_max", "k_d_count",
    "rel_tol", "abs_tol", "event_tol", "tau_max", "settle_vel", "record_dt",
    "objective", "r_m_values", "s_values", "n_switches", "out", "workers",
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass(frozen=True)
class RunConfig:
    mode: str
    params: Params
    physical: PhysicalParams | None
    scales: Scales | None
    v0: tuple[float, ...]
    controller: Controller
    grid: optimize.GridSpec
    options: SimOptions
    objective: str
    r_m_values: tuple[float, ...]
    s_values: tuple[float, ...]
    n_switches: int
    out_dir: str
    workers: int
    inputs: tuple[tuple[str, str], ...]  # resolved flat key-value echo


def _parse_pairs(text: str, source: str = "config") -> dict[str, tuple[str, str]]:
    """Flat key=value lines, '#' comments; returns key -> (value, location)."""
    pairs: dict[str, tuple[str, str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        pairs[key] = (value, f"{source}:{lineno}")
    return pairs


def _float(pairs, key, default=None):
    if key not in pairs:
        return default
    value, loc = pairs[key]
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{loc}: key {key!r} expects a number, got {value!r}") from None


def _int(pairs, key, default=None):
    if key not in pairs:
        return default
    value, loc = pairs[key]
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{loc}: key {key!r} expects an integer, got {value!r}") from None


def _bool(pairs, key, default=False):
    if key not in pairs:
        return default
    value, loc = pairs[key]
    low = value.lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{loc}: key {key!r} expects true/false, got {value!r}")


def _float_list(pairs, key, default=()):
    if key not in pairs:
        return tuple(default)
    value, loc = pairs[key]
    if not value:
        return ()
    try:
        return tuple(float(v) for v in value.split(","))
    except ValueError:
        raise ConfigError(f"{loc}: key {key!r} expects comma-separated numbers, "
                          f"got {value!r}") from None


def _parse_range(value: str, key: str, loc: str) -> tuple[float, ...]:
    """Scalar or inclusive range spec start:stop:count."""
    if ":" in value:
        parts = value.split(":")
        if len(parts) != 3:
            raise ConfigError(f"{loc}: key {key!r} range spec must be "
                              f"start:stop:count, got {value!r}")
        try:
            start, stop = float(parts[0]), float(parts[1])
            count = int(parts[2])
        except ValueError:
            raise ConfigError(f"{loc}: key {key!r} has a malformed range "
                              f"{value!r}") from None
        if count < 1:
            raise ConfigError(f"{loc}: key {key!r} range count must be >= 1")
        if count == 1:
            return (start,)
        step = (stop - start) / (count - 1)
        return tuple(start + i * step for i in range(count))
    try:
        return (float(value),)
    except ValueError:
        raise ConfigError(f"{loc}: key {key!r} expects a number or "
                          f"start:stop:count, got {value!r}") from None


def parse_config(text: str, overrides: dict[str, str] | None = None,
                 source: str = "config") -> RunConfig:
    """Parse the flat key=value format into a validated RunConfig.

    overrides (from --set flags) replace file values key by key.
    """
    pairs = _parse_pairs(text, source)
    for key, value in (overrides or {}).items():
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"--set: unknown key {key!r}")
        pairs[key] = (value, f"--set {key}")

    mode = pairs.get("mode", ("simulate", "default"))[0]
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")

    dim_used = [k for k in _DIMLESS_KEYS if k in pairs]
    phys_used = [k for k in _PHYSICAL_KEYS if k in pairs]
    if dim_used and phys_used:
        raise ConfigError(
            f"dimensionless keys {dim_used} conflict with physical keys {phys_used}; "
            f"give exactly one parameter block")

    physical = None
    scales = None
    if phys_used:
        missing = [k for k in ("m_b", "m_f", "k_g") if k not in pairs]
        if missing:
            raise ConfigError(f"physical parameter block is missing {missing}")
        v0_raw, v0_loc = pairs.get("V0", ("0.0", "default"))
        V0_list = _parse_range(v0_raw, "V0", v0_loc)
        physical = PhysicalParams(
            m_b=_float(pairs, "m_b"),
            m_f=_float(pairs, "m_f"),
            k_g=_float(pairs, "k_g"),
            S=_float(pairs, "S", 0.13),
            U_max=_float(pairs, "U_max", math.inf),
            V0=min(V0_list),
            g=_float(pairs, "g", 9.81),
        )
        params, _, scales = to_dimensionless(physical)
        v0 = tuple(V * scales.tau_s / scales.x_s for V in V0_list)
    else:
        try:
            params = Params(
                r_m=_float(pairs, "r_m", 5.0),
                s=_float(pairs, "s", 20.0),
                u_max=_float(pairs, "u_max", math.inf),
                l0=_float(pairs, "l0", None),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        v0_raw, v0_loc = pairs.get("v0", ("-1.0", "default"))
        v0 = _parse_range(v0_raw, "v0", v0_loc)

    kind = pairs.get("controller", ("rigid", "default"))[0].lower()
    for gain in ("k_p", "k_d"):
        value = _float(pairs, gain, 0.0)
        if value < 0:
            raise ConfigError(f"key {gain!r} must be >= 0, got {value}")
    if kind == "impedance":
        controller: Controller = Impedance(
            k_p=_float(pairs, "k_p", 0.2),
            k_d=_float(pairs, "k_d", 0.4),
            saturate=_bool(pairs, "saturate", False),
        )
    elif kind == "bangbang":
        if not math.isfinite(params.u_max):
            raise ConfigError("controller=bangbang needs a finite u_max")
        try:
            controller = BangBang(params.u_max, _float_list(pairs, "switch_times"))
        except ValueError as exc:
            raise ConfigError(f"key 'switch_times': {exc}") from None
    elif kind == "constant":
        controller = ConstantForce(_float(pairs, "u", 0.0))
    elif kind == "rigid":
        controller = Rigid()
    else:
        raise ConfigError(f"key 'controller': unknown controller {kind!r}")

    try:
        grid = optimize.GridSpec(
            k_p_range=(_float(pairs, "k_p_min", 0.0), _float(pairs, "k_p_max", 1.0)),
            k_p_count=_int(pairs, "k_p_count", 101),
            k_d_range=(_float(pairs, "k_d_min", 0.0), _float(pairs, "k_d_max", 1.0)),
            k_d_count=_int(pairs, "k_d_count", 101),
        )
        base = optimize.SWEEP_OPTIONS if mode != "simulate" else SimOptions()
        options = replace(
            base,
            rel_tol=_float(pairs, "rel_tol", base.rel_tol),
            abs_tol=_float(pairs, "abs_tol", base.abs_tol),
            event_tol=_float(pairs, "event_tol", base.event_tol),
            tau_max=_float(pairs, "tau_max", base.tau_max),
            settle_vel=_float(pairs, "settle_vel", base.settle_vel),
            record_dt=_float(pairs, "record_dt", base.record_dt),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    objective = pairs.get("objective", ("depth", "default"))[0]
    if objective not in ("depth", "cot"):
        raise ConfigError(f"objective must be depth or cot, got {objective!r}")

    workers = _int(pairs, "workers", 0)
    n_switches = _int(pairs, "n_switches", 1)
    if n_switches < 1:
        raise ConfigError("n_switches must be >= 1")

    config = RunConfig(
        mode=mode,
        params=params,
        physical=physical,
        scales=scales,
        v0=v0,
        controller=controller,
        grid=grid,
        options=options,
        objective=objective,
        r_m_values=_float_list(pairs, "r_m_values", (params.r_m,)),
        s_values=_float_list(pairs, "s_values", (params.s,)),
        n_switches=n_switches,
        out_dir=pairs.get("out", (".", "default"))[0],
        workers=workers,
        inputs=tuple(sorted((k, v[0]) for k, v in pairs.items())),
    )
    return config


def _echo_text(config: RunConfig) -> str:
    return "\n".join(f"{k}={v}" for k, v in config.inputs) + "\n"


def _scalar_v0(config: RunConfig) -> float:
    if len(config.v0) != 1:
        raise ConfigError(f"mode={config.mode} needs a scalar v0, "
                          f"got {len(config.v0)} values")
    return config.v0[0]


def run(config: RunConfig) -> dict:
    """Execute one mode and write its artifacts; returns the summary dict."""
    t_start = time.perf_counter()
    os.makedirs(config.out_dir, exist_ok=True)
    outputs: list[str] = []
    headline: dict = {}

    def path(name: str) -> str:
        outputs.append(name)
        return os.path.join(config.out_dir, name)

    if config.mode == "simulate":
        v0 = _scalar_v0(config)
        outcome, trajectory = simulate(config.controller, config.params, v0,
                                       config.options)
        trajectory.to_csv(path("trajectory.csv"))
        headline = {
            "depth": outcome.depth,
            "steps": outcome.steps,
            "rest_time": outcome.rest_time,
            "settled": outcome.settled,
            "stroke_violation": outcome.stroke_violation,
            "status": outcome.status,
            "e_act": outcome.e_act,
            "e_gnd": outcome.e_gnd,
            "u_peak": outcome.u_peak,
        }
    elif config.mode == "sweep":
        v0 = _scalar_v0(config)
        res = optimize.sweep_impedance(v0, config.params, grid=config.grid,
                                       objective=config.objective,
                                       options=config.options,
                                       workers=config.workers)
        res.to_csv(path("grid.csv"))
        headline = {
            "k_p_star": res.k_p_star,
            "k_d_star": res.k_d_star,
            "depth_star": res.depth_star,
            "value_star": res.value_star,
            "objective": config.objective,
            "feasible_cells": int(res.feasible.sum()),
        }
    elif config.mode == "curves":
        rows = optimize.optimal_curves(config.v0, config.r_m_values,
                                       config.s_values, objective=config.objective,
                                       grid=config.grid, options=config.options,
                                       workers=config.workers)
        with open(path("curves.csv"), "w", newline="") as f:
            optimize.write_curves_csv(rows, f)
        headline = {"rows": len(rows),
                    "errors": sum(1 for r in rows if r.error)}
    elif config.mode == "bangbang":
        if not math.isfinite(config.params.u_max):
            raise ConfigError("mode=bangbang needs a finite u_max")
        sols = []
        for v0 in config.v0:
            if config.n_switches == 1:
                sols.append(optimize.solve_bang_bang(v0, config.params))
            else:
                sols.append(optimize.solve_multi_switch(v0, config.params,
                                                        config.n_switches))
        with open(path("bangbang.csv"), "w", newline="") as f:
            f.write("v0,switch_times,depth,residual,feasible\n")
            for v0, sol in zip(config.v0, sols):
                times = ";".join(format(t, ".17g") for t in sol.switch_times)
                f.write(f"{v0:.17g},{times},{sol.depth:.17g},"
                        f"{sol.residual:.17g},"
                        f"{'true' if sol.feasible else 'false'}\n")
        headline = {"solutions": len(sols),
                    "feasible": sum(1 for s in sols if s.feasible)}
        if len(sols) == 1:
            headline.update(depth=sols[0].depth,
                            switch_times=list(sols[0].switch_times))
    elif config.mode == "compare":
        rows, u_max = optimize.compare_policies(config.v0, config.params,
                                                grid=config.grid,
                                                options=config.options,
                                                workers=config.workers)
        with open(path("compare.csv"), "w", newline="") as f:
            optimize.write_compare_csv(rows, u_max, f)
        headline = {"rows": len(rows), "u_max": u_max}
    elif config.mode == "cot":
        grid_keys = {"k_p_min", "k_p_max", "k_p_count",
                     "k_d_min", "k_d_max", "k_d_count"}
        explicit = grid_keys & {k for k, _ in config.inputs}
        rows = energy.cot_vs_depth_comparison(config.v0, config.params,
                                              grid=config.grid if explicit else None,
                                              options=config.options,
                                              workers=config.workers)
        with open(path("cot.csv"), "w", newline="") as f:
            energy.write_cot_csv(rows, f)
        headline = {"rows": len(rows),
                    "errors": sum(1 for r in rows if r.error)}
    else:  # pragma: no cover - parse_config rejects unknown modes
        raise ConfigError(f"unknown mode {config.mode!r}")

    summary = {
        "version": __version__,
        "mode": config.mode,
        "inputs": dict(config.inputs),
        "scales": None if config.scales is None else {
            "x_s": config.scales.x_s,
            "tau_s": config.scales.tau_s,
            "u_s": config.scales.u_s,
        },
        "params": {"r_m": config.params.r_m, "s": config.params.s,
                   "u_max": config.params.u_max, "l0": config.params.l0},
        "v0": list(config.v0),
        "headline": headline,
        "outputs": outputs,
        "wall_time_s": time.perf_counter() - t_start,
    }
    with open(os.path.join(config.out_dir, "summary.json"), "w") as f:
        json.dump(summary, f, indent=2, default=str)
        f.write("\n")
    return summary


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="softland",
        description="Soft-landing simulation and optimization toolkit")
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--set", dest="sets", action="append", default=[],
                        metavar="KEY=VALUE", help="override one config key")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--workers", type=int,
                        help="worker threads (0 = auto; env SOFTLAND_WORKERS)")
    args = parser.parse_args(argv)

    try:
        text = ""
        source = "config"
        if args.config:
            with open(args.config) as f:
                text = f.read()
            source = args.config
        overrides = {"mode": args.mode}
        for item in args.sets:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            key, value = item.split("=", 1)
            overrides[key.strip()] = value.strip()
        if args.out is not None:
            overrides["out"] = args.out
        if args.workers is not None:
            overrides["workers"] = str(args.workers)
        config = parse_config(text, overrides, source=source)
        run(config)
        return 0
    except Exception as exc:  # error record on stderr, nonzero exit
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
