"""Command-line scenario runner.

Subcommands: ``run`` integrates one scenario and writes a trace CSV, a
summary and two plot files; ``verify`` executes the property suite;
``batch`` runs several scenarios from one file in parallel.

Exit codes: 0 success, 1 invalid configuration or arguments, 2 numeric or
domain failure during a run, 3 property-suite failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys as _sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from .car import car_gain_function, car_system, default_car_input
from .config import (DEFAULT_PRESETS, SYSTEMS, ConfigError, ScenarioConfig,
                     build_gains, build_noise, default_initial_states,
                     load_batch, load_config, preset, validate)
from .groupcore import DomainError
from .ins import InsEnvironment
from .properties import report_lines, run_properties
from .reactor import ReactorInput, ReactorParams
from .report import (assemble_rows, format_summary, render_plots,
                     summarize_trace, trace_metadata, write_trace)
from .sim import (SimResult, simulate_ins_scenario, simulate_pair,
                  simulate_reactor_scenario)
from .vtol import VtolTrajectorySpec, vtol_input_signal

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DOMAIN = 2
EXIT_PROPERTIES = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; remap to the validation code."""

    def error(self, message):
        self.print_usage(_sys.stderr)
        raise SystemExit2(message)


class SystemExit2(SystemExit):
    def __init__(self, message):
        print(f"error: {message}", file=_sys.stderr)
        super().__init__(EXIT_CONFIG)


def _run_engine(cfg: ScenarioConfig, seed_rng: np.random.Generator | None = None):
    """Integrate the configured scenario; returns (result, gains, noise, u_of_t)."""
    gains = build_gains(cfg)
    noise = build_noise(cfg)
    x0_def, xh0_def = default_initial_states(cfg.system)
    x0 = np.asarray(cfg.initial_truth, float) if cfg.initial_truth else x0_def
    xh0 = np.asarray(cfg.initial_estimate, float) if cfg.initial_estimate else xh0_def
    if cfg.system == "car":
        res = simulate_pair(car_system(), car_gain_function(gains), x0, xh0,
                            default_car_input, cfg.t_end, cfg.dt)
        return res, gains, noise, default_car_input
    if cfg.system == "reactor":
        res = simulate_reactor_scenario(ReactorParams(), ReactorInput(), gains,
                                        x0, xh0, cfg.t_end, cfg.dt)
        return res, gains, noise, None
    env = InsEnvironment()
    u_of_t = vtol_input_signal(VtolTrajectorySpec(), env)
    rng = seed_rng if seed_rng is not None else np.random.default_rng(cfg.seed)
    res = simulate_ins_scenario(env, gains, x0, xh0, u_of_t, cfg.t_end, cfg.dt,
                                noise=noise, rng=rng if noise else None)
    return res, gains, noise, u_of_t


def _write_outputs(cfg: ScenarioConfig, out_dir: str, result: SimResult,
                   gains, noise, u_of_t, truncated: str | None = None) -> str:
    os.makedirs(out_dir, exist_ok=True)
    rows = assemble_rows(cfg.system, result, input_signal=u_of_t, gains=gains)
    meta = trace_metadata(cfg, gains, noise)
    if truncated:
        meta["truncated"] = truncated.replace(" ", "_")
    csv_path = os.path.join(out_dir, f"{cfg.label}.csv")
    write_trace(csv_path, meta, cfg.system, rows)
    return csv_path


def run_scenario(cfg: ScenarioConfig, out_dir: str) -> int:
    """Validate, integrate, write CSV + summary + plots, print the summary."""
    validate(cfg)
    try:
        result, gains, noise, u_of_t = _run_engine(cfg)
    except DomainError as exc:
        partial = getattr(exc, "partial", None)
        if partial is not None and partial.t.size:
            gains = build_gains(cfg)
            path = _write_outputs(cfg, out_dir, partial, gains,
                                  build_noise(cfg), _input_for(cfg),
                                  truncated=str(exc))
            print(f"error: {exc}; truncated trace written to {path}",
                  file=_sys.stderr)
        else:
            print(f"error: {exc}", file=_sys.stderr)
        return EXIT_DOMAIN
    csv_path = _write_outputs(cfg, out_dir, result, gains, noise, u_of_t)
    summary = summarize_trace(csv_path)
    text = format_summary(summary)
    with open(os.path.join(out_dir, f"{cfg.label}_summary.txt"), "w",
              encoding="utf-8") as fh:
        fh.write(text)
    render_plots(csv_path, out_dir)
    print(text, end="")
    return EXIT_OK


def _input_for(cfg: ScenarioConfig):
    if cfg.system == "car":
        return default_car_input
    if cfg.system == "ins":
        return vtol_input_signal(VtolTrajectorySpec(), InsEnvironment())
    return None


def _build_run_config(args) -> ScenarioConfig:
    if args.config and args.preset:
        raise ConfigError("give either --preset or --config, not both")
    if args.config:
        cfg = load_config(args.config)
        if cfg.system != args.system:
            raise ConfigError(
                f"config file is for {cfg.system!r}, command line says {args.system!r}")
    else:
        cfg = preset(args.preset or DEFAULT_PRESETS[args.system])
        if cfg.system != args.system:
            raise ConfigError(
                f"preset {cfg.label!r} is for {cfg.system!r}, "
                f"command line says {args.system!r}")
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.no_noise:
        cfg = replace(cfg, noise=False)
    if args.label:
        cfg = replace(cfg, label=args.label)
    return validate(cfg)


def _cmd_run(args) -> int:
    cfg = _build_run_config(args)
    return run_scenario(cfg, args.out)


def _cmd_verify(args) -> int:
    system = None if args.system in (None, "all") else args.system
    results = run_properties(system, n_samples=args.samples, seed=args.seed)
    print("\n".join(report_lines(results)))
    n_fail = sum(not r.passed for r in results)
    print(f"\n{len(results)} properties, {n_fail} failed")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump([r.as_dict() for r in results], fh, indent=2)
            fh.write("\n")
    return EXIT_PROPERTIES if n_fail else EXIT_OK


def _batch_worker(payload):
    cfg, out_dir = payload
    try:
        code = run_scenario(cfg, out_dir)
        return cfg.label, code, ""
    except ConfigError as exc:
        return cfg.label, EXIT_CONFIG, str(exc)
    except Exception as exc:  # worker must not kill the pool
        return cfg.label, EXIT_DOMAIN, str(exc)


def _cmd_batch(args) -> int:
    configs = load_batch(args.file)
    payloads = [(cfg, args.out) for cfg in configs]
    if args.jobs == 1 or len(configs) == 1:
        outcomes = [_batch_worker(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            outcomes = list(pool.map(_batch_worker, payloads))
    worst = EXIT_OK
    for label, code, message in outcomes:
        status = "ok" if code == EXIT_OK else f"exit {code}: {message}"
        print(f"{label}: {status}")
        worst = max(worst, code)
    return worst


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="invobs",
                     description="Symmetry-preserving observer scenarios")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="integrate one scenario and write reports")
    p_run.add_argument("system", choices=SYSTEMS)
    p_run.add_argument("--preset", help="named scenario (car-default, "
                                        "reactor-default, ins-flight)")
    p_run.add_argument("--config", help="scenario description file")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--no-noise", action="store_true",
                       help="force clean sensors")
    p_run.add_argument("--label", help="output file stem override")
    p_run.add_argument("--out", default=".", help="output directory")
    p_run.set_defaults(fn=_cmd_run)

    p_ver = sub.add_parser("verify", help="run the property suite")
    p_ver.add_argument("system", nargs="?", default=None,
                       choices=SYSTEMS + ("quaternion", "all"))
    p_ver.add_argument("--samples", type=int, default=200)
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.add_argument("--json", help="also write the report as JSON here")
    p_ver.set_defaults(fn=_cmd_verify)

    p_bat = sub.add_parser("batch", help="run scenarios from a file in parallel")
    p_bat.add_argument("file")
    p_bat.add_argument("--out", default=".", help="output directory")
    p_bat.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p_bat.set_defaults(fn=_cmd_batch)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit2:
        return EXIT_CONFIG
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_DOMAIN
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    raise SystemExit(main())
