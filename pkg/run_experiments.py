#!/usr/bin/env python3
"""
================================================================================
RUN EXPERIMENTS
================================================================================

PURPOSE:
    Batch runner for the lab's Monte-Carlo experiments. Each subcommand maps
    to one pipeline and writes <name>.csv plus a <name>.json summary into the
    output directory.

SUBCOMMANDS:
    numerics       gradient norm vs Heisenberg evolution time      numerics.*
    gde-sff        GDE spectral form factors vs exp(-k t^2/4)       gde_sff.*
    gde-purity     GDE-evolved marginal purity and I_L              gde_purity.*
    discriminate   symmetry vs GDE discrimination training          discriminate.*
    concentration  loss concentration bound domination sweep        concentration.*
    haar-check     Haar moments E|u_00|^{2k}                        haar_check.*

CONFIGURATION:
    Flat JSON object (YAML when the file ends in .yaml/.yml) via --config.
    Every key is also a kebab-case flag (t_max <-> --t-max); flags override
    the file. `seed` is mandatory. Lists are comma separated on the command
    line (--n 4,6,8).

OUTPUT:
    CSV   '#' provenance lines (config hash, seed, version, config JSON),
          then the header row; ',' separator, '\\n' line ends, %.12g floats.
    JSON  {"meta": {...same provenance...}, ...pipeline summary...}
    Both are written to a temp file and renamed into place. Nothing
    time-dependent is written, so reruns are byte-identical.

EXIT CODES:
    0 success, 2 configuration error, 1 runtime error

USAGE:
    python run_experiments.py numerics --n 4,6 --depth 1 --t-max 4 --t-steps 20 \\
        --samples 50 --seed 7 --out results/
    python run_experiments.py gde-sff --config configs/sff.yaml --plot

================================================================================
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
from datetime import datetime
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from generate_plot_svg import PLOT_SCHEMAS, emit_plot
from gradients import RunningStats, parallel_map, sample_rng
from hea import BOUNDARIES
from qstate import StateVector, prepare_state
from randmat import (
    MAX_GDE_QUBITS, MAX_HAAR_DIM, analytic_prediction, evolve_times, haar_unitary, sample_gde,
    spectral_form_factor,
)
from scrambling import STATE_FAMILIES, concentration_check, purity, scrambling_measure
from tasks import (
    HEISENBERG_MAX_QUBITS, HEISENBERG_MIN_QUBITS, MIN_SYMMETRY_QUBITS, GradientTimeConfig,
    TrainConfig, gradient_vs_time_experiment, run_discrimination,
)

# =============================================================================
# CONFIGURATION
# =============================================================================

VERSION = "1.0.0"
DEFAULT_OUT = "results"
FLOAT_FORMAT = "%.12g"
REQUIRED = object()

OUTPUT_NAMES = {
    "numerics": "numerics",
    "gde-sff": "gde_sff",
    "gde-purity": "gde_purity",
    "discriminate": "discriminate",
    "concentration": "concentration",
    "haar-check": "haar_check",
}


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


def _split(value) -> list:
    if isinstance(value, (list, tuple)):
        return list(value)
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    return [value]


def int_list(value) -> list[int]:
    return [int(v) for v in _split(value)]


def float_list(value) -> list[float]:
    return [float(v) for v in _split(value)]


def str_list(value) -> list[str]:
    return [str(v) for v in _split(value)]


# key -> (converter, default)
SCHEMAS = {
    "numerics": {
        "n": (int_list, REQUIRED),
        "depth": (int, 1),
        "t_max": (float, 4.0),
        "t_steps": (int, 20),
        "samples": (int, 100),
        "theta_draws": (int, 2),
        "boundary": (str, "open"),
        "seed": (int, REQUIRED),
    },
    "gde-sff": {
        "n": (int, REQUIRED),
        "k": (int_list, [1, 2]),
        "t": (float_list, REQUIRED),
        "samples": (int, 200),
        "seed": (int, REQUIRED),
    },
    "gde-purity": {
        "n": (int, REQUIRED),
        "lambda_size": (int, 2),
        "t": (float_list, REQUIRED),
        "samples": (int, 100),
        "seed": (int, REQUIRED),
    },
    "discriminate": {
        "n": (int, 6),
        "a_size": (int, 2),
        "t": (float, 0.5),
        "size": (int, 8),
        "depth": (int, 2),
        "iterations": (int, 200),
        "step_size": (float, 0.05),
        "seed": (int, REQUIRED),
    },
    "concentration": {
        "families": (str_list, ["product_random", "haar", "gde_evolved"]),
        "n": (int_list, [6, 8, 10]),
        "depth": (int_list, [1, 2]),
        "locality": (int_list, [1, 2]),
        "instances": (int, 500),
        "t": (float, 1.0),
        "seed": (int, REQUIRED),
    },
    "haar-check": {
        "dim": (int, 4),
        "k": (int_list, [1, 2]),
        "samples": (int, 100000),
        "seed": (int, REQUIRED),
    },
}


def _require(ok: bool, message: str):
    if not ok:
        raise ConfigError(message)


def _check_times(values: list[float], key: str = "t"):
    _require(len(values) > 0, f"'{key}' must list at least one time")
    _require(all(v >= 0 for v in values), f"'{key}' must be >= 0, got {values}")


def _check_numerics(cfg: dict):
    _require(len(cfg["n"]) > 0, "'n' must list at least one size")
    _require(all(HEISENBERG_MIN_QUBITS <= n <= HEISENBERG_MAX_QUBITS for n in cfg["n"]),
             f"'n' must lie in [{HEISENBERG_MIN_QUBITS}, {HEISENBERG_MAX_QUBITS}], got {cfg['n']}")
    _require(cfg["depth"] >= 0, f"'depth' must be >= 0, got {cfg['depth']}")
    _check_times([cfg["t_max"]], "t_max")
    _require(cfg["t_steps"] >= 1, f"'t_steps' must be >= 1, got {cfg['t_steps']}")
    _require(cfg["samples"] >= 1, f"'samples' must be >= 1, got {cfg['samples']}")
    _require(cfg["theta_draws"] >= 1, f"'theta_draws' must be >= 1, got {cfg['theta_draws']}")
    _require(cfg["boundary"] in BOUNDARIES, f"'boundary' must be one of {BOUNDARIES}, got {cfg['boundary']!r}")


def _check_gde_sff(cfg: dict):
    _require(1 <= cfg["n"] <= MAX_GDE_QUBITS, f"'n' must lie in [1, {MAX_GDE_QUBITS}], got {cfg['n']}")
    _require(len(cfg["k"]) > 0 and all(k >= 1 for k in cfg["k"]), f"'k' must list integers >= 1, got {cfg['k']}")
    _check_times(cfg["t"])
    _require(cfg["samples"] >= 1, f"'samples' must be >= 1, got {cfg['samples']}")


def _check_gde_purity(cfg: dict):
    _require(1 <= cfg["n"] <= MAX_GDE_QUBITS, f"'n' must lie in [1, {MAX_GDE_QUBITS}], got {cfg['n']}")
    _require(1 <= cfg["lambda_size"] <= cfg["n"],
             f"'lambda_size' must lie in [1, n], got {cfg['lambda_size']}")
    _check_times(cfg["t"])
    _require(cfg["samples"] >= 1, f"'samples' must be >= 1, got {cfg['samples']}")


def _check_discriminate(cfg: dict):
    _require(3 <= cfg["n"] <= MAX_GDE_QUBITS, f"'n' must lie in [3, {MAX_GDE_QUBITS}], got {cfg['n']}")
    _require(MIN_SYMMETRY_QUBITS <= cfg["a_size"] < cfg["n"],
             f"'a_size' must lie in [{MIN_SYMMETRY_QUBITS}, n - 1], got {cfg['a_size']}")
    _check_times([cfg["t"]])
    _require(cfg["size"] >= 2 and cfg["size"] % 2 == 0, f"'size' must be even and >= 2, got {cfg['size']}")
    _require(cfg["depth"] >= 0, f"'depth' must be >= 0, got {cfg['depth']}")
    _require(cfg["iterations"] >= 1, f"'iterations' must be >= 1, got {cfg['iterations']}")
    _require(cfg["step_size"] >= 0, f"'step_size' must be >= 0, got {cfg['step_size']}")


def _check_concentration(cfg: dict):
    unknown = [f for f in cfg["families"] if f not in STATE_FAMILIES]
    _require(len(cfg["families"]) > 0 and not unknown,
             f"'families' must name states from {STATE_FAMILIES}, got {cfg['families']}")
    _require(len(cfg["n"]) > 0 and all(n >= 1 for n in cfg["n"]), f"'n' must list sizes >= 1, got {cfg['n']}")
    _require(len(cfg["depth"]) > 0 and all(d >= 0 for d in cfg["depth"]),
             f"'depth' must list depths >= 0, got {cfg['depth']}")
    _require(len(cfg["locality"]) > 0 and all(1 <= k <= min(cfg["n"]) for k in cfg["locality"]),
             f"'locality' must lie in [1, min(n)], got {cfg['locality']}")
    _require(cfg["instances"] >= 1, f"'instances' must be >= 1, got {cfg['instances']}")
    _check_times([cfg["t"]])


def _check_haar(cfg: dict):
    _require(1 <= cfg["dim"] <= MAX_HAAR_DIM, f"'dim' must lie in [1, {MAX_HAAR_DIM}], got {cfg['dim']}")
    _require(len(cfg["k"]) > 0 and all(k >= 1 for k in cfg["k"]), f"'k' must list integers >= 1, got {cfg['k']}")
    _require(cfg["samples"] >= 1, f"'samples' must be >= 1, got {cfg['samples']}")


VALIDATORS = {
    "numerics": _check_numerics,
    "gde-sff": _check_gde_sff,
    "gde-purity": _check_gde_purity,
    "discriminate": _check_discriminate,
    "concentration": _check_concentration,
    "haar-check": _check_haar,
}


# =============================================================================
# CONFIG RESOLUTION
# =============================================================================

def load_config_file(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"Config file not found: {path}")
    text = p.read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text) if p.suffix in (".yaml", ".yml") else json.loads(text)
    except (yaml.YAMLError, json.JSONDecodeError) as e:
        raise ConfigError(f"Could not parse {path}: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must hold a flat object")
    return {str(k).replace("-", "_"): v for k, v in data.items()}


def resolve_config(command: str, file_values: dict, flag_values: dict) -> dict:
    """Merge defaults < file < flags, convert every key and check its range."""
    schema = SCHEMAS[command]
    unknown = set(file_values) - set(schema)
    if unknown:
        raise ConfigError(f"Unknown keys for {command}: {sorted(unknown)}")

    config = {}
    for key, (convert, default) in schema.items():
        raw = flag_values.get(key)
        if raw is None:
            raw = file_values.get(key, default)
        if raw is REQUIRED:
            raise ConfigError(f"Missing required key '{key}' (--{key.replace('_', '-')}) for {command}")
        try:
            config[key] = convert(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"Invalid value for '{key}': {raw!r}")
    VALIDATORS[command](config)
    return config


def config_hash(command: str, config: dict) -> str:
    canonical = json.dumps({"command": command, **config}, sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="run_experiments.py", description="HEA trainability lab runner")
    sub = parser.add_subparsers(dest="command", required=True)
    for command, schema in SCHEMAS.items():
        p = sub.add_parser(command)
        for key in schema:
            p.add_argument(f"--{key.replace('_', '-')}", dest=key, type=str, default=None)
        p.add_argument("--config", type=str, default=None)
        p.add_argument("--out", type=str, default=DEFAULT_OUT)
        p.add_argument("--plot", action="store_true")
        p.add_argument("--progress", action="store_true")
    return parser


# =============================================================================
# OUTPUT
# =============================================================================

def _json_safe(value):
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return None if math.isnan(value) or math.isinf(value) else value
    return value


def atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def write_results(out_dir: Path, name: str, meta: dict, frame: pd.DataFrame, summary: dict) -> Path:
    header = [
        f"# config_hash: {meta['config_hash']}",
        f"# seed: {meta['seed']}",
        f"# version: {meta['version']}",
        f"# config: {json.dumps(meta['config'], sort_keys=True)}",
    ]
    body = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    csv_path = out_dir / f"{name}.csv"
    atomic_write(csv_path, "\n".join(header) + "\n" + body)

    payload = _json_safe({"meta": meta, **summary})
    atomic_write(out_dir / f"{name}.json", json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return csv_path


# =============================================================================
# PIPELINES
# =============================================================================

def run_numerics(cfg: dict, progress: bool) -> tuple[pd.DataFrame, dict]:
    config = GradientTimeConfig(
        n_values=tuple(cfg["n"]), depth=cfg["depth"], t_max=cfg["t_max"], t_steps=cfg["t_steps"],
        num_states=cfg["samples"], num_theta_draws=cfg["theta_draws"], seed=cfg["seed"],
        boundary=cfg["boundary"],
    )
    result = gradient_vs_time_experiment(config, progress)
    return result.to_frame(), result.summary


def run_gde_sff(cfg: dict, progress: bool) -> tuple[pd.DataFrame, dict]:
    n, ks, ts = cfg["n"], cfg["k"], cfg["t"]

    def one(i):
        h = sample_gde(n, sample_rng(cfg["seed"], i))
        return [[spectral_form_factor(h, t, k) for t in ts] for k in ks]

    values = np.array(parallel_map(one, range(cfg["samples"]), progress, "gde-sff"))
    rows = []
    for a, k in enumerate(ks):
        for b, t in enumerate(ts):
            stats = RunningStats().extend(values[:, a, b])
            rows.append({
                "k": k, "t": t, "empirical_mean": stats.mean, "std_error": stats.std_error,
                "analytic": analytic_prediction("gde_sff", k=k, t=t),
            })
    return pd.DataFrame(rows), {"rows": rows}


def run_gde_purity(cfg: dict, progress: bool) -> tuple[pd.DataFrame, dict]:
    n, size, ts = cfg["n"], cfg["lambda_size"], cfg["t"]
    subsystem = range(size)
    d_lambda = 2 ** size

    def one(i):
        rng = sample_rng(cfg["seed"], i)
        h = sample_gde(n, rng)
        start = prepare_state("product_random", n, rng)
        columns = evolve_times(h, start, ts)
        out = []
        for c in range(len(ts)):
            state = StateVector(n, columns[:, c])
            out.append((purity(state, subsystem), scrambling_measure(state, subsystem)))
        return out

    values = np.array(parallel_map(one, range(cfg["samples"]), progress, "gde-purity"))
    rows = []
    for b, t in enumerate(ts):
        p = values[:, b, 0]
        i_values = values[:, b, 1]
        first = RunningStats().extend(p)
        second = RunningStats().extend(p ** 2)
        threshold = analytic_prediction("scrambling_threshold", lambda_size=size, t=t)
        rows.append({
            "t": t,
            "mean_purity": first.mean,
            "std_error": first.std_error,
            "second_moment": second.mean,
            "second_std_error": second.std_error,
            "analytic_mean": analytic_prediction("gde_purity_mean", d_lambda=d_lambda, t=t),
            "analytic_second": analytic_prediction("gde_purity_second", d_lambda=d_lambda, t=t),
            "mean_I": float(np.mean(i_values)),
            "scrambling_threshold": threshold,
            "fraction_above_threshold": float(np.mean(i_values >= threshold)),
        })
    return pd.DataFrame(rows), {"rows": rows}


def run_discriminate(cfg: dict, progress: bool) -> tuple[pd.DataFrame, dict]:
    train_config = TrainConfig(step_size=cfg["step_size"], iterations=cfg["iterations"], seed=cfg["seed"])
    result = run_discrimination(cfg["n"], cfg["a_size"], cfg["t"], cfg["size"], cfg["depth"],
                                train_config, cfg["seed"], progress)
    trajectory = result.training.loss_trajectory
    frame = pd.DataFrame({"iteration": np.arange(len(trajectory)), "loss": trajectory})
    summary = {
        "initial_loss": float(trajectory[0]),
        "final_loss": float(trajectory[-1]),
        "train_accuracy": result.training.train_accuracy,
        "class_means": result.class_means,
    }
    return frame, summary


def run_concentration(cfg: dict, progress: bool) -> tuple[pd.DataFrame, dict]:
    check = concentration_check(cfg["families"], cfg["n"], cfg["depth"], cfg["locality"],
                                cfg["instances"], cfg["seed"], cfg["t"], progress)
    summary = {"instances": check.instances, "violations": check.violations, "worst_ratio": check.worst_ratio}
    return check.to_frame(), summary


def run_haar_check(cfg: dict, progress: bool) -> tuple[pd.DataFrame, dict]:
    dim, ks = cfg["dim"], cfg["k"]

    def one(i):
        u = haar_unitary(dim, sample_rng(cfg["seed"], i))
        err = float(np.max(np.abs(u.conj().T @ u - np.eye(dim))))
        return [abs(u[0, 0]) ** (2 * k) for k in ks] + [err]

    values = np.array(parallel_map(one, range(cfg["samples"]), progress, "haar-check"))
    rows = []
    for a, k in enumerate(ks):
        stats = RunningStats().extend(values[:, a])
        rows.append({
            "k": k, "empirical_mean": stats.mean, "std_error": stats.std_error,
            "analytic": analytic_prediction("haar_element_moment", dim=dim, k=k),
        })
    summary = {"rows": rows, "max_unitarity_error": float(np.max(values[:, -1]))}
    return pd.DataFrame(rows), summary


PIPELINES = {
    "numerics": run_numerics,
    "gde-sff": run_gde_sff,
    "gde-purity": run_gde_purity,
    "discriminate": run_discriminate,
    "concentration": run_concentration,
    "haar-check": run_haar_check,
}


# =============================================================================
# ENTRY POINT
# =============================================================================

def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else 2

    command = args.command
    try:
        file_values = load_config_file(args.config) if args.config else {}
        flags = {k: getattr(args, k) for k in SCHEMAS[command]}
        cfg = resolve_config(command, file_values, flags)
    except ConfigError as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return 2

    out_dir = Path(args.out)
    name = OUTPUT_NAMES[command]
    meta = {
        "command": command,
        "version": VERSION,
        "seed": cfg["seed"],
        "config_hash": config_hash(command, cfg),
        "config": cfg,
    }

    print("=" * 70)
    print(f"HEA LAB - {command.upper()}")
    print("=" * 70)
    print(f"Output: {out_dir}")
    print(f"Config hash: {meta['config_hash']}")
    print(f"Time: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    print()

    try:
        print(f"[1/3] Running {command}...")
        frame, summary = PIPELINES[command](cfg, args.progress)
        print(f"       Rows: {len(frame)}")

        print(f"\n[2/3] Writing {name}.csv / {name}.json...")
        csv_path = write_results(out_dir, name, meta, frame, summary)

        print(f"\n[3/3] Plot...")
        if args.plot:
            if command in PLOT_SCHEMAS:
                svg = emit_plot(csv_path, command)
                print(f"       Saved {svg}")
            else:
                print(f"Warning: no plot kind for {command}; skipped")
        else:
            print("       Skipped (use --plot)")
    except Exception as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return 1

    print()
    print("=" * 70)
    print("DONE")
    print("=" * 70)
    return 0


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
