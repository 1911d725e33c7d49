"""Batch command-line front end.

Configuration is strict JSON: unknown keys are rejected, frequencies are
linear Hz (converted to angular exactly once, on ingestion), and every
default is materialized into the echoed config in run.json.

Commands: evolve | sweep-theta | sweep-n | fit | presets | check-elimination.
Exit codes: 0 success, 1 usage/config error, 2 physics-diagnostic failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .dynamics import EvolutionSpec, evolve_master, full_model_check, lambda_from_theta
from .hilbert import HilbertSpace, spin_reduced
from .metrics import squeezing_report, theta_opt
from .model import TWO_PI, DickeParams, load_preset, PRESETS
from .sweeps import (
    N_GRID_DEFAULT,
    THETA_GRID_DEFAULT,
    SweepSpec,
    extrapolate,
    fit_power_law,
    fit_sweep_rows,
    run_sweep,
)

WORKERS_ENV_VAR = "DICKE_SQUEEZE_WORKERS"

COMMANDS = ("evolve", "sweep-theta", "sweep-n", "fit", "presets", "check-elimination")

THETA_SWEEP_COLUMNS = (
    "theta_ratio", "theta", "lambda", "xi_s_sq", "xi_R_sq", "xi_R_db",
    "trace_drift", "tail_pop", "status",
)
N_SWEEP_COLUMNS = ("n_atoms",) + THETA_SWEEP_COLUMNS


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending key."""


@dataclass(frozen=True)
class RunConfig:
    command: str
    preset: str | None = None
    n_atoms: int = 50
    n_max: int = 16
    omega_c_hz: float = 1.0
    kappa_hz: float = 0.0
    omega_q_hz: float = 0.0
    gamma_phi_hz: float = 0.0
    lambda_hz: float | None = None
    theta_rad: float | None = None
    theta_ratios: tuple = tuple(THETA_GRID_DEFAULT)
    n_grid: tuple = N_GRID_DEFAULT
    theta_rule: float = 1.0
    frame: str = "lab"
    t_final_s: float | None = None
    n_samples: int | None = None
    rtol: float = 1e-8
    atol: float = 1e-10
    seed: int = 0
    output: str = "."
    workers: int | None = None
    input_csv: str | None = None
    extrapolate_n: tuple = ()
    fit_min_n: int = 10

    def dicke_params(self) -> DickeParams:
        lam = 0.0
        if self.lambda_hz is not None:
            lam = TWO_PI * self.lambda_hz
        elif self.theta_rad is not None:
            lam = lambda_from_theta(self.theta_rad, TWO_PI * self.omega_c_hz)
        return DickeParams(
            omega_c=TWO_PI * self.omega_c_hz,
            omega_q=TWO_PI * self.omega_q_hz,
            lam=lam,
            N_a=self.n_atoms,
            kappa=TWO_PI * self.kappa_hz,
            Gamma_phi=TWO_PI * self.gamma_phi_hz,
        )


_SCALAR_FIELDS = {
    "command": str,
    "preset": str,
    "n_atoms": int,
    "n_max": int,
    "omega_c_hz": float,
    "kappa_hz": float,
    "omega_q_hz": float,
    "gamma_phi_hz": float,
    "lambda_hz": float,
    "theta_rad": float,
    "theta_rule": float,
    "frame": str,
    "t_final_s": float,
    "n_samples": int,
    "seed": int,
    "output": str,
    "workers": int,
    "input_csv": str,
    "fit_min_n": int,
}
_LIST_FIELDS = {"theta_ratios", "n_grid", "extrapolate_n"}
_NONNEGATIVE = ("kappa_hz", "gamma_phi_hz")


def parse_config(text: str) -> RunConfig:
    """Parse and validate a strict-JSON run configuration."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("top-level config must be a JSON object")

    known = set(_SCALAR_FIELDS) | _LIST_FIELDS | {"tolerances"}
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown key {key!r}")

    if "command" not in raw:
        raise ConfigError("missing required key 'command'")
    command = raw["command"]
    if command not in COMMANDS:
        raise ConfigError(f"command: must be one of {COMMANDS}, got {command!r}")

    values: dict = {"command": command}

    for key, typ in _SCALAR_FIELDS.items():
        if key not in raw or key == "command":
            continue
        val = raw[key]
        if val is None:  # JSON null round-trips as "not set"
            continue
        if typ is float:
            if not isinstance(val, (int, float)) or isinstance(val, bool):
                raise ConfigError(f"{key}: expected a number, got {val!r}")
            val = float(val)
            if not np.isfinite(val):
                raise ConfigError(f"{key}: must be finite")
        elif typ is int:
            if not isinstance(val, int) or isinstance(val, bool):
                raise ConfigError(f"{key}: expected an integer, got {val!r}")
        elif typ is str and not isinstance(val, str):
            raise ConfigError(f"{key}: expected a string, got {val!r}")
        values[key] = val

    for key in _LIST_FIELDS:
        if key not in raw:
            continue
        val = raw[key]
        if not isinstance(val, list) or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in val
        ):
            raise ConfigError(f"{key}: expected a list of numbers")
        values[key] = tuple(int(x) if key == "n_grid" else float(x) for x in val)

    if "tolerances" in raw:
        tol = raw["tolerances"]
        if not isinstance(tol, dict):
            raise ConfigError("tolerances: expected an object")
        for key in tol:
            if key not in ("rtol", "atol"):
                raise ConfigError(f"tolerances.{key}: unknown key")
            val = tol[key]
            if not isinstance(val, (int, float)) or isinstance(val, bool) or val <= 0:
                raise ConfigError(f"tolerances.{key}: expected a positive number")
            values[key] = float(val)

    for key in _NONNEGATIVE:
        if values.get(key, 0.0) < 0:
            raise ConfigError(f"{key}: must be nonnegative")
    if values.get("omega_c_hz", 1.0) <= 0:
        raise ConfigError("omega_c_hz: must be positive")
    if values.get("frame", "lab") not in ("lab", "interaction"):
        raise ConfigError(f"frame: must be 'lab' or 'interaction'")
    if "lambda_hz" in values and "theta_rad" in values:
        raise ConfigError("lambda_hz: mutually exclusive with theta_rad")

    # preset values fill any key the user did not set explicitly
    if "preset" in values:
        preset = load_preset(values["preset"])  # raises on unknown name
        d = preset.dicke
        values.setdefault("omega_c_hz", d.omega_c / TWO_PI)
        values.setdefault("kappa_hz", d.kappa / TWO_PI)
        values.setdefault("omega_q_hz", d.omega_q / TWO_PI)
        values.setdefault("gamma_phi_hz", d.Gamma_phi / TWO_PI)
        values.setdefault("theta_rule", preset.theta_max_factor)
    elif command in ("evolve", "sweep-theta", "sweep-n") and "omega_c_hz" not in values:
        raise ConfigError("omega_c_hz: required when no preset is given")

    if command == "fit" and "input_csv" not in values:
        raise ConfigError("input_csv: required for the fit command")
    if command == "check-elimination":
        values.setdefault("preset", "rb_atoms")
        values.setdefault("n_atoms", 1)
        if values["n_atoms"] not in (1, 2):
            raise ConfigError("n_atoms: check-elimination supports only 1 or 2")

    return RunConfig(**values)


def emit_config(config: RunConfig) -> dict:
    """Config as a JSON-ready dict with every default materialized."""
    out = dataclasses.asdict(config)
    out["theta_ratios"] = list(out["theta_ratios"])
    out["n_grid"] = list(out["n_grid"])
    out["extrapolate_n"] = list(out["extrapolate_n"])
    out["tolerances"] = {"rtol": out.pop("rtol"), "atol": out.pop("atol")}
    return out


def _atomic_write(path: str, text: str):
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))  # shortest round-trip representation
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def _write_csv(path: str, columns, rows):
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    _atomic_write(path, buf.getvalue())


def _row_tuple(row, with_n: bool):
    base = (
        row.theta_ratio, row.theta, row.lam, row.xi_s_sq, row.xi_R_sq,
        row.xi_R_db, row.trace_drift, row.tail_pop, row.status,
    )
    return (row.n_atoms,) + base if with_n else base


def _fit_payload(fit, extrapolate_n):
    payload = {
        "a": fit.a,
        "b": fit.b,
        "r_squared": fit.r_squared,
        "n_points": fit.n_points,
        "residuals": list(fit.residuals),
        "fit_range_sensitivity": fit.sensitivity,
    }
    if extrapolate_n:
        payload["extrapolations"] = [extrapolate(fit, n) for n in extrapolate_n]
    return payload


def run(config: RunConfig, out_dir: str | None = None, workers: int | None = None,
        quiet: bool = False) -> int:
    """Execute a parsed configuration; returns the process exit status."""
    t_start = time.time()
    out_dir = out_dir or config.output
    os.makedirs(out_dir, exist_ok=True)
    if workers is None:
        workers = config.workers
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV_VAR, "1"))
    workers = max(1, workers)

    def say(msg):
        if not quiet:
            print(msg)

    artifacts = []
    status = "ok"
    report = None

    def path(name):
        artifacts.append(name)
        return os.path.join(out_dir, name)

    if config.command == "presets":
        listing = {}
        for name, preset in sorted(PRESETS.items()):
            d = preset.dicke
            listing[name] = {
                "omega_c_hz": d.omega_c / TWO_PI,
                "kappa_hz": d.kappa / TWO_PI,
                "omega_q_hz": d.omega_q / TWO_PI,
                "gamma_phi_hz": d.Gamma_phi / TWO_PI,
                "lambda_hz": d.lam / TWO_PI,
                "theta_max_factor": preset.theta_max_factor,
                "has_physical_params": preset.physical is not None,
            }
            say(f"{name}: " + ", ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                                        for k, v in listing[name].items()))
        _atomic_write(path("presets.json"), json.dumps(listing, indent=2))

    elif config.command == "fit":
        points = []
        with open(config.input_csv) as fh:
            for rec in csv.DictReader(fh):
                if rec.get("status", "ok") != "ok":
                    continue
                n = float(rec["n_atoms"])
                if n >= config.fit_min_n:
                    points.append((n, float(rec["xi_R_sq"])))
        fit = fit_power_law(points)
        _atomic_write(path("fit.json"),
                      json.dumps(_fit_payload(fit, config.extrapolate_n), indent=2))
        say(f"fit: xi_R^2 = {fit.a:.4g} * N^{fit.b:+.4g} (r^2 = {fit.r_squared:.5f})")

    elif config.command == "check-elimination":
        preset = load_preset(config.preset)
        if preset.physical is None:
            raise ConfigError(f"preset: {config.preset!r} carries no physical parameters")
        report = full_model_check(
            preset.physical, n_atoms=config.n_atoms, n_max=config.n_max,
            rtol=config.rtol, atol=config.atol,
        )
        row_status = "ok" if (report["within_bound"]
                              and report["fidelity_effective_vs_full"] >= 0.99) else "failed"
        if row_status != "ok":
            status = "physics-failure"
        _write_csv(path("results.csv"),
                   ("n_atoms", "max_excited_population", "excited_population_bound",
                    "ground_manifold_leakage_at_t1", "fidelity_effective_vs_full", "status"),
                   [(config.n_atoms, report["max_excited_population"],
                     report["excited_population_bound"],
                     report["ground_manifold_leakage_at_t1"],
                     report["fidelity_effective_vs_full"], row_status)])
        say(f"elimination check: max excited population "
            f"{report['max_excited_population']:.3e} "
            f"(bound {report['excited_population_bound']:.3e}), "
            f"fidelity {report['fidelity_effective_vs_full']:.6f}")

    elif config.command == "evolve":
        dicke = config.dicke_params()
        space = HilbertSpace(config.n_atoms, config.n_max)
        result = evolve_master(EvolutionSpec(
            dicke=dicke, space=space, t_final=config.t_final_s,
            rtol=config.rtol, atol=config.atol, frame=config.frame,
            n_samples=config.n_samples,
        ))
        theta = (config.theta_rad if config.theta_rad is not None
                 else (2 * dicke.lam / dicke.omega_c) ** 2 * 2 * np.pi)
        rep = squeezing_report(spin_reduced(result.final_state, result.space),
                               config.n_atoms)
        if result.status != "ok":
            status = "physics-failure"
        _write_csv(path("results.csv"), THETA_SWEEP_COLUMNS, [(
            theta / theta_opt(config.n_atoms), theta, dicke.lam,
            rep.xi_s_sq, rep.xi_R_sq, rep.xi_R_sq_db,
            result.trace_drift, result.max_tail_population, result.status,
        )])
        say(f"evolve: xi_R^2 = {rep.xi_R_sq:.6g} ({rep.xi_R_sq_db:.3f} dB), "
            f"status {result.status}")

    elif config.command in ("sweep-theta", "sweep-n"):
        kind = "theta_sweep" if config.command == "sweep-theta" else "n_sweep"
        grid = config.theta_ratios if kind == "theta_sweep" else config.n_grid
        spec = SweepSpec(
            kind=kind, base=config.dicke_params(), grid=tuple(grid),
            theta_rule=config.theta_rule, n_max=config.n_max,
            rtol=config.rtol, atol=config.atol, frame=config.frame,
        )
        rows = run_sweep(spec, workers=workers)
        with_n = kind == "n_sweep"
        columns = N_SWEEP_COLUMNS if with_n else THETA_SWEEP_COLUMNS
        _write_csv(path("results.csv"), columns,
                   [_row_tuple(r, with_n) for r in rows])
        bad = [r for r in rows if r.status != "ok"]
        if bad:
            status = "physics-failure"
        say(f"{config.command}: {len(rows) - len(bad)}/{len(rows)} rows ok")
        if with_n:
            try:
                fit = fit_sweep_rows(rows, min_n=config.fit_min_n)
            except ValueError as exc:
                say(f"fit skipped: {exc}")
            else:
                _atomic_write(path("fit.json"),
                              json.dumps(_fit_payload(fit, config.extrapolate_n), indent=2))
                say(f"fit: xi_R^2 = {fit.a:.4g} * N^{fit.b:+.4g}")

    run_info = {
        "command": config.command,
        "config": emit_config(config),
        "version": __version__,
        "wall_time_s": time.time() - t_start,
        "integrator": {"rtol": config.rtol, "atol": config.atol},
        "workers": workers,
        "status": status,
        "artifacts": artifacts,
    }
    if report is not None:
        run_info["report"] = report
    _atomic_write(os.path.join(out_dir, "run.json"), json.dumps(run_info, indent=2))

    return 0 if status == "ok" else 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def main(argv=None) -> int:
    parser = _Parser(prog="gpsqueeze", description=__doc__)
    parser.add_argument("--config", required=True, help="path to a JSON run config")
    parser.add_argument("--out", default=None, help="output directory (default: from config)")
    parser.add_argument("--workers", type=int, default=None,
                        help=f"sweep worker count (fallback: ${WORKERS_ENV_VAR})")
    parser.add_argument("--quiet", action="store_true")
    try:
        args = parser.parse_args(argv)
        with open(args.config) as fh:
            config = parse_config(fh.read())
        return run(config, out_dir=args.out, workers=args.workers, quiet=args.quiet)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
