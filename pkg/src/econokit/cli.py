"""Command-line interface: reproducible simulation and analysis runs.

Every command reads one JSON config file, resolves it against command-line
overrides, runs, and writes its outputs next to a ``manifest.json`` that
records the resolved configuration, its digest, the seed, and the output
file names.  Re-running a command from its manifest (pass the manifest as
``--config``) reproduces the outputs byte for byte.

Exit codes: 0 success, 1 runtime or analysis failure (a machine-readable
error record is printed to stderr), 2 configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from . import kwem, mlvp, portfolio, scaling, series, wealth_stats

SEED_ENV_VAR = "ECONOKIT_SEED"


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration (exit code 2)."""


# ---------------------------------------------------------------------------
# config plumbing


def _load_config(path: str | None) -> tuple[dict, int | None]:
    """Load a config file; returns (config, seed inherited from a manifest)."""
    if path is None:
        return {}, None
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError("config file must contain a JSON object")
    if "resolved_config" in obj:  # a manifest: re-run from it
        cfg = obj["resolved_config"]
        if not isinstance(cfg, dict):
            raise ConfigError("manifest field 'resolved_config' must be an object")
        inherited = obj.get("seed")
        return dict(cfg), None if inherited is None else int(inherited)
    return obj, None


def _resolve_seed(args, config: dict,
                  inherited: int | None) -> tuple[int, bool]:
    """Seed precedence: --seed flag, env override, config, manifest, 0.

    Returns the seed and whether the environment override supplied it.
    """
    if args.seed is not None:
        return int(args.seed), False
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env), True
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer") from exc
    if config.get("seed") is not None:
        try:
            return int(config["seed"]), False
        except (TypeError, ValueError) as exc:
            raise ConfigError("config field 'seed' must be an integer") from exc
    if inherited is not None:
        return inherited, False
    return 0, False


def _config_digest(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _require(config: dict, field: str, kind, positive: bool = False):
    if field not in config:
        raise ConfigError(f"missing config field '{field}'")
    try:
        value = kind(config[field])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config field '{field}' must be {kind.__name__}") from exc
    if positive and value <= 0:
        raise ConfigError(f"config field '{field}' must be positive")
    return value


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(out_dir: Path, command: str, config: dict, seed: int,
                    env_override: bool, outputs: list[str]) -> None:
    manifest = {
        "command": command,
        "tool_version": __version__,
        "seed": seed,
        "env_seed_override": env_override,
        "config_digest": _config_digest(config),
        "resolved_config": config,
        "outputs": sorted(outputs),
    }
    _write_json(out_dir / "manifest.json", manifest)


def _out_dir(args) -> Path:
    out = Path(args.out if args.out else ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _float_cell(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# input readers


def _read_snapshot_csv(path: str) -> tuple[np.ndarray, np.ndarray | None]:
    """Read an 'index,wealth,lambda' snapshot written by the simulate command."""
    wealths: list[float] = []
    lambdas: list[float] = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        cols = [c.strip() for c in header.split(",")]
        if cols[:2] != ["index", "wealth"]:
            raise ValueError(f"{path}: expected header 'index,wealth[,lambda]'")
        has_lambda = len(cols) > 2
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            wealths.append(float(parts[1]))
            if has_lambda:
                lambdas.append(float(parts[2]))
    if not wealths:
        raise ValueError(f"{path}: no data rows")
    return (np.array(wealths),
            np.array(lambdas) if lambdas else None)


def _read_returns_csv(path: str) -> portfolio.ReturnPair:
    """Read a two-column return CSV (header names are free-form)."""
    ra: list[float] = []
    rb: list[float] = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if len(header.split(",")) < 2:
            raise ValueError(f"{path}: expected a two-column CSV of returns")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            ra.append(float(parts[0]))
            rb.append(float(parts[1]))
    return portfolio.ReturnPair(np.array(ra), np.array(rb))


# ---------------------------------------------------------------------------
# simulate


def _build_sim_config(config: dict, seed: int) -> kwem.SimConfig:
    rule_cfg = config.get("rule")
    if not isinstance(rule_cfg, dict):
        raise ConfigError("missing config section 'rule'")
    kind = rule_cfg.get("kind")
    try:
        if kind == "homogeneous_omega" and "lambda" in rule_cfg:
            lam = float(rule_cfg["lambda"])
            if not (0 <= lam < 1):
                raise ConfigError("config field 'lambda' must lie in [0, 1)")
            rule = kwem.ExchangeRule(kind=kind, omega=1.0 - lam)
        else:
            rule = kwem.ExchangeRule(
                kind=kind if kind is not None else "",
                kappa=rule_cfg.get("kappa"),
                omega=rule_cfg.get("omega"),
            )
        return kwem.SimConfig(
            n_agents=_require(config, "n_agents", int),
            n_trades=_require(config, "n_trades", int),
            seed=seed,
            rule=rule,
            initial_wealth=float(config.get("initial_wealth", 1.0)),
            snapshot_times=list(config.get("snapshot_times", [])),
            savings_value=config.get("savings_value"),
            lambda_max=config.get("lambda_max"),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _write_snapshot(path: Path, snap: wealth_stats.WealthSnapshot) -> None:
    lams = snap.agent_savings
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("index,wealth,lambda\n")
        for i, w in enumerate(snap.agent_wealths):
            lam = 0.0 if lams is None else lams[i]
            fh.write(f"{i},{_float_cell(w)},{_float_cell(lam)}\n")


def _run_one_simulation(config: dict, seed: int, out_dir: Path) -> list[str]:
    sim_config = _build_sim_config(config, seed)
    if not sim_config.snapshot_times:
        sim_config.snapshot_times = [sim_config.n_trades]
    result = kwem.run_simulation(sim_config)
    outputs = []
    for snap in result.snapshots:
        name = f"snapshot_{snap.trade_count:012d}.csv"
        _write_snapshot(out_dir / name, snap)
        outputs.append(name)
    return outputs


def cmd_simulate(args, config: dict, seed: int, env_override: bool) -> int:
    out_dir = _out_dir(args)
    if args.replicas <= 1:
        outputs = _run_one_simulation(config, seed, out_dir)
    else:
        outputs = []
        summaries = []
        for i, sub_seed in enumerate(kwem.spawn_seeds(seed, args.replicas)):
            rep_dir = out_dir / f"replica_{i:03d}"
            rep_dir.mkdir(exist_ok=True)
            names = _run_one_simulation(config, sub_seed, rep_dir)
            outputs.extend(f"replica_{i:03d}/{n}" for n in names)
            final, _ = _read_snapshot_csv(str(rep_dir / sorted(names)[-1]))
            summaries.append({
                "replica": i,
                "seed": sub_seed,
                "mean_wealth": float(final.mean()),
                "gini": wealth_stats.gini(final),
            })
        merged = {
            "replicas": summaries,
            "mean_gini": float(np.mean([s["gini"] for s in summaries])),
            "std_gini": float(np.std([s["gini"] for s in summaries])),
        }
        _write_json(out_dir / "summary.json", merged)
        outputs.append("summary.json")
    _write_manifest(out_dir, "simulate", config, seed, env_override, outputs)
    return 0


# ---------------------------------------------------------------------------
# analyze-wealth


def cmd_analyze_wealth(args, config: dict, seed: int, env_override: bool) -> int:
    out_dir = _out_dir(args)
    wealths, _ = _read_snapshot_csv(args.input)
    snap = wealth_stats.WealthSnapshot.from_agent_wealths(0, wealths)
    fit = wealth_stats.fit_gamma(snap)
    record: dict = {
        "n_samples": fit.n_samples,
        "mean_wealth": snap.mean_wealth,
        "shape_n": fit.shape_n,
        "scale": fit.scale,
        "ks_stat": fit.ks_stat,
        "gini": wealth_stats.gini(wealths),
        "wealth_cutoff": wealth_stats.wealth_cutoff(snap),
    }
    if config.get("fit_tail", False):
        try:
            tail = wealth_stats.fit_pareto_tail(snap)
            record["pareto_tail"] = asdict(tail)
        except wealth_stats.NoTailDetectedError as exc:
            record["pareto_tail"] = None
            record["tail_note"] = str(exc)
    _write_json(out_dir / "wealth_analysis.json", record)
    _write_manifest(out_dir, "analyze-wealth", config, seed, env_override,
                    ["wealth_analysis.json"])
    return 0


# ---------------------------------------------------------------------------
# generate


def cmd_generate(args, config: dict, seed: int, env_override: bool) -> int:
    out_dir = _out_dir(args)
    kind = config.get("kind")
    if kind == "cascade":
        try:
            spec = series.CascadeSpec(
                p=_require(config, "p", float),
                depth=_require(config, "depth", int),
                seed=seed,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        ser = series.generate_binomial_cascade(spec)
    elif kind == "fgn":
        try:
            ser = series.generate_fgn_path(
                hurst=_require(config, "hurst", float),
                length=_require(config, "length", int),
                seed=seed,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    else:
        raise ConfigError("config field 'kind' must be 'cascade' or 'fgn'")
    series.write_csv(out_dir / "series.csv", ser)
    _write_manifest(out_dir, "generate", config, seed, env_override, ["series.csv"])
    return 0


# ---------------------------------------------------------------------------
# mlvp


def _mlvp_config(config: dict) -> mlvp.MlvpConfig:
    try:
        return mlvp.MlvpConfig(
            delta=_require(config, "delta", float),
            window=_require(config, "window", int),
            mode=config.get("mode", "absolute"),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_mlvp(args, config: dict, seed: int, env_override: bool) -> int:
    out_dir = _out_dir(args)
    ser = series.load_csv(args.input)
    cfg = _mlvp_config(config)
    periods = mlvp.extract_periods(ser, cfg)
    outputs = []

    with open(out_dir / "periods.csv", "w", encoding="utf-8") as fh:
        fh.write("start,length,censored\n")
        for p in periods.periods:
            fh.write(f"{p.start},{p.length},{int(p.censored)}\n")
    outputs.append("periods.csv")

    curve = mlvp.survival_curve(periods, config.get("censoring", "exclude"))
    with open(out_dir / "survival.csv", "w", encoding="utf-8") as fh:
        fh.write("n,count\n")
        for n, c in zip(curve.n_values, curve.counts):
            fh.write(f"{n},{c}\n")
    outputs.append("survival.csv")

    record: dict = {"n_periods": len(periods.periods),
                    "n_censored": int(sum(p.censored for p in periods.periods))}
    fit = mlvp.fit_scaling(curve, n_min=config.get("n_min"),
                           n_max=config.get("n_max"))
    record["scaling"] = {"alpha": fit.alpha, "r0": fit.r0,
                         "fit_range": list(fit.fit_range),
                         "r_squared": fit.r_squared, "n_points": fit.n_points}
    hz = mlvp.hazard_curve(periods)
    with open(out_dir / "hazard.csv", "w", encoding="utf-8") as fh:
        fh.write("length,hazard,events,at_risk\n")
        for i in range(len(hz.lengths)):
            fh.write(f"{_float_cell(hz.lengths[i])},{_float_cell(hz.hazards[i])},"
                     f"{int(hz.events[i])},{int(hz.at_risk[i])}\n")
    outputs.append("hazard.csv")
    record["hazard"] = {"merged_bins": hz.merged_bins,
                        "loglog_slope": mlvp.hazard_loglog_slope(hz)}

    _write_json(out_dir / "mlvp.json", record)
    outputs.append("mlvp.json")
    _write_manifest(out_dir, "mlvp", config, seed, env_override, outputs)
    return 0


# ---------------------------------------------------------------------------
# collapse


def cmd_collapse(args, config: dict, seed: int, env_override: bool) -> int:
    out_dir = _out_dir(args)
    ser = series.load_csv(args.input)
    windows = config.get("windows")
    if not isinstance(windows, list) or not windows:
        raise ConfigError("config field 'windows' must be a non-empty list")
    mode = config.get("mode", "absolute")
    if "deltas" in config:
        deltas = np.asarray(config["deltas"], dtype=float)
    else:
        n_deltas = int(config.get("n_deltas", 8))
        deltas = mlvp.default_delta_grid(ser, int(windows[0]), n_deltas, mode)
    result = mlvp.collapse_test(ser, deltas, windows, mode=mode)
    record = {
        "quality": result.quality,
        "passes": result.passes(),
        "cells": [asdict(c) for c in result.cells],
        "dropped": result.dropped,
        "u_values": [c.u for c in result.cells],
        "alphas": [c.alpha for c in result.cells],
    }
    _write_json(out_dir / "collapse.json", record)
    _write_manifest(out_dir, "collapse", config, seed, env_override, ["collapse.json"])
    return 0


# ---------------------------------------------------------------------------
# hurst


def cmd_hurst(args, config: dict, seed: int, env_override: bool) -> int:
    out_dir = _out_dir(args)
    ser = series.load_csv(args.input)
    scale_range = None
    if "scale_min" in config or "scale_max" in config:
        scale_range = (_require(config, "scale_min", int),
                       _require(config, "scale_max", int))
    est = scaling.hurst_dfa(ser, scale_range=scale_range)
    with open(out_dir / "dfa_points.csv", "w", encoding="utf-8") as fh:
        fh.write("scale,fluctuation\n")
        for s, f in zip(est.scales, est.fluctuations):
            fh.write(f"{int(s)},{_float_cell(f)}\n")
    record = {"h": est.h, "stderr": est.stderr,
              "scale_range": list(est.scale_range),
              "n_scales": int(len(est.scales))}
    _write_json(out_dir / "hurst.json", record)
    _write_manifest(out_dir, "hurst", config, seed, env_override,
                    ["dfa_points.csv", "hurst.json"])
    return 0


# ---------------------------------------------------------------------------
# portfolio


def cmd_portfolio(args, config: dict, seed: int, env_override: bool) -> int:
    out_dir = _out_dir(args)
    pair = _read_returns_csv(args.input)
    mode = config.get("mode", "variance")
    if mode not in ("variance", "tail"):
        raise ConfigError("config field 'mode' must be 'variance' or 'tail'")
    threshold = config.get("threshold")
    if mode == "tail" and threshold is None:
        raise ConfigError("tail mode requires config field 'threshold'")
    result = portfolio.optimize_two_asset(
        pair, mode=mode,
        threshold=None if threshold is None else float(threshold))
    record = {
        "mode": result.mode,
        "threshold": result.threshold,
        "weight_a": result.weight_a,
        "weight_b": result.weight_b,
        "std": result.std,
        "max_drawdown": result.max_drawdown,
        "n_tail": result.n_tail,
        "n_samples": int(pair.returns_a.size),
    }
    _write_json(out_dir / "portfolio.json", record)
    _write_manifest(out_dir, "portfolio", config, seed, env_override,
                    ["portfolio.json"])
    return 0


# ---------------------------------------------------------------------------
# entry point


_COMMANDS = {
    "simulate": (cmd_simulate, False),
    "analyze-wealth": (cmd_analyze_wealth, True),
    "generate": (cmd_generate, False),
    "mlvp": (cmd_mlvp, True),
    "collapse": (cmd_collapse, True),
    "hurst": (cmd_hurst, True),
    "portfolio": (cmd_portfolio, True),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="econokit",
        description="Wealth-exchange simulation and scale-invariance analysis.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, needs_input) in _COMMANDS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file (or a manifest to re-run)")
        p.add_argument("--seed", type=int, default=None,
                       help="seed override (beats config and environment)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--replicas", type=int, default=1,
                       help="number of seeded replicas (simulate only)")
        if needs_input:
            p.add_argument("--input", required=True, help="input data file")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    func, _ = _COMMANDS[args.command]
    try:
        config, inherited_seed = _load_config(args.config)
        seed, env_override = _resolve_seed(args, config, inherited_seed)
        if args.replicas < 1:
            raise ConfigError("--replicas must be >= 1")
        if args.replicas > 1 and args.command != "simulate":
            raise ConfigError("--replicas applies to the simulate command only")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        return func(args, config, seed, env_override)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - surfaced as a machine-readable record
        record = {"error": type(exc).__name__, "message": str(exc),
                  "command": args.command}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
