"""Command-line interface: data generation, solving, backtests, grids.

Commands
--------
gen-data     write a seeded synthetic returns CSV
solve        fit one model on a panel and emit the portfolio as JSON
backtest     run the rolling-window protocol for one configuration
grid-search  sweep (tau1, tau2) pairs and select the lowest TEO
compare      run several models and emit a comparison table

Configuration values come from defaults, then an optional JSON config
file with flat dotted keys, then command-line flags, in that order of
precedence.  Exit codes: 0 success, 2 usage or validation error,
3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .backtest import (
    MODEL_IDS,
    BacktestConfig,
    grid_search,
    report_to_dict,
    run_backtest,
)
from .baselines import BaselineParams, StepRule, scvar_solve, te_l2_solve
from .data import build_sample_set, estimate_moments, gen_synthetic, load_returns_csv, save_returns_csv
from .errors import DataError, InvalidInputError, NumericalError
from .model import AmbiguityParams, ModelParams
from .spg import SpgParams, default_start, spg_solve

__all__ = ["main"]

# Models the comparison table acknowledges but does not implement
# (cardinality/MILP/nonconvex formulations needing external solvers).
UNAVAILABLE_MODELS = ("mixed01-lp", "te-l0", "lasso", "l2-lp")

CONFIG_DEFAULTS: dict[str, object] = {
    "model.tau1": 2e-4,
    "model.tau2": 2e-4,
    "model.beta": 0.95,
    "ambiguity.kappa1": 0.1,
    "ambiguity.kappa2": 1.0,
    "spg.alpha0": 1.0,
    "spg.sigma": 1e-6,
    "spg.rho": 0.5,
    "spg.mu0": 1.0,
    "spg.eta": 1e3,
    "spg.omega": 0.5,
    "spg.epsilon": 1e-4,
    "spg.n0": 5,
    "spg.mu_stop": 2e-6,
    "spg.max_outer_iters": 3000,
    "spg.max_backtracks": 60,
    "spg.max_inner_per_phase": 10_000,
    "baseline.max_iters": 50_000,
    "baseline.step_rule": "armijo",
    "baseline.tolerance": 1e-9,
    "backtest.window": 3500,
    "backtest.hold": 21,
}

# Flag destinations that override config keys when provided.
_FLAG_TO_KEY = {
    "tau1": "model.tau1",
    "tau2": "model.tau2",
    "beta": "model.beta",
    "kappa1": "ambiguity.kappa1",
    "kappa2": "ambiguity.kappa2",
    "window": "backtest.window",
    "hold": "backtest.hold",
}


def _effective_config(args: argparse.Namespace) -> dict[str, object]:
    cfg = dict(CONFIG_DEFAULTS)
    path = getattr(args, "config", None)
    if path is not None:
        try:
            loaded = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise DataError(f"cannot read config file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise InvalidInputError(f"config file {path} must hold a JSON object")
        unknown = sorted(set(loaded) - set(CONFIG_DEFAULTS))
        if unknown:
            raise InvalidInputError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(loaded)
    for attr, key in _FLAG_TO_KEY.items():
        value = getattr(args, attr, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _model_params(cfg: dict[str, object]) -> ModelParams:
    return ModelParams(
        tau1=float(cfg["model.tau1"]),
        tau2=float(cfg["model.tau2"]),
        beta=float(cfg["model.beta"]),
    )


def _spg_params(cfg: dict[str, object]) -> SpgParams:
    return SpgParams(
        alpha0=float(cfg["spg.alpha0"]),
        sigma=float(cfg["spg.sigma"]),
        rho=float(cfg["spg.rho"]),
        mu0=float(cfg["spg.mu0"]),
        eta=float(cfg["spg.eta"]),
        omega=float(cfg["spg.omega"]),
        epsilon=float(cfg["spg.epsilon"]),
        n0=int(cfg["spg.n0"]),
        mu_stop=float(cfg["spg.mu_stop"]),
        max_outer_iters=int(cfg["spg.max_outer_iters"]),
        max_backtracks=int(cfg["spg.max_backtracks"]),
        max_inner_per_phase=int(cfg["spg.max_inner_per_phase"]),
    )


def _baseline_params(cfg: dict[str, object]) -> BaselineParams:
    rule = str(cfg["baseline.step_rule"]).lower()
    try:
        step_rule = StepRule(rule)
    except ValueError:
        raise InvalidInputError(
            f"baseline.step_rule must be 'armijo' or 'diminishing', got {rule!r}"
        ) from None
    return BaselineParams(
        max_iters=int(cfg["baseline.max_iters"]),
        step_rule=step_rule,
        tolerance=float(cfg["baseline.tolerance"]),
    )


def _backtest_config(cfg: dict[str, object], model_id: str) -> BacktestConfig:
    return BacktestConfig(
        model_id=model_id,
        model=_model_params(cfg),
        window=int(cfg["backtest.window"]),
        hold=int(cfg["backtest.hold"]),
        kappa1=float(cfg["ambiguity.kappa1"]),
        kappa2=float(cfg["ambiguity.kappa2"]),
        spg=_spg_params(cfg),
        baseline=_baseline_params(cfg),
    )


def _round_sig(value: float) -> float:
    return float(f"{value:.12g}")


def _emit_json(doc, out: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _write_trace(path: str, trace) -> None:
    lines = ["cpu_seconds,objective"]
    lines.extend(f"{sec:.9f},{obj:.17g}" for sec, obj in trace)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_rows(text: str | None, n_days: int) -> tuple[int, int]:
    if text is None:
        return 0, n_days
    parts = text.split(":")
    if len(parts) != 2:
        raise InvalidInputError(f"--rows must look like START:STOP, got {text!r}")
    try:
        start, stop = int(parts[0]), int(parts[1])
    except ValueError:
        raise InvalidInputError(f"--rows must hold integers, got {text!r}") from None
    return start, stop


def cmd_gen_data(args: argparse.Namespace) -> int:
    panel = gen_synthetic(
        d=args.assets, n_days=args.days, seed=args.seed, regime_shift=args.shift_day
    )
    save_returns_csv(panel, args.out)
    variance = float(np.var(panel.index_returns))
    print(
        f"wrote {args.out}: assets={panel.n_assets} days={panel.n_days} "
        f"index_variance={variance:.6g}"
    )
    return 0


def cmd_solve(args: argparse.Namespace) -> int:
    cfg = _effective_config(args)
    config = _backtest_config(cfg, args.model)
    panel = load_returns_csv(args.data)
    start, stop = _parse_rows(args.rows, panel.n_days)
    samples = build_sample_set(panel, start, stop)
    model = config.effective_model()
    want_trace = args.trace_out is not None
    begin = time.perf_counter()
    if args.model.startswith("drcvar"):
        moments = estimate_moments(panel, start, stop)
        amb = AmbiguityParams(
            mu_hat=moments.mu_hat,
            sigma_hat=moments.sigma_hat,
            kappa1=config.kappa1,
            kappa2=config.kappa2,
        )
        result = spg_solve(
            default_start(samples, model),
            samples,
            amb,
            model,
            config.spg,
            record_trace=want_trace,
        )
        doc = {
            "model": args.model,
            "status": result.status,
            "objective": result.objective,
            "smooth_objective": result.smooth_objective,
            "residual": result.residual,
            "mu_final": result.mu_final,
            "outer_iters": result.outer_iters,
            "inner_iters": result.inner_iters,
            "grad_evals": result.grad_evals,
            "wall_seconds": result.wall_seconds,
            "alpha": result.nu.alpha,
            "weights": [_round_sig(v) for v in result.nu.x],
        }
        trace = result.trace
        status = result.status
    elif args.model.startswith("scvar"):
        result = scvar_solve(samples, model, config.baseline, record_trace=want_trace)
        doc = {
            "model": args.model,
            "status": result.status,
            "objective": result.objective,
            "iters": result.iters,
            "wall_seconds": time.perf_counter() - begin,
            "alpha": result.alpha,
            "weights": [_round_sig(v) for v in result.x],
        }
        trace = result.trace
        status = result.status
    elif args.model == "te-l2":
        if want_trace:
            raise InvalidInputError("--trace-out is not available for te-l2")
        x, objective = te_l2_solve(samples, model.tau1)
        doc = {
            "model": args.model,
            "status": "converged",
            "objective": objective,
            "wall_seconds": time.perf_counter() - begin,
            "weights": [_round_sig(v) for v in x],
        }
        trace = None
        status = "converged"
    else:  # pragma: no cover - argparse choices forbid this
        raise InvalidInputError(f"unknown model {args.model!r}")
    if want_trace and trace is not None:
        _write_trace(args.trace_out, trace)
    _emit_json(doc, args.out)
    if args.strict and status != "converged":
        print(f"solver did not converge: status={status}", file=sys.stderr)
        return 4
    return 0


def cmd_backtest(args: argparse.Namespace) -> int:
    cfg = _effective_config(args)
    config = _backtest_config(cfg, args.model)
    panel = load_returns_csv(args.data)
    report = run_backtest(panel, config)
    _emit_json(report_to_dict(report, config), args.out)
    if args.strict:
        bad = [w.t for w in report.windows if w.status != "converged"]
        if bad:
            print(f"windows did not converge: {bad}", file=sys.stderr)
            return 4
    return 0


def _parse_grid(text: str | None) -> list[tuple[float, float]] | None:
    if text is None:
        return None
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise InvalidInputError(f"--grid must hold comma-separated floats, got {text!r}") from None
    if not values:
        raise InvalidInputError("--grid must contain at least one value")
    return [(a, b) for a in values for b in values]


def cmd_grid_search(args: argparse.Namespace) -> int:
    cfg = _effective_config(args)
    config = _backtest_config(cfg, args.model)
    panel = load_returns_csv(args.data)
    result = grid_search(panel, config, grid=_parse_grid(args.grid), threads=args.threads)
    rows = []
    for entry in result.rows:
        entry_config = replace(
            config, model=replace(config.model, tau1=entry.tau1, tau2=entry.tau2)
        )
        rows.append(report_to_dict(entry.report, entry_config))
    doc = {
        "rows": rows,
        "best": {
            "tau1": result.best.tau1,
            "tau2": result.best.tau2,
            "teo": result.best.report.teo,
        },
    }
    _emit_json(doc, args.out)
    print(
        f"grid-search: {len(result.rows)} points, best tau1={result.best.tau1:g} "
        f"tau2={result.best.tau2:g} teo={result.best.report.teo:.6g}"
    )
    return 0


def _fmt(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.6g}"


def cmd_compare(args: argparse.Namespace) -> int:
    cfg = _effective_config(args)
    panel = load_returns_csv(args.data)
    model_ids = [tok.strip() for tok in args.models.split(",") if tok.strip()]
    if not model_ids:
        raise InvalidInputError("--models must name at least one model")
    rows = []
    for model_id in model_ids:
        if model_id in UNAVAILABLE_MODELS:
            rows.append({"model": model_id, "status": "unavailable"})
            continue
        if model_id not in MODEL_IDS:
            raise InvalidInputError(
                f"unknown model {model_id!r}; available: {', '.join(MODEL_IDS)}; "
                f"acknowledged but unimplemented: {', '.join(UNAVAILABLE_MODELS)}"
            )
        config = _backtest_config(cfg, model_id)
        report = run_backtest(panel, config)
        rows.append(
            {
                "model": model_id,
                "status": "ok",
                "tau1": config.model.tau1,
                "tau2": config.model.tau2,
                "tei": report.tei,
                "teo": report.teo,
                "sigma2": report.sigma2,
                "sharpe": report.sharpe,
                "turnover": report.turnover,
                "cpu_seconds": report.cpu_seconds,
            }
        )
    _emit_json({"rows": rows}, args.out)
    header = ("model", "tau1", "tau2", "TEI", "TEO", "sigma2", "SR", "TO", "CPU_s")
    table = [header]
    for row in rows:
        if row.get("status") == "unavailable":
            table.append((row["model"], "unavailable", "", "", "", "", "", "", ""))
        else:
            table.append(
                (
                    row["model"],
                    _fmt(row["tau1"]),
                    _fmt(row["tau2"]),
                    _fmt(row["tei"]),
                    _fmt(row["teo"]),
                    _fmt(row["sigma2"]),
                    _fmt(row["sharpe"]),
                    _fmt(row["turnover"]),
                    _fmt(row["cpu_seconds"]),
                )
            )
    widths = [max(len(r[i]) for r in table) for i in range(len(header))]
    for r in table:
        print("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(r)).rstrip())
    return 0


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file with flat dotted keys")
    parser.add_argument("--out", help="output JSON path (default: stdout)")
    parser.add_argument("--strict", action="store_true", help="non-converged solves fail the run")
    parser.add_argument("--tau1", type=float, help="ridge penalty weight")
    parser.add_argument("--tau2", type=float, help="CVaR penalty weight")
    parser.add_argument("--beta", type=float, help="CVaR confidence level in (0,1)")
    parser.add_argument("--kappa1", type=float, help="mean-ellipsoid radius")
    parser.add_argument("--kappa2", type=float, help="second-moment bound factor")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drtrack",
        description="Distributionally robust index tracking: solvers and backtests.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen-data", help="write a synthetic returns CSV")
    p_gen.add_argument("--assets", type=int, required=True)
    p_gen.add_argument("--days", type=int, required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--shift-day", type=int, default=None, help="regime-shift day index")
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=cmd_gen_data)

    p_solve = sub.add_parser("solve", help="fit one model on a panel")
    p_solve.add_argument("--data", required=True)
    p_solve.add_argument("--model", required=True, choices=MODEL_IDS)
    p_solve.add_argument("--rows", help="fit row range START:STOP (default: all rows)")
    p_solve.add_argument("--trace-out", help="CSV path for (cpu_seconds, objective) trace")
    _add_common_flags(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_back = sub.add_parser("backtest", help="run the rolling-window protocol")
    p_back.add_argument("--data", required=True)
    p_back.add_argument("--model", required=True, choices=MODEL_IDS)
    p_back.add_argument("--window", type=int, help="training window length")
    p_back.add_argument("--hold", type=int, help="hold period length")
    _add_common_flags(p_back)
    p_back.set_defaults(func=cmd_backtest)

    p_grid = sub.add_parser("grid-search", help="sweep penalty pairs, pick lowest TEO")
    p_grid.add_argument("--data", required=True)
    p_grid.add_argument("--model", required=True, choices=MODEL_IDS)
    p_grid.add_argument("--grid", help="comma-separated penalty values (default: built-in grid)")
    p_grid.add_argument("--window", type=int, help="training window length")
    p_grid.add_argument("--hold", type=int, help="hold period length")
    p_grid.add_argument(
        "--threads",
        type=int,
        default=max(os.cpu_count() or 1, 1),
        help="concurrent grid points (1 = sequential)",
    )
    _add_common_flags(p_grid)
    p_grid.set_defaults(func=cmd_grid_search)

    p_cmp = sub.add_parser("compare", help="run several models, print a comparison")
    p_cmp.add_argument("--data", required=True)
    p_cmp.add_argument(
        "--models",
        default="drcvar-l2,drcvar-l1,scvar-l2,scvar-l1,te-l2",
        help="comma-separated model ids",
    )
    p_cmp.add_argument("--window", type=int, help="training window length")
    p_cmp.add_argument("--hold", type=int, help="hold period length")
    _add_common_flags(p_cmp)
    p_cmp.set_defaults(func=cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
