"""Command-line entry points and deterministic experiment orchestration.

Run configuration is a flat ``key = value`` text file with dotted section
names (``spec.family = sarar``); named presets carry the reference experiment
constants so the standard studies are one command. Every run writes a
manifest (config hash, seed, version, backend) next to its artifacts, and
artifacts are written atomically with 17-significant-digit floats so a
replayed manifest is byte-identical.

Exit codes: 0 success, 2 config error, 3 input error, 4 numerical failure,
5 convergence failure (result still written).
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import __version__, errors
from .backend import backend_name
from .csvio import (ingest_panel, write_csv, write_json, write_manifest,
                    write_matrix_csv, write_panel_csv)
from .econweights import (IndicatorPanel, indicator_weight_matrix,
                          sensitivity_grid, spearman_matrix)
from .estimation import FitOptions, fit_mle, model_grid, spec_grid
from .filter import filter_pass, simulate_filter, simulate_path, _natural_from_tilde
from .model import CoefficientVector, ModelSpec
from .portfolio import (BacktestConfig, FeeConfig, annualized_fee_pct,
                        block_bootstrap_pvalue, equal_weight_strategy,
                        management_fee, rolling_backtest)
from .score import ScoreConfig
from .simlab import (FiniteSampleConfig, SSararConfig, filtering_experiment,
                     finite_sample_experiment, gen_regressors,
                     random_weight_matrix, simulate_ssarar_params, table2_spec,
                     table2_truth)
from .weights import WeightMatrix, load_weight_csv, save_weight_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_NUMERICAL = 4
EXIT_CONVERGENCE = 5

PRESETS: dict[str, dict] = {
    "ssarar-desk": {
        "experiment": {"kind": "ssarar", "t_len": 2000, "n_replications": 50,
                       "phis": [0.900, 0.990]},
    },
    "ssarar-paper": {
        "experiment": {"kind": "ssarar", "t_len": 10000, "n_replications": 1000,
                       "phis": [0.900, 0.950, 0.990, 0.997]},
    },
    "table2-desk": {
        "experiment": {"kind": "table2", "t_lens": [1000], "n_replications": 100},
    },
    "table2-paper": {
        "experiment": {"kind": "table2", "t_lens": [1000, 5000, 10000],
                       "n_replications": 1000},
    },
    "backtest-paper": {
        "backtest": {"in_sample_len": 2013, "out_sample_len": 1500,
                     "refit_interval": 100},
        "fee": {"upsilons": [3, 7, 10, 20]},
    },
}


# -- config file --------------------------------------------------------------

def _as_list(value):
    return value if isinstance(value, list) else [value]


def _parse_scalar(text: str):
    t = text.strip()
    low = t.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    if low in ("none", ""):
        return None
    try:
        return int(t)
    except ValueError:
        pass
    try:
        return float(t)
    except ValueError:
        pass
    return t


def _parse_value(text: str):
    if "," in text:
        return [_parse_scalar(p) for p in text.split(",")]
    return _parse_scalar(text)


def load_config(path) -> dict:
    if not os.path.exists(path):
        raise errors.ConfigParse(f"config file not found: {path}")
    config: dict = {}
    with open(path) as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise errors.ConfigParse(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = stripped.partition("=")
            node = config
            parts = [p.strip() for p in key.strip().split(".")]
            if any(not p for p in parts):
                raise errors.ConfigParse(f"{path}:{lineno}: empty key component")
            for part in parts[:-1]:
                node = node.setdefault(part, {})
                if not isinstance(node, dict):
                    raise errors.ConfigParse(f"{path}:{lineno}: {key} nests under a scalar")
            node[parts[-1]] = _parse_value(value)
    return config


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def resolve_config(args) -> dict:
    config: dict = {}
    if args.preset:
        if args.preset not in PRESETS:
            raise errors.ConfigParse(
                f"unknown preset {args.preset!r}; available: {sorted(PRESETS)}")
        config = _deep_merge(config, PRESETS[args.preset])
    if args.config:
        config = _deep_merge(config, load_config(args.config))
    if args.seed is not None:
        config["seed"] = args.seed
    if args.workers is not None:
        config["workers"] = args.workers
    config.setdefault("seed", 0)
    config.setdefault("workers", os.cpu_count() or 1)
    return config


# -- shared helpers ------------------------------------------------------------

def _outdir(args) -> str:
    out = args.out or os.environ.get("DYSARAR_OUT", ".")
    os.makedirs(out, exist_ok=True)
    return out


def _load_panel_arg(path, log_diff=False):
    if path is None:
        return None, None
    values, labels, _ = ingest_panel(path, log_diff=log_diff)
    return values, labels


def _load_x_arg(path, t_len, n_units):
    """Regressor CSV with N*K columns labeled u{i}_x{j}, reshaped to (T, n, k)."""
    if path is None:
        return None, 0
    values, labels, _ = ingest_panel(path)
    if values.shape[0] != t_len:
        raise errors.DimensionMismatch(
            f"regressor panel has {values.shape[0]} rows, y has {t_len}")
    if values.shape[1] % n_units:
        raise errors.DimensionMismatch(
            f"{values.shape[1]} regressor columns not divisible by {n_units} units")
    k = values.shape[1] // n_units
    return values.reshape(t_len, n_units, k), k


def _write_x_csv(path, x: np.ndarray):
    t_len, n, k = x.shape
    labels = [f"u{i + 1}_x{j + 1}" for i in range(n) for j in range(k)]
    write_panel_csv(path, x.reshape(t_len, n * k), labels)


def spec_from_config(cfg: dict, n_units: int, n_regressors: int) -> ModelSpec:
    block = cfg.get("spec", {})
    family = block.get("family", "sarar")
    dynamic = block.get("dynamic", True)
    score = ScoreConfig(
        gamma=float(block.get("gamma", 0.0)),
        score_clip=block.get("score_clip", 10.0),
        fim_draws=int(block.get("fim_draws", 100)),
    )
    kwargs = {"sigma_cross": block.get("sigma_cross", "hetero"), "score": score}
    if dynamic:
        spec = ModelSpec.dynamic(family, n_units, n_regressors,
                                 sigma_dynamic=block.get("sigma_dynamic", "individual"),
                                 **kwargs)
        if block.get("sigma_time", "dynamic") == "static":
            spec = dataclasses.replace(spec, sigma_time="static")
    else:
        spec = ModelSpec.static(family, n_units, n_regressors, **kwargs)
    return spec


def fit_options_from_config(cfg: dict) -> FitOptions:
    block = cfg.get("fit", {})
    return FitOptions(
        n_starts=int(block.get("n_starts", 3)),
        simplex_iters=int(block.get("simplex_iters", 150)),
        max_iters=int(block.get("max_iters", 2000)),
        tol=float(block.get("tol", 1e-6)),
        compute_se=bool(block.get("compute_se", True)),
    )


def _coeffs_from_fit_json(path, spec: ModelSpec) -> CoefficientVector:
    import json

    if not os.path.exists(path):
        raise errors.MissingInput(f"no such file: {path}")
    with open(path) as handle:
        payload = json.load(handle)
    try:
        named = payload["coefficients"]
        packed = np.array([named[name] for name in spec.coefficient_names()])
    except KeyError as exc:
        raise errors.ConfigParse(f"{path}: missing coefficient {exc}") from exc
    from .estimation import _r_to_unconstrained, unpack_free

    n_k = len(spec.kappa_groups())
    n_d = len(spec.dynamic_groups())
    packed[n_k + n_d:] = _r_to_unconstrained(packed[n_k + n_d:])
    return unpack_free(packed, spec)


def _write_fit_artifacts(outdir: str, fit, filter_output, labels=None):
    payload = {
        "spec_label": fit.spec.label,
        "n_free_params": fit.n_free_params,
        "total_llk": fit.total_llk,
        "aic": fit.aic,
        "bic": fit.bic,
        "t_obs": fit.t_obs,
        "converged": fit.convergence.converged,
        "iterations": fit.convergence.iterations,
        "message": fit.convergence.message,
        "coefficients": fit.coefficients(),
        "std_errors": None if fit.std_errors is None else dict(
            zip(fit.spec.coefficient_names(), fit.std_errors.tolist())),
    }
    write_json(os.path.join(outdir, "fit.json"), payload)
    _write_filter_csv(os.path.join(outdir, "filter_path.csv"), filter_output)


def _write_filter_csv(path, output):
    header = output.column_names() + ["llk_t"]
    rows = (list(output.natural_path[t]) + [output.llk_contributions[t]]
            for t in range(output.t_obs))
    write_csv(path, header, rows)


# -- command handlers -----------------------------------------------------------

def cmd_validate_w(args, config) -> int:
    w = load_weight_csv(args.w)
    print(f"valid weight matrix: n={w.n}, spectral radius={w.spectral_radius():.6f}")
    return EXIT_OK


def cmd_weights(args, config) -> int:
    outdir = _outdir(args)
    values, labels, _ = ingest_panel(args.panel)
    panel = IndicatorPanel(label=args.label or os.path.basename(args.panel), values=values)
    corr = spearman_matrix(panel)
    w = indicator_weight_matrix(panel)
    write_matrix_csv(os.path.join(outdir, "spearman.csv"), corr)
    save_weight_csv(os.path.join(outdir, "w.csv"), w)
    _manifest(outdir, "weights", config)
    print(f"wrote spearman.csv and w.csv for indicator {panel.label!r}")
    return EXIT_OK


def cmd_simulate(args, config) -> int:
    outdir = _outdir(args)
    seed = config["seed"]
    block = config.get("experiment", {})
    kind = block.get("kind", "ssarar")
    ss = np.random.SeedSequence(seed)
    w_seed, path_seed, x_seed, y_seed = ss.spawn(4)
    if kind == "ssarar":
        cfg = SSararConfig(
            t_len=int(block.get("t_len", 2000)),
            phi=float(block.get("phi", 0.99)),
            u=float(block.get("u", 0.01)),
        )
        w = random_weight_matrix(cfg.n_units, cfg.w_density, w_seed)
        tilde = simulate_ssarar_params(cfg, path_seed)
        spec = ModelSpec.dynamic("sarar", cfg.n_units, cfg.n_regressors)
        nat = _natural_from_tilde(tilde, spec)
        x = gen_regressors(cfg, x_seed)
        y = simulate_path(nat, x, w, w, y_seed)
        save_weight_csv(os.path.join(outdir, "w1.csv"), w)
        save_weight_csv(os.path.join(outdir, "w2.csv"), w)
        _write_x_csv(os.path.join(outdir, "x.csv"), x)
        write_panel_csv(os.path.join(outdir, "theta_true.csv"), nat,
                        labels=["rho", "lambda"]
                        + [f"beta_{j+1}" for j in range(cfg.n_regressors)]
                        + [f"sigma_{j+1}" for j in range(cfg.n_units)])
    elif kind == "table2":
        spec = table2_spec()
        truth = table2_truth(spec)
        t_len = int(block.get("t_len", 1000))
        w1 = random_weight_matrix(spec.n_units, 0.8, w_seed)
        w2 = random_weight_matrix(spec.n_units, 0.8, path_seed)
        y, out = simulate_filter(truth, spec, None, w1, w2, t_len, y_seed)
        save_weight_csv(os.path.join(outdir, "w1.csv"), w1)
        save_weight_csv(os.path.join(outdir, "w2.csv"), w2)
        write_panel_csv(os.path.join(outdir, "theta_true.csv"), out.natural_path,
                        labels=out.column_names())
    else:
        raise errors.ConfigParse(f"unknown simulate kind {kind!r}")
    write_panel_csv(os.path.join(outdir, "y.csv"), y)
    _manifest(outdir, "simulate", config)
    print(f"simulated panel ({y.shape[0]} x {y.shape[1]}) written to {outdir}")
    return EXIT_OK


def _load_fit_inputs(args):
    y, labels = _load_panel_arg(args.y, log_diff=getattr(args, "log_diff", False))
    if y is None:
        raise errors.MissingInput("command requires --y")
    x, k = _load_x_arg(args.x, y.shape[0], y.shape[1])
    w1 = load_weight_csv(args.w1) if args.w1 else None
    w2 = load_weight_csv(args.w2) if args.w2 else None
    return y, labels, x, k, w1, w2


def _require_w(spec: ModelSpec, w1, w2, n) -> tuple[WeightMatrix, WeightMatrix]:
    if spec.rho_mode != "off" and w1 is None:
        raise errors.MissingInput("spec uses rho; provide --w1")
    if spec.lambda_mode != "off" and w2 is None:
        raise errors.MissingInput("spec uses lambda; provide --w2")
    if w1 is not None and w2 is not None:
        return w1, w2
    if n < 2:
        raise errors.InputError("panels need at least two units")
    dummy = WeightMatrix(np.where(~np.eye(n, dtype=bool), 1.0 / (n - 1), 0.0))
    return w1 or dummy, w2 or dummy


def cmd_fit(args, config) -> int:
    outdir = _outdir(args)
    y, labels, x, k, w1, w2 = _load_fit_inputs(args)
    spec = spec_from_config(config, y.shape[1], k)
    w1, w2 = _require_w(spec, w1, w2, y.shape[1])
    options = fit_options_from_config(config)
    fit = fit_mle(y, x, spec, w1, w2, options)
    out = filter_pass(y, x, fit.coeffs, spec, w1, w2)
    _write_fit_artifacts(outdir, fit, out, labels)
    _manifest(outdir, "fit", config)
    print(f"{spec.label}: llk={fit.total_llk:.4f} aic={fit.aic:.2f} bic={fit.bic:.2f} "
          f"np={fit.n_free_params} converged={fit.convergence.converged}")
    return EXIT_OK if fit.convergence.converged else EXIT_CONVERGENCE


def cmd_filter(args, config) -> int:
    outdir = _outdir(args)
    y, labels, x, k, w1, w2 = _load_fit_inputs(args)
    spec = spec_from_config(config, y.shape[1], k)
    w1, w2 = _require_w(spec, w1, w2, y.shape[1])
    coeffs = _coeffs_from_fit_json(args.coeffs, spec)
    out = filter_pass(y, x, coeffs, spec, w1, w2)
    _write_filter_csv(os.path.join(outdir, "filter_path.csv"), out)
    _manifest(outdir, "filter", config)
    if not out.ok:
        raise errors.NumericalBreakdown(f"filter broke down at t={out.failed_at}")
    print(f"filtered {out.t_obs} periods, total llk {out.total_llk:.4f}")
    return EXIT_OK


def cmd_grid(args, config) -> int:
    outdir = _outdir(args)
    y, labels, x, k, w1, w2 = _load_fit_inputs(args)
    base = spec_from_config(config, y.shape[1], k)
    specs = spec_grid(y.shape[1], k, score=base.score)
    options = fit_options_from_config(config)
    rows = model_grid(y, x, *_require_w_pair(w1, w2, y.shape[1]), specs,
                      options=options, workers=config["workers"])
    write_csv(os.path.join(outdir, "grid.csv"),
              ["label", "aic", "bic", "np", "llk", "converged", "error"],
              ([r.label, r.aic, r.bic, r.n_free_params, r.llk, r.converged,
                r.error or ""] for r in rows))
    _manifest(outdir, "grid", config)
    print(f"fitted {len(rows)} specifications; best by BIC: {rows[0].label}")
    return EXIT_OK


def _require_w_pair(w1, w2, n):
    if w1 is None or w2 is None:
        raise errors.MissingInput("model grid requires --w1 and --w2")
    return w1, w2


def cmd_mc_filtering(args, config) -> int:
    outdir = _outdir(args)
    block = config.get("experiment", {})
    cfg = SSararConfig(
        t_len=int(block.get("t_len", 2000)),
        n_replications=int(block.get("n_replications", 50)),
        u=float(block.get("u", 0.01)),
    )
    phis = [float(p) for p in _as_list(block.get("phis", [0.900, 0.990]))]
    reference = float(block.get("reference_phi", 0.990))
    report = filtering_experiment(cfg, phis, config["seed"],
                                  workers=config["workers"], reference_phi=reference)
    rows = []
    for p_idx, phi in enumerate(report.phis):
        for d_idx, name in enumerate(report.param_names):
            rows.append([phi, name, report.mse[p_idx, d_idx],
                         report.rel_mse[p_idx, d_idx],
                         report.band_coverage[p_idx, d_idx]])
    write_csv(os.path.join(outdir, "mse.csv"),
              ["phi", "param", "mse", "rel_mse", "band_coverage"], rows)
    for phi, chart in report.fancharts.items():
        for d_idx, name in enumerate(report.param_names):
            write_csv(os.path.join(outdir, f"fanchart_phi{phi:g}_{name}.csv"),
                      ["t", "q10", "q50", "q90", "truth"],
                      ([t] + list(chart[t, d_idx]) for t in range(chart.shape[0])))
    _manifest(outdir, "mc-filtering", config)
    print(f"filtering experiment done: phis={report.phis}, failures={report.n_failed}")
    return EXIT_OK


def cmd_mc_finite_sample(args, config) -> int:
    outdir = _outdir(args)
    block = config.get("experiment", {})
    spec = table2_spec()
    truth = table2_truth(spec)
    ss = np.random.SeedSequence(config["seed"])
    w1_seed, w2_seed, mc_seed = ss.spawn(3)
    w1 = random_weight_matrix(spec.n_units, 0.8, w1_seed)
    w2 = random_weight_matrix(spec.n_units, 0.8, w2_seed)
    cfg = FiniteSampleConfig(
        truth=truth, spec=spec,
        t_lens=tuple(int(t) for t in _as_list(block.get("t_lens", [1000]))),
        n_replications=int(block.get("n_replications", 100)),
        seed=mc_seed,
    )
    report = finite_sample_experiment(cfg, w1, w2, workers=config["workers"])
    rows = []
    for t_len in report.t_lens:
        for p_idx, name in enumerate(report.coefficient_names):
            rows.append([t_len, name, report.truth[p_idx],
                         report.mean[t_len][p_idx], report.sd[t_len][p_idx],
                         report.mse[t_len][p_idx]])
    write_csv(os.path.join(outdir, "summary.csv"),
              ["t_len", "coefficient", "true", "mean", "sd", "mse"], rows)
    _manifest(outdir, "mc-finite-sample", config)
    print(f"finite-sample experiment done: T={report.t_lens}, failures={report.n_failed}")
    return EXIT_OK


def cmd_sensitivity(args, config) -> int:
    outdir = _outdir(args)
    y, labels = _load_panel_arg(args.y)
    if y is None:
        raise errors.MissingInput("sensitivity requires --y")
    x, k = _load_x_arg(args.x, y.shape[0], y.shape[1])
    panels = []
    for path in args.panels.split(","):
        values, _, _ = ingest_panel(path.strip())
        panels.append(IndicatorPanel(label=os.path.splitext(os.path.basename(path.strip()))[0],
                                     values=values))
    spec = spec_from_config(config, y.shape[1], k)
    options = fit_options_from_config(config)
    grid = sensitivity_grid(panels, y, x, spec, options=options,
                            workers=config["workers"])
    header = ["w1\\w2"] + grid.labels
    rows = []
    for i, label in enumerate(grid.labels):
        row = [label]
        for j in range(len(grid.labels)):
            row.append("--" if i == j else grid.llk[i, j])
        rows.append(row)
    write_csv(os.path.join(outdir, "sensitivity.csv"), header, rows)
    _manifest(outdir, "sensitivity", config)
    print(f"sensitivity grid over {grid.labels} written; {len(grid.errors)} failed cells")
    return EXIT_OK


def cmd_backtest(args, config) -> int:
    outdir = _outdir(args)
    y, labels, x, k, w1, w2 = _load_fit_inputs(args)
    spec = spec_from_config(config, y.shape[1], k)
    w1, w2 = _require_w(spec, w1, w2, y.shape[1])
    block = config.get("backtest", {})
    cfg = BacktestConfig(
        in_sample_len=int(block.get("in_sample_len", 2013)),
        out_sample_len=int(block.get("out_sample_len", 1500)),
        refit_interval=int(block.get("refit_interval", 100)),
    )
    report = rolling_backtest(y, x, spec, w1, w2, cfg,
                              fit_options=fit_options_from_config(config).light())
    oos = y[cfg.in_sample_len:cfg.in_sample_len + cfg.out_sample_len]
    naive = equal_weight_strategy(oos)
    metric_rows = [_metric_row(spec.label, report), _metric_row("1ON", naive)]
    write_csv(os.path.join(outdir, "report.csv"),
              ["strategy", "ann_mean", "ann_sd", "max_loss", "max_gain",
               "sharpe", "var5", "es5", "turnover"], metric_rows)
    write_panel_csv(os.path.join(outdir, "weights.csv"), report.weights_path, labels)
    write_csv(os.path.join(outdir, "returns.csv"), ["strategy_return"],
              ([v] for v in report.portfolio_returns))
    if args.competitor:
        comp, _, _ = ingest_panel(args.competitor)
        comp_returns = comp[:, 0]
        if comp_returns.shape[0] != report.portfolio_returns.shape[0]:
            raise errors.DimensionMismatch("competitor returns length mismatch")
        fee_block = config.get("fee", {})
        upsilons = [float(u) for u in _as_list(fee_block.get("upsilons", [3, 7, 10, 20]))]
        n_boot = int(fee_block.get("n_boot", 1000))
        rows = []
        for upsilon in upsilons:
            fee_cfg = FeeConfig(upsilon=upsilon)
            fee = management_fee(comp_returns, report.portfolio_returns, fee_cfg)
            p = block_bootstrap_pvalue(comp_returns, report.portfolio_returns,
                                       fee_cfg, n_boot=n_boot, seed=config["seed"])
            rows.append([upsilon, fee, annualized_fee_pct(fee), p])
        write_csv(os.path.join(outdir, "fees.csv"),
                  ["upsilon", "fee_per_period", "fee_annualized_pct", "p_value"], rows)
    _manifest(outdir, "backtest", config)
    sharpe = "nan" if report.sharpe is None else f"{report.sharpe:.2f}"
    print(f"backtest done: ann mean {report.ann_mean:.2f}%, sharpe {sharpe}, "
          f"turnover {report.turnover:.2f}, refits {report.n_refits}")
    return EXIT_OK


def _metric_row(label, report):
    return [label, report.ann_mean, report.ann_sd, report.max_loss,
            report.max_gain, np.nan if report.sharpe is None else report.sharpe,
            report.var5, report.es5, report.turnover]


def _manifest(outdir, command, config):
    write_manifest(os.path.join(outdir, "manifest.json"), command, config,
                   config.get("seed"), __version__, backend_name())


# -- entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dysarar",
        description="Score-driven spatio-temporal SARAR toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--preset", help=f"named preset: {', '.join(sorted(PRESETS))}")
        p.add_argument("--out", help="output directory (default: $DYSARAR_OUT or .)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("validate-w", help="validate a weight-matrix CSV")
    p.add_argument("w", help="headerless N x N CSV")
    common(p)
    p.set_defaults(handler=cmd_validate_w)

    p = sub.add_parser("weights", help="build an economic weight matrix from an indicator panel")
    p.add_argument("--panel", required=True)
    p.add_argument("--label")
    common(p)
    p.set_defaults(handler=cmd_weights)

    p = sub.add_parser("simulate", help="simulate a panel (ssarar or table2 DGP)")
    common(p)
    p.set_defaults(handler=cmd_simulate)

    for name, handler, needs_coeffs in (("fit", cmd_fit, False),
                                        ("filter", cmd_filter, True),
                                        ("grid", cmd_grid, False),
                                        ("backtest", cmd_backtest, False)):
        p = sub.add_parser(name)
        p.add_argument("--y", required=True, help="panel CSV (date + one column per unit)")
        p.add_argument("--x", help="regressor CSV with u{i}_x{j} columns")
        p.add_argument("--w1", help="weight matrix CSV")
        p.add_argument("--w2", help="weight matrix CSV")
        p.add_argument("--log-diff", action="store_true", dest="log_diff",
                       help="treat --y as price levels; take log first differences")
        if needs_coeffs:
            p.add_argument("--coeffs", required=True, help="fit.json with coefficients")
        if name == "backtest":
            p.add_argument("--competitor", help="competitor daily returns CSV for fee comparison")
        common(p)
        p.set_defaults(handler=handler)

    p = sub.add_parser("mc-filtering", help="latent-path filtering experiment")
    common(p)
    p.set_defaults(handler=cmd_mc_filtering)

    p = sub.add_parser("mc-finite-sample", help="ML finite-sample experiment")
    common(p)
    p.set_defaults(handler=cmd_mc_finite_sample)

    p = sub.add_parser("sensitivity", help="weighting-matrix sensitivity grid")
    p.add_argument("--panels", required=True, help="comma-separated indicator CSVs")
    p.add_argument("--y", required=True)
    p.add_argument("--x")
    common(p)
    p.set_defaults(handler=cmd_sensitivity)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve_config(args)
        return args.handler(args, config)
    except errors.ConfigParse as exc:
        print(f"ConfigParse: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except errors.InputError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except errors.NumericalError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except errors.DysararError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
