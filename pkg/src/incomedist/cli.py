"""Command-line surface: merge, fit, eval, sample, simulate, slope.

Every command resolves parameters as flag > config file > default,
writes its outputs atomically into --out-dir, and drops a JSON manifest
(resolved parameters, input digests, seed, version, argv) sufficient to
reproduce the outputs bit for bit.

Exit codes: 0 ok, 2 parse failure, 3 precondition violation, 4 numeric
failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import __version__
from .distribution import model_ccdf, sample as draw_samples
from .empirical import build_ccdf, local_log_slope
from .errors import NumericsError, ParseError, PreconditionError
from .fileformats import (
    effective_params_from_config,
    format_sig,
    micro_params_from_config,
    read_config,
    write_key_value,
    write_manifest,
    write_samples_csv,
    write_table,
)
from .fitting import fit_pipeline
from .ingest import find_scale_factor, incomes_from_wealth, load_samples, merge
from .model import effective_from_micro, stationary_pdf
from .simulate import SimConfig, run

__all__ = ["main"]


def _add_common(sub):
    sub.add_argument("--config", help="key-value config file")
    sub.add_argument("--seed", type=int, help="random seed (overrides config)")
    sub.add_argument("--out-dir", default=".", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="incomedist",
        description="Two-crossover income distribution toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("merge", help="merge survey incomes with rich-list wealth")
    p.add_argument("survey_file")
    p.add_argument("wealth_file")
    _add_common(p)
    p.set_defaults(func=cmd_merge)

    p = subs.add_parser("fit", help="three-step fit of a sample file")
    p.add_argument("samples_file")
    p.add_argument("--m0", type=float, help="manual lower crossover")
    p.add_argument("--m1", type=float, help="manual threshold")
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = subs.add_parser("eval", help="tabulate pdf and ccdf on a log grid")
    p.add_argument("params_file")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("sample", help="draw incomes from the model")
    _add_common(p)
    p.add_argument("--n", type=int, help="number of draws (overrides config)")
    p.set_defaults(func=cmd_sample)

    p = subs.add_parser("simulate", help="Langevin ensemble simulation")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = subs.add_parser("slope", help="sliding log-log slopes of a sample file")
    p.add_argument("samples_file")
    p.add_argument("--window", type=int, help="window size in points (default 51)")
    _add_common(p)
    p.set_defaults(func=cmd_slope)
    return parser


def _load_config(args) -> dict:
    return read_config(args.config) if args.config else {}


def _cfg_cast(cfg, key, cast, default=None):
    if key not in cfg:
        return default
    try:
        return cast(cfg[key])
    except ValueError as exc:
        raise ParseError(f"config key {key!r}: {exc}") from exc


def _out(args, name: str) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def _resolve_seed(args, cfg, required: bool):
    if args.seed is not None:
        return int(args.seed)
    if "seed" in cfg:
        try:
            return int(cfg["seed"])
        except ValueError as exc:
            raise ParseError(f"config seed: {exc}") from exc
    if required:
        raise PreconditionError("a seed is required (--seed or config key 'seed')")
    return None


def cmd_merge(args, argv) -> int:
    cfg = _load_config(args)
    fx = _cfg_cast(cfg, "fx_rate", float, 1.0)
    survey_res = load_samples(args.survey_file, {**cfg, "kind": "survey"})
    wealth_res = load_samples(args.wealth_file, {**cfg, "kind": "wealth"})
    survey = survey_res.samples
    if not survey:
        raise PreconditionError("survey file produced no usable samples")
    dropped = 0
    skipped = 0
    rich = []
    if wealth_res.records:
        if "year_from" not in cfg or "year_to" not in cfg:
            raise PreconditionError(
                "wealth conversion needs 'year_from' and 'year_to' config keys"
            )
        conv = incomes_from_wealth(
            wealth_res.records, _cfg_cast(cfg, "year_from", int),
            _cfg_cast(cfg, "year_to", int), fx,
        )
        rich, dropped, skipped = conv.samples, conv.n_dropped_nonpositive, conv.n_skipped_missing_year
    factor = find_scale_factor(survey, rich) if rich else 1.0
    merged, report = merge(survey, rich, factor,
                           n_richlist_dropped_nonpositive=dropped,
                           exchange_rate_used=fx)
    merged_path = _out(args, "merged.csv")
    write_samples_csv(merged_path, merged)
    lines = {
        "scale_factor": report.scale_factor,
        "overlap_lo": report.overlap_window[0],
        "overlap_hi": report.overlap_window[1],
        "n_survey": str(report.n_survey),
        "n_richlist_kept": str(report.n_richlist_kept),
        "n_richlist_dropped_nonpositive": str(report.n_richlist_dropped_nonpositive),
        "n_richlist_skipped_missing_year": str(skipped),
        "n_survey_malformed": str(len(survey_res.errors)),
        "n_wealth_malformed": str(len(wealth_res.errors)),
        "exchange_rate_used": report.exchange_rate_used,
    }
    report_path = _out(args, "merge_report.txt")
    write_key_value(report_path, lines)
    with open(report_path, "r", encoding="utf-8") as fh:
        sys.stdout.write(fh.read())
    write_manifest(
        _out(args, "merge.manifest.json"),
        command="merge",
        parameters={"fx_rate": fx,
                    "year_from": cfg.get("year_from"),
                    "year_to": cfg.get("year_to"),
                    "scale_factor": report.scale_factor},
        inputs={"survey_file": args.survey_file, "wealth_file": args.wealth_file,
                **({"config": args.config} if args.config else {})},
        outputs=["merged.csv", "merge_report.txt"],
        seed=None,
        version=__version__,
        argv=argv,
    )
    return 0


def _report_mapping(report) -> dict:
    p = report.params
    out = {
        "T": p.T, "T1": p.T1, "m0": p.m0, "m1": p.m1,
        "alpha": p.alpha, "alpha1": p.alpha1, "m_init": p.m_init,
    }
    for name, se in report.std_errors.items():
        out[f"se_{name}"] = se
    for name, r2 in report.r_squared.items():
        out[f"r2_{name}"] = r2
    for name, (lo, hi) in report.windows.items():
        out[f"window_{name}_lo"] = lo
        out[f"window_{name}_hi"] = hi
    out["infinite_variance_flag"] = str(report.infinite_variance_flag).lower()
    out["no_high_income_regime"] = str(report.no_high_income_regime).lower()
    out["crossover_uncertainty"] = report.crossover_uncertainty
    out["notes"] = "; ".join(report.notes)
    return out


def cmd_fit(args, argv) -> int:
    cfg = _load_config(args)
    if (args.m0 is None) != (args.m1 is None):
        raise PreconditionError("supply both --m0 and --m1 or neither")
    res = load_samples(args.samples_file, {**cfg, "kind": "survey"})
    if len(res.samples) < 2:
        raise PreconditionError("too few usable samples to fit")
    ecdf = build_ccdf(res.samples)
    overrides = None if args.m0 is None else (args.m0, args.m1)
    report = fit_pipeline(ecdf, overrides=overrides)
    mapping = _report_mapping(report)
    report_path = _out(args, "fit_report.txt")
    write_key_value(report_path, mapping)
    rows = [(name, mapping[name], mapping.get(f"se_{name}", math.nan))
            for name in ("T", "m0", "m1", "alpha", "alpha1")]
    rows.append(("m_init", mapping["m_init"], math.nan))
    write_table(_out(args, "fit_report.tsv"),
                ("parameter", "value", "std_error"), rows)
    with open(report_path, "r", encoding="utf-8") as fh:
        sys.stdout.write(fh.read())
    write_manifest(
        _out(args, "fit.manifest.json"),
        command="fit",
        parameters={"m0_override": args.m0, "m1_override": args.m1,
                    **{k: mapping[k] for k in ("T", "m0", "m1", "alpha", "alpha1", "m_init")}},
        inputs={"samples_file": args.samples_file,
                **({"config": args.config} if args.config else {})},
        outputs=["fit_report.txt", "fit_report.tsv"],
        seed=None,
        version=__version__,
        argv=argv,
    )
    return 0


def cmd_eval(args, argv) -> int:
    cfg = read_config(args.params_file)
    if args.config:
        cfg = {**cfg, **read_config(args.config)}
    params = effective_params_from_config(cfg)
    n_points = _cfg_cast(cfg, "grid_points", int, 200)
    if n_points < 2:
        raise PreconditionError("grid_points must be at least 2")
    ref = params.m1 if math.isfinite(params.m1) else params.m0
    gmax = _cfg_cast(cfg, "grid_max", float, 1e3 * ref)
    gmin = _cfg_cast(cfg, "grid_min", float, params.m_init)
    if gmin < params.m_init or gmax <= gmin:
        raise PreconditionError("grid must satisfy m_init <= grid_min < grid_max")
    if gmin > 0:
        grid = np.geomspace(gmin, gmax, n_points)
    else:
        grid = np.concatenate([[0.0], np.geomspace(gmax * 1e-9, gmax, n_points - 1)])
    grid[0] = gmin
    pdf = stationary_pdf(grid, params)
    ccdf = model_ccdf(grid, params)
    write_table(_out(args, "eval_table.tsv"), ("m", "pdf", "ccdf"),
                zip(grid, pdf, ccdf))
    write_table(_out(args, "eval_plot.tsv"), ("m", "ccdf"), zip(grid, ccdf))
    write_manifest(
        _out(args, "eval.manifest.json"),
        command="eval",
        parameters={"T": params.T, "T1": params.T1, "m0": params.m0,
                    "m1": params.m1, "alpha": params.alpha,
                    "alpha1": params.alpha1, "m_init": params.m_init,
                    "grid_min": gmin, "grid_max": gmax, "grid_points": n_points},
        inputs={"params_file": args.params_file,
                **({"config": args.config} if args.config else {})},
        outputs=["eval_table.tsv", "eval_plot.tsv"],
        seed=None,
        version=__version__,
        argv=argv,
    )
    return 0


def cmd_sample(args, argv) -> int:
    if not args.config:
        raise PreconditionError("sample needs --config with model parameters")
    cfg = read_config(args.config)
    params = effective_params_from_config(cfg)
    seed = _resolve_seed(args, cfg, required=True)
    n = args.n if args.n is not None else _cfg_cast(cfg, "n", int, 100_000)
    xs = draw_samples(n, params, seed=seed)
    write_samples_csv(_out(args, "samples.csv"), xs)
    write_manifest(
        _out(args, "sample.manifest.json"),
        command="sample",
        parameters={"n": n, "T": params.T, "T1": params.T1, "m0": params.m0,
                    "m1": params.m1, "alpha": params.alpha,
                    "alpha1": params.alpha1, "m_init": params.m_init},
        inputs={"config": args.config},
        outputs=["samples.csv"],
        seed=seed,
        version=__version__,
        argv=argv,
    )
    return 0


def cmd_simulate(args, argv) -> int:
    if not args.config:
        raise PreconditionError("simulate needs --config with micro parameters")
    cfg = read_config(args.config)
    params = micro_params_from_config(cfg)
    seed = _resolve_seed(args, cfg, required=True)
    kwargs = {}
    for key, cast in (("n_walkers", int), ("dt", float), ("burn_in", int),
                      ("sample_every", int), ("total_samples", int)):
        if key in cfg:
            kwargs[key] = _cfg_cast(cfg, key, cast)
    config = SimConfig(params=params, seed=seed, **kwargs)
    result = run(config)
    hist = result.histogram
    write_table(
        _out(args, "histogram.tsv"),
        ("bin_low", "bin_high", "density"),
        zip(hist.bin_edges[:-1], hist.bin_edges[1:], hist.densities),
    )
    if params.A0 > 0:
        eff = effective_from_micro(params)
        xs = np.sort(result.samples)
        pos = 1.0 - np.arange(1, len(xs) + 1) / (len(xs) + 1)
        ks = float(np.max(np.abs(pos - model_ccdf(xs, eff))))
        sys.stdout.write(f"ks_distance_vs_model = {format_sig(ks)}\n")
    write_manifest(
        _out(args, "simulate.manifest.json"),
        command="simulate",
        parameters={"A0": params.A0, "A0p": params.A0p, "a": params.a,
                    "ap": params.ap, "B0": params.B0, "b": params.b,
                    "m1": params.m1, "m_init": params.m_init,
                    "n_walkers": config.n_walkers, "dt": config.dt,
                    "burn_in": config.burn_in,
                    "sample_every": config.sample_every,
                    "total_samples": config.total_samples},
        inputs={"config": args.config},
        outputs=["histogram.tsv"],
        seed=seed,
        version=__version__,
        argv=argv,
    )
    return 0


def cmd_slope(args, argv) -> int:
    cfg = _load_config(args)
    window = args.window if args.window is not None else _cfg_cast(cfg, "window", int, 51)
    res = load_samples(args.samples_file, {**cfg, "kind": "survey"})
    if len(res.samples) < 2:
        raise PreconditionError("too few usable samples")
    ecdf = build_ccdf(res.samples)
    pairs = local_log_slope(ecdf, window)
    write_table(_out(args, "slope.tsv"), ("income", "slope"), pairs)
    write_manifest(
        _out(args, "slope.manifest.json"),
        command="slope",
        parameters={"window": window},
        inputs={"samples_file": args.samples_file,
                **({"config": args.config} if args.config else {})},
        outputs=["slope.tsv"],
        seed=None,
        version=__version__,
        argv=argv,
    )
    return 0


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, argv)
    except ParseError as exc:
        print(f"incomedist: parse error: {exc}", file=sys.stderr)
        return 2
    except PreconditionError as exc:
        print(f"incomedist: precondition failed: {exc}", file=sys.stderr)
        return 3
    except NumericsError as exc:
        print(f"incomedist: numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
