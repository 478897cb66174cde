"""Command-line entry point.

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import pipeline, report
from .accounting import CurrencySet, Quarter
from .errors import ConfigError, FxReservesError
from .io_config import (
    DEFAULT_CURRENCIES,
    CountryDataset,
    RunConfig,
    load_config,
    load_dataset,
    read_reported,
    render_config,
    write_cofer,
    write_market,
    write_reported,
    write_reserves,
)
from .particle_filter import DEFAULT_LEVELS, DEFAULT_PROBS, calibration_curve, calibration_probs


def _figures(args) -> bool:
    return not getattr(args, "no_figures", False)


def _load(args) -> tuple[RunConfig, CountryDataset]:
    if not args.config:
        raise ConfigError("--config is required for this command", "--config")
    config = load_config(args.config, seed=args.seed)
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("must be at least 1", "--workers")
        config = config.replace(workers=args.workers)
    return config, load_dataset(config)


def _out(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_estimate(args) -> int:
    config, data = _load(args)
    inputs = pipeline.prepare_inputs(config, data)
    summary = pipeline.estimate(config, inputs)
    out = _out(args)
    report.write_summary(out / "summary.csv", summary)
    report.write_goodness(out / "goodness.csv", summary)
    report.write_metadata(out / "metadata.json", "estimate", config.as_dict(), data.digests,
                          {"notes": data.notes,
                           "clamped_particle_draws": int(np.sum(summary.n_clamped))})
    if _figures(args):
        from . import plots

        plots.fan_chart(summary, out / "summary.png", reported=data.reported)
        plots.goodness_plot(summary, out / "goodness.png")
    print(report.final_quarter_table(summary))
    return 0


def cmd_sweep(args) -> int:
    config, data = _load(args)
    values = pipeline.parse_sweep_values(args.axis, args.values, config)
    results = pipeline.run_sweep(config, data, args.axis, values,
                                 max_concurrent=config.workers)
    out = _out(args)
    report.write_sweep(out / f"sweep_{args.axis}.csv", args.axis, results)
    report.write_metadata(out / f"sweep_{args.axis}.json", "sweep", config.as_dict(),
                          data.digests, {"axis": args.axis,
                                         "values": [v if isinstance(v, str) else float(v)
                                                    for v in values],
                                         "notes": data.notes})
    if _figures(args):
        from . import plots

        plots.sweep_plot(args.axis, results, out / f"sweep_{args.axis}.png",
                         config.currencies.usd_index)
    t = -1
    for value, s in results:
        usd = config.currencies.usd_index
        iqr = s.quantile(0.75)[t, usd] - s.quantile(0.25)[t, usd]
        print(f"{args.axis}={value}: {s.quarters[t]} {config.currencies.usd_code} median "
              f"{100 * s.median[t, usd]:.1f}%  IQR {100 * iqr:.1f}pp")
    return 0


def cmd_calibrate(args) -> int:
    config, data = _load(args)
    if args.reported:
        reported = read_reported(args.reported, config.currencies)
    elif data.reported is not None:
        reported = data.reported
    else:
        raise ConfigError("no reported shares: pass --reported or set data.reported",
                          "data.reported")
    levels = DEFAULT_LEVELS
    inputs = pipeline.prepare_inputs(config, data)
    probs = tuple(sorted(set(DEFAULT_PROBS) | set(calibration_probs(levels))))
    summary = pipeline.estimate(config, inputs, probs=probs)
    curve = calibration_curve(summary, reported, levels)
    out = _out(args)
    report.write_calibration(out / "calibration.csv", curve)
    report.write_metadata(out / "calibration.json", "calibrate", config.as_dict(),
                          data.digests, {"notes": data.notes})
    if _figures(args):
        from . import plots

        plots.calibration_plot(curve, out / "calibration.png")
    for j, c in enumerate(curve.currencies):
        row = " ".join(f"{v:.2f}" for v in curve.coverage[:, j])
        print(f"{c:<6} n={curve.n_reports[j]:<3d} {row}")
    return 0


def cmd_baseline(args) -> int:
    config, data = _load(args)
    inputs = pipeline.prepare_inputs(config, data)
    result = pipeline.baseline(config, inputs)
    out = _out(args)
    report.write_baseline(out / "baseline.csv", result)
    report.write_metadata(out / "baseline.json", "baseline", config.as_dict(), data.digests,
                          {"notes": data.notes,
                           "nonunique_windows": int(np.sum(result.nonunique))})
    if _figures(args):
        from . import plots

        plots.baseline_plot(result, out / "baseline.png")
    last = result.shares[-1]
    print(f"{result.quarters[-1]} " + "  ".join(
        f"{c} {100 * s:.1f}%" for c, s in zip(result.currencies, last)))
    return 0


def cmd_equity_share(args) -> int:
    config, data = _load(args)
    inputs = pipeline.prepare_inputs(config, data)
    out = _out(args)
    report.write_equity(out / "equity_share.csv", inputs.equity)
    report.write_metadata(out / "equity_share.json", "equity-share", config.as_dict(),
                          data.digests, {"notes": data.notes})
    if _figures(args):
        from . import plots

        plots.equity_plot(inputs.equity, out / "equity_share.png")
    x = inputs.equity.x
    print(f"equity share: mean {100 * x.mean():.1f}%  range {100 * x.min():.1f}%"
          f"..{100 * x.max():.1f}%  degenerate windows {int(inputs.equity.degenerate.sum())}")
    return 0


def cmd_synth(args) -> int:
    """Write a synthetic country drawn from the model, plus a config to run it."""
    from .simulate import make_synthetic_dataset

    if args.config:
        config = load_config(args.config, seed=args.seed)
    else:
        config = RunConfig(currencies=CurrencySet(DEFAULT_CURRENCIES),
                           seed=args.seed or 0)
    start = Quarter.parse(args.start) if args.start else (config.start or Quarter(2003, 4))
    end = Quarter.parse(args.end) if args.end else (config.end or Quarter(2022, 3))
    if not start < end:
        raise ConfigError(f"start {start} must precede end {end}", "--start")
    config = config.replace(start=start, end=end, data=())
    prior = (pipeline.resolve_prior(config) if config.prior.kind != "cofer"
             else config.prior.concentration)
    rng = np.random.default_rng(config.seed)
    ds = make_synthetic_dataset(config.currencies, start, end, prior, config.model, rng,
                                maturity_years=config.maturity_years,
                                equity_share=args.equity_share)
    out = _out(args)
    paths = {"reserves": write_reserves(out / "reserves.csv", ds.reserves)}
    paths.update(write_market(out, ds.market))
    paths["cofer"] = write_cofer(out / "cofer.csv", ds.market.quarters, config.currencies,
                                 ds.cofer_shares, ds.cofer_other)
    paths["reported"] = write_reported(out / "reported.csv", ds.reported)
    report.write_csv(out / "truth.csv", ("quarter", "currency", "share"),
                     ((str(q), c, repr(float(ds.true_beta[t, j])))
                      for t, q in enumerate(ds.market.quarters[1:])
                      for j, c in enumerate(config.currencies)))
    (out / "config.ini").write_text(render_config(config, {k: p.name for k, p in paths.items()}))
    print(f"wrote synthetic dataset {start}..{end} ({len(config.currencies)} currencies) "
          f"to {out}")
    return 0


COMMANDS = {
    "estimate": cmd_estimate,
    "sweep": cmd_sweep,
    "calibrate": cmd_calibrate,
    "baseline": cmd_baseline,
    "equity-share": cmd_equity_share,
    "synth": cmd_synth,
}


def build_parser() -> argparse.ArgumentParser:
    def add_common(p, default):
        d = (lambda v: v) if default else (lambda v: argparse.SUPPRESS)
        p.add_argument("--config", default=d(None), help="run config file")
        p.add_argument("--out-dir", default=d("out"), help="output directory (default: out)")
        p.add_argument("--seed", type=int, default=d(None), help="override the config seed")
        p.add_argument("--workers", type=int, default=d(None),
                       help="worker threads (results do not depend on it)")
        p.add_argument("--no-figures", action="store_true", default=d(False),
                       help="write data files only")

    parser = argparse.ArgumentParser(
        prog="fxreserves",
        description="Currency composition of foreign exchange reserves by particle filtering.")
    add_common(parser, True)
    sub = parser.add_subparsers(dest="command", required=True)

    helps = {
        "estimate": "filter the configured country; write summary, goodness and metadata",
        "sweep": "rerun the filter across maturities, prior widths or noise distributions",
        "calibrate": "coverage of credible intervals against self-reported shares",
        "baseline": "rolling simplex-constrained least squares estimates",
        "equity-share": "rolling estimate of the equity share",
        "synth": "write a synthetic dataset and config drawn from the model",
    }
    subs = {}
    for name, text in helps.items():
        subs[name] = sub.add_parser(name, help=text, description=text)
        add_common(subs[name], False)
    subs["sweep"].add_argument("--axis", required=True, choices=pipeline.SWEEP_AXES)
    subs["sweep"].add_argument("--values", default=None,
                               help="comma list, e.g. 2,5,7,10 or laplace,normal")
    subs["calibrate"].add_argument("--reported", default=None,
                                   help="self-reported shares CSV (default: data.reported)")
    subs["synth"].add_argument("--start", default=None, help="base quarter, e.g. 2003Q4")
    subs["synth"].add_argument("--end", default=None, help="last quarter, e.g. 2022Q3")
    subs["synth"].add_argument("--equity-share", type=float, default=0.05)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except FxReservesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
