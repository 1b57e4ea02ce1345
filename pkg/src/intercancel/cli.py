"""Command-line front end."""

from __future__ import annotations

import argparse
import io
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from .distfit import Binning, Family, FitMethod, empirical_pdf, fit_mle, fit_nlse
from .durations import compute_stats, extract_durations
from .ingest import EventStream, Side, parse_order_flow, write_order_flow
from .multifractal import mfdfa, width_shuffle_test
from .pipeline import EXIT_FATAL, ConfigError, RunConfig, run_pipeline
from .reports import (
    FIT_COLUMNS,
    SCALING_COLUMNS,
    SHUFFLE_COLUMNS,
    STATS_COLUMNS,
    atomic_write,
    columns_text,
    render_table,
)
from .scaling import cdma, default_scales, dfa, shuffle_test
from .synth import GeneratorKind, GeneratorSpec, generate

log = logging.getLogger("intercancel")


def _global_options() -> argparse.ArgumentParser:
    # SUPPRESS keeps a flag given before the subcommand from being reset by the subparser
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--config", default=argparse.SUPPRESS, help="YAML or JSON run configuration")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    g.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    g.add_argument("--format", choices=("tsv", "json"), default=argparse.SUPPRESS)
    g.add_argument("--workers", type=int, default=argparse.SUPPRESS)
    g.add_argument("--day-policy", choices=("reset", "continuous"), default=argparse.SUPPRESS)
    g.add_argument("--chi-space", choices=("log", "linear"), default=argparse.SUPPRESS)
    g.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_options()
    parser = argparse.ArgumentParser(prog="intercancel", parents=[common], description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def series_cmd(name, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.add_argument("input", help="order-flow CSV, or a text file with one value per line")
        sp.add_argument("--side", default="buy", help="side to extract when the input is order flow")
        return sp

    sp = sub.add_parser("extract", parents=[common], help="durations and count statistics from order flow")
    sp.add_argument("input", nargs="+")
    sp.add_argument("--side", action="append", help="buy or sell (repeatable; default both)")

    sp = series_cmd("fit", "fit Weibull and q-exponential densities")
    sp.add_argument("--method", action="append", choices=[m.value for m in FitMethod])
    sp.add_argument("--family", action="append", choices=[f.value for f in Family])
    sp.add_argument("--binning", choices=[b.value for b in Binning], default="hybrid")

    for name in ("dfa", "cdma"):
        sp = series_cmd(name, f"Hurst exponent by {name.upper()}")
        sp.add_argument("--scales", type=int, nargs="+", help="explicit scale grid")

    sp = series_cmd("mfdfa", "generalized Hurst exponents and singularity spectrum")
    sp.add_argument("--scales", type=int, nargs="+")
    sp.add_argument("--q", type=float, nargs="+", help="explicit q grid")

    sp = series_cmd("shuffle", "shuffle test for DFA, CDMA or spectrum width")
    sp.add_argument("--estimator", choices=("DFA", "CDMA", "MFDFA_WIDTH"), default="DFA")
    sp.add_argument("--replicates", type=int, default=100)

    sp = sub.add_parser("synth", parents=[common], help="write synthetic data")
    sp.add_argument("kind", choices=[k.value for k in GeneratorKind])
    sp.add_argument("--length", type=int, required=True)
    sp.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    sp.add_argument("-o", "--output", required=True, help="destination file")

    sp = sub.add_parser("run", parents=[common], help="full batch pipeline")
    sp.add_argument("inputs", nargs="*", help="order-flow CSV files or directories")
    sp.add_argument("--shuffles", type=int)
    sp.add_argument("--no-plot-data", action="store_true")
    return parser


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    for attr in ("seed", "out", "format", "workers", "day_policy", "chi_space"):
        if hasattr(args, attr):
            setattr(cfg, attr, getattr(args, attr))
    return cfg


def _load_series(path: str, side: str, cfg: RunConfig) -> tuple[str, str, np.ndarray]:
    p = Path(path)
    if p.suffix.lower() == ".csv":
        stream = parse_order_flow(p)
        s = Side.parse(side)
        return p.stem, s.label, extract_durations(stream, s, cfg.day_policy).durations.astype(float)
    return p.stem, "NA", np.loadtxt(p, dtype=float, ndmin=1)


def _emit(args, cfg: RunConfig, name: str, columns, rows) -> None:
    text = render_table(columns, rows, cfg.format)
    if hasattr(args, "out"):
        atomic_write(Path(cfg.out) / f"{name}.{cfg.format}", text)
    sys.stdout.write(text)


def cmd_extract(args, cfg: RunConfig) -> int:
    sides = [Side.parse(s) for s in (args.side or ("buy", "sell"))]
    rows = []
    for path in args.input:
        stream = parse_order_flow(path)
        stock = Path(path).stem
        for side in sides:
            series = extract_durations(stream, side, cfg.day_policy)
            st = compute_stats(stream, side, series)
            rows.append((stock, side.label, st.n_cancel, st.n_all, st.r, st.gamma, st.mean_duration))
            if hasattr(args, "out"):
                body = "".join(f"{v}\n" for v in series.durations.tolist())
                atomic_write(Path(cfg.out) / f"{stock}_{side.label}_durations.txt", body)
    _emit(args, cfg, "stats", STATS_COLUMNS, rows)
    return 0


def cmd_fit(args, cfg: RunConfig) -> int:
    stock, side, d = _load_series(args.input, args.side, cfg)
    emp = empirical_pdf(d, args.binning)
    rows = []
    for method in args.method or cfg.methods:
        for family in args.family or cfg.families:
            if FitMethod(method) is FitMethod.MLE:
                fit = fit_mle(d, family, chi_pdf=emp, chi_space=cfg.chi_space)
            else:
                fit = fit_nlse(emp, family, chi_space=cfg.chi_space)
            rows.append((stock, side, method, family, fit.params.scale, fit.params.shape, fit.chi, fit.converged))
    _emit(args, cfg, f"fits_{side}", FIT_COLUMNS, rows)
    return 0


def cmd_scaling(args, cfg: RunConfig) -> int:
    stock, side, x = _load_series(args.input, args.side, cfg)
    est = dfa if args.command == "dfa" else cdma
    res = est(x, args.scales)
    lo, hi = res.fit_range
    _emit(args, cfg, args.command, SCALING_COLUMNS,
          [(stock, side, res.method.value, res.hurst, res.stderr, res.r2, int(lo), int(hi), res.reliable)])
    if hasattr(args, "out"):
        atomic_write(Path(cfg.out) / f"{stock}_{side}_{args.command}.tsv",
                     columns_text(("s", "F"), (res.scales, res.fluctuations)))
    return 0


def cmd_mfdfa(args, cfg: RunConfig) -> int:
    stock, side, x = _load_series(args.input, args.side, cfg)
    res = mfdfa(x, args.q if args.q else cfg.q_grid(), args.scales)
    cols = ("stock", "side", "q", "h", "tau", "alpha", "f_alpha", "fit_r2")
    rows = [(stock, side, float(q), float(h), float(t), float(a), float(f), float(r))
            for q, h, t, a, f, r in zip(res.q_grid, res.h, res.tau, res.alpha, res.f_alpha, res.per_q_fit_r2)]
    _emit(args, cfg, "mfdfa", cols, rows)
    log.info("delta_alpha=%.6g flags=%s", res.delta_alpha, ",".join(res.flags) or "none")
    if hasattr(args, "out"):
        atomic_write(Path(cfg.out) / f"{stock}_{side}_fq.tsv",
                     columns_text(["s"] + [f"q={v:g}" for v in res.q_grid], [res.scales, *res.fq]))
    return 0


def cmd_shuffle(args, cfg: RunConfig) -> int:
    stock, side, x = _load_series(args.input, args.side, cfg)
    if args.estimator == "MFDFA_WIDTH":
        rep = width_shuffle_test(x, args.replicates, cfg.seed, q_grid=cfg.q_grid(), workers=cfg.workers)
        original = rep.residual + rep.mean
    else:
        est = dfa if args.estimator == "DFA" else cdma
        scales = default_scales(len(x), odd=args.estimator == "CDMA", smin=11 if args.estimator == "CDMA" else 10)
        original = est(x, scales).hurst
        rep = shuffle_test(x, args.estimator, args.replicates, cfg.seed, scales, cfg.workers)
        rep_res = original - rep.mean
        rep = type(rep)(rep.estimator, rep.n_replicates, rep.base_seed, rep.values, rep.mean, rep.std, rep_res)
    _emit(args, cfg, "shuffle", SHUFFLE_COLUMNS,
          [(stock, side, rep.estimator, rep.n_replicates, rep.base_seed, original, rep.mean, rep.std, rep.residual)])
    return 0


def _parse_params(items: Sequence[str]) -> dict:
    params = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"--param expects KEY=VALUE, got {item!r}")
        params[key.strip()] = yaml.safe_load(value)
    return params


def synth_command(spec: GeneratorSpec, path: str | Path) -> Path:
    """Write generator output: order-flow CSV for flows, one value per line otherwise."""
    data = generate(spec)
    if isinstance(data, EventStream):
        buf = io.StringIO()
        write_order_flow(data, buf)
        return atomic_write(path, buf.getvalue())
    values = np.asarray(data)
    if values.dtype.kind in "iu":
        body = "".join(f"{v}\n" for v in values.tolist())
    else:
        body = "".join(f"{v!r}\n" for v in values.tolist())
    return atomic_write(path, body)


def cmd_synth(args, cfg: RunConfig) -> int:
    spec = GeneratorSpec(GeneratorKind(args.kind), args.length, cfg.seed, _parse_params(args.param))
    synth_command(spec, args.output)
    return 0


def cmd_run(args, cfg: RunConfig) -> int:
    if args.inputs:
        cfg.inputs = list(cfg.inputs) + list(args.inputs)
    if args.shuffles is not None:
        cfg.shuffles = args.shuffles
    if args.no_plot_data:
        cfg.plot_data = False
    outcome = run_pipeline(cfg)
    for e in outcome.errors:
        unit = f"{e['stock']}/{e['side']} " if e["stock"] is not None else ""
        print(f"error: {unit}[{e['stage']}] {e['message']}", file=sys.stderr)
    return outcome.exit_code


COMMANDS = {
    "extract": cmd_extract,
    "fit": cmd_fit,
    "dfa": cmd_scaling,
    "cdma": cmd_scaling,
    "mfdfa": cmd_mfdfa,
    "shuffle": cmd_shuffle,
    "synth": cmd_synth,
    "run": cmd_run,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
