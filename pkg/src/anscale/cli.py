"""Command-line interface: generate ensembles, estimate exponents, analyze prices.

Exit codes: 0 success, 2 flag/input validation (including missing or
malformed input files), 3 generation failure, 4 estimation failure (the
message names the exponent stage that failed).

Every command accepts --seed and --threads; the thread count never
changes numerical results, only wall time, and defaults to the
ANSCALE_THREADS environment variable (1 when unset).  Reports embed the
full resolved configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .core import load_ensemble, make_time_grid, save_ensemble, series_to_csv
from .errors import AnscaleError, EstimationError
from .estimators import FitOptions, analyze_ensemble
from .generators import ProcessSpec, generate
from .market import BarFormat, IntervalSpec, SessionSpec, analyze_market
from .parallel import THREADS_ENV_VAR, resolve_threads

_FAMILY_CHOICES = ("bm", "sbm", "fbm", "sfbm", "lm", "slm", "flm", "sflm", "vdp")


def _err(message: str) -> None:
    print(f"anscale: error: {message}", file=sys.stderr)


def _emit(payload: dict) -> None:
    json.dump(payload, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="master seed")
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help=f"worker threads (default from ${THREADS_ENV_VAR}, else 1); "
        "never changes numerical results",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anscale",
        description="Simulate self-similar processes and estimate their "
        "scaling exponents (H, J, L, M).",
    )
    parser.add_argument("--version", action="version", version=f"anscale {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="simulate a path ensemble and write it to disk")
    gen.add_argument("--family", required=True, choices=_FAMILY_CHOICES)
    gen.add_argument("--J", dest="joseph", type=float, default=None, help="memory exponent")
    gen.add_argument("--L", dest="latent", type=float, default=None, help="tail exponent")
    gen.add_argument("--M", dest="moses", type=float, default=None, help="scaling exponent")
    gen.add_argument("--H", dest="hurst", type=float, default=None, help="diffusion Hurst target")
    gen.add_argument("--epsilon", type=float, default=1.0, help="diffusion shape (vdp)")
    gen.add_argument("--flm-mesh", type=int, default=16, help="fine steps per unit time (flm/sflm)")
    gen.add_argument("--flm-window", type=int, default=None, help="kernel window in fine steps (flm/sflm)")
    gen.add_argument("--vdp-substeps", type=int, default=16, help="integration substeps (vdp)")
    gen.add_argument("--paths", type=int, required=True)
    gen.add_argument("--steps", type=int, required=True)
    gen.add_argument("-o", "--out", required=True, help="output file")
    gen.add_argument("--format", choices=("binary", "csv"), default=None,
                     help="output format (default: by file suffix)")
    _add_common(gen)
    gen.set_defaults(func=cmd_generate)

    est = sub.add_parser("estimate", help="estimate the four exponents of a stored ensemble")
    est.add_argument("ensemble", help="ensemble file (binary or csv)")
    est.add_argument("--t-min", type=int, default=50)
    est.add_argument("--t-max", type=int, default=None, help="default: path length")
    est.add_argument("--grid-count", type=int, default=500)
    est.add_argument("--bootstrap", type=int, default=200, help="bootstrap replicates")
    est.add_argument("--k-sigma", type=float, default=3.0, help="consistency threshold")
    est.add_argument("--out-dir", default=None, help="write series CSVs and report.json here")
    _add_common(est)
    est.set_defaults(func=cmd_estimate)

    mkt = sub.add_parser("market", help="run the intraday price pipeline")
    mkt.add_argument("prices", help="delimiter-separated minute-bar file")
    mkt.add_argument("--interval", action="append", default=None, metavar="START:END",
                     help="increment window (repeatable; default 30:190 and 260:380)")
    mkt.add_argument("--t-min", type=int, default=10)
    mkt.add_argument("--grid-count", type=int, default=60)
    mkt.add_argument("--open-time", default="09:30")
    mkt.add_argument("--session-minutes", type=int, default=390)
    mkt.add_argument("--max-days", type=int, default=2500)
    mkt.add_argument("--max-trailing-gap", type=int, default=60,
                     help="drop days with a longer trailing gap (half days)")
    mkt.add_argument("--delimiter", default=",")
    mkt.add_argument("--date-col", type=int, default=0)
    mkt.add_argument("--time-col", type=int, default=1)
    mkt.add_argument("--close-col", type=int, default=5)
    mkt.add_argument("--header", choices=("auto", "yes", "no"), default="auto")
    mkt.add_argument("--symbol", default="")
    mkt.add_argument("--bootstrap", type=int, default=200)
    mkt.add_argument("--k-sigma", type=float, default=3.0)
    mkt.add_argument("--out-dir", default=None)
    _add_common(mkt)
    mkt.set_defaults(func=cmd_market)
    return parser


def cmd_generate(args) -> int:
    try:
        threads = resolve_threads(args.threads)
        spec = ProcessSpec(
            family=args.family.upper(),
            joseph=args.joseph,
            latent=args.latent,
            moses=args.moses,
            hurst=args.hurst,
            epsilon=args.epsilon,
            flm_mesh=args.flm_mesh,
            flm_window=args.flm_window,
            vdp_substeps=args.vdp_substeps,
        )
        if args.paths < 1 or args.steps < 1:
            raise AnscaleError("--paths and --steps must be >= 1")
    except AnscaleError as exc:
        _err(str(exc))
        return 2
    if spec.rs_unreliable:
        print(
            "anscale: warning: J < 1/2; rescaled-range statistics on this "
            "ensemble will be unreliable",
            file=sys.stderr,
        )
    seed = args.seed if args.seed is not None else 0
    try:
        ensemble = generate(spec, args.paths, args.steps, seed, threads=threads)
        save_ensemble(ensemble, args.out, fmt=args.format)
    except Exception as exc:  # noqa: BLE001 - report and signal failure
        _err(f"generation failed: {exc}")
        return 3
    _emit(
        {
            "command": "generate",
            "config": {
                "family": spec.family,
                "descriptor": json.loads(spec.descriptor()),
                "paths": args.paths,
                "steps": args.steps,
                "seed": seed,
                "threads": threads,
                "format": args.format or ("csv" if args.out.endswith(".csv") else "binary"),
            },
            "output": str(args.out),
        }
    )
    return 0


def _fit_payload(bootstrap: dict) -> dict:
    return {kind: result.fit.to_dict() for kind, result in bootstrap.items()}


def cmd_estimate(args) -> int:
    try:
        threads = resolve_threads(args.threads)
        ensemble = load_ensemble(args.ensemble)
    except FileNotFoundError:
        _err(f"no such file: {args.ensemble}")
        return 2
    except AnscaleError as exc:
        _err(str(exc))
        return 2
    t_max = args.t_max if args.t_max is not None else ensemble.n_steps
    try:
        grid = make_time_grid(args.t_min, t_max, args.grid_count)
        if grid.t_max > ensemble.n_steps:
            raise AnscaleError(
                f"grid t_max {grid.t_max} exceeds path length {ensemble.n_steps}"
            )
        if args.bootstrap < 2:
            raise AnscaleError("--bootstrap must be >= 2")
    except AnscaleError as exc:
        _err(str(exc))
        return 2
    seed = args.seed if args.seed is not None else ensemble.master_seed
    options = FitOptions(
        n_replicates=args.bootstrap, seed=seed, k_sigma=args.k_sigma, threads=threads
    )
    try:
        analysis = analyze_ensemble(ensemble, grid, options)
    except EstimationError as exc:
        _err(f"estimation failed for exponent {exc.exponent}: {exc}")
        return 4
    except AnscaleError as exc:
        _err(f"estimation failed: {exc}")
        return 4
    payload = {
        "command": "estimate",
        "config": {
            "ensemble": str(args.ensemble),
            "descriptor": ensemble.descriptor,
            "n_paths": ensemble.n_paths,
            "n_steps": ensemble.n_steps,
            "grid": {"t_min": grid.t_min, "t_max": grid.t_max, "count": grid.count,
                     "n_points": len(grid)},
            "bootstrap": args.bootstrap,
            "seed": seed,
            "k_sigma": args.k_sigma,
            "threads": threads,
        },
        "report": analysis.report.to_dict(),
        "fits": _fit_payload(analysis.bootstrap),
    }
    if args.out_dir is not None:
        payload["files"] = _write_estimate_files(args.out_dir, analysis, payload)
    _emit(payload)
    return 0


def _write_estimate_files(out_dir, analysis, payload) -> list[str]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for kind, result in analysis.bootstrap.items():
        target = out / f"series_{kind}.csv"
        series_to_csv(result.series, target)
        written.append(str(target))
    report_path = out / "report.json"
    report_path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    written.append(str(report_path))
    return written


def _parse_interval(text: str, t_min: int, grid_count: int) -> IntervalSpec:
    parts = text.split(":")
    if len(parts) != 2:
        raise AnscaleError(f"interval must be START:END, got {text!r}")
    try:
        start, end = int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise AnscaleError(f"interval must be integer START:END, got {text!r}") from exc
    return IntervalSpec(start=start, end=end, t_min=t_min, grid_count=grid_count)


def cmd_market(args) -> int:
    header = {"auto": None, "yes": True, "no": False}[args.header]
    try:
        threads = resolve_threads(args.threads)
        session = SessionSpec(
            open_time=args.open_time,
            n_minutes=args.session_minutes,
            max_days=args.max_days,
            max_trailing_gap=args.max_trailing_gap,
        )
        fmt = BarFormat(
            delimiter=args.delimiter,
            date_col=args.date_col,
            time_col=args.time_col,
            close_col=args.close_col,
            has_header=header,
        )
        raw_intervals = args.interval or ["30:190", "260:380"]
        intervals = tuple(
            _parse_interval(text, args.t_min, args.grid_count) for text in raw_intervals
        )
        if args.bootstrap < 2:
            raise AnscaleError("--bootstrap must be >= 2")
    except AnscaleError as exc:
        _err(str(exc))
        return 2
    seed = args.seed if args.seed is not None else 0
    options = FitOptions(
        n_replicates=args.bootstrap, seed=seed, k_sigma=args.k_sigma, threads=threads
    )
    try:
        result = analyze_market(
            args.prices,
            intervals=intervals,
            session=session,
            fmt=fmt,
            options=options,
            symbol=args.symbol,
        )
    except FileNotFoundError:
        _err(f"no such file: {args.prices}")
        return 2
    except EstimationError as exc:
        _err(f"estimation failed for exponent {exc.exponent}: {exc}")
        return 4
    except AnscaleError as exc:
        _err(str(exc))
        return 2
    payload = {
        "command": "market",
        "config": {
            "prices": str(args.prices),
            "session": {
                "open_time": args.open_time,
                "n_minutes": args.session_minutes,
                "max_days": args.max_days,
                "max_trailing_gap": args.max_trailing_gap,
            },
            "format": {
                "delimiter": args.delimiter,
                "date_col": args.date_col,
                "time_col": args.time_col,
                "close_col": args.close_col,
                "header": args.header,
            },
            "t_min": args.t_min,
            "grid_count": args.grid_count,
            "bootstrap": args.bootstrap,
            "seed": seed,
            "k_sigma": args.k_sigma,
            "threads": threads,
        },
        "symbol": result.symbol,
        "n_days": result.n_days,
        "intervals": [
            {
                "start": item.interval.start,
                "end": item.interval.end,
                "grid": {
                    "t_min": item.interval.t_min,
                    "t_max": item.interval.n_steps,
                    "count": item.interval.grid_count,
                },
                "report": item.analysis.report.to_dict(),
                "fits": _fit_payload(item.analysis.bootstrap),
            }
            for item in result.intervals
        ],
    }
    if args.out_dir is not None:
        payload["files"] = _write_market_files(args.out_dir, result, payload)
    _emit(payload)
    return 0


def _write_market_files(out_dir, result, payload) -> list[str]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    profile_path = out / "profile.csv"
    series_to_csv(result.profile, profile_path)
    written.append(str(profile_path))
    for item in result.intervals:
        tag = f"{item.interval.start}_{item.interval.end}"
        for kind, series_result in item.analysis.bootstrap.items():
            target = out / f"interval_{tag}_series_{kind}.csv"
            series_to_csv(series_result.series, target)
            written.append(str(target))
    report_path = out / "report.json"
    report_path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    written.append(str(report_path))
    return written


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
