"""Command-line interface: ``divlab {eval,optimize,sweep,exponent,mc,md-curve}``.

SNR flags are in dB and converted to linear once, here. Single results are
JSON on stdout; sweeps and MD curves are CSV. Every output carries a ``run``
record whose ``config`` block can be fed back with ``--config`` to replay it.

Exit codes: 0 ok, 2 invalid arguments, 3 numerical failure, 4 partial sweep.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Optional

from . import __version__
from .analysis import DEFAULT_BOUNDS, DEFAULT_SIDE_GRID, estimate_exponent, optimize
from .channel import ChannelParams
from .errors import DivlabError, DomainError, EstimationError, NumericalError
from .mc import McConfig, simulate_scheme
from .schemes import SCDIV_FAMILY, SchemeConfig, SchemeKind, evaluate
from .source import md_tradeoff_curve

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_PARTIAL = 0, 2, 3, 4

SWEEP_COLUMNS = [
    "scheme",
    "snr_db",
    "bw_ratio",
    "best_rate",
    "best_d_side",
    "expected_distortion",
    "evaluations",
]

DEFAULTS: dict[str, dict[str, Any]] = {
    "eval": {"rate": 0.0, "bw_ratio": 1.0, "d_side": None},
    "optimize": {"bw_ratio": 1.0, "r_lo": DEFAULT_BOUNDS[0], "r_hi": DEFAULT_BOUNDS[1], "side_grid": DEFAULT_SIDE_GRID},
    "sweep": {"schemes": "all", "bw_ratio": 1.0, "format": "csv", "output": "-"},
    "exponent": {"snr_db": "30:60", "bw_ratio": 1.0, "points": 16},
    "mc": {"rate": 0.0, "bw_ratio": 1.0, "d_side": None, "samples": 10**6, "seed": 0, "batch": 2**16},
    "md-curve": {"points": 16, "output": "-"},
}

# execution details that must not change the numbers, kept out of run records
_NOT_RECORDED = {"config", "jobs", "command", "func"}


class UsageError(DivlabError):
    pass


def fmt(x: float) -> str:
    return f"{x:.9g}"


def rounded(obj):
    """Round every float to 9 significant digits for output."""
    if isinstance(obj, float):
        return float(fmt(obj)) if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [rounded(v) for v in obj]
    return obj


def run_record(command: str, config: dict, started: float, seed: Optional[int] = None) -> dict:
    record = {"tool": "divlab", "version": __version__, "command": command, "config": config}
    if seed is not None:
        record["seed"] = seed
    record["wall_time_s"] = round(time.perf_counter() - started, 6)
    return record


def default_jobs() -> int:
    env = os.environ.get("DIVLAB_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"DIVLAB_JOBS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def parse_range(text: str, with_step: bool) -> tuple[float, ...]:
    parts = str(text).split(":")
    try:
        values = tuple(float(p) for p in parts)
    except ValueError:
        raise UsageError(f"malformed range {text!r}") from None
    if len(values) != (3 if with_step else 2):
        raise UsageError(f"expected {'start:stop:step' if with_step else 'low:high'}, got {text!r}")
    if values[0] > values[1]:
        raise UsageError(f"range start exceeds stop in {text!r}")
    if with_step and not values[2] > 0:
        raise UsageError(f"range step must be > 0 in {text!r}")
    return values


def snr_grid(text: str) -> list[float]:
    start, stop, step = parse_range(text, with_step=True)
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(n)]


def parse_schemes(text: str) -> list[SchemeKind]:
    if text.strip().lower() == "all":
        return list(SchemeKind)
    kinds = [SchemeKind.parse(name) for name in text.split(",") if name.strip()]
    if not kinds:
        raise UsageError("at least one scheme is required")
    return kinds


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults < config file < explicit flags."""
    config = dict(DEFAULTS[args.command])
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if isinstance(loaded, dict) and isinstance(loaded.get("run"), dict):
            loaded = loaded["run"].get("config", {})
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        config.update({k.replace("-", "_"): v for k, v in loaded.items()})
    for key, value in vars(args).items():
        if key not in _NOT_RECORDED and value is not None:
            config[key] = value
    return config


def _require(config: dict, *keys: str) -> None:
    missing = [k for k in keys if config.get(k) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _scheme_config(config: dict) -> SchemeConfig:
    _require(config, "scheme", "snr_db")
    kind = SchemeKind.parse(config["scheme"])
    if kind in SCDIV_FAMILY and config.get("d_side") is None:
        raise UsageError(f"{kind} requires --d-side")
    d_side = config.get("d_side") if kind in SCDIV_FAMILY else None
    return SchemeConfig(
        kind,
        ChannelParams.from_db(float(config["snr_db"])),
        float(config["bw_ratio"]),
        float(config["rate"]),
        None if d_side is None else float(d_side),
    )


def emit_json(payload: dict) -> None:
    sys.stdout.write(json.dumps(rounded(payload), indent=2) + "\n")


def cmd_eval(args, config, started) -> int:
    cfg = _scheme_config(config)
    result = evaluate(cfg).to_dict()
    result["scheme"] = cfg.kind.value
    emit_json({"result": result, "run": run_record("eval", config, started)})
    return EXIT_OK


def _optimize_row(kind: SchemeKind, snr_db: float, b: float, bounds, side_grid: int) -> dict:
    res = optimize(kind, ChannelParams.from_db(snr_db), b, bounds, side_grid)
    return res.to_dict()


def cmd_optimize(args, config, started) -> int:
    _require(config, "scheme", "snr_db")
    kind = SchemeKind.parse(config["scheme"])
    if kind is SchemeKind.RC:
        raise UsageError("rc has no rate parameter")
    bounds = (float(config["r_lo"]), float(config["r_hi"]))
    result = _optimize_row(kind, float(config["snr_db"]), float(config["bw_ratio"]), bounds, int(config["side_grid"]))
    result["snr_db"] = float(config["snr_db"])
    if result["pinned"]:
        result["warning"] = "optimum pinned to a rate bound"
    emit_json({"result": result, "run": run_record("optimize", config, started)})
    return EXIT_OK


def _sweep_task(task):
    kind, snr_db, b = task
    try:
        res = _optimize_row(kind, snr_db, b, DEFAULT_BOUNDS, DEFAULT_SIDE_GRID)
        return {
            "scheme": kind.value,
            "snr_db": snr_db,
            "bw_ratio": b,
            "best_rate": res["best_rate"],
            "best_d_side": res["best_d_side"],
            "expected_distortion": res["best_expected"],
            "evaluations": res["evaluations"],
            "error": "",
        }
    except DivlabError as exc:
        return {"scheme": kind.value, "snr_db": snr_db, "bw_ratio": b, "best_rate": None,
                "best_d_side": None, "expected_distortion": None, "evaluations": None, "error": str(exc)}


def sweep_rows(kinds, snrs, b, jobs: int) -> list[dict]:
    tasks = [(k, s, b) for k in kinds for s in snrs]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            rows = list(pool.map(_sweep_task, tasks))
    else:
        rows = [_sweep_task(t) for t in tasks]
    return sorted(rows, key=lambda r: (r["scheme"], r["snr_db"]))


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return fmt(value)
    return str(value)


def sweep_csv(rows: list[dict]) -> str:
    columns = list(SWEEP_COLUMNS)
    if any(r["error"] for r in rows):
        columns.append("error")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_cell(r[c]) for c in columns])
    return buf.getvalue()


def _write(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _write_csv(path: str, text: str, record: dict) -> None:
    _write(path, text)
    # CSV has no room for metadata; the run record goes next to it
    meta = json.dumps(rounded({"run": record}), indent=2) + "\n"
    if path == "-":
        sys.stderr.write(meta)
    else:
        Path(path + ".run.json").write_text(meta, encoding="utf-8")


def cmd_sweep(args, config, started) -> int:
    _require(config, "snr_db")
    kinds = parse_schemes(config["schemes"])
    snrs = snr_grid(config["snr_db"])
    fmt_name = config["format"]
    if fmt_name not in ("csv", "json"):
        raise UsageError(f"--format must be csv or json, got {fmt_name!r}")
    jobs = args.jobs if args.jobs is not None else default_jobs()
    rows = sweep_rows(kinds, snrs, float(config["bw_ratio"]), jobs)
    record = run_record("sweep", config, started)
    out = config["output"]
    if fmt_name == "json":
        _write(out, json.dumps(rounded({"rows": rows, "run": record}), indent=2) + "\n")
    else:
        _write_csv(out, sweep_csv(rows), record)
    failed = [r for r in rows if r["error"]]
    for r in failed:
        print(f"divlab: sweep row {r['scheme']} @ {r['snr_db']} dB failed: {r['error']}", file=sys.stderr)
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_exponent(args, config, started) -> int:
    _require(config, "scheme")
    kind = SchemeKind.parse(config["scheme"])
    lo, hi = parse_range(config["snr_db"], with_step=False)
    if hi - lo < 20:
        raise UsageError(f"SNR range must span at least 20 dB, got {config['snr_db']}")
    jobs = args.jobs if args.jobs is not None else 1
    est = estimate_exponent(kind, float(config["bw_ratio"]), (lo, hi), int(config["points"]), jobs=jobs)
    emit_json({"result": est.to_dict(), "run": run_record("exponent", config, started)})
    return EXIT_OK


def cmd_mc(args, config, started) -> int:
    cfg = _scheme_config(config)
    mc = McConfig(int(config["samples"]), int(config["seed"]), int(config["batch"]))
    jobs = args.jobs if args.jobs is not None else default_jobs()
    est = simulate_scheme(cfg, mc=mc, jobs=jobs).to_dict()
    est["scheme"] = cfg.kind.value
    emit_json({"result": est, "run": run_record("mc", config, started, seed=mc.seed)})
    return EXIT_OK


def cmd_md_curve(args, config, started) -> int:
    _require(config, "rate_sum")
    points = md_tradeoff_curve(float(config["rate_sum"]), int(config["points"]))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["d_side", "d_central"])
    for p in points:
        writer.writerow([fmt(p.d_side), fmt(p.d_central)])
    _write_csv(config["output"], buf.getvalue(), run_record("md-curve", config, started))
    return EXIT_OK


def _scheme_flags(p: argparse.ArgumentParser, with_rate: bool = True) -> None:
    p.add_argument("--scheme", help="no-div, sel-ccdiv, mpx-ccdiv, opt-ccdiv, scdiv, scdiv-jd or rc")
    p.add_argument("--snr-db", type=float, dest="snr_db")
    if with_rate:
        p.add_argument("--rate", type=float, help="channel rate R, bits per channel use")
    p.add_argument("--bw-ratio", type=float, dest="bw_ratio", help="channel uses per source sample per channel")
    if with_rate:
        p.add_argument("--d-side", type=float, dest="d_side", help="side distortion (scdiv, scdiv-jd)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="divlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"divlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON file with option values (or a previous output to replay)")
        p.set_defaults(func=func)
        return p

    p = add("eval", cmd_eval, "expected distortion breakdown at one operating point")
    _scheme_flags(p)

    p = add("optimize", cmd_optimize, "optimize the rate (and side distortion) at one SNR")
    _scheme_flags(p, with_rate=False)
    p.add_argument("--r-lo", type=float, dest="r_lo")
    p.add_argument("--r-hi", type=float, dest="r_hi")
    p.add_argument("--side-grid", type=int, dest="side_grid")

    p = add("sweep", cmd_sweep, "optimized distortion versus SNR for several schemes")
    p.add_argument("--schemes", help="comma-separated scheme names or 'all'")
    p.add_argument("--snr-db", dest="snr_db", help="start:stop:step in dB, stop inclusive")
    p.add_argument("--bw-ratio", type=float, dest="bw_ratio")
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--output", help="output path, '-' for stdout")
    p.add_argument("--jobs", type=int)

    p = add("exponent", cmd_exponent, "estimate the high-SNR distortion exponent")
    p.add_argument("--scheme")
    p.add_argument("--snr-db", dest="snr_db", help="low:high in dB, at least 20 dB wide")
    p.add_argument("--bw-ratio", type=float, dest="bw_ratio")
    p.add_argument("--points", type=int)
    p.add_argument("--jobs", type=int)

    p = add("mc", cmd_mc, "Monte-Carlo estimate of the expected distortion")
    _scheme_flags(p)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--jobs", type=int)

    p = add("md-curve", cmd_md_curve, "symmetric multiple-description tradeoff curve as CSV")
    p.add_argument("--rate-sum", type=float, dest="rate_sum")
    p.add_argument("--points", type=int)
    p.add_argument("--output")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.perf_counter()
    try:
        config = resolve(args)
        return args.func(args, config, started)
    except (UsageError, DomainError) as exc:
        print(f"divlab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, EstimationError) as exc:
        print(f"divlab {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
