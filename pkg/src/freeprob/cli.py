"""Command-line front end: ``freeprob convolve | bounds | simulate | invert``.

Every command writes its CSV (17 significant digits, ``#``-prefixed schema
header) plus ``<out>.manifest.json`` recording what is needed to rerun it.
Exit codes: 0 success, 2 invalid input, 3 numerical breakdown.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (
    bounds_report,
    cohen_newman_lambda,
    cohen_newman_large_k,
    cyclic_vector_log_norm,
    growth_rate,
)
from .errors import NumericalBreakdown, ValidationError
from .freeconv import free_power, gram_base
from .measure import DEFAULT_ORDER, load_measure, mean_variance, moments, normalize_mean
from .rmtlab import MODES, NORM_METHODS, SimulationBreakdown, SimulationConfig, aggregate, growth_estimate, run_trials
from .transforms import (
    DEFAULT_EPS,
    _free_power_radius,
    extrapolated_density,
    free_power_evaluator,
    stieltjes_invert,
    support_edge,
)

EXIT_OK, EXIT_INVALID, EXIT_BREAKDOWN = 0, 2, 3
EDGE_WARN_FRACTION = 0.5


def fmt(x) -> str:
    """17 significant digits: enough to round-trip any double."""
    return format(float(x), ".17g")


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_csv(path: Path, columns: list[str], rows, meta: dict | None = None):
    lines = [f"# columns: {','.join(columns)}"]
    for key, value in (meta or {}).items():
        lines.append(f"# {key}: {value}")
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) if isinstance(v, float) else str(v) for v in row))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")


@dataclass
class RunManifest:
    command: str
    config: dict
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    seed: int | None = None
    version: str = __version__
    wall_time: float = 0.0
    status: str = "ok"

    def write(self, out: Path):
        payload = {
            "command": self.command,
            "argv": sys.argv[1:],
            "config": self.config,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "seed": self.seed,
            "version": self.version,
            "wall_time": self.wall_time,
            "status": self.status,
            "timestamp": datetime.now(timezone.utc).isoformat(),
        }
        path = out.with_name(out.name + ".manifest.json")
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return path


def parse_range(text: str) -> list[int]:
    """``"5"``, ``"1:100"`` (inclusive) or ``"1,2,4"``."""
    try:
        if ":" in text:
            lo, hi = (int(v) for v in text.split(":"))
            values = list(range(lo, hi + 1))
        else:
            values = [int(v) for v in text.split(",")]
    except ValueError:
        raise ValidationError(f"cannot parse n range {text!r}") from None
    if not values or min(values) < 1:
        raise ValidationError("n values must be positive integers")
    return values


def parse_grid(text: str) -> tuple[float, float, float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValidationError("grid must be lo:hi:step")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise ValidationError(f"cannot parse grid {text!r}") from None


def _note(msg: str):
    print(msg, file=sys.stderr)


# -- commands -----------------------------------------------------------------


def cmd_convolve(args) -> int:
    start = time.perf_counter()
    src = Path(args.measure)
    m = load_measure(src)
    if args.n < 1:
        raise ValidationError("n must be >= 1")
    if args.order < 2:
        raise ValidationError("order must be >= 2")
    if args.order > DEFAULT_ORDER:
        _note(f"warning: order {args.order} exceeds {DEFAULT_ORDER}; high moments may lose accuracy in double precision")
    ms = moments(m, args.order)
    result = free_power(ms, args.n, label=m.label)
    mean, var = mean_variance(ms)
    out_mean, out_var = mean_variance(result.moments)
    # variance of the n-fold power, rescaled from the mean-one case
    predicted = mean ** (2 * args.n) * args.n * var / mean**2
    out = Path(args.out)
    write_csv(
        out,
        ["k", "m_k"],
        [(k, float(v)) for k, v in enumerate(result.moments.values, start=1)],
        {"measure": m.label or src.name, "n": args.n, "order": args.order},
    )
    print(f"base mean {fmt(mean)} variance {fmt(var)}")
    print(f"power mean {fmt(out_mean)} variance {fmt(out_var)} (predicted {fmt(predicted)})")
    RunManifest(
        "convolve", {"n": args.n, "order": args.order}, {str(src): sha256(src)}, [str(out)],
        wall_time=time.perf_counter() - start,
    ).write(out)
    return EXIT_OK


def cmd_bounds(args) -> int:
    start = time.perf_counter()
    src = Path(args.measure)
    m = load_measure(src)
    ns = parse_range(args.n)
    scale = 1.0
    mean = float(np.dot(m.x, m.w))
    if args.normalize:
        m, scale = normalize_mean(m)
        _note(f"normalized by scale factor {fmt(scale)} (X = s R)")
    elif not args.gram and abs(mean - 1) > 1e-9:
        raise ValidationError(f"measure mean is {mean!r}, expected 1 (use --normalize)")
    if args.gram:
        if not m.is_positive:
            raise ValidationError("the X*X law must live on [0, inf)")
        if args.x_norm is None:
            raise ValidationError("--gram needs --x-norm")
        report = bounds_report(ns, gram=moments(m, 2), x_norm=args.x_norm)
    else:
        report = bounds_report(ns, measure=m, x_norm=args.x_norm)
    nan = float("nan")
    rows = [
        (
            r.n,
            nan if r.y_lower is None else float(r.y_lower),
            nan if r.y_upper is None else float(r.y_upper),
            float(r.pi_lower_log),
            float(r.pi_upper_log),
            float(r.cyclic_exact_log),
        )
        for r in report.records
    ]
    out = Path(args.out)
    write_csv(
        out,
        ["n", "y_lower", "y_upper", "pi_lower_log", "pi_upper_log", "cyclic_exact_log"],
        rows,
        {"growth_rate": fmt(report.growth_rate), "gamma": fmt(report.gamma), "scale": fmt(scale)},
    )
    for note in report.notes:
        _note(note)
    print(f"growth rate {fmt(report.growth_rate)}")
    config = {"n": args.n, "normalize": args.normalize, "gram": args.gram, "scale": scale, "x_norm": args.x_norm}
    RunManifest(
        "bounds", config, {str(src): sha256(src)}, [str(out)], wall_time=time.perf_counter() - start
    ).write(out)
    return EXIT_OK


def _predictions(cfg: SimulationConfig) -> dict:
    if cfg.mode == "ginibre":
        s2 = cfg.ginibre_s**2
        return {
            "cohen_newman_lambda": cohen_newman_lambda(cfg.dim, s2 / cfg.dim),
            "cohen_newman_large_k": cohen_newman_large_k(cfg.dim, s2 / cfg.dim),
            "log_s": math.log(cfg.ginibre_s),
        }
    m = cfg.measure
    gram = gram_base(m, 2)
    pred = {
        "growth_rate": growth_rate(gram),
        "cyclic_exact_log": [cyclic_vector_log_norm(gram.mean, n) for n in range(1, cfg.steps + 1)],
        "trace_gram_exact": [gram.mean**n for n in range(1, cfg.steps + 1)],
    }
    report = bounds_report(range(1, cfg.steps + 1), measure=m)
    pred["bounds"] = [
        {
            "n": r.n,
            "y_lower": r.y_lower,
            "y_upper": r.y_upper,
            "pi_lower_log": None if r.pi_lower_vacuous else r.pi_lower_log,
            "pi_upper_log": r.pi_upper_log,
        }
        for r in report.records
    ]
    pred["notes"] = report.notes
    return pred


def cmd_simulate(args) -> int:
    inputs = {}
    measure = None
    if args.ginibre is not None:
        if args.measure is not None:
            raise ValidationError("give either a measure file or --ginibre, not both")
        mode = "ginibre"
    else:
        if args.measure is None:
            raise ValidationError("simulate needs a measure file or --ginibre S")
        src = Path(args.measure)
        measure = load_measure(src)
        inputs[str(src)] = sha256(src)
        mode = args.mode
        if mode == "ginibre":
            raise ValidationError("ginibre mode takes --ginibre S instead of a measure")
    cfg = SimulationConfig(
        mode=mode,
        dim=args.dim,
        steps=args.steps,
        trials=args.trials,
        seed=args.seed,
        measure=measure,
        ginibre_s=args.ginibre,
        norm_method=args.norm_method,
    )
    out = Path(args.out)
    summary_path = out.with_suffix(".summary.json")
    manifest = RunManifest("simulate", cfg.echo(), inputs, [str(out), str(summary_path)], seed=args.seed)
    start = time.perf_counter()
    code = EXIT_OK
    try:
        trials = run_trials(cfg, args.threads)
    except SimulationBreakdown as exc:
        _note(f"numerical breakdown: {exc}; keeping {len(exc.partial)} finished trials")
        trials, code = exc.partial, EXIT_BREAKDOWN
        manifest.status = f"breakdown in trial {exc.failed_trial}"

    cyclic = mode == "cyclic"
    columns = ["trial", "n", "log_op_norm", "trace_gram"] + (["cyclic_norm"] if cyclic else [])
    rows = []
    for t in trials:
        for i, n in enumerate(t.n):
            row = [t.trial, int(n), float(t.log_op_norm[i]), float(t.trace_gram[i])]
            if cyclic:
                row.append(float(t.cyclic_norm[i]))
            rows.append(row)
    write_csv(out, columns, rows, {"mode": mode, "dim": cfg.dim, "seed": cfg.seed})

    payload = {"config": cfg.echo(), "seeds": [[cfg.seed, t.trial] for t in trials], "predictions": _predictions(cfg)}
    if trials:
        summary = aggregate(trials)
        payload["summary"] = summary.to_json()
        payload["growth_estimate"] = growth_estimate(summary)
        if mode == "symmetric" and cfg.steps >= 3:
            # exploration only: log-log slope of the mean norm of the symmetric product
            n = summary.n[1:].astype(float)
            payload["norm_exponent_fit"] = float(np.polyfit(np.log(n), summary.log_op_norm["mean"][1:], 1)[0])
        print(f"growth estimate {fmt(payload['growth_estimate'])}")
    pred = payload["predictions"]
    if mode == "ginibre":
        print(f"cohen-newman lambda {fmt(pred['cohen_newman_lambda'])} (large-k {fmt(pred['cohen_newman_large_k'])})")
    else:
        print(f"predicted growth rate {fmt(pred['growth_rate'])}")
    summary_path.write_text(json.dumps(payload, indent=2, allow_nan=True) + "\n")
    manifest.wall_time = time.perf_counter() - start
    manifest.write(out)
    return code


def cmd_invert(args) -> int:
    start = time.perf_counter()
    src = Path(args.measure)
    m = load_measure(src)
    if args.n < 1:
        raise ValidationError("n must be >= 1")
    if not args.eps > 0:
        raise ValidationError("eps must be positive")
    lo, hi, step = parse_grid(args.grid)
    g = free_power_evaluator(m, args.n)
    xs, dens = stieltjes_invert(g, (lo, hi, step), args.eps)
    if args.extrapolate:
        dens = extrapolated_density(g, xs, args.eps, levels=args.levels)
    out = Path(args.out)
    meta = {"n": args.n, "eps": fmt(args.eps), "extrapolated": args.extrapolate}
    edge = None
    try:
        edge = support_edge(g, args.eps, search=(lo, hi))
    except ValidationError as exc:
        _note(f"support edge not found: {exc}")
    if edge is not None:
        meta["support_edge"] = fmt(edge)
        print(f"support edge {fmt(edge)}")
        if m.is_positive and float(np.dot(m.x, m.w)) > 0:
            bound = _free_power_radius(m, args.n)
            meta["support_bound"] = fmt(bound)
            if edge >= EDGE_WARN_FRACTION * bound:
                _note(f"warning: support edge {fmt(edge)} approaches the bound {fmt(bound)}")
    write_csv(out, ["x", "density"], zip(xs.tolist(), dens.tolist()), meta)
    config = {"n": args.n, "grid": [lo, hi, step], "eps": args.eps, "extrapolate": args.extrapolate}
    RunManifest(
        "invert", config, {str(src): sha256(src)}, [str(out)], wall_time=time.perf_counter() - start
    ).write(out)
    return EXIT_OK


# -- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="freeprob", description="Free multiplicative convolution toolkit.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convolve", help="moments of the n-fold free multiplicative power")
    p.add_argument("measure")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--order", type=int, default=DEFAULT_ORDER)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_convolve)

    p = sub.add_parser("bounds", help="norm bounds per n")
    p.add_argument("measure")
    p.add_argument("--n", default="1:100", help="n range: 5, 1:100 or 1,2,4")
    p.add_argument("--normalize", action="store_true", help="rescale the measure to mean one first")
    p.add_argument("--gram", action="store_true", help="the measure is the law of X*X for a general X")
    p.add_argument("--x-norm", type=float, help="operator norm of X (with --gram)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("simulate", help="random-matrix Monte Carlo")
    p.add_argument("measure", nargs="?")
    p.add_argument("--ginibre", type=float, metavar="S", help="Gaussian factors with entry variance S^2/N")
    p.add_argument("--mode", choices=MODES, default="product")
    p.add_argument("--dim", type=int, default=500)
    p.add_argument("--steps", type=int, default=20)
    p.add_argument("--trials", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--norm-method", choices=NORM_METHODS, default="dense")
    p.add_argument("--threads", type=int, help="worker threads (default: FREEPROB_THREADS or CPU count)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("invert", help="density and support edge by Stieltjes inversion")
    p.add_argument("measure")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--grid", required=True, help="lo:hi:step")
    p.add_argument("--eps", type=float, default=DEFAULT_EPS)
    p.add_argument("--extrapolate", action="store_true", help="extrapolate the density to eps -> 0")
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_invert)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        _note(f"error: {exc}")
        return EXIT_INVALID
    except OSError as exc:
        _note(f"error: {exc}")
        return EXIT_INVALID
    except NumericalBreakdown as exc:
        _note(f"numerical breakdown: {exc}")
        return EXIT_BREAKDOWN


if __name__ == "__main__":
    raise SystemExit(main())
