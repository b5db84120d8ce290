"""Command line entry point: run one scenario (or several built-in ones) and write CSV."""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .horizon import solve_horizon
from .measures import max_tail_probability, measure_series, relative_error_series, sup_error_series
from .model import ScenarioConfig
from .scenario import (
    LOAD_BANDS,
    BUILTIN_SIZES,
    InfeasibleScenarioError,
    ScenarioError,
    builtin_scenario,
    load_scenario,
)

log = logging.getLogger("ictmc")

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_INFEASIBLE = 2
EXIT_NUMERICAL = 3

COLUMNS = [
    "t_minutes",
    "expected_state",
    "p_immediate",
    "p_tail",
    "mvm_count",
    "steady_detected",
    "error_consumed_cumulative",
]
REFERENCE_COLUMNS = ["sup_error_vs_reference", "es_relative_error_vs_reference"]
REFERENCE_EPSILON = 1e-13


def _fmt(x) -> str:
    # repr() never depends on the locale
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def parse_size(text: str):
    """``150`` (a known label) or ``1000+300`` (servers + queue)."""
    if "+" in text:
        s, q = text.split("+", 1)
        return int(s), int(q)
    label = int(text)
    if label not in BUILTIN_SIZES:
        raise argparse.ArgumentTypeError(
            f"unknown size {text!r}; use one of {sorted(BUILTIN_SIZES)} or SERVERS+QUEUE"
        )
    return label


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ictmc",
        description="Transient solution of a call-center queue with balking and abandonment.",
    )
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="scenario file (JSON or key: value lines)")
    src.add_argument("--builtin", type=parse_size, nargs="+", metavar="SIZE",
                     help="built-in 24 h experiment, e.g. 150 or 1000+300")
    ap.add_argument("--band", choices=sorted(LOAD_BANDS), default="wide")
    ap.add_argument("--gamma", type=float, default=0.97)
    ap.add_argument("--patience", type=float, default=4.0, help="mean patience in minutes")
    ap.add_argument("--mu", type=float, default=0.2, help="service rate per minute")
    ap.add_argument("--eps-step", type=float, default=1e-7)
    ap.add_argument("--eps-total", type=float, default=None,
                    help="global error budget (default 3e-2, or the truncation floor without detection)")
    ap.add_argument("--no-detection", action="store_true")
    ap.add_argument("--budget", choices=["restart", "additive"], default=None,
                    help="how steady-state charges enter the error budget")
    ap.add_argument("--tail-bound", choices=["observed", "rigorous"], default=None,
                    help="bound on not yet computed iterates in steady-state detection")
    ap.add_argument("--integral-average", action="store_true",
                    help="average the sinusoid over each step instead of taking the midpoint")
    ap.add_argument("--out", type=Path, default=Path("series.csv"))
    ap.add_argument("--reference", action="store_true",
                    help=f"also run with eps_step={REFERENCE_EPSILON:g}, no detection, and add error columns")
    ap.add_argument("--emit-distributions", type=Path, metavar="DIR",
                    help="write the full distribution of every step into DIR")
    ap.add_argument("--jobs", type=int, default=1, help="parallel workers for several --builtin sizes")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _builtin_config(size, args) -> ScenarioConfig:
    eps_total = args.eps_total
    if eps_total is None:
        eps_total = 3e-2 if not args.no_detection else 288 * args.eps_step
    floor = 288 * args.eps_step
    if eps_total < floor:
        log.warning("epsilon_total %g is below the truncation floor %g; using the floor", eps_total, floor)
        eps_total = floor
    return builtin_scenario(
        size,
        args.band,
        gamma=args.gamma,
        patience_mean=args.patience,
        epsilon_step=args.eps_step,
        epsilon_total=eps_total,
        detection=not args.no_detection,
        mu=args.mu,
        averaging="integral" if args.integral_average else "midpoint",
        budget_policy=args.budget or "restart",
        tail_bound=args.tail_bound or "observed",
    )


def write_csv(path: Path, config, result, reference=None) -> None:
    series = measure_series(config, result)
    cols = list(COLUMNS)
    extra = None
    if reference is not None:
        cols += REFERENCE_COLUMNS
        sup = sup_error_series(result, reference)
        rel = relative_error_series(series, measure_series(config, reference))
        extra = list(zip(sup, rel))
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for j in range(len(series)):
            row = [
                series.times[j],
                series.expected_state[j],
                series.p_immediate[j],
                series.p_tail[j],
                series.mvm_per_step[j],
                series.steady_flags[j],
                result.consumed_series[j],
            ]
            if extra is not None:
                row += extra[j]
            w.writerow([_fmt(v) for v in row])


def write_distributions(directory: Path, config, result) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    width = len(str(len(result.distributions)))
    for j, p in enumerate(result.distributions, start=1):
        with open(directory / f"step_{j:0{width}d}.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["state", "probability"])
            for k, v in enumerate(p.values):
                w.writerow([k, repr(float(v))])


def run_one(config: ScenarioConfig, out: Path, reference: bool = False, emit_dir=None) -> str:
    """Solve, write outputs and return the summary line."""
    t0 = time.perf_counter()
    result = solve_horizon(config)
    wall = time.perf_counter() - t0
    ref = None
    if reference:
        ref = solve_horizon(replace(
            config,
            epsilon_step=REFERENCE_EPSILON,
            epsilon_total=config.n_steps * REFERENCE_EPSILON,
            detection_enabled=False,
        ))
    series_tail = max_tail_probability(result.distributions)
    if not np.isfinite(series_tail):
        raise FloatingPointError("non-finite probabilities in the result")
    write_csv(out, config, result, ref)
    if emit_dir is not None:
        write_distributions(Path(emit_dir), config, result)
    return (
        f"{out}: total_mvm={result.total_mvm} max_p_tail={series_tail:.3e} "
        f"consumed={result.ledger_final.consumed:.3e} wall={wall:.2f}s"
    )


def _out_for(out: Path, size, many: bool) -> Path:
    if not many:
        return out
    tag = f"{size[0]}+{size[1]}" if isinstance(size, tuple) else str(size)
    return out.with_name(f"{out.stem}_{tag}{out.suffix}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.config is not None:
            config = load_scenario(args.config, on_warning=lambda msg: log.warning("%s", msg))
            if args.budget:
                config = replace(config, budget_policy=args.budget)
            if args.tail_bound:
                config = replace(config, tail_bound=args.tail_bound)
            jobs = [(config, args.out, args.emit_distributions)]
        else:
            many = len(args.builtin) > 1
            jobs = []
            for size in args.builtin:
                emit = args.emit_distributions
                if emit is not None and many:
                    emit = _out_for(Path(emit), size, True)
                jobs.append((_builtin_config(size, args), _out_for(args.out, size, many), emit))
    except InfeasibleScenarioError as exc:
        print(f"error: infeasible scenario: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ScenarioError as exc:
        print(f"error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValueError as exc:
        print(f"error: infeasible scenario: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE

    try:
        if args.jobs > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=min(args.jobs, os.cpu_count() or 1)) as pool:
                futures = [pool.submit(run_one, c, o, args.reference, e) for c, o, e in jobs]
                lines = [f.result() for f in futures]
        else:
            lines = [run_one(c, o, args.reference, e) for c, o, e in jobs]
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for line in lines:
        print(line)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
