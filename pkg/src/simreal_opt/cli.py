"""Command-line entry point.

Subcommands: optimize (fully automatic run), operator (real-plant
costs typed in by a human), benchmark (tuning vs. random search vs.
grid oracle), push-test (disturbance ladder for a gain set), and
validate (replay a run directory's invariants).

Exit codes are a stable contract: 0 success, 2 configuration error,
3 numerical or validation failure, 130 operator abort.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from .benchmark import run_benchmark, write_benchmark_csv
from .config import RunConfig, parse_config
from .errors import ConfigError, NumericalError, OperatorAbort, OperatorSkip
from .gait_sim import GaitParams, mid_gains, rollout
from .kernels import Fidelity
from .runner import SUMMARY_FILE, run_from_config, validate_run
from .seeds import STREAM_PUSH, substream

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_ABORT = 130

PROMPT_ATTEMPTS = 3  # invalid entries tolerated before a forced skip


@dataclass(frozen=True)
class OperatorPrompt:
    """One real-plant trial request shown to the human operator."""

    gains: GaitParams
    text: str


def operator_prompt(gains: GaitParams) -> OperatorPrompt:
    text = (
        f"try gains p_gain={gains.p_gain:.6g} u/rad, "
        f"d_gain={gains.d_gain:.6g} u*s/rad on the robot.\n"
        "enter the measured cost, 'skip' for a different candidate, "
        "or 'abort' to stop: "
    )
    return OperatorPrompt(gains=gains, text=text)


def operator_real_cost(answer_fn, echo):
    """Wrap the real-fidelity callback with a typed-cost prompt loop.

    ``answer_fn(prompt) -> str | None`` supplies the operator's entry
    (None meaning end of input).  The surrogate callback is discarded:
    in operator mode the human measurement IS the observation.
    """

    def wrapper(_surrogate):
        def real_cost(x, seed) -> float:
            prompt = operator_prompt(GaitParams(float(x[0]), float(x[1])))
            for _ in range(PROMPT_ATTEMPTS):
                answer = answer_fn(prompt)
                if answer is None:
                    raise OperatorAbort("end of operator input")
                token = str(answer).strip().lower()
                if token == "skip":
                    raise OperatorSkip("operator skipped the candidate")
                if token == "abort":
                    raise OperatorAbort("operator aborted the run")
                try:
                    value = float(token)
                except ValueError:
                    echo(f"not a number: {answer!r} (enter a cost, 'skip', or 'abort')")
                    continue
                if math.isfinite(value):
                    return value
                echo("cost must be finite")
            echo(f"{PROMPT_ATTEMPTS} invalid entries, skipping this candidate")
            raise OperatorSkip("too many invalid entries")

        return real_cost

    return wrapper


def _terminal_answer(prompt: OperatorPrompt):
    try:
        return input(prompt.text)
    except EOFError:
        return None


def resolve_out_dir(cfg: RunConfig) -> Path:
    if cfg.out_dir:
        return Path(cfg.out_dir)
    return Path(f"{time.strftime('%Y%m%d-%H%M%S')}-{cfg.seed}")


def _load_config(args) -> RunConfig:
    return parse_config(
        getattr(args, "config", None),
        seed=getattr(args, "seed", None),
        max_real=getattr(args, "max_real", None),
        out_dir=getattr(args, "out", None),
    )


def _print_run_outcome(result, falls, out: Path, echo) -> None:
    history = result.history
    gains = ", ".join(f"{v:.6g}" for v in history.incumbent_x)
    echo(f"incumbent gains: ({gains})  predicted cost {history.incumbent_cost:.6g}")
    echo(
        f"evaluations: {result.budgets.used_real} real / "
        f"{result.budgets.used_total} total  (stop: {history.stop_reason})"
    )
    echo(
        f"falls: {falls.real_evaluations} real evaluations, "
        f"{falls.sim_rollouts} simulated rollouts"
    )
    echo(f"artifacts in {out}")


def cmd_optimize(args, echo=print) -> int:
    cfg = _load_config(args)
    out = resolve_out_dir(cfg)
    result, falls = run_from_config(cfg, out, traces=args.traces)
    _print_run_outcome(result, falls, out, echo)
    return EXIT_OK


def cmd_operator(args, answer_fn=None, echo=print) -> int:
    cfg = _load_config(args)
    out = resolve_out_dir(cfg)
    result, falls = run_from_config(
        cfg, out,
        traces=getattr(args, "traces", False),
        real_wrapper=operator_real_cost(answer_fn or _terminal_answer, echo),
    )
    _print_run_outcome(result, falls, out, echo)
    return EXIT_ABORT if result.history.stop_reason == "aborted" else EXIT_OK


def cmd_benchmark(args, echo=print) -> int:
    cfg = _load_config(args)
    out = resolve_out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    rows, failures = run_benchmark(cfg, progress=lambda m: print(m, file=sys.stderr))
    write_benchmark_csv(out / "benchmark.csv", rows)
    echo(f"{'method':<8} {'seed':>4} {'cost':>12} {'reduction':>10} "
         f"{'falls':>5} {'near-oracle':>11}")
    for row in rows:
        reduction = row["reduction_fraction"]
        reduction_text = "" if reduction == "" else f"{reduction:.3f}"
        echo(
            f"{row['method']:<8} {str(row['seed']):>4} {row['cost']:>12.6g} "
            f"{reduction_text:>10} {row['falls']:>5} {row['within_5pct_of_oracle']:>11}"
        )
    echo(f"benchmark table in {out / 'benchmark.csv'}")
    for failure in failures:
        echo(f"numerical failure: {failure}")
    return EXIT_NUMERICAL if failures else EXIT_OK


def _optimized_gains(cfg: RunConfig, out: Path) -> GaitParams | None:
    if cfg.push_gains is not None:
        return cfg.push_gains
    summary_path = out / SUMMARY_FILE
    if summary_path.is_file():
        incumbent = json.loads(summary_path.read_text())["incumbent_x"]
        return GaitParams(float(incumbent[0]), float(incumbent[1]))
    return None


def push_ladder(cfg: RunConfig, gains: GaitParams) -> list[dict]:
    """Paired front/back pushes at every ladder distance.

    The same derived seed serves both push directions of a distance, so
    direction comparisons and gain-set comparisons are paired.
    """
    rows = []
    for i, d in enumerate(cfg.push_d_values):
        seed = substream(cfg.seed, STREAM_PUSH, i)
        outcome = {}
        for label, sign in (("forward", 1.0), ("backward", -1.0)):
            report = rollout(
                gains, cfg.sequence, cfg.plant,
                pushes=((cfg.push_time, sign * d),),
                fidelity=Fidelity.REAL, seed=seed,
                penalty_cfg=cfg.penalty,
            )
            outcome[label] = report.fell
        rows.append({"d": d, **outcome, "withstood": not (outcome["forward"] or outcome["backward"])})
    return rows


def max_withstood(rows) -> float | None:
    held = [row["d"] for row in rows if row["withstood"]]
    return max(held) if held else None


def cmd_push_test(args, echo=print) -> int:
    cfg = _load_config(args)
    out = resolve_out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)

    gain_sets = [("default", mid_gains())]
    optimized = _optimized_gains(cfg, out)
    if optimized is not None:
        gain_sets.append(("optimized", optimized))

    results = {}
    with open(out / "push_test.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["gain_set", "p_gain", "d_gain", "push_d",
                         "fell_forward", "fell_backward", "withstood"])
        for name, gains in gain_sets:
            rows = push_ladder(cfg, gains)
            results[name] = rows
            for row in rows:
                writer.writerow([
                    name, repr(gains.p_gain), repr(gains.d_gain), repr(float(row["d"])),
                    int(row["forward"]), int(row["backward"]), int(row["withstood"]),
                ])

    for name, gains in gain_sets:
        echo(f"{name} gains ({gains.p_gain:.6g}, {gains.d_gain:.6g}), "
             f"push at t={cfg.push_time:g}s:")
        for row in results[name]:
            fwd = "fell" if row["forward"] else "held"
            back = "fell" if row["backward"] else "held"
            echo(f"  d={row['d']:.2f}  forward {fwd:<4}  backward {back:<4}")
        best = max_withstood(results[name])
        echo(f"  max withstood d: {'none' if best is None else format(best, '.2f')}")
    echo(f"details in {out / 'push_test.csv'}")
    return EXIT_OK


def cmd_validate(args, echo=print) -> int:
    problems = validate_run(args.out)
    if problems:
        for problem in problems:
            echo(f"FAIL: {problem}")
        return EXIT_NUMERICAL
    echo("history validated: budgets, records, and incumbent all check out")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simreal-opt",
        description="Sample-efficient gait-gain tuning across simulation "
                    "and real-plant evaluations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, traces=False):
        sp.add_argument("--config", help="JSON config path (omit for defaults)")
        sp.add_argument("--seed", type=int, help="override the master seed")
        sp.add_argument("--max-real", type=int, dest="max_real",
                        help="override the real-evaluation budget")
        sp.add_argument("--out", help="output directory (default <timestamp>-<seed>)")
        if traces:
            sp.add_argument("--traces", action="store_true",
                            help="write per-rollout trace CSVs")

    p = sub.add_parser("optimize", help="run the automatic tuning loop")
    common(p, traces=True)
    p.set_defaults(handler=cmd_optimize)

    p = sub.add_parser("operator", help="tuning loop with human-measured real costs")
    common(p, traces=True)
    p.set_defaults(handler=cmd_operator)

    p = sub.add_parser("benchmark", help="tuning vs random search vs grid oracle")
    common(p)
    p.set_defaults(handler=cmd_benchmark)

    p = sub.add_parser("push-test", help="disturbance ladder for default and tuned gains")
    common(p)
    p.set_defaults(handler=cmd_push_test)

    p = sub.add_parser("validate", help="re-check a run directory's history invariants")
    p.add_argument("--out", required=True, help="run directory to validate")
    p.set_defaults(handler=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        location = f" at {exc.key_path}" if exc.key_path else ""
        print(f"config error [{exc.code}]{location}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OperatorAbort:
        return EXIT_ABORT
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
