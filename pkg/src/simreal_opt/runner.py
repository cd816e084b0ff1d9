"""Wiring between configuration, the gait plant, and the tuning loop.

Builds the evaluation callbacks for both fidelities, streams the run
history to disk as it happens (so aborted or failed runs keep their
partial record), and writes the per-run artifact set: history.jsonl,
summary.json, posterior_grid.csv, config.json, and optional rollout
traces.
"""

from __future__ import annotations

import csv
import json
from dataclasses import replace
from pathlib import Path

import numpy as np

from .acquisition import make_grid
from .bounds import Box
from .config import RunConfig, build_config, canonical_json, hashable_document
from .errors import ConfigError
from .gait_sim import (
    GaitParams,
    mid_gains,
    penalty,
    simulated_cost,
    surrogate_real_cost,
    write_trace_csv,
)
from .gp import posterior_joint
from .history import (
    read_history,
    record_to_json,
    summary_to_json,
    validate_history,
)
from .kernels import Fidelity
from .optimizer import (
    Budget,
    Problem,
    RunResult,
    evaluate_improvement,
    run_bo,
)

HISTORY_FILE = "history.jsonl"
SUMMARY_FILE = "summary.json"
POSTERIOR_FILE = "posterior_grid.csv"
CONFIG_FILE = "config.json"
TRACES_DIR = "traces"


class FallCounter:
    """Tally of rollouts that ended in a fall, split by fidelity."""

    def __init__(self):
        self.sim_rollouts = 0
        self.real_evaluations = 0

    def record(self, fidelity: Fidelity, report) -> None:
        if not report.fell:
            return
        if fidelity is Fidelity.REAL:
            self.real_evaluations += 1
        else:
            self.sim_rollouts += 1


def build_problem(cfg: RunConfig, collect=None, trace_writer=None) -> Problem:
    """Evaluation callbacks over the gait plant for both fidelities.

    ``collect(fidelity, report)`` sees every rollout report;
    ``trace_writer(eval_index, fidelity, rollout_index, report)`` is
    called per rollout when tracing.  The objective is the sagittal
    deviation cost, optionally adding the lateral plane.
    """
    want_beta = cfg.objective == "alpha_beta"
    eval_counter = [0]

    def hooks(fidelity):
        index = eval_counter[0]

        def on_report(k, report):
            if collect is not None:
                collect(fidelity, report)
            if trace_writer is not None:
                trace_writer(index, fidelity, k, report)

        return on_report

    def score(ja: float, jb: float) -> float:
        return ja + jb if want_beta else ja

    def sim_cost(x, seed) -> float:
        gains = GaitParams(float(x[0]), float(x[1]))
        ja, jb = simulated_cost(
            gains, cfg.sequence, cfg.plant,
            n_rollouts=cfg.loop.sim_repeats, seed=seed,
            penalty_cfg=cfg.penalty,
            on_report=hooks(Fidelity.SIMULATION),
        )
        eval_counter[0] += 1
        return score(ja, jb)

    def real_cost(x, seed) -> float:
        gains = GaitParams(float(x[0]), float(x[1]))
        ja, jb = surrogate_real_cost(
            gains, cfg.sequence, cfg.plant, seed=seed,
            penalty_cfg=cfg.penalty,
            on_report=hooks(Fidelity.REAL),
        )
        eval_counter[0] += 1
        return score(ja, jb)

    total_time = cfg.sequence.total_time
    return Problem(
        sim_cost=sim_cost,
        real_cost=real_cost,
        sim_duration_s=cfg.loop.sim_repeats * total_time,
        real_duration_s=total_time,
    )


def deviation_cost_fn(cfg: RunConfig):
    """Surrogate-real sagittal cost with the gain penalty removed,
    for before/after comparisons of the tracking behaviour itself."""

    def eval_fn(gains: GaitParams, seed: int) -> float:
        ja, _ = surrogate_real_cost(
            gains, cfg.sequence, cfg.plant, seed=seed,
            penalty_cfg=cfg.penalty,
        )
        return ja - penalty(gains, cfg.penalty)

    return eval_fn


def improvement_report(cfg: RunConfig, optimized: GaitParams):
    """Paired comparison of the incumbent against untuned default gains.

    The baseline sits mid-range of the characteristic gain magnitudes,
    not of the search box, so changing the optimizer's bounds does not
    move the goalposts.
    """
    return evaluate_improvement(
        deviation_cost_fn(cfg),
        mid_gains(),
        optimized,
        episodes=cfg.eval_episodes,
        seed=cfg.seed,
    )


def write_posterior_grid(path, result: RunResult, cfg: RunConfig) -> None:
    """Final surrogate posterior over the real-fidelity grid, in
    physical gains and raw cost units."""
    grid = make_grid(Box.unit(cfg.bounds.dim), cfg.acquisition.grid_size, Fidelity.REAL)
    mean, cov = posterior_joint(result.model, grid)
    std = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["p_gain", "d_gain", "mean", "std"])
        for point, m, s in zip(grid, mean, std):
            phys = cfg.bounds.from_unit(point.x)
            writer.writerow([
                repr(float(phys[0])),
                repr(float(phys[1])),
                repr(float(m * result.cost_scale + result.cost_offset)),
                repr(float(s * result.cost_scale)),
            ])


def _summary_payload(cfg: RunConfig, result: RunResult, falls: FallCounter) -> dict:
    history = result.history
    improvement = improvement_report(cfg, GaitParams(*history.incumbent_x))
    return {
        "budgets": {
            "max_real": result.budgets.max_real,
            "max_total": result.budgets.max_total,
            "used_real": result.budgets.used_real,
            "used_total": result.budgets.used_total,
        },
        "config_hash": history.config_hash,
        "elapsed_s_total": float(sum(r.elapsed_s for r in history.records)),
        "falls": {
            "real_evaluations": falls.real_evaluations,
            "sim_rollouts": falls.sim_rollouts,
        },
        "improvement": {
            "episodes": improvement.episodes,
            "mean_default": improvement.mean_default,
            "mean_optimized": improvement.mean_optimized,
            "reduction_fraction": improvement.reduction_fraction,
        },
        "incumbent_cost": history.incumbent_cost,
        "incumbent_x": [float(v) for v in history.incumbent_x],
        "seed": history.seed,
        "stop_reason": history.stop_reason,
    }


def write_config_json(path, cfg: RunConfig) -> None:
    document = hashable_document(cfg.data)
    Path(path).write_text(json.dumps(document, sort_keys=True, indent=2) + "\n")


def run_from_config(cfg: RunConfig, out_dir, *, traces: bool = False,
                    real_wrapper=None) -> tuple[RunResult, FallCounter]:
    """Execute one configured run and write its artifact directory.

    ``real_wrapper(real_cost) -> callable`` substitutes the real-plant
    callback (operator mode).  History records stream to disk as they
    are produced; on an exception the partial history file survives,
    without a summary line.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_config_json(out / CONFIG_FILE, cfg)

    falls = FallCounter()
    trace_writer = None
    if traces:
        trace_dir = out / TRACES_DIR
        trace_dir.mkdir(exist_ok=True)

        def trace_writer(index, fidelity, k, report):
            name = f"eval{index:04d}_{fidelity.value}_r{k}.csv"
            write_trace_csv(report, trace_dir / name)

    problem = build_problem(cfg, collect=falls.record, trace_writer=trace_writer)
    if real_wrapper is not None:
        problem = replace(problem, real_cost=real_wrapper(problem.real_cost))

    with open(out / HISTORY_FILE, "w") as fh:
        def on_record(record):
            fh.write(record_to_json(record) + "\n")
            fh.flush()

        result = run_bo(
            problem,
            cfg.bounds,
            Budget(max_real=cfg.max_real, max_total=cfg.max_total),
            cfg.gp,
            cfg.acquisition,
            cfg.seed,
            loop=cfg.loop,
            on_record=on_record,
            config_hash=cfg.config_hash,
        )
        fh.write(summary_to_json(result.history) + "\n")

    write_posterior_grid(out / POSTERIOR_FILE, result, cfg)
    payload = _summary_payload(cfg, result, falls)
    (out / SUMMARY_FILE).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return result, falls


def validate_run(run_dir) -> list[str]:
    """Re-check a run directory: config hash, record invariants, and
    bit-reproducibility of the logged incumbent."""
    run_dir = Path(run_dir)
    config_path = run_dir / CONFIG_FILE
    if not config_path.is_file():
        raise ConfigError("missing-file", "", f"no {CONFIG_FILE} in {run_dir}")
    history_path = run_dir / HISTORY_FILE
    if not history_path.is_file():
        raise ConfigError("missing-file", "", f"no {HISTORY_FILE} in {run_dir}")
    try:
        raw = json.loads(config_path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("malformed", "", f"{config_path}: {exc}") from exc
    cfg = build_config(raw)

    records, summary = read_history(history_path)
    problems = validate_history(
        records, summary,
        bounds=cfg.bounds,
        gp_settings=cfg.gp,
        acquisition=cfg.acquisition,
        max_real=cfg.max_real,
        max_total=cfg.max_total,
        sim_repeats=cfg.loop.sim_repeats,
    )
    if summary is not None:
        if summary.get("config_hash") != cfg.config_hash:
            problems.append(
                f"summary config_hash {summary.get('config_hash')!r} does not match "
                f"the archived configuration ({cfg.config_hash})"
            )
        summary_path = run_dir / SUMMARY_FILE
        if summary_path.is_file():
            report = json.loads(summary_path.read_text())
            dx = max(
                (abs(a - b) for a, b in zip(report["incumbent_x"], summary["incumbent_x"])),
                default=0.0,
            )
            if dx > 1e-9 or abs(report["incumbent_cost"] - summary["incumbent_cost"]) > 1e-9:
                problems.append("summary.json incumbent disagrees with history summary line")
    return problems
