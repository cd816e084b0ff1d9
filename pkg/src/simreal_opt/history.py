"""Line-delimited run history: serialization and replay validation.

Each evaluation is one JSON object per line; the file ends with a
summary object carrying the incumbent and the config hash.  The
validator re-derives every budget counter from scratch and recomputes
the incumbent from the logged observations, so a tampered or corrupted
history fails loudly.
"""

from __future__ import annotations

import json
from pathlib import Path

from .bounds import Box
from .errors import InvalidArgumentError
from .gp import Observation
from .kernels import Fidelity, aug
from .optimizer import GPSettings, IterationRecord, RunHistory, final_incumbent

RECORD_FIELDS = ("iter", "fidelity", "x", "cost", "entropy_before",
                 "entropy_after", "real_used", "total_used", "elapsed_s")
SUMMARY_FIELDS = ("incumbent_x", "incumbent_cost", "seed", "config_hash")


def record_to_json(record: IterationRecord) -> str:
    payload = {
        "iter": record.index,
        "fidelity": record.a.delta.value,
        "x": [float(v) for v in record.a.x],
        "cost": float(record.cost),
        "entropy_before": None if record.entropy_before is None else float(record.entropy_before),
        "entropy_after": None if record.entropy_after is None else float(record.entropy_after),
        "real_used": record.real_used,
        "total_used": record.total_used,
        "elapsed_s": float(record.elapsed_s),
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def summary_to_json(history: RunHistory) -> str:
    payload = {
        "incumbent_x": [float(v) for v in history.incumbent_x],
        "incumbent_cost": float(history.incumbent_cost),
        "seed": history.seed,
        "config_hash": history.config_hash,
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def write_history(path, history: RunHistory) -> None:
    lines = [record_to_json(r) for r in history.records]
    lines.append(summary_to_json(history))
    Path(path).write_text("\n".join(lines) + "\n")


def read_history(path):
    """Returns (records, summary) as plain dicts; summary may be None
    for a partial file that was cut before the final line."""
    records, summary = [], None
    text = Path(path).read_text()
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InvalidArgumentError(f"{path}:{line_no}: not valid JSON: {exc}") from exc
        if "incumbent_x" in obj:
            summary = obj
        else:
            records.append(obj)
    return records, summary


def validate_history(records, summary, *, bounds: Box, gp_settings: GPSettings,
                     acquisition, max_real: int, max_total: int,
                     sim_repeats: int) -> list[str]:
    """Re-check every record-level invariant and replay the incumbent.

    Returns a list of human-readable problems; empty means the history
    is internally consistent and the incumbent is reproducible.
    """
    problems: list[str] = []
    real_used = 0
    total_used = 0
    prev_index = -1
    observations: list[Observation] = []
    for i, rec in enumerate(records):
        where = f"record {i}"
        missing = [f for f in RECORD_FIELDS if f not in rec]
        if missing:
            problems.append(f"{where}: missing fields {missing}")
            continue
        if rec["iter"] <= prev_index:
            problems.append(f"{where}: iter {rec['iter']} not increasing")
        prev_index = rec["iter"]
        if rec["fidelity"] not in ("sim", "real"):
            problems.append(f"{where}: unknown fidelity {rec['fidelity']!r}")
            continue
        fidelity = Fidelity(rec["fidelity"])
        total_used += 1
        if fidelity is Fidelity.REAL:
            real_used += 1
        if rec["real_used"] != real_used or rec["total_used"] != total_used:
            problems.append(
                f"{where}: budget counters ({rec['real_used']}, {rec['total_used']}) "
                f"disagree with replay ({real_used}, {total_used})"
            )
        if not bounds.contains(rec["x"], tol=1e-9):
            problems.append(f"{where}: x {rec['x']} outside bounds")
        unit = tuple(float(v) for v in bounds.to_unit(rec["x"]))
        repeats = sim_repeats if fidelity is Fidelity.SIMULATION else 1
        observations.append(Observation(aug(unit, fidelity), float(rec["cost"]), repeats=repeats))
    if real_used > max_real:
        problems.append(f"{real_used} real evaluations exceed max_real={max_real}")
    if total_used > max_total:
        problems.append(f"{total_used} total evaluations exceed max_total={max_total}")

    if summary is None:
        problems.append("missing summary line")
        return problems
    missing = [f for f in SUMMARY_FIELDS if f not in summary]
    if missing:
        problems.append(f"summary: missing fields {missing}")
        return problems
    if not bounds.contains(summary["incumbent_x"], tol=1e-9):
        problems.append(f"summary: incumbent {summary['incumbent_x']} outside bounds")
    if not observations:
        problems.append("no records to recompute the incumbent from")
        return problems

    inc_x, inc_cost, *_ = final_incumbent(
        observations, bounds, gp_settings, acquisition,
        int(summary["seed"]), total_used,
    )
    dx = max(abs(a - b) for a, b in zip(inc_x, summary["incumbent_x"]))
    dc = abs(inc_cost - float(summary["incumbent_cost"]))
    if dx > 1e-9 or dc > 1e-9:
        problems.append(
            f"incumbent replay mismatch: logged ({summary['incumbent_x']}, "
            f"{summary['incumbent_cost']}), recomputed ({list(inc_x)}, {inc_cost})"
        )
    return problems
