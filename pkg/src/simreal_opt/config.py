"""Strict JSON run configuration.

An empty document means "all defaults".  Every key a user supplies must
exist in the default schema with a compatible type and an in-range
value; anything else raises ConfigError with a distinct code and the
dotted path of the offending key, so typos in experiment configs fail
loudly instead of silently running the wrong study.

The effective configuration (defaults, then file, then CLI overrides)
is hashed canonically; the hash is stamped into run summaries so a
history file can be matched to the exact configuration that made it.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .acquisition import AcquisitionConfig
from .bounds import Box
from .errors import ConfigError, InvalidArgumentError
from .gait_sim import (
    CommandSequence,
    GaitParams,
    PenaltyConfig,
    PlantConfig,
)
from .gp import HyperBounds, NoiseConfig
from .kernels import CompositeKernelConfig, RQConfig
from .optimizer import GPSettings, LoopSettings

_COMMANDS = ("halt", "forward", "backward", "sideways_left", "sideways_right")

DEFAULTS: dict = {
    "seed": 1,
    "out_dir": None,
    "bounds": {"lower": [2.0, 0.0], "upper": [4.2, 0.3]},
    "plant": {
        "gravity_coeff": 9.0,
        "control_coeff": 6.0,
        "damping": 0.8,
        "excitation_amp": 0.35,
        "step_frequency": 1.4,
        "dt": 0.01,
        "fall_threshold": 0.7,
        "real_gap_scale": 0.15,
        "real_delay_steps": 2,
        "real_noise_std": 0.02,
    },
    "sequence": {
        "segments": [
            ["halt", 2.0],
            ["forward", 5.0],
            ["backward", 5.0],
            ["sideways_left", 4.0],
            ["sideways_right", 4.0],
        ]
    },
    "penalty": {"magnitude_scale": 0.5, "steepness": 4.0, "center": 1.5},
    "gp": {
        "kernel": {
            "sim": {"signal_variance": 1.0, "length_scales": [0.3, 0.3], "alpha": 2.0},
            "err": {"signal_variance": 0.3, "length_scales": [0.5, 0.5], "alpha": 2.0},
            "real_real_gain": 1.0,
        },
        "noise": {
            "sim_noise_variance": 1e-6,
            "real_noise_variance": 4e-4,
            "jitter": 1e-9,
        },
        "hyper_bounds": {
            "signal_variance": [1e-3, 16.0],
            "length_scale": [0.03, 3.0],
            "alpha": [0.05, 25.0],
        },
        "fit_hyperparameters": True,
        "restarts": 4,
        "hyper_max_iters": 120,
    },
    "acquisition": {
        "grid_size": 200,
        "mc_samples": 200,
        "fantasy_draws": 10,
        "cost_sim": 1.0,
        "cost_real": 10.0,
        "seed_stream": 0,
    },
    "budgets": {"max_real": 15, "max_total": 161},
    "optimizer": {
        "init_design": 8,
        "sim_repeats": 4,
        "objective": "alpha",
        "stall_window": 10,
        "stall_tol": 1e-3,
        "refit_every": 1,
        "eval_episodes": 5,
    },
    "push_test": {
        "d_values": [0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4],
        "push_time": 5.0,
        "gains": None,
    },
    "benchmark": {
        "seeds": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
        "oracle_resolution": 21,
        "score_episodes": 3,
    },
}


@dataclass
class RunConfig:
    """Validated configuration with constructed component objects."""

    data: dict
    config_hash: str
    seed: int
    out_dir: str | None
    bounds: Box
    plant: PlantConfig
    sequence: CommandSequence
    penalty: PenaltyConfig
    gp: GPSettings
    acquisition: AcquisitionConfig
    max_real: int
    max_total: int
    loop: LoopSettings
    objective: str
    eval_episodes: int
    push_d_values: tuple[float, ...]
    push_time: float
    push_gains: GaitParams | None
    bench_seeds: tuple[int, ...]
    oracle_resolution: int
    score_episodes: int


def _schema_error(path: str, message: str) -> ConfigError:
    return ConfigError("schema", path, f"{path}: {message}")


def _range_error(path: str, message: str) -> ConfigError:
    return ConfigError("range", path, f"{path}: {message}")


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _merge(defaults, user, path: str):
    """Overlay ``user`` on ``defaults``, rejecting unknown keys and
    type mismatches; returns a fresh structure."""
    if isinstance(defaults, dict):
        if not isinstance(user, dict):
            raise _schema_error(path or "<root>", f"expected an object, got {type(user).__name__}")
        unknown = set(user) - set(defaults)
        if unknown:
            key = sorted(unknown)[0]
            raise _schema_error(f"{path}.{key}" if path else key, "unknown key")
        merged = {}
        for key, dval in defaults.items():
            sub = f"{path}.{key}" if path else key
            merged[key] = _merge(dval, user[key], sub) if key in user else copy.deepcopy(dval)
        return merged
    # leaf: type-check against the default's shape
    if defaults is None or user is None:
        return copy.deepcopy(user)
    if isinstance(defaults, bool):
        if not isinstance(user, bool):
            raise _schema_error(path, f"expected a boolean, got {type(user).__name__}")
        return user
    if isinstance(defaults, int):
        if not isinstance(user, int) or isinstance(user, bool):
            raise _schema_error(path, f"expected an integer, got {type(user).__name__}")
        return user
    if isinstance(defaults, float):
        if not _is_number(user):
            raise _schema_error(path, f"expected a number, got {type(user).__name__}")
        return float(user)
    if isinstance(defaults, str):
        if not isinstance(user, str):
            raise _schema_error(path, f"expected a string, got {type(user).__name__}")
        return user
    if isinstance(defaults, list):
        if not isinstance(user, list):
            raise _schema_error(path, f"expected an array, got {type(user).__name__}")
        return copy.deepcopy(user)
    raise _schema_error(path, f"unsupported schema leaf {type(defaults).__name__}")


def _require_numbers(values, path: str, length: int | None = None):
    if not isinstance(values, list) or not all(_is_number(v) for v in values):
        raise _schema_error(path, "expected an array of numbers")
    if length is not None and len(values) != length:
        raise _range_error(path, f"expected exactly {length} entries, got {len(values)}")
    return [float(v) for v in values]


def _positive(data, path: str, *keys, strict=True):
    node = data
    for key in path.split("."):
        node = node[key]
    for key in keys:
        value = node[key]
        if strict and not value > 0:
            raise _range_error(f"{path}.{key}", f"must be > 0, got {value}")
        if not strict and value < 0:
            raise _range_error(f"{path}.{key}", f"must be >= 0, got {value}")


def _validate_and_build(data: dict, config_hash: str) -> RunConfig:
    seed = data["seed"]
    if not 0 <= seed < 2**64:
        raise _range_error("seed", f"must be a non-negative 64-bit integer, got {seed}")
    out_dir = data["out_dir"]
    if out_dir is not None and not isinstance(out_dir, str):
        raise _schema_error("out_dir", f"expected a string or null, got {type(out_dir).__name__}")

    lower = _require_numbers(data["bounds"]["lower"], "bounds.lower", 2)
    upper = _require_numbers(data["bounds"]["upper"], "bounds.upper", 2)
    if not all(hi > lo for lo, hi in zip(lower, upper)):
        raise _range_error("bounds", f"upper must exceed lower, got {lower} vs {upper}")
    bounds = Box(tuple(lower), tuple(upper))

    _positive(data, "plant", "gravity_coeff", "control_coeff", "damping",
              "excitation_amp", strict=False)
    _positive(data, "plant", "step_frequency", "dt", "fall_threshold")
    _positive(data, "plant", "real_gap_scale", "real_noise_std", strict=False)
    if data["plant"]["real_delay_steps"] < 0:
        raise _range_error("plant.real_delay_steps", "must be >= 0")
    plant = PlantConfig(**data["plant"])

    segments = data["sequence"]["segments"]
    if not isinstance(segments, list) or not segments:
        raise _range_error("sequence.segments", "expected a non-empty array")
    parsed = []
    for i, seg in enumerate(segments):
        spath = f"sequence.segments[{i}]"
        if not (isinstance(seg, list) and len(seg) == 2 and isinstance(seg[0], str)
                and _is_number(seg[1])):
            raise _schema_error(spath, "expected [command, duration]")
        if seg[0] not in _COMMANDS:
            raise _range_error(spath, f"unknown command {seg[0]!r}")
        if seg[1] <= 0:
            raise _range_error(spath, f"duration must be > 0, got {seg[1]}")
        parsed.append((seg[0], float(seg[1])))
    sequence = CommandSequence(tuple(parsed))

    _positive(data, "penalty", "steepness", "center")
    _positive(data, "penalty", "magnitude_scale", strict=False)
    penalty = PenaltyConfig(**data["penalty"])

    kernel_data = data["gp"]["kernel"]
    rq = {}
    for name in ("sim", "err"):
        part = kernel_data[name]
        scales = _require_numbers(part["length_scales"], f"gp.kernel.{name}.length_scales", 2)
        if part["signal_variance"] <= 0 or part["alpha"] <= 0 or any(s <= 0 for s in scales):
            raise _range_error(f"gp.kernel.{name}", "kernel parameters must be > 0")
        rq[name] = RQConfig(part["signal_variance"], tuple(scales), part["alpha"])
    if kernel_data["real_real_gain"] < 0:
        raise _range_error("gp.kernel.real_real_gain", "must be >= 0")
    kernel = CompositeKernelConfig(sim=rq["sim"], err=rq["err"],
                                   real_real_gain=kernel_data["real_real_gain"])

    noise_data = data["gp"]["noise"]
    _positive(data, "gp.noise", "sim_noise_variance", "real_noise_variance", "jitter")
    noise = NoiseConfig(**noise_data)

    hb = data["gp"]["hyper_bounds"]
    pairs = {}
    for name in ("signal_variance", "length_scale", "alpha"):
        pair = _require_numbers(hb[name], f"gp.hyper_bounds.{name}", 2)
        if not 0 < pair[0] < pair[1]:
            raise _range_error(f"gp.hyper_bounds.{name}",
                               f"expected 0 < low < high, got {pair}")
        pairs[name] = tuple(pair)
    hyper_bounds = HyperBounds(**pairs)

    if data["gp"]["restarts"] < 1:
        raise _range_error("gp.restarts", "must be >= 1")
    if data["gp"]["hyper_max_iters"] < 1:
        raise _range_error("gp.hyper_max_iters", "must be >= 1")
    gp_settings = GPSettings(
        kernel=kernel,
        noise=noise,
        hyper_bounds=hyper_bounds,
        fit_hyperparameters=data["gp"]["fit_hyperparameters"],
        restarts=data["gp"]["restarts"],
        hyper_max_iters=data["gp"]["hyper_max_iters"],
    )

    acq_data = data["acquisition"]
    if acq_data["seed_stream"] < 0:
        raise _range_error("acquisition.seed_stream", "must be >= 0")
    try:
        acquisition = AcquisitionConfig(**acq_data)
    except InvalidArgumentError as exc:
        raise _range_error("acquisition", str(exc)) from exc

    budgets = data["budgets"]
    if budgets["max_total"] < 1:
        raise _range_error("budgets.max_total", "must be >= 1")
    if not 0 <= budgets["max_real"] <= budgets["max_total"]:
        raise _range_error("budgets.max_real",
                           f"need 0 <= max_real <= max_total, got {budgets['max_real']}")

    opt = data["optimizer"]
    if opt["objective"] not in ("alpha", "alpha_beta"):
        raise _range_error("optimizer.objective",
                           f"expected 'alpha' or 'alpha_beta', got {opt['objective']!r}")
    if opt["eval_episodes"] < 1:
        raise _range_error("optimizer.eval_episodes", "must be >= 1")
    try:
        loop = LoopSettings(
            init_design=opt["init_design"],
            sim_repeats=opt["sim_repeats"],
            stall_window=opt["stall_window"],
            stall_tol=opt["stall_tol"],
            refit_every=opt["refit_every"],
        )
    except InvalidArgumentError as exc:
        raise _range_error("optimizer", str(exc)) from exc

    push = data["push_test"]
    d_values = _require_numbers(push["d_values"], "push_test.d_values")
    if not d_values:
        raise _range_error("push_test.d_values", "expected at least one value")
    if any(not 0 <= d < 1.5 for d in d_values):
        raise _range_error("push_test.d_values", f"values must lie in [0, 1.5), got {d_values}")
    if not 0 <= push["push_time"] < sequence.total_time:
        raise _range_error("push_test.push_time",
                           f"must lie in [0, {sequence.total_time}), got {push['push_time']}")
    push_gains = None
    if push["gains"] is not None:
        pair = _require_numbers(push["gains"], "push_test.gains", 2)
        if not bounds.contains(pair):
            raise _range_error("push_test.gains", f"{pair} outside bounds")
        push_gains = GaitParams(*pair)

    bench = data["benchmark"]
    seeds = bench["seeds"]
    if (not isinstance(seeds, list) or not seeds
            or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds)):
        raise _schema_error("benchmark.seeds", "expected a non-empty array of integers")
    if any(not 0 <= s < 2**64 for s in seeds):
        raise _range_error("benchmark.seeds", "seeds must be non-negative 64-bit integers")
    if bench["oracle_resolution"] < 2:
        raise _range_error("benchmark.oracle_resolution", "must be >= 2")
    if bench["score_episodes"] < 1:
        raise _range_error("benchmark.score_episodes", "must be >= 1")

    return RunConfig(
        data=data,
        config_hash=config_hash,
        seed=seed,
        out_dir=out_dir,
        bounds=bounds,
        plant=plant,
        sequence=sequence,
        penalty=penalty,
        gp=gp_settings,
        acquisition=acquisition,
        max_real=budgets["max_real"],
        max_total=budgets["max_total"],
        loop=loop,
        objective=opt["objective"],
        eval_episodes=opt["eval_episodes"],
        push_d_values=tuple(d_values),
        push_time=float(push["push_time"]),
        push_gains=push_gains,
        bench_seeds=tuple(seeds),
        oracle_resolution=bench["oracle_resolution"],
        score_episodes=bench["score_episodes"],
    )


def canonical_json(data: dict) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def hashable_document(data: dict) -> dict:
    """Effective config minus run placement: ``out_dir`` names where
    results land, not what experiment runs, so it stays out of the
    hash and out of the archived config."""
    return {k: v for k, v in data.items() if k != "out_dir"}


def build_config(raw: dict, *, seed=None, max_real=None, out_dir=None) -> RunConfig:
    """Merge raw user data over defaults, apply CLI overrides, validate.

    The config hash covers the effective post-override document, so two
    runs hash equal exactly when every effective setting is equal.
    """
    merged = _merge(DEFAULTS, raw, "")
    if seed is not None:
        merged["seed"] = seed
    if max_real is not None:
        if not isinstance(max_real, int) or max_real < 0:
            raise _range_error("budgets.max_real", f"override must be >= 0, got {max_real}")
        merged["budgets"]["max_real"] = min(max_real, merged["budgets"]["max_total"])
    if out_dir is not None:
        merged["out_dir"] = out_dir
    digest = hashlib.sha256(canonical_json(hashable_document(merged)).encode()).hexdigest()
    try:
        return _validate_and_build(merged, digest)
    except (KeyError, TypeError) as exc:
        raise _schema_error("<root>", f"malformed configuration structure: {exc}") from exc


def parse_config(path, *, seed=None, max_real=None, out_dir=None) -> RunConfig:
    """Load and validate a JSON config file; ``None`` path means defaults."""
    if path is None:
        return build_config({}, seed=seed, max_real=max_real, out_dir=out_dir)
    file_path = Path(path)
    if not file_path.is_file():
        raise ConfigError("missing-file", "", f"config file not found: {file_path}")
    try:
        raw = json.loads(file_path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("malformed", "", f"{file_path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("malformed", "", f"{file_path}: top level must be a JSON object")
    return build_config(raw, seed=seed, max_real=max_real, out_dir=out_dir)
