"""Toy gait plant: two driven, damped inverted-pendulum planes.

The sagittal angle alpha and lateral angle beta each follow

    angular_accel = g*sin(angle) - c*rate - b*u   (control on alpha only)
                    + excitation*sin(phase + plane offset)
                    + disturbance + noise

integrated with a semi-implicit Euler step.  An open-loop gait cycle
excites both planes; the corrective action u trims the sagittal plane
toward a command-dependent reference waveform.  Cost is the integrated
absolute deviation from that waveform plus a logistic penalty on gain
magnitude, mirroring a fused-angle deviation measure on hardware.

Two fidelities share the integrator.  Simulation runs the nominal
coefficients and no noise.  The surrogate-real fidelity perturbs the
coefficients by a fixed relative gap, delays the control by a couple of
steps, and corrupts the measurements the controller and the cost see,
which is what makes transferring simulated optima nontrivial.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .bounds import Box
from .errors import InvalidArgumentError
from .kernels import Fidelity
from .seeds import STREAM_ROLLOUT, substream

TWO_PI = 2.0 * math.pi

# Reference-waveform table, in units of the excitation amplitude.  The
# commanded sagittal amplitude is REF_SAG_SCALE * excitation_amp, so a
# plant with excitation disabled also commands a zero waveform and the
# cost reduces exactly to the gain penalty.
REF_SAG_SCALE = 0.75
REF_LAT_BASE = 0.08
REF_LAT_SIDE = 0.15

# Per-plane phase offsets of the cyclic excitation.
EXC_OFFSET_ALPHA = 0.0
EXC_OFFSET_BETA = 0.5 * math.pi

U_MAX = 1.5  # actuator saturation of the corrective action

# Push pendulum: mass on a string, released from a horizontal draw-back
# distance d, converting momentum at the bottom of the swing into a
# sagittal rate jump.
PENDULUM_LENGTH = 1.5   # m
PENDULUM_MASS = 3.0     # kg
MOMENTUM_TO_RATE = 0.05  # (rad/s) per (kg m/s)
GRAVITY = 9.81          # m/s^2

# Characteristic gain magnitudes normalizing the effort penalty.  This
# is a property of the objective, not of any particular search box, so
# tightening the optimizer's bounds leaves the penalty surface alone.
DEFAULT_GAIN_BOUNDS = Box((0.0, 0.0), (5.0, 1.0))


class Command(enum.Enum):
    HALT = "halt"
    FORWARD = "forward"
    BACKWARD = "backward"
    SIDEWAYS_LEFT = "sideways_left"
    SIDEWAYS_RIGHT = "sideways_right"


@dataclass(frozen=True)
class CommandSequence:
    """Ordered (command, duration) segments; durations in seconds."""

    segments: tuple[tuple[Command, float], ...]

    def __post_init__(self):
        segs = tuple((Command(c), float(d)) for c, d in self.segments)
        if len(segs) == 0:
            raise InvalidArgumentError("sequence must contain at least one segment")
        if any(d <= 0 for _, d in segs):
            raise InvalidArgumentError("segment durations must be > 0")
        object.__setattr__(self, "segments", segs)

    @property
    def total_time(self) -> float:
        return float(sum(d for _, d in self.segments))


def default_sequence() -> CommandSequence:
    """Halt, walk forward/backward, then sidestep both ways; 20 s total."""
    return CommandSequence((
        (Command.HALT, 2.0),
        (Command.FORWARD, 5.0),
        (Command.BACKWARD, 5.0),
        (Command.SIDEWAYS_LEFT, 4.0),
        (Command.SIDEWAYS_RIGHT, 4.0),
    ))


@dataclass(frozen=True)
class GaitParams:
    """Sagittal corrective-action gains."""

    p_gain: float  # on angle deviation
    d_gain: float  # on rate deviation

    def __post_init__(self):
        if not (self.p_gain >= 0 and self.d_gain >= 0):
            raise InvalidArgumentError(
                f"gains must be >= 0, got ({self.p_gain}, {self.d_gain})"
            )
        object.__setattr__(self, "p_gain", float(self.p_gain))
        object.__setattr__(self, "d_gain", float(self.d_gain))


@dataclass(frozen=True)
class PlantConfig:
    gravity_coeff: float = 9.0     # destabilizing gravity gain [1/s^2]
    control_coeff: float = 6.0     # actuator effectiveness [1/s^2 per unit u]
    damping: float = 0.8           # viscous damping [1/s]
    excitation_amp: float = 0.35   # gait-cycle drive amplitude [rad/s^2]
    step_frequency: float = 1.4    # [Hz]
    dt: float = 0.01               # integrator step [s]
    fall_threshold: float = 0.7    # |angle| beyond which the robot has fallen [rad]
    real_gap_scale: float = 0.15   # relative coefficient perturbation at real fidelity
    real_delay_steps: int = 2      # control latency at real fidelity [steps]
    real_noise_std: float = 0.02   # measurement noise at real fidelity [rad, rad/s]

    def __post_init__(self):
        numeric = (
            self.gravity_coeff, self.control_coeff, self.damping,
            self.excitation_amp, self.step_frequency, self.real_gap_scale,
            self.real_noise_std,
        )
        if any(v < 0 or not np.isfinite(v) for v in numeric):
            raise InvalidArgumentError("plant coefficients must be finite and >= 0")
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise InvalidArgumentError(f"dt must be > 0, got {self.dt}")
        if not (self.fall_threshold > 0):
            raise InvalidArgumentError(f"fall_threshold must be > 0, got {self.fall_threshold}")
        if self.real_delay_steps < 0 or int(self.real_delay_steps) != self.real_delay_steps:
            raise InvalidArgumentError(
                f"real_delay_steps must be a non-negative integer, got {self.real_delay_steps}"
            )


@dataclass(frozen=True)
class GaitState:
    alpha: float = 0.0       # sagittal angle [rad]
    beta: float = 0.0        # lateral angle [rad]
    alpha_rate: float = 0.0  # [rad/s]
    beta_rate: float = 0.0   # [rad/s]
    phase: float = 0.0       # gait phase in (-pi, pi]


@dataclass(frozen=True)
class PenaltyConfig:
    """Logistic penalty on normalized gain magnitude."""

    magnitude_scale: float = 0.5  # asymptotic penalty height
    steepness: float = 4.0
    center: float = 1.5           # norm at which half the height is reached

    def __post_init__(self):
        if self.magnitude_scale < 0 or self.steepness <= 0:
            raise InvalidArgumentError("penalty needs magnitude_scale >= 0 and steepness > 0")


@dataclass(frozen=True)
class Trace:
    """Per-step log of one rollout, aligned arrays."""

    t: np.ndarray
    e_p_alpha: np.ndarray
    e_p_beta: np.ndarray
    u: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    fell: np.ndarray  # 0 everywhere, 1 on the step that crossed the threshold


@dataclass(frozen=True)
class CostReport:
    """Rollout outcome.

    ``j_alpha`` decomposes as sum(|e_p_alpha|)*dt over the trace, plus
    fall_threshold*(total_time - fall_time) if the rollout fell, plus
    ``penalty``; likewise for ``j_beta``.
    """

    j_alpha: float
    j_beta: float
    penalty: float
    fell: bool
    fall_time: float | None
    trace: Trace = field(repr=False)


def wrap_angle(x: float) -> float:
    """Wrap to (-pi, pi]."""
    m = math.fmod(x, TWO_PI)
    if m <= -math.pi:
        m += TWO_PI
    elif m > math.pi:
        m -= TWO_PI
    return m


def gait_phase(t: float, frequency: float) -> float:
    """Phase of the gait cycle at time t, wrapped to (-pi, pi]."""
    if not (frequency > 0):
        raise InvalidArgumentError(f"frequency must be > 0, got {frequency}")
    return wrap_angle(TWO_PI * frequency * t)


def _waveform_amplitudes(command: Command, cfg: PlantConfig) -> tuple[float, float]:
    """Command-dependent (sagittal, lateral) reference amplitudes."""
    a_unit = REF_SAG_SCALE * cfg.excitation_amp
    b_base = REF_LAT_BASE * cfg.excitation_amp
    b_side = REF_LAT_SIDE * cfg.excitation_amp
    if command is Command.FORWARD:
        return a_unit, b_base
    if command is Command.BACKWARD:
        return -a_unit, b_base
    if command is Command.SIDEWAYS_LEFT:
        return 0.0, b_base + b_side
    if command is Command.SIDEWAYS_RIGHT:
        return 0.0, b_base - b_side
    return 0.0, b_base  # HALT


def expected_waveform(phase: float, command: Command, cfg: PlantConfig | None = None) -> tuple[float, float]:
    """Reference (alpha_ref, beta_ref) for a command at a gait phase.

    The sagittal reference swings at the step frequency with a sign
    given by the walking direction; the lateral sway runs at twice the
    phase rate.  Amplitudes scale with the plant's excitation, so a
    quiescent plant is asked to hold exactly zero.
    """
    cfg = cfg if cfg is not None else PlantConfig()
    a_cmd, b_cmd = _waveform_amplitudes(Command(command), cfg)
    return a_cmd * math.sin(phase), b_cmd * math.sin(2.0 * phase)


def corrective_action(e_p: float, e_rate: float, gains: GaitParams, u_max: float = U_MAX) -> float:
    """Saturated PD action on the sagittal deviation."""
    if not (u_max > 0):
        raise InvalidArgumentError(f"u_max must be > 0, got {u_max}")
    u = gains.p_gain * e_p + gains.d_gain * e_rate
    if u > u_max:
        return u_max
    if u < -u_max:
        return -u_max
    return u


def plant_step(
    state: GaitState,
    u: float,
    t: float,
    cfg: PlantConfig,
    disturbance_accel: float = 0.0,
    rng_draw: float = 0.0,
) -> GaitState:
    """One semi-implicit Euler step of both planes.

    Pure function of its inputs; random accelerations enter through
    ``rng_draw`` so the caller owns all randomness.
    """
    exc = cfg.excitation_amp
    acc_a = (
        cfg.gravity_coeff * math.sin(state.alpha)
        - cfg.damping * state.alpha_rate
        - cfg.control_coeff * u
        + exc * math.sin(state.phase + EXC_OFFSET_ALPHA)
        + disturbance_accel
        + rng_draw
    )
    # lateral gravity is restoring: the stepping gait provides lateral
    # capture, so the uncontrolled plane must not diverge on its own
    acc_b = (
        -cfg.gravity_coeff * math.sin(state.beta)
        - cfg.damping * state.beta_rate
        + exc * math.sin(state.phase + EXC_OFFSET_BETA)
        + disturbance_accel
        + rng_draw
    )
    alpha_rate = state.alpha_rate + acc_a * cfg.dt
    beta_rate = state.beta_rate + acc_b * cfg.dt
    return GaitState(
        alpha=state.alpha + alpha_rate * cfg.dt,
        beta=state.beta + beta_rate * cfg.dt,
        alpha_rate=alpha_rate,
        beta_rate=beta_rate,
        phase=wrap_angle(state.phase + TWO_PI * cfg.step_frequency * cfg.dt),
    )


def push_impulse(
    d: float,
    length: float = PENDULUM_LENGTH,
    mass: float = PENDULUM_MASS,
    momentum_to_rate: float = MOMENTUM_TO_RATE,
) -> float:
    """Sagittal rate jump from a pendulum released at draw-back distance d.

    The bob falls h = L - sqrt(L^2 - d^2), strikes at v = sqrt(2 g h),
    and transfers momentum_to_rate * m * v into body rotation rate.
    """
    if not (0.0 <= d < length):
        raise InvalidArgumentError(f"draw-back distance must lie in [0, {length}), got {d}")
    h = length - math.sqrt(length * length - d * d)
    v = math.sqrt(2.0 * GRAVITY * h)
    return momentum_to_rate * mass * v


def penalty(gains: GaitParams, cfg: PenaltyConfig, bounds: Box = DEFAULT_GAIN_BOUNDS) -> float:
    """Logistic penalty on the norm of the bounds-normalized gain vector."""
    u = bounds.to_unit((gains.p_gain, gains.d_gain))
    nrm = math.hypot(float(u[0]), float(u[1]))
    return cfg.magnitude_scale / (1.0 + math.exp(-cfg.steepness * (nrm - cfg.center)))


def real_plant(cfg: PlantConfig) -> PlantConfig:
    """Coefficient set actually governing surrogate-real rollouts.

    Gravity is a bit stronger and both actuation and damping a bit
    weaker than simulation believes, scaled by ``real_gap_scale``.
    """
    gap = cfg.real_gap_scale
    return replace(
        cfg,
        gravity_coeff=cfg.gravity_coeff * (1.0 + gap),
        control_coeff=cfg.control_coeff * (1.0 - 0.5 * gap),
        damping=cfg.damping * (1.0 - 0.5 * gap),
    )


def _push_schedule(pushes, cfg: PlantConfig, total_time: float) -> dict[int, float]:
    """Map step index -> summed rate jump; sign of d picks the direction."""
    sched: dict[int, float] = {}
    for push_time, d in pushes:
        if not (0.0 <= push_time < total_time):
            raise InvalidArgumentError(
                f"push time {push_time} outside [0, {total_time})"
            )
        k = int(math.ceil(push_time / cfg.dt - 1e-12))
        jump = math.copysign(push_impulse(abs(d)), d) if d != 0.0 else 0.0
        sched[k] = sched.get(k, 0.0) + jump
    return sched


def rollout(
    gains: GaitParams,
    seq: CommandSequence,
    cfg: PlantConfig,
    pushes=(),
    fidelity: Fidelity = Fidelity.SIMULATION,
    seed: int = 0,
    *,
    penalty_cfg: PenaltyConfig | None = None,
    bounds: Box = DEFAULT_GAIN_BOUNDS,
    u_max: float = U_MAX,
) -> CostReport:
    """Integrate one episode and score it.

    Deterministic per (inputs, seed); the seed only feeds measurement
    noise, so simulation rollouts are identical across seeds.  On a
    fall, integration stops and every remaining step is charged the
    fall threshold.
    """
    penalty_cfg = penalty_cfg if penalty_cfg is not None else PenaltyConfig()
    total_time = seq.total_time
    dt = cfg.dt
    n_steps = int(round(total_time / dt))
    if n_steps < 1:
        raise InvalidArgumentError("sequence shorter than one integrator step")

    is_real = fidelity is Fidelity.REAL
    eff = real_plant(cfg) if is_real else cfg
    omega = TWO_PI * cfg.step_frequency

    # per-step command amplitudes
    amps = [_waveform_amplitudes(c, cfg) for c, _ in seq.segments]
    edges = np.cumsum([d for _, d in seq.segments])
    seg_idx = np.minimum(
        np.searchsorted(edges, np.arange(n_steps) * dt, side="right"), len(amps) - 1
    )
    a_sched = [amps[i][0] for i in seg_idx]
    b_sched = [amps[i][1] for i in seg_idx]

    # measurement noise, drawn up front (real fidelity only)
    if is_real and cfg.real_noise_std > 0:
        draws = np.random.default_rng(seed).standard_normal((n_steps, 3)) * cfg.real_noise_std
        n_alpha, n_arate, n_beta = (draws[:, i].tolist() for i in range(3))
    else:
        n_alpha = n_arate = n_beta = [0.0] * n_steps

    push_at = _push_schedule(pushes, cfg, total_time)
    delay = cfg.real_delay_steps if is_real else 0
    u_queue = [0.0] * delay  # FIFO of commanded-but-not-yet-applied actions

    state = GaitState()
    rows_t, rows_epa, rows_epb, rows_u, rows_a, rows_b = [], [], [], [], [], []
    j_a = 0.0
    j_b = 0.0
    fell = False
    fall_time: float | None = None

    for k in range(n_steps):
        t_k = k * dt
        phase = state.phase
        sin_phase = math.sin(phase)
        a_ref = a_sched[k] * sin_phase
        a_ref_rate = a_sched[k] * math.cos(phase) * omega
        b_ref = b_sched[k] * math.sin(2.0 * phase)

        e_p = (state.alpha + n_alpha[k]) - a_ref
        e_rate = (state.alpha_rate + n_arate[k]) - a_ref_rate
        e_pb = (state.beta + n_beta[k]) - b_ref

        u_cmd = corrective_action(e_p, e_rate, gains, u_max)
        if delay:
            u_queue.append(u_cmd)
            u_act = u_queue.pop(0)
        else:
            u_act = u_cmd

        j_a += abs(e_p) * dt
        j_b += abs(e_pb) * dt
        rows_t.append(t_k)
        rows_epa.append(e_p)
        rows_epb.append(e_pb)
        rows_u.append(u_act)
        rows_a.append(state.alpha)
        rows_b.append(state.beta)

        if k in push_at:
            state = replace(state, alpha_rate=state.alpha_rate + push_at[k])
        state = plant_step(state, u_act, t_k, eff)

        if abs(state.alpha) > cfg.fall_threshold or abs(state.beta) > cfg.fall_threshold:
            fell = True
            fall_time = (k + 1) * dt
            remaining = total_time - fall_time
            j_a += cfg.fall_threshold * remaining
            j_b += cfg.fall_threshold * remaining
            break

    fell_col = np.zeros(len(rows_t), dtype=np.uint8)
    if fell:
        fell_col[-1] = 1
    nu = penalty(gains, penalty_cfg, bounds)
    trace = Trace(
        t=np.array(rows_t),
        e_p_alpha=np.array(rows_epa),
        e_p_beta=np.array(rows_epb),
        u=np.array(rows_u),
        alpha=np.array(rows_a),
        beta=np.array(rows_b),
        fell=fell_col,
    )
    return CostReport(
        j_alpha=j_a + nu,
        j_beta=j_b + nu,
        penalty=nu,
        fell=fell,
        fall_time=fall_time,
        trace=trace,
    )


def simulated_cost(
    gains: GaitParams,
    seq: CommandSequence,
    cfg: PlantConfig,
    pushes=(),
    n_rollouts: int = 4,
    seed: int = 0,
    *,
    penalty_cfg: PenaltyConfig | None = None,
    bounds: Box = DEFAULT_GAIN_BOUNDS,
    u_max: float = U_MAX,
    on_report=None,
) -> tuple[float, float]:
    """Mean (j_alpha, j_beta) over n seeded simulation rollouts.

    Per-rollout seeds derive from ``seed`` and the rollout index, so the
    mean does not depend on evaluation order.
    """
    if n_rollouts < 1:
        raise InvalidArgumentError(f"n_rollouts must be >= 1, got {n_rollouts}")
    ja, jb = [], []
    for k in range(n_rollouts):
        rep = rollout(
            gains, seq, cfg, pushes, Fidelity.SIMULATION,
            substream(seed, STREAM_ROLLOUT, k),
            penalty_cfg=penalty_cfg, bounds=bounds, u_max=u_max,
        )
        ja.append(rep.j_alpha)
        jb.append(rep.j_beta)
        if on_report is not None:
            on_report(k, rep)
    return sum(ja) / n_rollouts, sum(jb) / n_rollouts


def surrogate_real_cost(
    gains: GaitParams,
    seq: CommandSequence,
    cfg: PlantConfig,
    pushes=(),
    seed: int = 0,
    *,
    penalty_cfg: PenaltyConfig | None = None,
    bounds: Box = DEFAULT_GAIN_BOUNDS,
    u_max: float = U_MAX,
    on_report=None,
) -> tuple[float, float]:
    """(j_alpha, j_beta) of a single surrogate-real rollout."""
    rep = rollout(
        gains, seq, cfg, pushes, Fidelity.REAL, seed,
        penalty_cfg=penalty_cfg, bounds=bounds, u_max=u_max,
    )
    if on_report is not None:
        on_report(0, rep)
    return rep.j_alpha, rep.j_beta


def mid_gains(bounds: Box = DEFAULT_GAIN_BOUNDS) -> GaitParams:
    """Untuned reference point: the center of the gain box."""
    mid = bounds.from_unit((0.5, 0.5))
    return GaitParams(float(mid[0]), float(mid[1]))


def write_trace_csv(report: CostReport, path) -> None:
    """Dump a rollout trace as CSV with a fixed column contract."""
    tr = report.trace
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "e_p_alpha", "e_p_beta", "u", "alpha", "beta", "fell"])
        for i in range(len(tr.t)):
            writer.writerow([
                repr(float(tr.t[i])),
                repr(float(tr.e_p_alpha[i])),
                repr(float(tr.e_p_beta[i])),
                repr(float(tr.u[i])),
                repr(float(tr.alpha[i])),
                repr(float(tr.beta[i])),
                int(tr.fell[i]),
            ])
