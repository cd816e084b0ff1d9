"""Tests for the toy gait plant: waveforms, integration, pushes, costs."""

import math

import numpy as np
import pytest

from simreal_opt.bounds import Box
from simreal_opt.errors import InvalidArgumentError
from simreal_opt.gait_sim import (
    Command,
    CommandSequence,
    CostReport,
    GaitParams,
    GaitState,
    PenaltyConfig,
    PlantConfig,
    corrective_action,
    default_sequence,
    expected_waveform,
    gait_phase,
    penalty,
    plant_step,
    push_impulse,
    real_plant,
    rollout,
    simulated_cost,
    surrogate_real_cost,
    write_trace_csv,
)
from simreal_opt.kernels import Fidelity
from simreal_opt.seeds import STREAM_ROLLOUT, substream

# Independently derived pendulum rate jumps for the default constants
# (L=1.5, m=3, kappa=0.05, g=9.81).
PUSH_FROZEN = {
    0.4: 0.154848759588224,
    0.8: 0.3194334742585003,
    1.2: 0.5146552243978487,
}

# 0.5 / (1 + e^6), the floor of the logistic gain penalty.
PENALTY_ORIGIN = 0.0012363115783173872


def quiet_config(**overrides):
    return PlantConfig(excitation_amp=0.0, **overrides)


# ---------------------------------------------------------------- phase


def test_gait_phase_zero_at_origin():
    assert gait_phase(0.0, 1.4) == 0.0


def test_gait_phase_wraps_full_cycle():
    # one full cycle returns to phase zero up to float wrap error
    assert abs(gait_phase(1.0 / 1.4, 1.4)) < 1e-12


def test_gait_phase_half_cycle_is_pi_exactly():
    assert gait_phase(1.0, 0.5) == math.pi


def test_gait_phase_stays_in_wrap_interval():
    for t in np.linspace(0.0, 13.7, 400):
        p = gait_phase(float(t), 1.4)
        assert -math.pi < p <= math.pi


def test_gait_phase_rejects_bad_frequency():
    with pytest.raises(InvalidArgumentError):
        gait_phase(1.0, 0.0)
    with pytest.raises(InvalidArgumentError):
        gait_phase(1.0, -2.0)


# ------------------------------------------------------------ waveform


def test_expected_waveform_zero_phase_is_zero():
    for cmd in Command:
        assert expected_waveform(0.0, cmd) == (0.0, 0.0)


def test_expected_waveform_halt_has_no_sagittal_component():
    cfg = PlantConfig()
    for phase in np.linspace(-math.pi, math.pi, 17):
        a_ref, _ = expected_waveform(float(phase), Command.HALT, cfg)
        assert a_ref == 0.0
    # the lateral sway is still commanded while halted
    _, b_ref = expected_waveform(0.25 * math.pi, Command.HALT, cfg)
    assert b_ref > 0.0


def test_expected_waveform_direction_flips_sign():
    cfg = PlantConfig()
    fwd = expected_waveform(0.5 * math.pi, Command.FORWARD, cfg)
    bwd = expected_waveform(0.5 * math.pi, Command.BACKWARD, cfg)
    assert fwd[0] == -bwd[0]
    assert fwd[0] == pytest.approx(0.75 * cfg.excitation_amp, abs=1e-15)
    assert fwd[1] == bwd[1]


def test_expected_waveform_scales_with_excitation():
    quiet = quiet_config()
    for cmd in Command:
        for phase in (0.3, 1.1, -2.0):
            assert expected_waveform(phase, cmd, quiet) == (0.0, 0.0)


# ----------------------------------------------------------- PD action


def test_corrective_action_zero_errors():
    assert corrective_action(0.0, 0.0, GaitParams(2.0, 0.5)) == 0.0


def test_corrective_action_passive_gains():
    assert corrective_action(0.4, -1.0, GaitParams(0.0, 0.0)) == 0.0


def test_corrective_action_linear_case():
    # 2.0 * 0.1 + 0.5 * (-0.2) = 0.1
    u = corrective_action(0.1, -0.2, GaitParams(2.0, 0.5))
    assert u == pytest.approx(0.1, abs=1e-15)


def test_corrective_action_saturates():
    g = GaitParams(5.0, 1.0)
    assert corrective_action(10.0, 0.0, g) == 1.5
    assert corrective_action(-10.0, 0.0, g) == -1.5
    assert corrective_action(10.0, 0.0, g, u_max=0.25) == 0.25
    with pytest.raises(InvalidArgumentError):
        corrective_action(0.1, 0.0, g, u_max=0.0)


def test_gait_params_reject_negative_gains():
    with pytest.raises(InvalidArgumentError):
        GaitParams(-0.1, 0.5)
    with pytest.raises(InvalidArgumentError):
        GaitParams(1.0, -1e-9)


# --------------------------------------------------------- integration


def test_plant_step_origin_is_fixed_point_without_excitation():
    cfg = quiet_config()
    state = GaitState()
    nxt = plant_step(state, 0.0, 0.0, cfg)
    assert (nxt.alpha, nxt.beta, nxt.alpha_rate, nxt.beta_rate) == (0.0, 0.0, 0.0, 0.0)


def test_plant_step_pure_integration_of_disturbance():
    # from rest every coefficient multiplies a zero, so one step turns a
    # constant disturbance acceleration into exactly accel * dt of rate
    cfg = quiet_config()
    accel = 0.37
    nxt = plant_step(GaitState(), 0.0, 0.0, cfg, disturbance_accel=accel)
    assert nxt.alpha_rate == accel * cfg.dt
    assert nxt.beta_rate == accel * cfg.dt
    # semi-implicit: the fresh rate already moves the angle this step
    assert nxt.alpha == accel * cfg.dt * cfg.dt


def test_plant_step_rng_draw_matches_disturbance_path():
    cfg = quiet_config()
    a = plant_step(GaitState(), 0.0, 0.0, cfg, disturbance_accel=0.2)
    b = plant_step(GaitState(), 0.0, 0.0, cfg, rng_draw=0.2)
    assert a == b


def test_stabilizing_gains_hold_for_thirty_seconds():
    seq = CommandSequence(((Command.FORWARD, 30.0),))
    report = rollout(GaitParams(2.5, 0.5), seq, PlantConfig())
    assert not report.fell
    assert float(np.max(np.abs(report.trace.alpha))) < 0.7


# --------------------------------------------------------------- pushes


def test_push_impulse_zero_distance():
    assert push_impulse(0.0) == 0.0


def test_push_impulse_frozen_values():
    for d, expected in PUSH_FROZEN.items():
        assert push_impulse(d) == pytest.approx(expected, abs=1e-12)


def test_push_impulse_monotone_in_distance():
    grid = np.linspace(0.0, 1.45, 30)
    jumps = [push_impulse(float(d)) for d in grid]
    assert all(b > a for a, b in zip(jumps, jumps[1:]))


def test_push_impulse_domain():
    with pytest.raises(InvalidArgumentError):
        push_impulse(-0.1)
    with pytest.raises(InvalidArgumentError):
        push_impulse(1.5)  # the pendulum string is 1.5 m


# -------------------------------------------------------------- penalty


def test_penalty_at_origin():
    val = penalty(GaitParams(0.0, 0.0), PenaltyConfig())
    assert val == pytest.approx(PENALTY_ORIGIN, abs=1e-15)


def test_penalty_midpoint_is_half_height():
    # (4.5, 1.2) normalizes to (0.9, 1.2) whose norm is the center 1.5
    cfg = PenaltyConfig()
    val = penalty(GaitParams(4.5, 1.2), cfg)
    assert val == pytest.approx(0.5 * cfg.magnitude_scale, abs=1e-12)


def test_penalty_monotone_under_scaling():
    cfg = PenaltyConfig()
    rng = np.random.default_rng(5)
    for _ in range(50):
        p, d = rng.uniform(0.1, 4.0), rng.uniform(0.1, 0.8)
        assert penalty(GaitParams(1.2 * p, 1.2 * d), cfg) >= penalty(GaitParams(p, d), cfg)


def test_penalty_bounded_by_height():
    cfg = PenaltyConfig()
    assert 0.0 < penalty(GaitParams(5.0, 1.0), cfg) < cfg.magnitude_scale


# ------------------------------------------------------------- rollouts


def test_quiescent_rollout_cost_is_exactly_the_penalty():
    report = rollout(GaitParams(1.0, 0.3), default_sequence(), quiet_config())
    assert report.j_alpha == report.penalty
    assert report.j_beta == report.penalty
    assert not report.fell
    assert float(np.max(np.abs(report.trace.u))) == 0.0


def test_passive_plant_falls_under_push():
    # ungained, the plant cannot even ride out the gait excitation, let
    # alone a shove; the report must say so and charge the fall
    report = rollout(
        GaitParams(0.0, 0.0), default_sequence(), PlantConfig(),
        pushes=((2.0, 0.8),),
    )
    assert report.fell
    assert report.fall_time is not None and 0.0 < report.fall_time < 20.0
    # the fall charge alone puts the cost above this floor
    floor = 0.7 * (default_sequence().total_time - report.fall_time)
    assert report.j_alpha > floor
    assert int(np.sum(report.trace.fell)) == 1


def test_rollout_trace_truncates_at_fall():
    report = rollout(
        GaitParams(0.0, 0.0), default_sequence(), PlantConfig(),
        pushes=((2.0, 0.8),),
    )
    assert report.trace.fell[-1] == 1
    assert len(report.trace.t) < round(20.0 / PlantConfig().dt)


def test_simulation_rollout_ignores_seed():
    gains = GaitParams(2.0, 0.4)
    a = rollout(gains, default_sequence(), PlantConfig(), seed=0)
    b = rollout(gains, default_sequence(), PlantConfig(), seed=991)
    assert a.j_alpha == b.j_alpha and a.j_beta == b.j_beta
    assert np.array_equal(a.trace.alpha, b.trace.alpha)


def test_real_rollout_deterministic_per_seed():
    gains = GaitParams(2.0, 0.4)
    a = rollout(gains, default_sequence(), PlantConfig(), fidelity=Fidelity.REAL, seed=7)
    b = rollout(gains, default_sequence(), PlantConfig(), fidelity=Fidelity.REAL, seed=7)
    c = rollout(gains, default_sequence(), PlantConfig(), fidelity=Fidelity.REAL, seed=8)
    assert a.j_alpha == b.j_alpha and a.j_beta == b.j_beta
    assert np.array_equal(a.trace.u, b.trace.u)
    assert a.j_alpha != c.j_alpha


def test_cost_decomposition_from_trace():
    """j recomposes from the trace: deviation integral + fall charge + penalty."""
    cfg = PlantConfig()
    cases = [
        (GaitParams(2.5, 0.5), (), Fidelity.SIMULATION),
        (GaitParams(0.0, 0.0), ((2.0, 0.8),), Fidelity.SIMULATION),
        (GaitParams(1.2, 0.1), ((2.0, 0.6),), Fidelity.REAL),
    ]
    for gains, pushes, fid in cases:
        rep = rollout(gains, default_sequence(), cfg, pushes, fid, seed=3)
        charge = 0.0
        if rep.fell:
            charge = cfg.fall_threshold * (default_sequence().total_time - rep.fall_time)
        expect_a = float(np.sum(np.abs(rep.trace.e_p_alpha))) * cfg.dt + charge + rep.penalty
        expect_b = float(np.sum(np.abs(rep.trace.e_p_beta))) * cfg.dt + charge + rep.penalty
        assert rep.j_alpha == pytest.approx(expect_a, abs=1e-9)
        assert rep.j_beta == pytest.approx(expect_b, abs=1e-9)


def test_fall_dominance_over_probe_set():
    # under the same pushed scenario, every faller must cost more than
    # every survivor; the fall charge is what enforces the gap
    cfg = PlantConfig()
    seq = default_sequence()
    pushes = ((2.0, 0.8),)
    fallen, upright = [], []
    for p in (0.0, 0.25, 0.5, 1.0, 2.0, 2.5, 3.0):
        for d in (0.0, 0.3, 0.6):
            rep = rollout(GaitParams(p, d), seq, cfg, pushes)
            (fallen if rep.fell else upright).append(rep.j_alpha)
    assert fallen and upright
    assert min(fallen) > max(upright)


def test_push_cost_monotone_in_distance():
    gains = GaitParams(1.0, 0.2)
    costs = []
    for d in np.arange(0.0, 1.41, 0.2):
        pushes = ((2.0, float(d)),) if d > 0 else ()
        rep = rollout(gains, default_sequence(), PlantConfig(), pushes, seed=0)
        costs.append(rep.j_alpha)
    assert all(b >= a - 1e-12 for a, b in zip(costs, costs[1:]))


# ------------------------------------------------- averaging and the gap


def test_simulated_cost_single_rollout_degenerate():
    gains = GaitParams(2.2, 0.3)
    ja, jb = simulated_cost(gains, default_sequence(), PlantConfig(), n_rollouts=1, seed=11)
    rep = rollout(
        gains, default_sequence(), PlantConfig(),
        seed=substream(11, STREAM_ROLLOUT, 0),
    )
    assert (ja, jb) == (rep.j_alpha, rep.j_beta)


def test_simulated_cost_is_mean_of_reports():
    reports = []
    ja, jb = simulated_cost(
        GaitParams(2.2, 0.3), default_sequence(), PlantConfig(),
        n_rollouts=4, seed=2, on_report=lambda k, rep: reports.append(rep),
    )
    assert len(reports) == 4
    assert ja == pytest.approx(sum(r.j_alpha for r in reports) / 4.0, abs=1e-12)
    assert jb == pytest.approx(sum(r.j_beta for r in reports) / 4.0, abs=1e-12)


def test_simulated_cost_requires_positive_count():
    with pytest.raises(InvalidArgumentError):
        simulated_cost(GaitParams(1.0, 0.2), default_sequence(), PlantConfig(), n_rollouts=0)


def test_real_plant_coefficient_shifts():
    cfg = PlantConfig()
    shifted = real_plant(cfg)
    assert shifted.gravity_coeff == pytest.approx(cfg.gravity_coeff * 1.15, abs=1e-12)
    assert shifted.control_coeff == pytest.approx(cfg.control_coeff * 0.925, abs=1e-12)
    assert shifted.damping == pytest.approx(cfg.damping * 0.925, abs=1e-12)


def test_gap_disabled_makes_real_equal_sim():
    cfg = PlantConfig(real_gap_scale=0.0, real_delay_steps=0, real_noise_std=0.0)
    gains = GaitParams(2.0, 0.4)
    sim = rollout(gains, default_sequence(), cfg, seed=4)
    real = rollout(gains, default_sequence(), cfg, fidelity=Fidelity.REAL, seed=4)
    assert real.j_alpha == sim.j_alpha
    assert real.j_beta == sim.j_beta
    assert np.array_equal(real.trace.alpha, sim.trace.alpha)


def test_default_gap_separates_fidelities():
    rng = np.random.default_rng(17)
    apart = 0
    for _ in range(10):
        gains = GaitParams(float(rng.uniform(0.5, 4.5)), float(rng.uniform(0.05, 0.9)))
        sim = rollout(gains, default_sequence(), PlantConfig(), seed=1)
        real = rollout(gains, default_sequence(), PlantConfig(), fidelity=Fidelity.REAL, seed=1)
        if abs(real.j_alpha - sim.j_alpha) > 0.0:
            apart += 1
    assert apart >= 9


def test_surrogate_real_cost_wraps_single_real_rollout():
    gains = GaitParams(2.0, 0.4)
    ja, jb = surrogate_real_cost(gains, default_sequence(), PlantConfig(), seed=6)
    rep = rollout(gains, default_sequence(), PlantConfig(), fidelity=Fidelity.REAL, seed=6)
    assert (ja, jb) == (rep.j_alpha, rep.j_beta)


# ------------------------------------------------------------- plumbing


def test_sequence_validation():
    with pytest.raises(InvalidArgumentError):
        CommandSequence(())
    with pytest.raises(InvalidArgumentError):
        CommandSequence(((Command.HALT, 0.0),))
    with pytest.raises(InvalidArgumentError):
        CommandSequence(((Command.FORWARD, -1.0),))


def test_default_sequence_runs_twenty_seconds():
    assert default_sequence().total_time == 20.0


def test_trace_csv_contract(tmp_path):
    rep = rollout(GaitParams(2.5, 0.5), default_sequence(), PlantConfig())
    path = tmp_path / "trace.csv"
    write_trace_csv(rep, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,e_p_alpha,e_p_beta,u,alpha,beta,fell"
    assert len(lines) == 1 + len(rep.trace.t)
    first = lines[1].split(",")
    assert float(first[0]) == float(rep.trace.t[0])
    assert float(first[3]) == float(rep.trace.u[0])
    assert first[6] in ("0", "1")


def test_plant_config_validation():
    with pytest.raises(InvalidArgumentError):
        PlantConfig(dt=-0.01)
    with pytest.raises(InvalidArgumentError):
        PlantConfig(fall_threshold=0.0)
    with pytest.raises(InvalidArgumentError):
        PlantConfig(real_delay_steps=-1)
