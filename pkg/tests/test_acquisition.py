"""Entropy-search acquisition: grid, p_min, entropy change, selection."""

import math

import numpy as np
import pytest

from simreal_opt import (
    AcquisitionConfig,
    Budget,
    CompositeKernelConfig,
    Fidelity,
    NoiseConfig,
    Observation,
    RQConfig,
    aug,
    entropy,
    expected_entropy_change,
    fit,
    make_grid,
    pmin_distribution,
    select_next,
)
from simreal_opt.bounds import Box
from simreal_opt.errors import BudgetExhaustedError, InvalidArgumentError

LN_200 = 5.298317366548036  # ln(200), closed form

UNIT_1D = Box((0.0,), (1.0,))

KERNEL_1D = CompositeKernelConfig(
    sim=RQConfig(signal_variance=1.0, length_scales=(0.3,), alpha=2.0),
    err=RQConfig(signal_variance=0.3, length_scales=(0.5,), alpha=2.0),
)

FAST_ACQ = AcquisitionConfig(grid_size=6, mc_samples=50, fantasy_draws=3)


def real_obs(x, cost):
    return Observation(aug(x, Fidelity.REAL), cost)


# --- make_grid ---


def test_grid_1d_resolution_3_hits_endpoints_and_midpoint():
    pts = make_grid(UNIT_1D, 3, Fidelity.REAL)
    assert [p.x[0] for p in pts] == [0.0, 0.5, 1.0]
    assert all(p.delta is Fidelity.REAL for p in pts)


def test_grid_is_deterministic():
    a = make_grid(Box.unit(2), 40, Fidelity.SIMULATION)
    b = make_grid(Box.unit(2), 40, Fidelity.SIMULATION)
    assert [p.x for p in a] == [p.x for p in b]


def test_grid_stays_inside_bounds_and_spans_first_axis():
    box = Box((2.0, 0.0), (4.2, 0.3))
    pts = make_grid(box, 50, Fidelity.REAL)
    xs = np.array([p.x for p in pts])
    assert np.all(xs >= np.array(box.lower) - 1e-12)
    assert np.all(xs <= np.array(box.upper) + 1e-12)
    assert xs[0, 0] == 2.0 and xs[-1, 0] == 4.2


def test_grid_second_axis_is_roughly_uniform():
    # Kronecker stride: no quarter of the range should be starved.
    pts = make_grid(Box.unit(2), 64, Fidelity.REAL)
    second = np.array([p.x[1] for p in pts])
    counts, _ = np.histogram(second, bins=4, range=(0.0, 1.0))
    assert counts.min() >= 8

def test_grid_rejects_size_below_two():
    with pytest.raises(InvalidArgumentError):
        make_grid(UNIT_1D, 1, Fidelity.REAL)


# --- entropy ---


def test_entropy_uniform_four():
    assert entropy([0.25] * 4) == pytest.approx(math.log(4.0), abs=1e-12)


def test_entropy_point_mass_is_zero():
    assert entropy([0.0, 1.0, 0.0]) == 0.0


def test_entropy_fair_coin():
    assert entropy([0.5, 0.5]) == pytest.approx(math.log(2.0), abs=1e-12)


def test_entropy_uniform_200_matches_closed_form():
    assert entropy([1.0 / 200] * 200) == pytest.approx(LN_200, abs=1e-9)


def test_entropy_rejects_bad_distributions():
    with pytest.raises(InvalidArgumentError):
        entropy([0.7, 0.7])
    with pytest.raises(InvalidArgumentError):
        entropy([-0.1, 1.1])


def test_entropy_bounds_on_random_distributions():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(2, 30))
        w = rng.random(n) + 1e-12
        h = entropy(w / w.sum())
        assert 0.0 <= h <= math.log(n) + 1e-12


# --- pmin_distribution ---


def fitted_1d(costs, xs=(0.0, 0.25, 0.5, 0.75, 1.0), noise=None):
    obs = [real_obs((x,), c) for x, c in zip(xs, costs)]
    return fit(obs, KERNEL_1D, noise or NoiseConfig())


def test_pmin_is_a_probability_distribution():
    model = fitted_1d([1.0, 0.8, -2.0, 0.9, 1.1])
    grid = make_grid(UNIT_1D, 5, Fidelity.REAL)
    dist = pmin_distribution(model, grid, 200, seed=3)
    assert abs(float(dist.probabilities.sum()) - 1.0) <= 1e-9
    assert np.all(dist.probabilities >= 0.0)
    assert len(dist.points) == 5


def test_pmin_concentrates_on_a_deep_minimum():
    model = fitted_1d([1.0, 0.8, -2.0, 0.9, 1.1])
    grid = make_grid(UNIT_1D, 5, Fidelity.REAL)
    dist = pmin_distribution(model, grid, 200, seed=3)
    assert dist.probabilities[2] >= 0.95


def test_pmin_respects_posterior_symmetry():
    """Two queries mirrored about a lone observation split the mass."""
    model = fit([real_obs((0.5,), 0.0)], KERNEL_1D, NoiseConfig())
    grid = [aug((0.25,), Fidelity.REAL), aug((0.75,), Fidelity.REAL)]
    dist = pmin_distribution(model, grid, 2000, seed=11)
    # MC proportion noise: 3 sigma at S=2000 is ~0.034
    assert abs(dist.probabilities[0] - 0.5) <= 0.04


def test_pmin_same_seed_is_identical():
    model = fitted_1d([0.4, 0.1, 0.3, 0.2, 0.5])
    grid = make_grid(UNIT_1D, 5, Fidelity.REAL)
    a = pmin_distribution(model, grid, 200, seed=9)
    b = pmin_distribution(model, grid, 200, seed=9)
    assert np.array_equal(a.probabilities, b.probabilities)


def test_pmin_needs_two_grid_points():
    model = fitted_1d([0.4, 0.1, 0.3, 0.2, 0.5])
    with pytest.raises(InvalidArgumentError):
        pmin_distribution(model, [aug((0.5,), Fidelity.REAL)], 200, seed=0)


# --- expected_entropy_change ---


def test_entropy_change_vanishes_at_an_observed_noiseless_point():
    noiseless = NoiseConfig(sim_noise_variance=0.0, real_noise_variance=0.0)
    model = fitted_1d([1.0, 0.8, -2.0, 0.9, 1.1], noise=noiseless)
    grid = make_grid(UNIT_1D, 5, Fidelity.REAL)
    change = expected_entropy_change(model, grid, grid[2], FAST_ACQ, seed=5)
    assert abs(change) <= 0.05


def test_entropy_change_prefers_the_unexplored_point():
    """On a one-observation model the far query has more to reveal."""
    model = fit([real_obs((0.1,), 0.0)], KERNEL_1D, NoiseConfig())
    grid = [aug((0.1,), Fidelity.REAL), aug((0.9,), Fidelity.REAL)]
    at_known = expected_entropy_change(model, grid, grid[0], FAST_ACQ, seed=2)
    at_far = expected_entropy_change(model, grid, grid[1], FAST_ACQ, seed=2)
    assert at_far >= at_known


def test_entropy_change_is_deterministic():
    model = fitted_1d([0.4, 0.1, 0.3, 0.2, 0.5])
    grid = make_grid(UNIT_1D, 5, Fidelity.REAL)
    a = expected_entropy_change(model, grid, grid[1], FAST_ACQ, seed=17)
    b = expected_entropy_change(model, grid, grid[1], FAST_ACQ, seed=17)
    assert a == b


def test_mean_entropy_change_is_nonnegative_within_mc_noise():
    rng = np.random.default_rng(0)
    kernel = CompositeKernelConfig()
    grid = make_grid(Box.unit(2), 6, Fidelity.REAL)
    for trial in range(10):
        obs = [
            Observation(
                aug(tuple(rng.random(2)),
                    Fidelity.REAL if rng.random() < 0.5 else Fidelity.SIMULATION),
                float(rng.standard_normal()),
            )
            for _ in range(4)
        ]
        model = fit(obs, kernel, NoiseConfig())
        changes = [
            expected_entropy_change(model, grid, g, FAST_ACQ, seed=100 + trial)
            for g in grid
        ]
        assert float(np.mean(changes)) >= -0.05


# --- select_next ---


def test_select_never_returns_real_without_real_budget():
    model = fitted_1d([0.4, 0.1, 0.3, 0.2, 0.5])
    sel = select_next(model, UNIT_1D, Budget(max_real=0, max_total=10), FAST_ACQ, seed=1)
    assert sel.point.delta is Fidelity.SIMULATION


def test_select_respects_random_budget_states():
    model = fitted_1d([0.4, 0.1, 0.3, 0.2, 0.5])
    rng = np.random.default_rng(23)
    for _ in range(20):
        max_total = int(rng.integers(1, 5))
        max_real = int(rng.integers(0, max_total + 1))
        used_total = int(rng.integers(0, max_total + 1))
        used_real = int(rng.integers(0, min(max_real, used_total) + 1))
        budget = Budget(max_real=max_real, max_total=max_total,
                        used_real=used_real, used_total=used_total)
        if not budget.sim_feasible() and not budget.real_feasible():
            with pytest.raises(BudgetExhaustedError):
                select_next(model, UNIT_1D, budget, FAST_ACQ, seed=4)
            continue
        sel = select_next(model, UNIT_1D, budget, FAST_ACQ, seed=4)
        if sel.point.delta is Fidelity.REAL:
            assert budget.real_feasible()


def test_select_raises_when_no_budget_remains():
    model = fitted_1d([0.4, 0.1, 0.3, 0.2, 0.5])
    spent = Budget(max_real=1, max_total=3, used_real=1, used_total=3)
    with pytest.raises(BudgetExhaustedError):
        select_next(model, UNIT_1D, spent, FAST_ACQ, seed=1)


def test_select_forced_to_the_single_unexcluded_candidate():
    model = fitted_1d([0.4, 0.1, 0.3, 0.2, 0.5])
    budget = Budget(max_real=0, max_total=10)
    keep = 4
    excluded = {
        (Fidelity.SIMULATION, i) for i in range(FAST_ACQ.grid_size) if i != keep
    }
    sel = select_next(model, UNIT_1D, budget, FAST_ACQ, seed=6, excluded=excluded)
    assert sel.index == keep
    assert sel.point.delta is Fidelity.SIMULATION


def test_select_raises_when_everything_is_excluded():
    model = fitted_1d([0.4, 0.1, 0.3, 0.2, 0.5])
    budget = Budget(max_real=0, max_total=10)
    excluded = {(Fidelity.SIMULATION, i) for i in range(FAST_ACQ.grid_size)}
    with pytest.raises(BudgetExhaustedError):
        select_next(model, UNIT_1D, budget, FAST_ACQ, seed=6, excluded=excluded)


def test_select_is_deterministic():
    model = fitted_1d([0.4, 0.1, 0.3, 0.2, 0.5])
    budget = Budget(max_real=5, max_total=10)
    a = select_next(model, UNIT_1D, budget, FAST_ACQ, seed=31)
    b = select_next(model, UNIT_1D, budget, FAST_ACQ, seed=31)
    assert (a.point, a.index, a.score) == (b.point, b.index, b.score)


def test_exact_ties_break_to_simulation_at_the_lowest_index():
    """A posterior that no observation can move scores every candidate
    zero, so the tie rule alone decides."""
    acq = AcquisitionConfig(grid_size=5, mc_samples=50, fantasy_draws=3)
    grid = make_grid(UNIT_1D, 5, Fidelity.REAL)
    noiseless = NoiseConfig(sim_noise_variance=0.0, real_noise_variance=0.0)
    obs = [Observation(g, 1.0 + 0.5 * i) for i, g in enumerate(grid)]
    obs += [Observation(aug(g.x, Fidelity.SIMULATION), 1.0 + 0.5 * i)
            for i, g in enumerate(grid)]
    model = fit(obs, KERNEL_1D, noiseless)
    sel = select_next(model, UNIT_1D, Budget(max_real=5, max_total=10), acq, seed=8)
    assert sel.point.delta is Fidelity.SIMULATION
    assert sel.index == 0
    assert sel.entropy_change == 0.0


def test_real_wins_at_equal_cost_when_the_gap_dominates():
    """With a huge err kernel only real evaluations resolve p_min."""
    acq = AcquisitionConfig(grid_size=5, mc_samples=50, fantasy_draws=3,
                            cost_sim=1.0, cost_real=1.0)
    kernel = CompositeKernelConfig(
        sim=RQConfig(signal_variance=1e-3, length_scales=(0.3,), alpha=2.0),
        err=RQConfig(signal_variance=4.0, length_scales=(0.5,), alpha=2.0),
    )
    rng = np.random.default_rng(19)
    real_picks = 0
    for trial in range(10):
        obs = [
            Observation(aug((float(rng.random()),), Fidelity.SIMULATION),
                        float(rng.standard_normal()))
            for _ in range(3)
        ]
        model = fit(obs, kernel, NoiseConfig())
        sel = select_next(model, UNIT_1D, Budget(max_real=5, max_total=10),
                          acq, seed=trial)
        real_picks += sel.point.delta is Fidelity.REAL
    assert real_picks >= 8


def test_pmin_entropy_never_exceeds_log_grid_size():
    rng = np.random.default_rng(5)
    grid = make_grid(UNIT_1D, 8, Fidelity.REAL)
    for trial in range(10):
        obs = [real_obs((float(rng.random()),), float(rng.standard_normal()))
               for _ in range(3)]
        model = fit(obs, KERNEL_1D, NoiseConfig())
        dist = pmin_distribution(model, grid, 200, seed=trial)
        h = entropy(dist.probabilities)
        assert 0.0 <= h <= math.log(len(grid)) + 1e-12
