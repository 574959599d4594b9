import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from adiacheck import (PropagatorOptions, amin, constant, evolution_operator, evolve, landau_zener,
                       random_smooth, short_time_departure)
from adiacheck.conditions import population_rates
from adiacheck.errors import GridMismatch, NonNormalizedInput, StepTooCoarse
from adiacheck.propagate import (amplitudes_in_instantaneous_basis, default_dt, energy_spread, make_grid,
                                 propagators, time_averaged_hamiltonian, uncertainty_time, unitarity_defect)
from adiacheck.spectral import decompose

from conftest import random_unit_vector


def test_constant_eigenstate_picks_up_phase_only():
    H = constant(np.diag([-0.5, 0.25, 1.0]), 7.0)
    res = evolve(H, 1, PropagatorOptions(dt=0.01))
    np.testing.assert_allclose(res.states[-1], np.exp(-0.25j * 7.0) * np.eye(3)[1], atol=1e-12)
    np.testing.assert_allclose(res.populations[:, 1], 1.0, atol=1e-12)
    assert res.final_fidelity == pytest.approx(1.0, abs=1e-12)


def test_constant_evolution_operator_is_matrix_exponential():
    M = np.array([[0.3, 0.2 - 0.5j], [0.2 + 0.5j, -0.7]])
    U = evolution_operator(constant(M, 3.0), PropagatorOptions(dt=0.01))
    np.testing.assert_allclose(U, expm(-1j * 3.0 * M), atol=1e-12)


def test_constant_populations_do_not_move(rng):
    M = np.array([[1.0, 0.4, 0.0], [0.4, 0.0, 0.2j], [0.0, -0.2j, -1.0]])
    H = constant(M, 5.0)
    res = evolve(H, random_unit_vector(rng, 3), PropagatorOptions(dt=0.05))
    assert np.abs(res.populations - res.populations[0]).max() <= 1e-10


@pytest.mark.parametrize("H", [amin(1.0, 0.01, 1.0, 20.0), landau_zener(1.0, 0.3, 20.0),
                               random_smooth(4, 3, 10.0, 0.1)], ids=["amin", "lz", "random"])
def test_evolution_operator_unitary_and_consistent_with_evolve(H):
    opts = PropagatorOptions(dt=0.01)
    grid, U = propagators(H, opts)
    assert max(unitarity_defect(u) for u in U[:: max(1, len(U) // 50)]) <= 1e-10
    assert unitarity_defect(U[-1]) <= 1e-10
    for k in range(H.dim):
        res = evolve(H, np.eye(H.dim)[k], opts, basis=False)
        np.testing.assert_allclose(res.states[-1], U[-1][:, k], atol=1e-9)


def test_independent_ode_oracle():
    """Compare with a high-accuracy Runge-Kutta solve of the Schrodinger equation."""
    H = amin(1.0, 0.3, 1.0, 6.0)
    psi0 = np.array([1.0, 0.0], dtype=complex)
    sol = solve_ivp(lambda t, y: -1j * (H.evaluate(t) @ y), (0.0, 6.0), psi0,
                    method="DOP853", rtol=1e-12, atol=1e-12)
    errs = []
    for dt in (1e-2, 5e-3):
        res = evolve(H, psi0, PropagatorOptions(dt=dt), basis=False)
        errs.append(np.linalg.norm(res.states[-1] - sol.y[:, -1]))
    assert errs[1] <= 1e-4
    assert 3.0 <= errs[0] / errs[1] <= 5.0  # second order


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), dim=st.integers(2, 5))
def test_norm_conserved_and_populations_sum_to_one(seed, dim):
    rng = np.random.default_rng(seed)
    H = random_smooth(dim, seed, 6.0, 0.15)
    res = evolve(H, random_unit_vector(rng, dim), PropagatorOptions(dt=0.02))
    assert np.abs(np.linalg.norm(res.states, axis=1) - 1).max() <= 1e-10
    assert np.abs(res.populations.sum(axis=1) - 1).max() <= 1e-9


@pytest.mark.parametrize("seed", range(20))
def test_population_rate_identity_random_three_level(seed):
    H = random_smooth(3, seed, 8.0, 0.1)
    level = seed % 3
    res = evolve(H, level, PropagatorOptions(dt=1e-3))
    fd, pred = population_rates(res, decompose(H, res.grid))
    assert np.abs(fd - pred)[1:-1].max() <= 1e-5


def test_amin_resonant_population_matches_closed_form():
    sc_T = np.pi / 0.01
    res = evolve(amin(1.0, 0.01, 1.0, sc_T), 0, PropagatorOptions(dt=1e-3))
    expected = (np.cos(0.01 * res.grid) + 1) / 2
    assert np.abs(res.populations[:, 0] - expected).max() <= 0.05
    assert res.final_fidelity <= 0.05


def test_amin_one_unit_stays_in_ground_state():
    res = evolve(amin(1.0, 0.01, 1.0, 1.0), 0, PropagatorOptions(dt=1e-3))
    assert res.final_fidelity == pytest.approx((np.cos(0.01) + 1) / 2, abs=5e-5)


def test_non_normalized_input():
    with pytest.raises(NonNormalizedInput):
        evolve(amin(1.0, 0.01, 1.0, 1.0), np.array([1.0, 1.0]))


def test_grid_mismatch():
    H = amin(1.0, 0.01, 1.0, 1.0)
    res = evolve(H, 0, PropagatorOptions(dt=0.01))
    with pytest.raises(GridMismatch):
        amplitudes_in_instantaneous_basis(res, decompose(H, np.linspace(0, 1, 50)))


def test_default_step_and_grid():
    H = amin(1.0, 0.01, 1.0, 10.0)
    assert default_dt(H) * H.max_norm(256) == pytest.approx(0.05)
    grid = make_grid(H, PropagatorOptions(dt=0.3))
    assert grid[0] == 0.0 and grid[-1] == 10.0
    assert np.diff(grid).max() <= 0.3


def test_refinement_accepts_fine_step_and_rejects_coarse():
    H = amin(1.0, 0.01, 1.0, 20.0)
    res = evolve(H, 0, PropagatorOptions(dt=1e-2, refinement=True))
    assert res.refinement_difference <= 10 * 1e-4
    with pytest.raises(StepTooCoarse):
        evolve(landau_zener(4.0, 1.0, 20.0), 0, PropagatorOptions(dt=0.5, refinement=True))


def test_short_time_eigenstate_has_no_departure():
    H = constant(np.diag([-1.0, 2.0]), 1.0)
    d = short_time_departure(H, np.array([1.0, 0.0]), 0.1)
    assert d.p_exact == pytest.approx(0.0, abs=1e-20)
    assert d.p_predicted == 0.0


@pytest.mark.parametrize("t", [1e-1, 1e-2, 1e-3])
def test_short_time_two_level_closed_form(t):
    gap = 1.3
    H = constant(np.diag([-gap / 2, gap / 2]), 1.0)
    psi0 = np.array([1.0, 1.0]) / np.sqrt(2)
    d = short_time_departure(H, psi0, t)
    assert d.p_predicted == pytest.approx((gap / 2) ** 2 * t**2, rel=1e-12)
    assert d.p_exact == pytest.approx(np.sin(gap * t / 2) ** 2, rel=1e-9)
    assert abs(d.p_exact / d.p_predicted - 1) <= (gap * t) ** 2 / 12 * 1.01


def test_short_time_flags_long_times():
    H = constant(np.diag([-1.0, 1.0]), 5.0)
    psi0 = np.array([1.0, 1.0]) / np.sqrt(2)
    with pytest.warns(UserWarning):
        d = short_time_departure(H, psi0, 1.0)
    assert d.outside_regime


def test_time_average_and_spread():
    H = amin(1.0, 0.5, 1.0, 3.0)
    avg = time_averaged_hamiltonian(H, 2.0)
    exact = np.array([[-0.5, -0.5 * (1 - np.cos(2.0)) / 2.0], [-0.5 * (1 - np.cos(2.0)) / 2.0, 0.5]])
    np.testing.assert_allclose(avg, exact, atol=1e-9)
    assert energy_spread(np.diag([1.0, -1.0]), np.array([1.0, 1.0]) / np.sqrt(2)) == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(20))
def test_short_time_quadratic_law_random_four_level(seed):
    rng = np.random.default_rng(1000 + seed)
    H = random_smooth(4, seed, 10.0, 0.1)
    psi0 = random_unit_vector(rng, 4)
    t = uncertainty_time(H, psi0, 1e-3)
    d = short_time_departure(H, psi0, t)
    assert t * d.delta_h == pytest.approx(1e-3, rel=1e-9)
    assert 0.95 <= d.p_exact / d.p_predicted <= 1.05
    t2 = uncertainty_time(H, psi0, 1e-2)
    assert short_time_departure(H, psi0, t2).p_exact <= 2 * 0.01**2
