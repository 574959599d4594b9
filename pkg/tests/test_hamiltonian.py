import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adiacheck import amin, constant, landau_zener, random_smooth, sampled
from adiacheck.errors import NonHermitianSample, TimeOutOfDomain
from adiacheck.hamiltonian import (AminScenario, TimeDependentHamiltonian, from_callable, hermiticity_residual,
                                   read_csv, time_rescaled, write_csv)


def test_amin_at_zero_is_diagonal():
    H = amin(1.0, 0.01, 1.0, 10.0)
    np.testing.assert_allclose(H.evaluate(0.0), np.diag([-0.5, 0.5]), atol=1e-15)


def test_amin_at_quarter_period():
    H = amin(1.0, 0.01, 1.0, 10.0)
    np.testing.assert_allclose(H.evaluate(np.pi / 2), [[-0.5, -0.01], [-0.01, 0.5]], atol=1e-15)


def test_constant_evaluates_to_itself_and_has_zero_derivative():
    M = np.array([[1.0, 0.2 - 0.1j], [0.2 + 0.1j, -0.3]])
    H = constant(M, 3.0)
    for t in (0.0, 1.234, 3.0):
        np.testing.assert_array_equal(H.evaluate(t), M)
        np.testing.assert_array_equal(H.derivative(t), np.zeros((2, 2)))


def test_amin_derivative_at_zero():
    H = amin(1.0, 0.01, 1.0, 10.0)
    np.testing.assert_allclose(H.derivative(0.0), [[0, -0.01], [-0.01, 0]], atol=1e-15)


def test_vectorized_evaluation_matches_scalar():
    H = random_smooth(3, 4, 5.0)
    ts = np.array([0.0, 0.7, 2.5, 5.0])
    stack = H.evaluate(ts)
    assert stack.shape == (4, 3, 3)
    for t, M in zip(ts, stack):
        np.testing.assert_array_equal(H.evaluate(t), M)


@pytest.mark.parametrize("H", [amin(1.0, 0.01, 1.0, 20.0), amin(0.7, 0.3, 1.9, 5.0),
                               landau_zener(2.0, 0.4, 10.0), random_smooth(4, 1, 8.0, 0.1)],
                         ids=["amin_resonant", "amin_strong", "landau_zener", "random_smooth"])
def test_analytic_derivative_matches_finite_difference(H, rng):
    numeric = TimeDependentHamiltonian(H.dim, H.T, H.func, None, H.kind, H.params)
    ts = rng.uniform(0.01 * H.T, 0.99 * H.T, size=100)
    exact, approx = H.derivative(ts), numeric.derivative(ts)
    scale = np.abs(exact).max(axis=(1, 2)) + 1e-300
    rel = np.abs(exact - approx).max(axis=(1, 2)) / scale
    assert rel.max() <= 1e-6
    assert numeric.derivative_method == "finite_difference"
    assert H.derivative_method == "analytic"


def test_finite_difference_one_sided_at_endpoints():
    H = amin(1.0, 0.5, 2.0, 3.0)
    numeric = TimeDependentHamiltonian(2, 3.0, H.func, None, "amin", fd_step=1e-4)
    for t in (0.0, 3.0):
        np.testing.assert_allclose(numeric.derivative(t), H.derivative(t), atol=1e-7)


@pytest.mark.parametrize("t", [-1e-3, 10.001, np.nan])
def test_out_of_domain_times_raise(t):
    with pytest.raises(TimeOutOfDomain):
        amin(1.0, 0.01, 1.0, 10.0).evaluate(t)


def test_endpoint_roundoff_is_tolerated():
    H = amin(1.0, 0.01, 1.0, 10.0)
    np.testing.assert_array_equal(H.evaluate(10.0 + 1e-12), H.evaluate(10.0))
    np.testing.assert_array_equal(H.evaluate(-1e-12), H.evaluate(0.0))


def test_non_hermitian_input_rejected():
    with pytest.raises(NonHermitianSample):
        constant([[0.0, 1.0], [0.0, 0.0]], 1.0)
    bad = from_callable(lambda t: np.array([[0.0, 1j], [1j, 0.0]]), 1.0, 2)
    with pytest.raises(NonHermitianSample):
        bad.evaluate(0.5)


def test_amin_scenario_validation():
    with pytest.raises(ValueError):
        AminScenario(1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        AminScenario(1.0, 0.01, -1.0)
    sc = AminScenario(1.0, 0.01, 1.0)
    assert sc.gap(np.pi / 2) == pytest.approx(np.sqrt(1.0004), rel=1e-15)


def test_landau_zener_requires_gap():
    with pytest.raises(ValueError):
        landau_zener(1.0, 0.0, 10.0)


def _sample_path():
    ts = np.linspace(0.0, 2.0, 5)
    Ms = np.array([[[np.cos(t), 0.3 * t - 0.2j], [0.3 * t + 0.2j, -np.sin(t)]] for t in ts])
    return ts, Ms


def test_sampled_linear_segment_slope_matches_finite_difference():
    ts, Ms = _sample_path()
    H = sampled(ts, Ms)
    slope = (Ms[2] - Ms[1]) / (ts[2] - ts[1])
    numeric = TimeDependentHamiltonian(2, H.T, H.func, None, "custom_sampled", fd_step=1e-6)
    for t in np.linspace(ts[1], ts[2], 5)[1:-1]:
        np.testing.assert_allclose(H.derivative(t), slope, atol=1e-14)
        np.testing.assert_allclose(numeric.derivative(t), slope, atol=1e-8)


def test_sampled_interpolates_knots_exactly():
    ts, Ms = _sample_path()
    H = sampled(ts, Ms)
    np.testing.assert_allclose(H.evaluate(ts), Ms, atol=1e-15)
    assert H.kind == "custom_sampled" and H.T == 2.0


@pytest.mark.parametrize("times", [[0.0], [0.0, 1.0, 1.0], [0.5, 1.0]])
def test_sampled_rejects_bad_times(times):
    with pytest.raises(ValueError):
        sampled(times, np.zeros((len(times), 2, 2)))


def test_csv_round_trip(tmp_path):
    ts, Ms = _sample_path()
    path = tmp_path / "h.csv"
    write_csv(path, ts, Ms)
    H = read_csv(path)
    assert H.dim == 2
    np.testing.assert_array_equal(H.evaluate(ts), Ms)


def test_csv_wrong_column_count(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("0,1,0,0\n1,1,0,0\n")
    with pytest.raises(ValueError):
        read_csv(path)


def test_time_rescaled_path():
    H = amin(1.0, 0.2, 1.0, 5.0)
    G = time_rescaled(H, 2.0)
    assert G.T == 10.0
    np.testing.assert_allclose(G.evaluate(3.0), H.evaluate(1.5))
    np.testing.assert_allclose(G.derivative(3.0), 0.5 * H.derivative(1.5))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), dim=st.integers(1, 5),
       t=st.floats(0.0, 1.0, allow_nan=False))
def test_random_paths_are_hermitian(seed, dim, t):
    H = random_smooth(dim, seed, 7.0, 0.15)
    M = H.evaluate(7.0 * t)
    assert hermiticity_residual(M) <= 1e-12 * (1 + np.abs(M).max())
    assert hermiticity_residual(H.derivative(7.0 * t)) == 0.0


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_random_smooth_levels_never_touch_below_amplitude_limit(seed):
    limit = 1 / (2 * np.sqrt(2) * 2)
    H = random_smooth(3, seed, 20.0, 0.99 * limit)
    E = np.linalg.eigvalsh(H.evaluate(np.linspace(0, 20.0, 2001)))
    assert np.diff(E, axis=1).min() > 0.0


def test_random_smooth_is_seeded():
    a, b = random_smooth(3, 9, 4.0), random_smooth(3, 9, 4.0)
    np.testing.assert_array_equal(a.evaluate(1.3), b.evaluate(1.3))
    assert not np.allclose(a.evaluate(1.3), random_smooth(3, 10, 4.0).evaluate(1.3))
