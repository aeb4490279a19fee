import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.interpolate import PchipInterpolator

from bustraj.simulator import random_series
from bustraj.smoothing import (Algorithm, DomainError, LocregConfig, PiecewiseCubic, fit, fit_locreg,
                               fit_locreg_pchip, local_fit, pchip, pchip_slopes, running_max_clamp, sample)
from bustraj.tripframe import TimeDistanceSeries
from bustraj.validation import is_cubic, is_differentiable, is_monotone, knot_derivative_gaps

from oracles import away_from_knots, central_difference, locreg_normal_equations


def series_strategy(min_n=6, max_n=80):
    return st.builds(lambda seed, n: random_series(np.random.default_rng(seed), n),
                     st.integers(0, 2**32 - 1), st.integers(min_n, max_n))


# -- piecewise cubic container ---------------------------------------------------


def test_piecewise_cubic_evaluates_local_power_basis():
    pp = PiecewiseCubic([0.0, 1.0, 3.0], [[1, 2, 3, 4], [10, 0, -1, 0.5]])
    assert pp(0.5) == pytest.approx(1 + 2 * 0.5 + 3 * 0.25 + 4 * 0.125)
    assert pp(2.0) == pytest.approx(10 - 1 + 0.5)
    assert pp(2.0, 1) == pytest.approx(-2 + 1.5)
    assert pp(2.0, 2) == pytest.approx(-2 + 3)
    assert pp(3.0) == pytest.approx(10 - 4 + 4)  # right end belongs to the last piece
    np.testing.assert_array_equal(pp.degrees(), [3, 3])


# -- PCHIP --------------------------------------------------------------------


def test_pchip_slopes_hand_example():
    # secants 1 then 0: interior slope 0 at the flat turn, three-point end slopes
    # 1.5 on the left and -0.5 (sign flip, so 0) on the right
    np.testing.assert_allclose(pchip_slopes(np.array([0.0, 1.0, 2.0]), np.array([0.0, 1.0, 1.0])), [1.5, 0, 0])


def test_pchip_slopes_harmonic_mean_hand_example():
    # h = (1, 2), secants (2, 1): w1 = 2*2 + 1 = 5, w2 = 2 + 2*1 = 4,
    # interior slope = (5 + 4) / (5/2 + 4/1) = 9 / 6.5
    t, y = np.array([0.0, 1.0, 3.0]), np.array([0.0, 2.0, 4.0])
    assert pchip_slopes(t, y)[1] == pytest.approx(9 / 6.5, rel=1e-14)


@settings(max_examples=100, deadline=None)
@given(series_strategy(min_n=3))
def test_pchip_matches_scipy(series):
    ref = PchipInterpolator(series.t, series.d)
    pp = pchip(series.t, series.d)
    q = np.linspace(0, series.t[-1], 400)
    scale = max(1.0, series.d[-1])
    np.testing.assert_allclose(pp(q), ref(q), rtol=1e-10, atol=1e-10 * scale)
    np.testing.assert_allclose(pp(q, 1), ref(q, 1), rtol=1e-9, atol=1e-9 * scale)


def test_pchip_interpolates_and_rejects_decreasing():
    t, y = np.array([0.0, 2, 5, 6]), np.array([0.0, 3, 3, 9])
    np.testing.assert_allclose(pchip(t, y)(t), y)
    with pytest.raises(ValueError):
        pchip(t, np.array([0.0, 3, 2, 9]))


@settings(max_examples=100, deadline=None)
@given(series_strategy(min_n=3))
def test_pchip_monotone_and_c1(series):
    traj = fit(series, Algorithm.PCHIP)
    assert is_monotone(traj)
    assert np.all(knot_derivative_gaps(traj) <= 1e-9)
    assert np.all(traj.speed(np.linspace(0, series.t[-1], 500)) >= -1e-12)


# -- LOCREG -------------------------------------------------------------------


@pytest.mark.parametrize("seed", range(10))
def test_locreg_matches_normal_equations(seed):
    s = random_series(np.random.default_rng(seed), 60)
    got = local_fit(s.t, s.d, s.t, LocregConfig())
    ref = locreg_normal_equations(s.t, s.d, s.t)
    scale = max(1.0, s.d[-1])
    np.testing.assert_allclose(got.value, ref[:, 0], rtol=1e-8, atol=1e-8 * scale)
    np.testing.assert_allclose(got.slope, ref[:, 1], rtol=1e-6, atol=1e-8 * scale)
    np.testing.assert_allclose(got.accel, ref[:, 2], rtol=1e-5, atol=1e-8 * scale)


def test_locreg_small_series_uses_widened_bandwidth():
    s = random_series(np.random.default_rng(1), 12)
    got = local_fit(s.t, s.d, s.t, LocregConfig())
    ref = locreg_normal_equations(s.t, s.d, s.t)
    np.testing.assert_allclose(got.value, ref[:, 0], rtol=1e-8, atol=1e-6)


def test_locreg_reproduces_a_cubic_exactly():
    t = np.arange(0.0, 120.0, 3.0)
    d = 0.001 * t**3 + 0.05 * t**2 + 2 * t
    fit_ = local_fit(t, d, t, LocregConfig())
    np.testing.assert_allclose(fit_.value, d, rtol=1e-9, atol=1e-8)
    np.testing.assert_allclose(fit_.slope, 0.003 * t**2 + 0.1 * t + 2, rtol=1e-8, atol=1e-8)
    np.testing.assert_allclose(fit_.accel, 0.006 * t + 0.1, rtol=1e-7, atol=1e-8)


def test_locreg_needs_more_points_than_degree():
    s = TimeDistanceSeries.from_arrays([0, 1, 2, 3], [0, 1, 2, 3])
    with pytest.raises(ValueError):
        fit_locreg(s)


def test_locreg_rank_fallback_warns():
    # many repeated-position knots leave distinct times, but a tiny bandwidth
    # can leave only two neighbours; the fit must degrade rather than fail
    s = TimeDistanceSeries.from_arrays([0, 1, 2, 100, 200, 300, 301, 302], [0, 1, 2, 50, 90, 130, 131, 132])
    smoothed, traj = fit_locreg(s, LocregConfig(bandwidth_points=2))
    assert np.all(np.isfinite(smoothed.x))
    assert traj.warnings


def test_locreg_is_not_piecewise_and_not_cubic():
    s = random_series(np.random.default_rng(3), 80)
    traj = fit(s, "locreg")
    assert traj.pieces is None and not is_cubic(traj)
    np.testing.assert_allclose(traj.position(s.t), traj.knots_x)


# -- LOCREG-PCHIP ---------------------------------------------------------------


def test_running_max_clamp():
    np.testing.assert_array_equal(running_max_clamp([0, 5, 3, 4, 7, 6]), [0, 5, 5, 5, 7, 7])


@settings(max_examples=60, deadline=None)
@given(series_strategy(min_n=8, max_n=120))
def test_locreg_pchip_clamps_then_interpolates(series):
    smoothed, _ = fit_locreg(series)
    traj = fit_locreg_pchip(series)
    expect = np.maximum.accumulate(smoothed.x)
    np.testing.assert_array_equal(traj.knots_x, expect)
    np.testing.assert_allclose(traj.position(series.t), expect, rtol=0, atol=1e-9 * max(1, abs(expect).max()))
    assert is_monotone(traj) and is_cubic(traj) and is_differentiable(traj)


def test_locreg_pchip_short_series_reduces_degree():
    s = TimeDistanceSeries.from_arrays([0, 4, 9, 15], [0, 10, 30, 45])
    traj = fit_locreg_pchip(s)
    assert traj.algorithm is Algorithm.LOCREG_PCHIP and is_monotone(traj)


# -- trajectories ---------------------------------------------------------------


def test_lseg_kinematics():
    s = TimeDistanceSeries.from_arrays([0, 10, 20, 25], [0, 50, 150, 150])
    traj = fit(s, "lseg")
    assert traj.position(15.0) == pytest.approx(100.0)
    np.testing.assert_allclose(traj.speed([5, 15, 22]), [5, 10, 0])
    np.testing.assert_allclose(traj.acceleration([5, 15, 22]), [0.5, -1.0, 0.0])  # (v_{i+1} - v_i) / h_i; last interval 0
    assert is_monotone(traj) and not is_cubic(traj) and not is_differentiable(traj)


@pytest.mark.parametrize("alg", list(Algorithm))
def test_domain_is_enforced(alg):
    s = random_series(np.random.default_rng(4), 30)
    traj = fit(s, alg)
    for bad in (-0.5, s.t[-1] + 0.5, np.nan):
        with pytest.raises(DomainError):
            traj.position(bad)


@pytest.mark.parametrize("alg", [Algorithm.LSEG, Algorithm.PCHIP])
def test_interpolating_algorithms_start_at_zero(alg):
    s = random_series(np.random.default_rng(5), 30)
    assert fit(s, alg).position(0.0) == 0.0


@pytest.mark.parametrize("alg", [Algorithm.PCHIP, Algorithm.LOCREG_PCHIP])
@pytest.mark.parametrize("seed", range(5))
def test_derivatives_agree_with_finite_differences(alg, seed):
    s = random_series(np.random.default_rng(100 + seed), 60)
    traj = fit(s, alg)
    q = away_from_knots(s.t)
    step = 1e-3
    np.testing.assert_allclose(traj.speed(q), central_difference(traj.position, q, step), rtol=1e-4, atol=1e-4)
    np.testing.assert_allclose(traj.acceleration(q), central_difference(traj.speed, q, step), rtol=1e-3, atol=1e-3)


def test_sample_covers_domain():
    s = TimeDistanceSeries.from_arrays([0, 4, 9, 15.5], [0, 10, 30, 45])
    cols = sample(fit(s, "pchip"), 2.0)
    assert cols["t_s"][0] == 0 and cols["t_s"][-1] == 15.5
    assert np.all(np.diff(cols["t_s"]) > 0)
    assert set(cols) == {"t_s", "x_m", "v_mps", "a_mps2"}
    with pytest.raises(ValueError):
        sample(fit(s, "pchip"), 0)
