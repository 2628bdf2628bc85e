import math

import numpy as np
import pytest
from scipy.optimize import brentq

from lgpolymer.asymptotics import (AccuracyError, AsymptoticConfig, ConfigError, FredholmSpec, f_bar, f_bbp,
                                   f_gue, gaussian_cdf, gue_cdf_table, phase_constants, solve_theta_c)
from lgpolymer.specialfn import EULER_GAMMA, digamma, polygamma
from oracles import airy_fredholm_bbp, airy_fredholm_gue, psi2_series


def _bisect(theta, p, steps=256):
    lo, hi = 0.0, theta
    for _ in range(steps):
        mid = (lo + hi) / 2
        if polygamma(1, mid) - p * polygamma(1, theta - mid) > 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def test_theta_c_symmetric_cases():
    assert solve_theta_c(2.0, 1.0) == pytest.approx(1.0, abs=1e-14)
    assert solve_theta_c(1.0, 1.0) == pytest.approx(0.5, abs=1e-14)


@pytest.mark.parametrize("theta, p", [(2.0, 2.0), (0.5, 5.0), (4.0, 1.3)])
def test_theta_c_residual(theta, p):
    tc = solve_theta_c(theta, p)
    assert 0 < tc < theta
    assert abs(polygamma(1, tc) - p * polygamma(1, theta - tc)) <= 1e-12 * polygamma(1, tc)
    assert tc == pytest.approx(_bisect(theta, p), abs=1e-14)


def test_phase_constants_theta2_p1():
    pc = phase_constants(AsymptoticConfig(2.0, 0.4, p=1.0))
    assert pc.theta_c == pytest.approx(1.0, abs=1e-14)
    assert pc.f == pytest.approx(2 * EULER_GAMMA, rel=1e-13)
    assert pc.sigma == pytest.approx((-psi2_series(1.0)) ** (1 / 3), rel=1e-12)
    assert pc.f_bar == pytest.approx(-digamma(0.4) - digamma(1.6), rel=1e-13)
    assert pc.sigma ** 3 == pytest.approx((-polygamma(2, 1.0) - polygamma(2, 1.0)) / 2, rel=1e-13)


def test_f_bar_domain():
    with pytest.raises(ConfigError):
        f_bar(2.0, 2.5, 1.0)
    with pytest.raises(ConfigError):
        phase_constants(AsymptoticConfig(2.0, 0.0, p=1.0))
    assert phase_constants(AsymptoticConfig(2.0, 2.0, p=1.0)).f_bar is None


@pytest.mark.parametrize("theta", [0.5, 1.0, 2.0, 4.0])
@pytest.mark.parametrize("p", [1.0, 2.0, 5.0])
def test_sigma_positive(theta, p):
    assert phase_constants(AsymptoticConfig(theta, theta, p=p)).sigma > 0


def test_ratio_defaults_to_m_over_n():
    assert AsymptoticConfig(2.0, 1.0, n=4, m=10).ratio == 2.5


# ------------------------------------------------------------ limit laws

@pytest.mark.parametrize("t", [-6.0, -4.0, -2.0, 0.0, 2.0, 4.0])
def test_gue_against_airy_oracle(t):
    assert f_gue(t) == pytest.approx(airy_fredholm_gue(t), abs=1e-6)


def test_gue_far_right():
    assert f_gue(10.0) == pytest.approx(1.0, abs=1e-6)


def test_gue_median():
    t_med = brentq(lambda s: airy_fredholm_gue(s) - 0.5, -3, 0, xtol=1e-12)
    assert f_gue(t_med) == pytest.approx(0.5, abs=1e-5)


def test_gue_monotone_on_grid():
    vals = [f_gue(t) for t in np.arange(-6, 4.0001, 0.1)]
    assert all(0 <= v <= 1 for v in vals)
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert f_gue(-2) < f_gue(0) < f_gue(2)


@pytest.mark.parametrize("t", [-4.0, -2.0, 0.0, 2.0])
def test_determinant_stability(t):
    big = FredholmSpec(L=24.0, nodes=256, check=False)
    assert abs(f_gue(t) - f_gue(t, big)) < 1e-7
    for b in ([0.0], [-8.0], [1.0, 0.5]):
        assert abs(f_bbp(t, b) - f_bbp(t, b, big)) < 1e-7


@pytest.mark.parametrize("t", [-4.0, -1.0, 0.0, 2.0])
def test_bbp_empty_is_gue(t):
    assert abs(f_bbp(t, []) - f_gue(t)) <= 1e-10


@pytest.mark.parametrize("b", [-8.0, -2.0, -0.5])
@pytest.mark.parametrize("t", [-4.0, -2.0, 0.0, 2.0])
def test_bbp_against_rank_one_oracle(b, t):
    assert f_bbp(t, [b]) == pytest.approx(airy_fredholm_bbp(t, b, nodes=80), abs=1e-6)


def test_bbp_approaches_gue_from_below():
    # |F_BBP;-U - F_GUE| shrinks like 1/U; it is not yet 1e-3 at U = 8
    gaps = [max(abs(f_bbp(t, [-U]) - f_gue(t)) for t in (-4, -3, -2, -1, 0, 1, 2)) for U in (8, 32, 128, 512)]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[0] > 1e-3 and gaps[-1] < 1e-3
    assert all(f_bbp(t, [-8.0]) <= f_gue(t) + 1e-12 for t in (-3, -1, 1))


def test_bbp_b0_converged():
    v = f_bbp(0.0, [0.0])
    assert 0 < v < 1
    assert abs(v - f_bbp(0.0, [0.0], FredholmSpec(nodes=256, check=False))) < 1e-6


def test_bbp_contour_conflict():
    with pytest.raises(ConfigError):
        f_bbp(0.0, [1.0], FredholmSpec(c0=0.5))
    with pytest.raises(ConfigError):
        f_bbp(0.0, [float("nan")])


def test_accuracy_error_on_coarse_grid():
    with pytest.raises(AccuracyError):
        f_gue(-6.0, FredholmSpec(nodes=32, gap=1.0, max_nodes=64))


def test_gaussian_cdf():
    assert gaussian_cdf(0.0) == 0.5
    assert abs(gaussian_cdf(8.0) - 1) < 1e-14
    assert gaussian_cdf(1.0) == pytest.approx(0.8413447460685429, rel=1e-15)


def test_gue_table_interpolates():
    tab = gue_cdf_table(-5, 3, 0.05)
    for t in (-3.33, -1.01, 0.72):
        assert tab(t) == pytest.approx(airy_fredholm_gue(t), abs=2e-4)
    assert tab(-50) == 0 and tab(50) == 1
