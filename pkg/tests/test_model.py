import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import simpson

from carleman_cip.model import (
    TEST_SUPPORT,
    CarlemanParams,
    CoefficientProfile,
    ForwardGrid,
    InversionGrid,
    carleman_weight,
    make_true_profile,
    smoothed_delta,
    travel_time,
    travel_times,
    true_values,
)


def test_grid_spacing():
    g = ForwardGrid()
    assert g.dx == pytest.approx(10 / 3000)
    assert g.dt == pytest.approx(0.02)
    assert g.x[0] == -5 and g.x[-1] == 5
    ig = InversionGrid()
    assert ig.dx == pytest.approx((3 - 1 / 150) / 898)
    assert ig.dt == pytest.approx(0.02)
    assert ig.shape == (899, 300)


@pytest.mark.parametrize(
    "kw", [dict(a=0), dict(T=-1), dict(Nx=2), dict(Nt=2)]
)
def test_forward_grid_rejects(kw):
    with pytest.raises(ValueError):
        ForwardGrid(**kw)


def test_inversion_grid_rejects():
    with pytest.raises(ValueError):
        InversionGrid(eps=3.0, xmax=3.0)
    with pytest.raises(ValueError):
        InversionGrid(T=0)


def test_params_validation():
    CarlemanParams(lam=2, alpha=0.3, beta=1e-11)
    for kw in (dict(lam=1.0), dict(alpha=0.5), dict(alpha=0), dict(beta=1.0), dict(n_iters=0)):
        with pytest.raises(ValueError):
            CarlemanParams(**kw)


def test_true_profile_values():
    assert true_values(1, [1.0])[0] == 15.0
    assert true_values(1, [0.5])[0] == 1.0
    assert true_values(3, [1.0])[0] == 10.0
    assert true_values(3, [1.2])[0] == 1.0


def test_true_profiles_equal_one_off_support(forward_grid):
    x = forward_grid.x
    for kind, (lo, hi) in TEST_SUPPORT.items():
        c = make_true_profile(kind, forward_grid)
        off = (x < lo - 1e-12) | (x > hi + 1e-12)
        assert np.all(c.values[off] == 1.0)
        assert c.values.min() >= 1.0 and c.values.max() <= 16.0


def test_test1_peak():
    x = np.linspace(0, 2, 201)
    c = make_true_profile(1, x)
    assert c.max() == (15.0, 1.0)


def test_make_true_profile_errors():
    with pytest.raises(ValueError):
        make_true_profile(5, np.linspace(0, 3, 10))
    with pytest.raises(ValueError):
        make_true_profile(2, np.linspace(0, 1, 10))


def test_travel_time_homogeneous():
    x = np.linspace(0, 1, 101)
    assert travel_time(CoefficientProfile(x, np.ones_like(x)), 0.7) == pytest.approx(0.7, abs=1e-14)
    assert travel_time(CoefficientProfile(x, np.full_like(x, 4.0)), 0.5) == pytest.approx(1.0, abs=1e-14)


def test_travel_time_matches_simpson_oracle(forward_grid):
    c = make_true_profile(1, forward_grid)
    s = np.linspace(0, 1.5, 150001)
    oracle = simpson(np.sqrt(true_values(1, s)), x=s)
    assert abs(travel_time(c, 1.5) - oracle) < 1e-4


def test_travel_time_monotone_and_vectorized():
    x = np.linspace(0.01, 2, 300)
    c = make_true_profile(2, x)
    tau = travel_times(c)
    assert np.all(np.diff(tau) > 0)
    assert_allclose(tau[::37], [travel_time(c, v) for v in x[::37]], rtol=0, atol=1e-12)


def test_travel_time_outside_grid():
    x = np.linspace(0, 1, 11)
    with pytest.raises(ValueError):
        travel_time(CoefficientProfile(x, np.ones_like(x)), 1.5)


def test_smoothed_delta():
    assert smoothed_delta(0.0) == pytest.approx(11.968, abs=1e-3)
    assert smoothed_delta(1.0) < 1e-100
    g = ForwardGrid()
    assert abs(np.trapezoid(smoothed_delta(g.x), g.x) - 1) < 1e-6


def test_carleman_weight():
    p = CarlemanParams(lam=2, alpha=0.3)
    assert carleman_weight(0, 0, p) == 1.0
    assert carleman_weight(1, 1, p) == pytest.approx(np.exp(-5.2), rel=1e-14)
    assert carleman_weight(1, 1, p) == pytest.approx(5.517e-3, rel=1e-3)
    x = np.linspace(0, 3, 50)
    w = carleman_weight(x, 0.4, p)
    assert np.all(w > 0) and np.all(np.diff(w) < 0)
    assert np.all(np.diff(carleman_weight(0.4, x, p)) < 0)


def test_carleman_weight_exponent_additivity():
    x, t = np.meshgrid(np.linspace(0, 2, 7), np.linspace(0, 3, 5))
    p1, p2, p12 = CarlemanParams(lam=2), CarlemanParams(lam=3.5), CarlemanParams(lam=5.5)
    assert_allclose(carleman_weight(x, t, p1) * carleman_weight(x, t, p2), carleman_weight(x, t, p12), rtol=1e-13)


def test_profile_interpolation_extends_by_one():
    c = CoefficientProfile([0.0, 1.0], [2.0, 4.0])
    assert_allclose(c.at([-1.0, 0.5, 2.0]), [1.0, 3.0, 1.0])
    with pytest.raises(ValueError):
        CoefficientProfile([0.0, 0.0], [1.0, 1.0])
