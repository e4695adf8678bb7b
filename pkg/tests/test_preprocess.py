import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from carleman_cip.model import CoefficientProfile
from carleman_cip.preprocess import (
    Envelope,
    TargetContext,
    TimeSeries,
    envelope,
    envelope_truncate,
    local_extrema,
    relative_dielectric,
    scale_calibration,
    select_envelope,
    tikhonov_derivative,
)


def brute_force_envelope_side(values):
    """Independent oracle: scan every sample, walk over flat runs, classify."""
    v = list(values)
    n = len(v)
    found = []
    i = 1
    while i < n - 1:
        j = i
        while j + 1 < n and v[j + 1] == v[i]:
            j += 1
        if j >= n - 1:
            break
        left, right = v[i - 1], v[j + 1]
        mid = (i + j) // 2
        if left < v[i] and right < v[i]:
            found.append((mid, v[i], "max"))
        elif left > v[i] and right > v[i]:
            found.append((mid, v[i], "min"))
        i = j + 1
    top = sorted(found, key=lambda e: -abs(e[1]))[:3]
    middle = sorted(top)[1]
    return Envelope.LOWER if middle[2] == "min" else Envelope.UPPER


# --- Tikhonov differentiation --------------------------------------------


def test_derivative_of_linear():
    t = np.linspace(0, 1, 101)
    v = tikhonov_derivative(TimeSeries(t, t), reg=1e-6)
    assert np.max(np.abs(v.values - 1)) < 1e-2


def test_derivative_of_sine_noiseless():
    t = np.linspace(0, 6, 301)
    v = tikhonov_derivative(TimeSeries(t, np.sin(t)), reg=1e-6)
    interior = (t > 0.3) & (t < 5.7)
    assert np.max(np.abs(v.values - np.cos(t))[interior]) < 5e-2


def test_derivative_of_noisy_sine_monte_carlo():
    t = np.linspace(0, 6, 301)
    errs = []
    for seed in range(10):
        r = np.random.default_rng(seed).uniform(-1, 1, t.size)
        v = tikhonov_derivative(TimeSeries(t, np.sin(t) * (1 + 0.05 * r)), reg=1e-4)
        errs.append(np.sqrt(np.trapezoid((v.values - np.cos(t)) ** 2, t)))
    assert np.mean(errs) < 0.15


def test_derivative_linear_and_exact_on_constants():
    t = np.linspace(0, 2, 51)
    a, b = np.sin(3 * t), t**2
    d = lambda g: tikhonov_derivative(TimeSeries(t, g), 1e-3).values  # noqa: E731
    assert_allclose(d(2 * a - 3 * b), 2 * d(a) - 3 * d(b), atol=1e-10)
    assert_allclose(d(np.full_like(t, 0.7)), 0.0, atol=1e-14)


def test_derivative_rejects_bad_input():
    t = np.linspace(0, 1, 11)
    with pytest.raises(ValueError):
        tikhonov_derivative(TimeSeries(t, t), reg=0.0)
    with pytest.raises(ValueError):
        TimeSeries(t[:2], t[:2])
    with pytest.raises(ValueError):
        TimeSeries(np.array([0, 1, 3.0]), np.zeros(3))


# --- calibration ----------------------------------------------------------


def test_calibration_factors():
    t = np.linspace(0, 1, 5)
    assert_array_equal(scale_calibration(TimeSeries(t, np.full(5, 534592.0)), "air").values, 1.0)
    assert_array_equal(scale_calibration(TimeSeries(t, np.full(5, 265223.0)), "ground").values, 1.0)
    assert_array_equal(scale_calibration(TimeSeries(t, np.zeros(5)), "air").values, 0.0)
    with pytest.raises(ValueError):
        scale_calibration(TimeSeries(t, t), "water")


def test_calibration_linear_and_invertible():
    t = np.linspace(0, 1, 50)
    f = np.random.default_rng(2).normal(size=50)
    s = scale_calibration(TimeSeries(t, f), "ground").values
    assert_allclose(s * 265223.0, f, rtol=1e-15)
    assert_allclose(scale_calibration(TimeSeries(t, 3 * f), "ground").values, 3 * s, rtol=1e-15)


# --- envelope selection ----------------------------------------------------


def _pattern(levels):
    v = [0.0]
    for a in levels:
        v += [a / 2, a, a / 2, 0.0]
    t = np.arange(len(v)) * 0.1
    return TimeSeries(t, np.array(v))


def test_select_envelope_examples():
    assert select_envelope(_pattern([1, -3, 2])) is Envelope.LOWER
    assert select_envelope(_pattern([-1, 3, -2])) is Envelope.UPPER


def test_select_envelope_damped_sine_matches_oracle():
    t = np.arange(0, 3.0 + 1e-9, 0.01)
    f = np.sin(2 * np.pi * t) * np.exp(-t)
    assert select_envelope(TimeSeries(t, f)) is brute_force_envelope_side(f)


def test_select_envelope_scale_and_negation():
    t = np.arange(0, 3.0, 0.01)
    f = np.sin(5 * t + 0.3) * np.exp(-0.4 * t)
    side = select_envelope(TimeSeries(t, f))
    assert select_envelope(TimeSeries(t, 7.5 * f)) is side
    flipped = Envelope.UPPER if side is Envelope.LOWER else Envelope.LOWER
    assert select_envelope(TimeSeries(t, -f)) is flipped


def test_select_envelope_too_few_extrema():
    t = np.linspace(0, 1, 50)
    with pytest.raises(ValueError, match="at least 3 local extrema"):
        select_envelope(TimeSeries(t, t**2))


def test_local_extrema_plateau_midpoint():
    idx, kind = local_extrema([0, 1, 2, 2, 2, 1, 0, -1, 0])
    assert list(idx) == [3, 7] and list(kind) == [1, -1]


# --- envelope and truncation ----------------------------------------------


def test_envelope_bounds_damped_sinusoid():
    t = np.arange(0, 4, 0.01)
    f = TimeSeries(t, np.sin(2 * np.pi * 1.3 * t) * np.exp(-0.7 * t))
    assert np.all(envelope(f, Envelope.LOWER) <= f.values)
    assert np.all(envelope(f, Envelope.UPPER) >= f.values)
    lo = envelope_truncate(f, Envelope.LOWER)
    kept = lo.values != 0
    assert np.all(lo.values[kept] <= f.values[kept])


def test_envelope_of_monotone_signal_is_signal():
    t = np.linspace(0, 2, 201)
    f = TimeSeries(t, -np.exp(t))
    assert_array_equal(envelope(f, Envelope.LOWER), f.values)
    out = envelope_truncate(f, Envelope.LOWER, window=0.5)
    keep = t >= 1.5 - 1e-12
    assert_array_equal(out.values[keep], f.values[keep])
    assert np.all(out.values[~keep] == 0)


def test_truncation_support_of_pulse():
    t = np.arange(0, 6, 0.01)
    t0 = 2.3
    f = TimeSeries(t, -np.exp(-(((t - t0) / 0.05) ** 2)) + 0.01 * np.sin(40 * t))
    out = envelope_truncate(f, Envelope.LOWER, window=0.5)
    support = t[out.values != 0]
    assert support.min() >= t0 - 0.5 - 0.011 and support.max() <= t0 + 0.5 + 0.011


def test_truncation_rejects_bad_window():
    t = np.linspace(0, 1, 10)
    with pytest.raises(ValueError):
        envelope_truncate(TimeSeries(t, t), Envelope.UPPER, window=0)


# --- relative and computed dielectric constants ---------------------------


def _ratio_profile(values):
    x = np.linspace(0.0, 2.0, len(values))
    return CoefficientProfile(x, np.asarray(values, float))


def test_metal_box_row():
    x = np.linspace(0, 2, 201)
    ratio = np.where((x > 0.8) & (x < 1.2), 4.00, 1.0)
    c_rel, c_comp = relative_dielectric(CoefficientProfile(x, ratio), TargetContext((3.0, 5.0), (0.7, 1.3)))
    assert c_comp == pytest.approx((12.00, 20.00))
    assert c_rel.values.max() == 4.0


def test_unit_ratio_gives_background():
    c_rel, c_comp = relative_dielectric(_ratio_profile(np.ones(11)), TargetContext(4.0, (0.5, 1.5)))
    assert_array_equal(c_rel.values, 1.0)
    assert c_comp == 4.0


def test_plastic_cylinder_formula():
    x = np.linspace(0, 2, 201)
    ratio = np.where((x > 0.8) & (x < 1.2), 0.59, 1.0)
    c_rel, c_comp = relative_dielectric(CoefficientProfile(x, ratio), TargetContext((3.0, 5.0), (0.7, 1.3)))
    assert c_comp == pytest.approx((1.77, 2.95))
    on = (x >= 0.7) & (x <= 1.3)
    assert_array_equal(c_rel.values[on], 0.59)
    assert_array_equal(c_rel.values[~on], 1.0)


def test_scalar_background_exact():
    x = np.linspace(0, 2, 21)
    ratio = 1 + np.exp(-((x - 1) ** 2) / 0.02) * 1.37
    c_rel, c_comp = relative_dielectric(CoefficientProfile(x, ratio), TargetContext(2.5, (0.5, 1.5)))
    assert c_comp == 2.5 * ratio.max()


def test_target_context_validation():
    with pytest.raises(ValueError):
        TargetContext(1.0, (1.0, 1.0))
    with pytest.raises(ValueError):
        TargetContext(-1.0, (0.0, 1.0))
    with pytest.raises(ValueError):
        TargetContext(1.0, (0.0, 1.0), medium="water")
    with pytest.raises(ValueError):
        relative_dielectric(_ratio_profile(np.ones(5)), TargetContext(1.0, (5.0, 6.0)))
