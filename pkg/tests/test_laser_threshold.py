from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nvltm import laser_threshold as lt
from nvltm import nv_spin
from nvltm.errors import InvalidInputError, UndefinedContrastError

MA = 1e-3


@pytest.fixture(scope="module")
def model():
    return lt.PICurveModel()


def test_threshold_examples(model):
    assert lt.thresholds(model, pump=False)[0] == pytest.approx(26.75 * MA, abs=1e-12)
    assert lt.thresholds(model, pump=True)[0] == pytest.approx(28.08 * MA, abs=1e-12)
    assert lt.thresholds(model, pump=True, mw="on")[0] == pytest.approx(28.26 * MA, abs=1e-12)
    assert lt.thresholds(model, pump=True)[1] == pytest.approx(24.14 * MA, abs=1e-12)


def test_hysteresis_width_3p97_gives_24p14_from_28p11():
    m = lt.fig3d_model()
    f, r = lt.thresholds(m)
    assert f == pytest.approx(28.11 * MA, abs=1e-12)
    assert r == pytest.approx(24.14 * MA, abs=1e-12)
    assert m.dI_hyst == pytest.approx(3.97 * MA, abs=1e-15)


def test_mw_profile_peak_is_unity(model):
    f, v = lt.profile_peak(model.mw_shape)
    assert v == pytest.approx(1.0, abs=1e-12)
    # overlapping strain-split lines: the maximum sits between D and one line centre
    assert 2.87e9 < abs(f - 2.87e9) + 2.87e9 < model.mw_shape.centers[1]


def test_forward_crossing_jump(model):
    m = replace(model, I_th_base=26.75 * MA)
    st0 = lt.LaserState()
    p_below, s = lt.pi_curve(m, 26.74 * MA, st0)
    p_at, s = lt.pi_curve(m, 26.75 * MA, s)
    assert p_below == pytest.approx(3.49e-6, rel=1e-12)
    assert p_at == pytest.approx(416e-6, rel=1e-12)
    assert s.lasing


def test_zero_current(model):
    p, s = lt.pi_curve(model, 0.0, lt.LaserState())
    assert p == model.P_floor and not s.lasing
    with pytest.raises(InvalidInputError):
        lt.pi_curve(model, -1e-3, lt.LaserState())


def test_hysteresis_loop(model):
    up = np.linspace(20 * MA, 32 * MA, 1201)
    seq = np.r_[up, up[::-1]]
    P, lasing = lt.pi_sweep(model, seq, pump=True)
    on = seq[: up.size][lasing[: up.size]][0]
    off = seq[up.size :][~lasing[up.size :]][0]
    assert on == pytest.approx(28.08 * MA, abs=1e-5)
    assert on - off == pytest.approx(model.dI_hyst, abs=2e-5)
    # loop area: reverse branch carries more power between the thresholds
    area = np.trapezoid(P[up.size :][::-1] - P[: up.size], up)
    assert area > 0


def test_vectorized_matches_stepwise(model):
    rng = np.random.default_rng(1)
    cur = np.abs(np.cumsum(rng.normal(0, 0.5 * MA, 500)) + 26 * MA)
    P, lasing = lt.pi_sweep(model, cur, pump=True, u=0.0)
    state = lt.LaserState()
    for k, i in enumerate(cur):
        p, state = lt.pi_curve(model, float(i), state, pump=True)
        assert p == P[k] and state.lasing == lasing[k]


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 40e-3), min_size=2, max_size=60))
def test_increasing_sweep_monotone(currents):
    m = lt.PICurveModel()
    cur = np.sort(np.asarray(currents))
    P, _ = lt.pi_sweep(m, cur, pump=True)
    assert np.all(np.diff(P) >= 0)


def test_branches_coincide_outside_loop(model):
    up = np.linspace(15 * MA, 40 * MA, 2501)
    Pf, _ = lt.pi_sweep(model, up, pump=True)
    Pr, _ = lt.pi_sweep(model, up[::-1], pump=True, initial=True)
    Pr = Pr[::-1]
    i_f, i_r = lt.thresholds(model, True)
    out = (up < i_r) | (up >= i_f)
    np.testing.assert_array_equal(Pf[out], Pr[out])


def test_threshold_odmr(model):
    res = lt.threshold_odmr(model, [3.2e9, 2.87e9 - 2.45e6, 2.87e9])
    # 330 MHz detuned: only the two Lorentzian tails, 2 (3.3/330)^2 of the peak at most
    assert abs(res[0][1]) < 2e-4 * 0.18 * MA
    peak = max(d for _, d in lt.threshold_odmr(model, np.linspace(2.86e9, 2.88e9, 2001)))
    assert peak == pytest.approx(0.18 * MA, abs=1e-9)


def test_threshold_profile_proportional_to_lineshape(model):
    f = np.linspace(2.85e9, 2.89e9, 41)
    d = np.array([v for _, v in lt.threshold_odmr(model, f)])
    shape = nv_spin.odmr_lineshape(f, model.mw_shape)
    k = d / shape
    assert np.ptp(k) < 1e-12 * np.max(k) + 1e-18


def test_threshold_profile_double_peak_split(model):
    f = np.linspace(2.86e9, 2.88e9, 20001)
    d = np.array([v for _, v in lt.threshold_odmr(model, f)])
    # two local maxima, symmetric around D; their separation is below 2E because the lines overlap
    inner = (d[1:-1] > d[:-2]) & (d[1:-1] > d[2:])
    peaks = f[1:-1][inner]
    assert peaks.size == 2
    assert np.mean(peaks) == pytest.approx(2.87e9, abs=2e3)
    assert model.mw_shape.centers[1] - model.mw_shape.centers[0] == pytest.approx(4.9e6, abs=1.0)


def test_ideal_contrast_is_one_between_thresholds(model):
    ideal = model.ideal()
    i_off = lt.thresholds(ideal, True)[0]
    i_on = lt.thresholds(ideal, True, "on")[0]
    for I in np.linspace(i_off, i_on, 7)[1:-1]:
        assert lt.contrast_vs_current(model, I, "ideal") == 1.0


def test_contrast_targets(model):
    ir = lt.reverse_on_threshold(model)
    assert lt.contrast_vs_current(model, ir) == pytest.approx(0.0256, abs=1e-6)
    assert lt.contrast_limit(model) == pytest.approx(0.0054, abs=1e-9)
    assert lt.contrast_vs_current(model, 1e3 * ir) == pytest.approx(0.0054, abs=1e-5)


def test_undefined_contrast(model):
    with pytest.raises(UndefinedContrastError):
        lt.contrast_vs_current(model, 10 * MA)


def test_ideal_limit_closed_form(model):
    for I in (40 * MA, 100 * MA, 1.0, 100.0):
        got = lt.contrast_vs_current(model, I, "ideal")
        assert got == pytest.approx(lt.ideal_contrast_closed_form(model, I), abs=1e-12)
    assert lt.ideal_contrast_closed_form(model, 1e9) == pytest.approx(lt.contrast_limit(model), abs=1e-12)


def test_ideal_monotone_above_thresholds(model):
    I = np.linspace(28.3 * MA, 200 * MA, 300)
    c = [lt.contrast_vs_current(model, x, "ideal") for x in I]
    assert np.all(np.diff(c) <= 1e-15)


def test_step_below_ideal(model):
    ideal_on = lt.thresholds(model.ideal(), True, "on")[0]
    for I in np.linspace(ideal_on, 100 * MA, 200):
        assert lt.contrast_vs_current(model, I, "step") <= lt.contrast_vs_current(model, I, "ideal")


def test_calibration_reproduces_defaults(model):
    fresh = lt.calibrate_contrast(replace(model, slope_off=0.03, slope_on=0.029))
    assert fresh.slope_off == pytest.approx(model.slope_off, rel=1e-9)
    assert fresh.slope_on == pytest.approx(model.slope_on, rel=1e-9)


def test_model_validation():
    with pytest.raises(InvalidInputError):
        lt.PICurveModel(slope_on=0.05, slope_off=0.04)
    with pytest.raises(InvalidInputError):
        lt.PICurveModel(P_step=-1.0)


def test_kappa_linear_map():
    rates = nv_spin.RateModel()
    shape = nv_spin.Lineshape((2.87e9,), 6.6e6)
    da = lt.absorption_shift_profile(rates, shape, [2.87e9, 3.5e9], 1e6, 2e-22, nv_spin.ppm_to_cm3(1.2), 0.025)
    assert da[0] > 0 and abs(da[1]) < 1e-3 * da[0]
    kappa = lt.kappa_for_peak(da[0])
    assert kappa * da[0] == pytest.approx(0.18 * MA, rel=1e-15)
