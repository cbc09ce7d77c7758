import numpy as np
import pytest

from nvltm import laser_threshold as lt
from nvltm import nv_spin
from nvltm import signal_synth as ss
from nvltm.analysis import fitting
from nvltm.errors import DegenerateFitError, InvalidInputError, NoCrossingError, NoThresholdError

MA = 1e-3
F = np.linspace(2.85e9, 2.89e9, 200)
PAIR = (2.87e9 - 2.45e6, 2.87e9 + 2.45e6)


def lorentz(f, centers, fwhm, amps, offset=0.0):
    """Written out independently of the package model."""
    out = np.full(np.shape(f), offset, dtype=float)
    for c, a in zip(centers, amps):
        out += a / (1 + ((f - c) / (fwhm / 2)) ** 2)
    return out


def test_single_peak_exact_recovery():
    y = lorentz(F, [2.87e9], 6.6e6, [0.01])
    fit = fitting.fit_lorentzian(F, y, 1)
    assert fit.converged
    assert fit["center_1"] == pytest.approx(2.87e9, rel=1e-9)
    assert fit["fwhm"] == pytest.approx(6.6e6, rel=1e-9)
    assert fit["amplitude_1"] == pytest.approx(0.01, rel=1e-9)
    assert abs(fit["offset"]) < 1e-12
    assert fit.residual_rms < 1e-10 * 0.01
    assert fit.iterations <= fitting.MAX_ITERATIONS


def test_negative_dip_with_offset():
    y = lorentz(F, [2.871e9], 5e6, [-0.02], offset=1.0)
    fit = fitting.fit_lorentzian(F, y, 1)
    assert fit["center_1"] == pytest.approx(2.871e9, rel=1e-9)
    assert fit["amplitude_1"] == pytest.approx(-0.02, rel=1e-9)
    assert fit["offset"] == pytest.approx(1.0, rel=1e-12)


def test_double_peak_splitting():
    y = lorentz(F, PAIR, 6.6e6, [0.0027, 0.0027])
    fit = fitting.fit_lorentzian(F, y, 2)
    assert fit.converged
    assert fit["splitting"] == pytest.approx(4.9e6, abs=1e-6 * 4.9e6)
    assert sorted([fit["center_1"], fit["center_2"]]) == pytest.approx(PAIR, rel=1e-12)
    assert fit.units["splitting"] == "Hz"


def test_splitting_coverage():
    a = 0.0027
    clean = lorentz(F, PAIR, 6.6e6, [a, a])
    hits = 0
    for seed in range(500):
        y = clean + np.random.default_rng(seed).normal(0, a / 20, F.size)
        fit = fitting.fit_lorentzian(F, y, 2)
        hits += abs(fit["splitting"] - 4.9e6) <= 3 * fit.stderr["splitting"]
    assert hits >= 475


def test_lorentzian_input_errors():
    with pytest.raises(InvalidInputError):
        fitting.fit_lorentzian(F[:11], np.ones(11), 1)
    with pytest.raises(InvalidInputError):
        fitting.fit_lorentzian(F, np.ones(F.size), 3)
    with pytest.raises(DegenerateFitError):
        fitting.fit_lorentzian(F, np.ones(F.size), 1)


def test_non_convergence_is_reported():
    y = lorentz(F, [2.87e9], 6.6e6, [0.01])
    fit = fitting.fit_lorentzian(F, y + np.random.default_rng(0).normal(0, 1e-3, F.size), 1)
    assert np.isfinite(fit.residual_rms)
    rough = fitting.levenberg_marquardt(lambda p: np.array([np.sin(p[0]) * 1e3, p[0] - 7]), [100.0], max_iterations=2)
    assert rough[3] is False and rough[4] == 2


def test_peak_value_of_double_fit():
    y = lorentz(F, PAIR, 6.6e6, [0.0027, 0.0027])
    fit = fitting.fit_lorentzian(F, y, 2)
    grid = np.linspace(2.86e9, 2.88e9, 200001)
    assert fitting.lorentzian_peak_value(fit, 2) == pytest.approx(lorentz(grid, PAIR, 6.6e6, [0.0027] * 2).max(), rel=1e-7)


def step_data(i_th=28.11 * MA, n=400):
    x = np.linspace(20 * MA, 35 * MA, n)
    p = np.where(x >= i_th, 416e-6 + 0.04 * (x - i_th), 0.0) + 3.49e-6
    return x, p


def test_threshold_exact_recovery():
    x, p = step_data()
    fit = fitting.fit_threshold(x, p)
    first = x[x >= 28.11 * MA][0]
    assert fit["I_th"] == first
    assert fit["P_floor"] == pytest.approx(3.49e-6, rel=1e-9)
    assert fit["slope"] == pytest.approx(0.04, rel=1e-9)
    assert fit["P_step"] == pytest.approx(416e-6 + 0.04 * (first - 28.11 * MA), rel=1e-9)
    assert fit.residual_rms < 1e-10 * 416e-6
    assert fit.units["I_th"] == "A"


def test_threshold_on_grid_point():
    x = np.linspace(20 * MA, 35 * MA, 1501)
    i_th = x[811]
    p = np.where(x >= i_th, 416e-6 + 0.04 * (x - i_th), 0.0) + 3.49e-6
    fit = fitting.fit_threshold(x, p)
    assert fit["I_th"] == i_th
    assert fit["P_step"] == pytest.approx(416e-6, rel=1e-9)


def test_threshold_inject_and_recover():
    m = lt.fig3d_model()
    det = ss.Detector()
    sigma_v = float(det.volts(0.01 * m.P_step))
    noise = ss.NoiseSpec(electronic_floor=sigma_v / np.sqrt(400e3 / 2))
    sweep = ss.ModulationSpec("current_sawtooth", 37.0, range=(20 * MA, 35 * MA))
    ok = 0
    for seed in range(100):
        tr = ss.synth_pi_sweep(m, sweep, 400e3, 1 / 37.0, noise, seed=seed)
        (i, p), _ = ss.sweep_branches(tr, det)
        ok += abs(fitting.fit_threshold(i, p)["I_th"] - 28.11 * MA) <= 0.05 * MA
    assert ok >= 95


def test_no_threshold_on_straight_line():
    x = np.linspace(0, 1, 200)
    with pytest.raises(NoThresholdError):
        fitting.fit_threshold(x, 2 * x + 1)
    noisy = 2 * x + 1 + np.random.default_rng(0).normal(0, 0.01, x.size)
    with pytest.raises(NoThresholdError):
        fitting.fit_threshold(x, noisy)
    with pytest.raises(NoThresholdError):
        fitting.fit_threshold(x, np.full(x.size, 3.49e-6))


def test_lockin_slope_linear():
    f = np.linspace(-1e6, 1e6, 101) + 2.87e9
    slope, f0 = fitting.lockin_slope(f, 3e-7 * (f - 2.87e9 - 1e3))
    assert slope == pytest.approx(3e-7, rel=1e-9)
    assert f0 == pytest.approx(2.87e9 + 1e3, abs=1e-3)
    flipped, _ = fitting.lockin_slope(f, -3e-7 * (f - 2.87e9 - 1e3))
    assert flipped == pytest.approx(-slope, rel=1e-12)


def test_lockin_slope_forward_model():
    m = lt.PICurveModel()
    line = nv_spin.Lineshape((2.87e9,), 6.6e6, (1.0,))
    fm = ss.ModulationSpec("FM_sine", 1.371e3, deviation=4e6)
    i = 2 * lt.reverse_on_threshold(m)
    # scan just past the dispersive extrema at +-3.6 MHz
    f = 2.87e9 + np.linspace(-5e6, 5e6, 201)
    v = ss.fm_demodulated_response(m, i, f, fm, line)
    slope, f0 = fitting.lockin_slope(f, v)
    h = 1e3
    d = ss.fm_demodulated_response(m, i, [2.87e9 + h, 2.87e9 - h], fm, line)
    assert slope == pytest.approx((d[0] - d[1]) / (2 * h), rel=0.05)
    assert f0 == pytest.approx(2.87e9, abs=1e3)


def test_lockin_slope_no_crossing():
    f = np.linspace(0, 1, 50)
    with pytest.raises(NoCrossingError):
        fitting.lockin_slope(f, f + 1)
