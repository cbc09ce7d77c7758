"""Quick numerical sanity checks behind ``nvltm selftest``."""

from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp

from .. import nv_spin
from ..analysis import spectral
from ..signal_synth import TimeTrace


def check_white_lsd(seed: int = 0, fs: float = 400e3, segments: int = 20):
    """Unit-variance white noise reads sqrt(2/fs) V/rtHz."""
    rng = np.random.default_rng(seed)
    tr = TimeTrace(rng.standard_normal(int(fs * segments)), fs)
    sd = spectral.lsd(tr)
    got = spectral.band_mean(sd, 1.0, fs / 2 - 1)
    want = np.sqrt(2 / fs)
    return abs(got / want - 1) < 0.02, f"white LSD {got:.5g} vs {want:.5g} V/rtHz"


def check_sine_bin(fs: float = 400e3, f0: float = 1234.0):
    """A unit sine on the 1 Hz grid puts 1/sqrt(2) in its bin."""
    t = np.arange(int(fs)) / fs
    sd = spectral.lsd(TimeTrace(np.sin(2 * np.pi * f0 * t), fs))
    got = sd.values[int(f0)]
    return abs(got * np.sqrt(2) - 1) < 0.01, f"sine bin {got:.6g} vs {1 / np.sqrt(2):.6g} V/rtHz"


def check_steady_state():
    """Linear steady state agrees with 1 ms of explicit rate-equation integration."""
    m = nv_spin.RateModel()
    Q = nv_spin.rate_matrix(m)
    p0 = np.array([1 / 3, 1 / 3, 0, 0, 0, 1 / 3])
    sol = solve_ivp(lambda t, p: Q @ p, (0, 1e-3), p0, method="Radau", jac=Q, rtol=1e-12, atol=1e-15)
    err = float(np.max(np.abs(sol.y[:, -1] - np.asarray(nv_spin.steady_state(m).p))))
    return err < 1e-9, f"steady state vs ODE max |dp| = {err:.2e}"


CHECKS = {
    "white_noise_lsd": check_white_lsd,
    "sine_bin": check_sine_bin,
    "steady_state_ode": check_steady_state,
}


def run_selftest(emit=print) -> bool:
    ok_all = True
    for name, fn in CHECKS.items():
        ok, msg = fn()
        ok_all &= ok
        emit(f"{'PASS' if ok else 'FAIL'} {name}: {msg}")
    return ok_all
