"""Digital lock-in demodulation.

Output convention is RMS: a coherent input A cos(2 pi f_ref t + phase)
demodulates to A / sqrt(2). The low-pass is a cascade of identical
first-order exponential smoothers (24 dB/oct for the default order 4) whose
time constant is solved so the equivalent noise bandwidth matches the
request.
"""

from __future__ import annotations

import numpy as np
from scipy import integrate, optimize, signal

from ..errors import AliasingConfigError
from ..signal_synth import TimeTrace


def enbw_of(alpha: float, fs: float, order: int = 4) -> float:
    """Equivalent noise bandwidth (Hz, one-sided) of ``order`` cascaded smoothers."""
    q = 1.0 - alpha

    def h2(w):
        return (alpha**2 / (alpha**2 + 4 * q * np.sin(w / 2) ** 2)) ** order

    # the response is concentrated near w = 0; split there for quad
    w_c = min(np.pi, 50 * alpha)
    a, _ = integrate.quad(h2, 0, w_c, limit=200, epsabs=0, epsrel=1e-12)
    b = 0.0
    if w_c < np.pi:
        b, _ = integrate.quad(h2, w_c, np.pi, limit=200, epsabs=1e-14 * a, epsrel=1e-10)
    return fs / (2 * np.pi) * (a + b)


def design_lowpass(fs: float, enbw: float, order: int = 4) -> float:
    """Smoothing coefficient alpha that gives the requested ENBW."""
    if not 0 < enbw < fs / 2:
        raise AliasingConfigError(f"ENBW {enbw} Hz not in (0, fs/2)")
    return optimize.brentq(
        lambda a: enbw_of(a, fs, order) - enbw, 1e-9, 1.0, xtol=1e-15, rtol=1e-13
    )


def lowpass_sos(alpha: float, order: int = 4) -> np.ndarray:
    sec = [alpha, 0.0, 0.0, 1.0, alpha - 1.0, 0.0]
    return np.array([sec] * order)


def lockin_demodulate(
    trace: TimeTrace,
    f_ref: float,
    phase: float = 0.0,
    enbw: float = 2.6e3,
    order: int = 4,
    allow_wideband: bool = False,
) -> TimeTrace:
    """Mix with sqrt(2) cos(2 pi f_ref t + phase) and low-pass filter.

    The filter starts from rest, so the first few time constants carry a
    settling transient. ``enbw`` must be below ``f_ref`` unless
    ``allow_wideband`` is set, in which case harmonics of the reference
    leak through the filter and must be kept out of the band of interest.
    """
    if not f_ref < trace.fs / 2:
        raise AliasingConfigError(f"f_ref {f_ref} Hz must be below fs/2")
    if enbw >= f_ref and not allow_wideband:
        raise AliasingConfigError(f"ENBW {enbw} Hz must be below f_ref {f_ref} Hz")
    alpha = design_lowpass(trace.fs, enbw, order)
    ref = np.sqrt(2) * np.cos(2 * np.pi * f_ref * trace.times + phase)
    y = signal.sosfilt(lowpass_sos(alpha, order), trace.samples * ref)
    return trace.with_samples(
        y, lockin={"f_ref": f_ref, "phase": phase, "enbw": enbw, "order": order, "alpha": alpha}
    )


def lockin_xy(trace: TimeTrace, f_ref: float, phase: float = 0.0, enbw: float = 2.6e3, order: int = 4):
    """In-phase and quadrature outputs (the latter with the reference shifted by -90 deg)."""
    x = lockin_demodulate(trace, f_ref, phase, enbw, order)
    y = lockin_demodulate(trace, f_ref, phase - np.pi / 2, enbw, order)
    return x, y


def time_constant(alpha: float, fs: float) -> float:
    """Time constant of one smoother stage, s."""
    return -1.0 / (fs * np.log(1.0 - alpha))


def trim(trace: TimeTrace, seconds: float) -> TimeTrace:
    """Drop the first ``seconds`` of a trace (e.g. the filter transient)."""
    k = int(round(seconds * trace.fs))
    return TimeTrace(trace.samples[k:], trace.fs, trace.t0 + k / trace.fs, dict(trace.meta))
