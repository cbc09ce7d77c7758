"""Magnetometer sensitivity: photon-shot-noise bound, contrast and noise budgets."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidInputError
from ..nv_spin import GAMMA_E
from .lockin import design_lowpass

# 4 / (3 sqrt 3), the Lorentzian max-slope factor
LORENTZ_SLOPE_FACTOR = 4.0 / (3.0 * np.sqrt(3.0))


def shot_noise_sensitivity(fwhm: float, contrast: float, rate: float, gamma_e: float = GAMMA_E) -> float:
    """Photon-shot-noise-limited sensitivity (T/rtHz) for a Lorentzian line.

    eta = 4/(3 sqrt 3) * fwhm / (gamma_e * contrast * sqrt(rate))
    """
    if contrast == 0 or rate == 0:
        raise ZeroDivisionError("contrast and photon rate must be non-zero")
    if fwhm <= 0 or contrast < 0 or rate < 0:
        raise InvalidInputError("fwhm, contrast and rate must be positive")
    return LORENTZ_SLOPE_FACTOR * fwhm / (gamma_e * contrast * np.sqrt(rate))


def implied_rate_ratio(eta_th: float, eta_far: float, c_th: float, c_far: float) -> float:
    """R_th / R_far implied by two sensitivities at the same linewidth.

    From eta_far / eta_th = (C_th / C_far) sqrt(R_th / R_far).
    """
    return ((eta_far / eta_th) * (c_far / c_th)) ** 2


def odmr_contrast(v_on: float, v_off: float) -> float:
    """(v_off - v_on) / v_off."""
    if not v_off > 0:
        raise InvalidInputError("v_off must be positive")
    return (v_off - v_on) / v_off


def lowpass_gain(freqs, fs: float, alpha: float, order: int = 4):
    """|H(f)| of the lock-in smoother cascade."""
    w = 2 * np.pi * np.asarray(freqs, dtype=float) / fs
    q = 1.0 - alpha
    return (alpha**2 / (alpha**2 + 4 * q * np.sin(w / 2) ** 2)) ** (order / 2)


def band_gain(fs: float, enbw: float, band=(0.0, 500.0), df: float = 1.0, order: int = 4) -> float:
    """Mean lock-in gain over the LSD bins of ``band``.

    The DC bin of a one-sided density is not doubled, so white noise there
    reads 1/sqrt(2) of the flat level; it is weighted accordingly.
    """
    alpha = design_lowpass(fs, enbw, order)
    f = np.arange(band[0], band[1] + df / 2, df)
    g = lowpass_gain(f, fs, alpha, order)
    g[f == 0] /= np.sqrt(2)
    return float(g.mean())


def predicted_sensitivity(
    white_density: float,
    slope: float,
    fs: float,
    enbw: float = 2.6e3,
    band=(0.0, 500.0),
    gamma_e: float = GAMMA_E,
) -> float:
    """Expected band-mean field density (T/rtHz) from a white detector noise density."""
    return white_density * band_gain(fs, enbw, band) / (abs(slope) * gamma_e)


def required_white_density(
    target: float, slope: float, fs: float, enbw: float = 2.6e3, band=(0.0, 500.0), gamma_e: float = GAMMA_E
) -> float:
    """Inverse of :func:`predicted_sensitivity`."""
    return target * abs(slope) * gamma_e / band_gain(fs, enbw, band)


def residual_density(total: float, *parts: float) -> float:
    """Density left for one more source so that the RSS matches ``total``."""
    rest = total**2 - sum(p**2 for p in parts)
    if rest < 0:
        raise InvalidInputError("fixed noise sources already exceed the target")
    return float(np.sqrt(rest))
