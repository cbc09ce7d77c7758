"""Linear spectral densities and band averages."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from ..errors import InsufficientDataError, InvalidBandError, InvalidInputError
from ..signal_synth import TimeTrace


@dataclass
class SpectralDensity:
    """One-sided amplitude spectral density on a uniform grid 0..fs/2."""

    freqs: np.ndarray
    values: np.ndarray
    units: str = "V/rtHz"
    n_segments: int = 1

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.freqs.shape != self.values.shape:
            raise InvalidInputError("freqs and values must have the same shape")
        if np.any(np.diff(self.freqs) <= 0):
            raise InvalidInputError("frequency axis must be strictly increasing")
        if np.any(self.values < 0):
            raise InvalidInputError("densities must be non-negative")

    @property
    def df(self) -> float:
        return float(self.freqs[1] - self.freqs[0])


def lsd(
    trace: TimeTrace,
    segment_seconds: float = 1.0,
    window: str = "boxcar",
    overlap: float = 0.0,
) -> SpectralDensity:
    """Segment-averaged linear spectral density of a trace.

    Defaults: rectangular window, non-overlapping segments, power averaging.
    DC and Nyquist bins are not doubled. A trailing partial segment is
    dropped.
    """
    nseg = int(round(segment_seconds * trace.fs))
    n = trace.samples.size
    if nseg < 2 or n < nseg:
        raise InsufficientDataError(
            f"trace of {n} samples is shorter than one {segment_seconds} s segment"
        )
    noverlap = int(round(overlap * nseg))
    f, pxx = signal.welch(
        trace.samples,
        fs=trace.fs,
        window=window,
        nperseg=nseg,
        noverlap=noverlap,
        detrend=False,
        return_onesided=True,
        scaling="density",
        average="mean",
    )
    step = nseg - noverlap
    count = 1 + (n - nseg) // step
    unit = trace.meta.get("units", "V")
    return SpectralDensity(f, np.sqrt(pxx), f"{unit}/rtHz", count)


def _band(sd: SpectralDensity, f_lo: float, f_hi: float) -> np.ndarray:
    if f_hi < f_lo or f_lo < sd.freqs[0] or f_hi > sd.freqs[-1]:
        raise InvalidBandError(
            f"band [{f_lo}, {f_hi}] Hz not within [{sd.freqs[0]}, {sd.freqs[-1]}] Hz"
        )
    mask = (sd.freqs >= f_lo) & (sd.freqs <= f_hi)
    if not mask.any():
        raise InvalidBandError(f"no frequency bins in [{f_lo}, {f_hi}] Hz")
    return sd.values[mask]


def band_mean(sd: SpectralDensity, f_lo: float, f_hi: float) -> float:
    return float(np.mean(_band(sd, f_lo, f_hi)))


def volts_to_tesla(sd: SpectralDensity, slope: float, gamma_e: float) -> SpectralDensity:
    """Convert a lock-in voltage density to field units via |slope| (V/Hz) and gamma_e (Hz/T)."""
    if slope == 0:
        raise ZeroDivisionError("lock-in slope is zero")
    return SpectralDensity(
        sd.freqs, sd.values / (abs(slope) * gamma_e), "T/rtHz", sd.n_segments
    )


def tesla_to_volts(sd: SpectralDensity, slope: float, gamma_e: float) -> SpectralDensity:
    return SpectralDensity(
        sd.freqs, sd.values * (abs(slope) * gamma_e), "V/rtHz", sd.n_segments
    )


def empirical_sensitivity(sd: SpectralDensity, band=(0.0, 500.0)) -> float:
    """Arithmetic mean of a field density over ``band`` (T/rtHz)."""
    return band_mean(sd, *band)


def laser_noise_metric(sd: SpectralDensity) -> float:
    """Mean detector noise density between 1 and 5 kHz."""
    return band_mean(sd, 1e3, 5e3)
