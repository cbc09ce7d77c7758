"""Photodetector time-trace synthesis for the three measurement protocols.

Every random draw comes from a substream keyed by ``(seed, source, block)``
where ``block`` indexes fixed 65536-sample chunks. Enabling one noise source
never changes another source's samples, and splitting the work across
threads gives bit-identical output.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import constants

from . import laser_threshold as lt
from . import nv_spin
from .errors import InvalidInputError

BLOCK = 1 << 16

NOISE_SOURCES = {"shot": 1, "electronic": 2, "laser": 3, "drift": 4, "sweep": 5}


class ConfigurationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Detector:
    """Photodiode + transimpedance amplifier; volts = P * responsivity * gain."""

    responsivity: float = 0.7  # A/W at 1042 nm
    gain: float = 1.0e3  # V/A
    wavelength: float = 1042e-9  # m

    def volts(self, power):
        return np.asarray(power) * self.responsivity * self.gain

    def power(self, volts):
        return np.asarray(volts) / (self.responsivity * self.gain)

    @property
    def photon_energy(self) -> float:
        return constants.h * constants.c / self.wavelength


@dataclass(frozen=True)
class NoiseSpec:
    """Noise injected at the photodetector.

    electronic_floor : white density, V/rtHz
    laser_rin : relative intensity noise of the probe laser, 1/rtHz, at
        multiplier 1; the voltage density is ``laser_rin * m(x) * V_mean``
    rin_table : ``((x, m), ...)`` knots of the laser-noise multiplier versus
        x = I / I_th,r^on, linearly interpolated
    line_50hz : amplitude of the mains pickup sinusoid, V
    drift_lowfreq : 1/f coefficient, one-sided PSD = drift_lowfreq**2 / f
    """

    shot: bool = False
    electronic_floor: float = 0.0
    laser_rin: float = 0.0
    rin_table: tuple[tuple[float, float], ...] = ((0.0, 1.0), (1e3, 1.0))
    line_50hz: float = 0.0
    line_freq: float = 50.0
    drift_lowfreq: float = 0.0

    def __post_init__(self):
        for name in ("electronic_floor", "laser_rin", "line_50hz", "drift_lowfreq"):
            if getattr(self, name) < 0:
                raise InvalidInputError(f"{name} must be >= 0")
        xs = [k[0] for k in self.rin_table]
        if len(xs) < 1 or any(b <= a for a, b in zip(xs, xs[1:])):
            raise InvalidInputError("rin_table knots must be strictly increasing")
        if any(k[1] < 0 for k in self.rin_table):
            raise InvalidInputError("rin multipliers must be >= 0")

    @property
    def enabled(self) -> bool:
        return bool(
            self.shot
            or self.electronic_floor
            or self.laser_rin
            or self.line_50hz
            or self.drift_lowfreq
        )

    def rin_multiplier(self, x) -> float:
        xs = np.array([k[0] for k in self.rin_table])
        ms = np.array([k[1] for k in self.rin_table])
        if x is None:
            return 1.0
        if x < xs[0] or x > xs[-1]:
            raise InvalidInputError(
                f"I/I_th,r^on = {x:.4g} outside rin_table range [{xs[0]}, {xs[-1]}]"
            )
        return float(np.interp(x, xs, ms))


@dataclass(frozen=True)
class ModulationSpec:
    """AM_square: f_mod, duty. FM_sine: f_mod, deviation.

    current_sawtooth: f_mod, range = (I_min, I_max) in A, duty = fraction of
    the period spent ramping up (0.5 gives a symmetric triangle).
    """

    kind: str
    f_mod: float
    duty: float = 0.5
    deviation: float = 0.0
    range: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.kind not in ("AM_square", "FM_sine", "current_sawtooth"):
            raise InvalidInputError(f"unknown modulation kind {self.kind!r}")
        if not self.f_mod > 0:
            raise InvalidInputError("f_mod must be positive")
        if not 0 < self.duty < 1:
            raise InvalidInputError("duty must lie in (0, 1)")
        if self.deviation < 0:
            raise InvalidInputError("deviation must be >= 0")
        if self.kind == "current_sawtooth" and not self.range[1] > self.range[0] >= 0:
            raise InvalidInputError("sawtooth range must satisfy 0 <= I_min < I_max")


@dataclass
class TimeTrace:
    samples: np.ndarray
    fs: float
    t0: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if not self.fs > 0:
            raise InvalidInputError("fs must be positive")
        if self.samples.ndim != 1 or self.samples.size < 1:
            raise InvalidInputError("a trace needs at least one sample")
        if not np.all(np.isfinite(self.samples)):
            raise InvalidInputError("trace contains non-finite samples")

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.samples.size) / self.fs

    @property
    def duration(self) -> float:
        return self.samples.size / self.fs

    def with_samples(self, samples, **meta) -> "TimeTrace":
        return TimeTrace(samples, self.fs, self.t0, {**self.meta, **meta})


def substream(seed: int, source: str, block: int = 0) -> np.random.Generator:
    """Independent generator for one (seed, noise source, block) triple."""
    if seed is None or int(seed) < 0:
        raise InvalidInputError("a non-negative integer seed is required")
    ss = np.random.SeedSequence(int(seed), spawn_key=(NOISE_SOURCES[source], int(block)))
    return np.random.Generator(np.random.PCG64(ss))


def gaussian(seed: int, source: str, n: int, workers: int = 1) -> np.ndarray:
    """Standard-normal samples assembled from fixed-size seeded blocks."""
    out = np.empty(n)
    nblocks = -(-n // BLOCK)

    def fill(b):
        lo = b * BLOCK
        hi = min(lo + BLOCK, n)
        out[lo:hi] = substream(seed, source, b).standard_normal(BLOCK)[: hi - lo]

    if workers > 1 and nblocks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, range(nblocks)))
    else:
        for b in range(nblocks):
            fill(b)
    return out


def pink_noise(seed: int, n: int, fs: float, coeff: float, workers: int = 1) -> np.ndarray:
    """Noise with one-sided PSD coeff**2 / f (DC removed)."""
    white = gaussian(seed, "drift", n, workers)
    X = np.fft.rfft(white)
    f = np.fft.rfftfreq(n, 1 / fs)
    gain = np.zeros_like(f)
    gain[1:] = coeff * np.sqrt(fs / (2 * f[1:]))
    return np.fft.irfft(X * gain, n)


def add_noise(
    trace: TimeTrace,
    noise: NoiseSpec,
    mean_power,
    seed: int | None,
    detector: Detector = Detector(),
    current_ratio: float | None = None,
    workers: int = 1,
) -> TimeTrace:
    """Return ``trace`` plus the noise described by ``noise``.

    ``mean_power`` (W, scalar or per-sample) sets shot and laser noise;
    ``current_ratio`` = I / I_th,r^on selects the laser-noise multiplier.
    """
    if not noise.enabled:
        return trace.with_samples(trace.samples.copy())
    n = trace.samples.size
    fs = trace.fs
    v = trace.samples.copy()
    P = np.broadcast_to(np.asarray(mean_power, dtype=float), (n,))
    if noise.shot:
        sigma_p = np.sqrt(2 * detector.photon_energy * np.clip(P, 0, None) * fs / 2)
        v += detector.volts(sigma_p) * gaussian(seed, "shot", n, workers)
    if noise.electronic_floor:
        v += noise.electronic_floor * np.sqrt(fs / 2) * gaussian(seed, "electronic", n, workers)
    if noise.laser_rin:
        m = noise.rin_multiplier(current_ratio)
        dens = noise.laser_rin * m * float(detector.volts(np.mean(P)))
        v += dens * np.sqrt(fs / 2) * gaussian(seed, "laser", n, workers)
    if noise.line_50hz:
        v += noise.line_50hz * np.sin(2 * np.pi * noise.line_freq * trace.times)
    if noise.drift_lowfreq:
        v += pink_noise(seed, n, fs, noise.drift_lowfreq, workers)
    return trace.with_samples(v, noise_seed=seed)


def white_density(
    noise: NoiseSpec, mean_power: float, detector: Detector = Detector(), current_ratio=None
) -> float:
    """Total white voltage density (V/rtHz) of shot, electronic and laser noise."""
    total = noise.electronic_floor**2
    if noise.shot:
        total += float(detector.volts(np.sqrt(2 * detector.photon_energy * mean_power))) ** 2
    if noise.laser_rin:
        m = noise.rin_multiplier(current_ratio)
        total += (noise.laser_rin * m * float(detector.volts(mean_power))) ** 2
    return float(np.sqrt(total))


def sawtooth_current(sweep: ModulationSpec, t) -> np.ndarray:
    """Diode current of the sawtooth scan; starts at I_min at t = 0."""
    lo, hi = sweep.range
    phase = np.mod(np.asarray(t) * sweep.f_mod, 1.0)
    up = phase < sweep.duty
    ramp = np.where(up, phase / sweep.duty, (1 - phase) / (1 - sweep.duty))
    return lo + (hi - lo) * ramp


def _n_samples(fs, duration):
    n = int(round(fs * duration))
    if n < 1:
        raise InvalidInputError("duration too short for one sample")
    return n


def synth_pi_sweep(
    model: lt.PICurveModel,
    sweep: ModulationSpec,
    fs: float,
    duration: float,
    noise: NoiseSpec = NoiseSpec(),
    seed: int | None = None,
    detector: Detector = Detector(),
    pump: bool = False,
    mw=None,
    workers: int = 1,
) -> TimeTrace:
    """Detector voltage while the diode current is scanned across threshold."""
    if sweep.kind != "current_sawtooth":
        raise InvalidInputError("synth_pi_sweep needs a current_sawtooth modulation")
    i_f, i_r = lt.thresholds(model, pump, mw)
    if not (sweep.range[0] < i_r and sweep.range[1] >= i_f):
        warnings.warn(
            f"sweep range {sweep.range} does not span thresholds ({i_r:.5g}, {i_f:.5g})",
            ConfigurationWarning,
            stacklevel=2,
        )
    n = _n_samples(fs, duration)
    t = np.arange(n) / fs
    current = sawtooth_current(sweep, t)
    P, lasing = lt.pi_sweep(model, current, pump, lt.drive_fraction(model, mw))
    meta = {
        "protocol": "pi_sweep",
        "f_mod": sweep.f_mod,
        "range": sweep.range,
        "duty": sweep.duty,
        "pump": pump,
        "mw": mw,
        "seed": seed,
        "current": current,
        "power": P,
    }
    tr = TimeTrace(detector.volts(P), fs, 0.0, meta)
    return add_noise(tr, noise, P, seed, detector, None, workers)


def sweep_branches(trace: TimeTrace, detector: Detector = Detector()):
    """Split a sawtooth trace into forward (rising) and reverse (falling) P-I samples.

    Returns two ``(current, power)`` tuples sorted by current.
    """
    current = trace.meta["current"]
    rising = np.zeros(current.size, dtype=bool)
    rising[1:] = np.diff(current) > 0
    rising[0] = rising[1] if current.size > 1 else True
    power = detector.power(trace.samples)
    out = []
    for mask in (rising, ~rising):
        order = np.argsort(current[mask], kind="stable")
        out.append((current[mask][order], power[mask][order]))
    return out[0], out[1]


def am_gate(am: ModulationSpec, t) -> np.ndarray:
    """True while the microwave is on (first ``duty`` of each period)."""
    return np.mod(np.asarray(t) * am.f_mod, 1.0) < am.duty


def synth_am_odmr(
    model: lt.PICurveModel,
    f_mw_list,
    am: ModulationSpec,
    fs: float,
    duration: float,
    current: float,
    noise: NoiseSpec = NoiseSpec(),
    seed: int | None = None,
    detector: Detector = Detector(),
    pump: bool = True,
    workers: int = 1,
) -> list[TimeTrace]:
    """One trace per microwave frequency with square-wave AM of the microwaves.

    The laser sits at a fixed ``current`` in the reverse-sweep latch state.
    Frequency ``k`` uses seed ``seed + k`` for its noise.
    """
    if am.kind != "AM_square":
        raise InvalidInputError("synth_am_odmr needs an AM_square modulation")
    n = _n_samples(fs, duration)
    t = np.arange(n) / fs
    gate = am_gate(am, t)
    x = current / lt.reverse_on_threshold(model)
    traces = []
    for k, f in enumerate(f_mw_list):
        u = gate * lt.drive_fraction(model, float(f))
        P, _ = lt.pi_sweep(model, np.full(n, current), pump, u, initial=True)
        meta = {
            "protocol": "am_odmr",
            "f_mw": float(f),
            "f_mod": am.f_mod,
            "duty": am.duty,
            "current": current,
            "seed": seed,
            "gate": gate,
        }
        tr = TimeTrace(detector.volts(P), fs, 0.0, meta)
        s = None if seed is None else seed + k
        traces.append(add_noise(tr, noise, P, s, detector, x, workers))
    return traces


def fm_drive(
    resonance: nv_spin.Lineshape,
    f_center: float,
    fm: ModulationSpec,
    t,
    field=None,
    field_shift: float = -nv_spin.GAMMA_E,
):
    """Drive fraction u(t) for FM microwaves; ``field`` (T) moves the line by field_shift*B."""
    f_inst = f_center + fm.deviation * np.sin(2 * np.pi * fm.f_mod * np.asarray(t))
    if field is not None:
        f_inst = f_inst - field_shift * np.asarray(field)
    return nv_spin.odmr_lineshape(f_inst, resonance)


def synth_fm_lockin_input(
    model: lt.PICurveModel,
    f_center: float,
    fm: ModulationSpec,
    fs: float,
    duration: float,
    current: float,
    resonance: nv_spin.Lineshape,
    noise: NoiseSpec = NoiseSpec(),
    seed: int | None = None,
    detector: Detector = Detector(),
    field=None,
    field_shift: float = -nv_spin.GAMMA_E,
    pump: bool = True,
    workers: int = 1,
) -> TimeTrace:
    """Detector voltage under frequency-modulated microwaves.

    ``resonance`` gives the drive fraction versus frequency (amplitudes
    relative to full resonant drive). ``field`` is either ``None``, an array
    of B(t) samples or a callable of time.
    """
    if fm.kind != "FM_sine":
        raise InvalidInputError("synth_fm_lockin_input needs an FM_sine modulation")
    n = _n_samples(fs, duration)
    t = np.arange(n) / fs
    if callable(field):
        field = field(t)
    u = fm_drive(resonance, f_center, fm, t, field, field_shift)
    P, lasing = lt.pi_sweep(model, np.full(n, current), pump, u, initial=True)
    if not lasing.all():
        warnings.warn("laser dropped out of lasing during the FM trace", ConfigurationWarning)
    meta = {
        "protocol": "fm_lockin",
        "f_center": f_center,
        "f_mod": fm.f_mod,
        "deviation": fm.deviation,
        "current": current,
        "seed": seed,
    }
    tr = TimeTrace(detector.volts(P), fs, 0.0, meta)
    x = current / lt.reverse_on_threshold(model)
    return add_noise(tr, noise, P, seed, detector, x, workers)


def fm_demodulated_response(
    model: lt.PICurveModel,
    current: float,
    f_centers,
    fm: ModulationSpec,
    resonance: nv_spin.Lineshape,
    detector: Detector = Detector(),
    phase: float = -np.pi / 2,
    pump: bool = True,
    n_phase: int = 4096,
):
    """Steady-state lock-in output (RMS convention) versus FM centre frequency.

    Projects one modulation period of the noiseless detector voltage onto
    sqrt(2) cos(2 pi f_mod t + phase).
    """
    tau = np.arange(n_phase) / n_phase
    ref = np.sqrt(2) * np.cos(2 * np.pi * tau + phase)
    out = []
    for fc in np.atleast_1d(f_centers):
        u = nv_spin.odmr_lineshape(fc + fm.deviation * np.sin(2 * np.pi * tau), resonance)
        v = detector.volts(lt.lasing_power(model, current, u, pump))
        out.append(np.mean(v * ref))
    return np.asarray(out)
