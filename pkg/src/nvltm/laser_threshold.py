"""Phenomenological P-I model of the diamond-loaded ECDL.

Above threshold the output is a straight line that starts with a jump of
``P_step`` at the forward threshold; below threshold a constant
spontaneous-emission floor is emitted. Bistability is a two-state latch:
lasing switches on at the forward threshold and off at the reverse
threshold, ``dI_hyst`` lower.

Resonant microwaves enter through a drive fraction ``u`` in [0, 1]
(the normalized ODMR profile at the microwave frequency). The forward
threshold shifts by ``u * dI_mw_peak`` and the slope moves linearly from
``slope_off`` to ``slope_on``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import least_squares, minimize_scalar

from . import nv_spin
from .errors import InvalidInputError, UndefinedContrastError

ON_RESONANCE = "on"

# I / I_th,r^on of the "far above threshold" operating point
FAR_ABOVE_RATIO = 2.0

C_FAR_TARGET = 0.0054
C_TH_TARGET = 0.0256


def normalized_profile(shape: nv_spin.Lineshape) -> nv_spin.Lineshape:
    """Rescale ``shape`` so that its global maximum is exactly 1."""
    return shape.scaled(1.0 / profile_peak(shape)[1])


def profile_peak(shape: nv_spin.Lineshape) -> tuple[float, float]:
    """Location and value of the maximum of a lineshape."""
    c = np.asarray(shape.centers)
    grid = np.linspace(c.min() - 3 * shape.fwhm, c.max() + 3 * shape.fwhm, 4001)
    vals = nv_spin.odmr_lineshape(grid, shape)
    k = int(np.argmax(vals))
    step = grid[1] - grid[0]
    res = minimize_scalar(
        lambda f: -nv_spin.odmr_lineshape(f, shape),
        bounds=(grid[k] - step, grid[k] + step),
        method="bounded",
        options={"xatol": 1e-6 * shape.fwhm},
    )
    return float(res.x), float(-res.fun)


def default_mw_shape() -> nv_spin.Lineshape:
    """Zero-field, strain-split double line (2E = 4.9 MHz, 6.6 MHz FWHM), peak 1."""
    sys = nv_spin.SpinSystem(E=2.45e6)
    return normalized_profile(nv_spin.zero_field_lineshape(sys, fwhm=6.6e6))


@dataclass(frozen=True)
class PICurveModel:
    """P-I curve parameters, SI units (A, W, W/A).

    The default slopes come from :func:`calibrate_contrast` against the
    0.54 % far-above-threshold and 2.56 % near-threshold contrasts.
    """

    I_th_base: float = 26.75e-3
    slope_off: float = 0.041766413052004035
    slope_on: float = 0.04154087442152322
    P_step: float = 416e-6
    P_floor: float = 3.49e-6
    dI_hyst: float = 3.94e-3
    dI_pump: float = 1.33e-3
    dI_mw_peak: float = 0.18e-3
    mw_shape: nv_spin.Lineshape = field(default_factory=default_mw_shape)

    def __post_init__(self):
        if not (self.slope_off > 0 and self.slope_on > 0):
            raise InvalidInputError("slopes must be positive")
        if self.slope_on > self.slope_off:
            raise InvalidInputError("slope_on must not exceed slope_off")
        for name in ("P_step", "P_floor", "dI_hyst", "dI_pump", "dI_mw_peak", "I_th_base"):
            if getattr(self, name) < 0:
                raise InvalidInputError(f"{name} must be >= 0")

    def ideal(self) -> "PICurveModel":
        """Same thresholds and slopes without step, floor or bistability."""
        return replace(self, P_step=0.0, P_floor=0.0, dI_hyst=0.0)


@dataclass(frozen=True)
class LaserState:
    lasing: bool = False
    direction: str = "forward"
    last_current: float | None = None


def drive_fraction(m: PICurveModel, mw) -> float:
    """Map a microwave setting to the drive fraction u.

    ``mw`` is ``None`` (off), ``"on"`` (peak of the profile, u = 1) or a
    frequency in Hz.
    """
    if mw is None or mw == "off":
        return 0.0
    if mw == ON_RESONANCE:
        return 1.0
    return nv_spin.odmr_lineshape(mw, m.mw_shape)


def thresholds(m: PICurveModel, pump: bool = False, mw=None):
    """Forward and reverse threshold currents (A)."""
    u = drive_fraction(m, mw)
    return _thresholds_u(m, pump, u)


def _thresholds_u(m, pump, u):
    i_f = m.I_th_base + (m.dI_pump if pump else 0.0) + m.dI_mw_peak * u
    return i_f, i_f - m.dI_hyst


def _slope(m, u):
    return m.slope_off - u * (m.slope_off - m.slope_on)


def lasing_power(m: PICurveModel, I, u=0.0, pump: bool = True):
    """Output power of the lasing branch (no latch check)."""
    i_f, _ = _thresholds_u(m, pump, u)
    return m.P_step + _slope(m, u) * (I - i_f)


def pi_curve(m: PICurveModel, I: float, state: LaserState, pump: bool = False, mw=None):
    """Advance the latch by one current sample and return ``(P_out, state)``."""
    if I < 0:
        raise InvalidInputError("current must be >= 0")
    u = drive_fraction(m, mw)
    i_f, i_r = _thresholds_u(m, pump, u)
    lasing = state.lasing
    if not lasing and I >= i_f:
        lasing = True
    elif lasing and I < i_r:
        lasing = False
    direction = state.direction
    if state.last_current is not None and I != state.last_current:
        direction = "forward" if I > state.last_current else "reverse"
    P = m.P_step + _slope(m, u) * (I - i_f) if lasing else m.P_floor
    return float(P), LaserState(lasing, direction, float(I))


def latch_sequence(on_trigger, off_trigger, initial: bool = False):
    """Vectorized set/reset latch.

    ``on_trigger[n]`` forces lasing, ``off_trigger[n]`` forces it off; when
    neither fires the previous state is kept. The two must be exclusive.
    """
    on_trigger = np.asarray(on_trigger, dtype=bool)
    off_trigger = np.asarray(off_trigger, dtype=bool)
    n = on_trigger.size
    idx = np.arange(n)
    event = on_trigger | off_trigger
    last = np.maximum.accumulate(np.where(event, idx, -1))
    state = np.where(last >= 0, on_trigger[np.maximum(last, 0)], initial)
    return state


def pi_sweep(m: PICurveModel, currents, pump: bool = False, u=0.0, initial: bool = False):
    """Evaluate the latched P-I model along a current sequence.

    ``u`` may be a scalar or a per-sample drive fraction. Returns
    ``(power, lasing)`` arrays; identical to calling :func:`pi_curve`
    sample by sample.
    """
    I = np.asarray(currents, dtype=float)
    u = np.broadcast_to(np.asarray(u, dtype=float), I.shape)
    i_f, i_r = _thresholds_u(m, pump, u)
    lasing = latch_sequence(I >= i_f, I < i_r, initial)
    P = np.where(lasing, m.P_step + _slope(m, u) * (I - i_f), m.P_floor)
    return P, lasing


def threshold_odmr(m: PICurveModel, f_list, pump: bool = True):
    """Forward-threshold shift relative to the off-resonance value, per frequency."""
    base, _ = thresholds(m, pump, None)
    return [(float(f), thresholds(m, pump, float(f))[0] - base) for f in f_list]


def threshold_ladder(m: PICurveModel) -> dict[str, float]:
    """Named thresholds (A) for the standard measurement conditions."""
    f_bare, r_bare = thresholds(m, pump=False, mw=None)
    f_off, r_off = thresholds(m, pump=True, mw=None)
    f_on, r_on = thresholds(m, pump=True, mw=ON_RESONANCE)
    return {
        "I_th_f_bare": f_bare,
        "I_th_r_bare": r_bare,
        "I_th_f_off": f_off,
        "I_th_r_off": r_off,
        "I_th_f_on": f_on,
        "I_th_r_on": r_on,
    }


def ordering_holds(m: PICurveModel) -> bool:
    """Check I_th,r^on < I_th,r^off < I_th,f^on < I_th,f^off."""
    t = threshold_ladder(m)
    return t["I_th_r_on"] < t["I_th_r_off"] < t["I_th_f_on"] < t["I_th_f_off"]


def reverse_on_threshold(m: PICurveModel) -> float:
    """I_th,r^on, the current used to normalize contrast curves."""
    return thresholds(m, pump=True, mw=ON_RESONANCE)[1]


def contrast_vs_current(m: PICurveModel, I: float, variant: str = "step", u: float = 1.0) -> float:
    """ODMR contrast (P_off - P_on) / P_off at current ``I`` (pump on).

    Both branches are evaluated in the reverse-sweep latch state. The
    ``ideal`` variant removes the step, the floor and the hysteresis.
    """
    if variant == "ideal":
        m = m.ideal()
    elif variant != "step":
        raise InvalidInputError(f"unknown variant {variant!r}")

    def branch(uu):
        i_f, i_r = _thresholds_u(m, True, uu)
        if I >= i_r:
            return m.P_step + _slope(m, uu) * (I - i_f), True
        return m.P_floor, False

    p_off, las_off = branch(0.0)
    p_on, las_on = branch(u)
    if not (las_off or las_on) or p_off <= 0:
        raise UndefinedContrastError(f"laser off in both branches at I = {I} A")
    return (p_off - p_on) / p_off


def contrast_limit(m: PICurveModel) -> float:
    """Large-current limit of the contrast, 1 - slope_on/slope_off."""
    return 1.0 - m.slope_on / m.slope_off


def ideal_contrast_closed_form(m: PICurveModel, I: float) -> float:
    """1 - (s_on (I - I_f^on)) / (s_off (I - I_f^off)) for I above both thresholds."""
    f_off, _ = thresholds(m, True, None)
    f_on, _ = thresholds(m, True, ON_RESONANCE)
    return 1.0 - m.slope_on * (I - f_on) / (m.slope_off * (I - f_off))


def calibrate_contrast(
    m: PICurveModel, c_far: float = C_FAR_TARGET, c_th: float = C_TH_TARGET
) -> PICurveModel:
    """Fit ``slope_off`` and ``slope_on/slope_off`` to two contrast targets.

    ``c_far`` is matched by the large-current limit, ``c_th`` by the step
    model at I = I_th,r^on. Thresholds, step and floor are held fixed.
    """

    def residuals(x):
        s_off, ratio = x
        trial = replace(m, slope_off=s_off, slope_on=s_off * ratio)
        i_r = reverse_on_threshold(trial)
        return [
            (contrast_limit(trial) - c_far) / c_far,
            (contrast_vs_current(trial, i_r) - c_th) / c_th,
        ]

    s_max = m.P_step / (m.dI_hyst + m.dI_mw_peak)
    sol = least_squares(
        residuals,
        x0=[0.5 * s_max, 1.0 - c_far],
        bounds=([1e-6, 0.5], [s_max, 1.0]),
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
    )
    s_off, ratio = sol.x
    return replace(m, slope_off=float(s_off), slope_on=float(s_off * ratio))


def fig3d_model() -> PICurveModel:
    """Sawtooth-measurement preset: forward 28.11 mA, reverse 24.14 mA, no pump or MW."""
    return replace(PICurveModel(), I_th_base=28.11e-3, dI_hyst=3.97e-3)


def absorption_shift_profile(
    rates: nv_spin.RateModel,
    shape: nv_spin.Lineshape,
    f_list,
    w_mw_peak: float,
    sigma: float,
    n_nv: float,
    path_length: float,
):
    """Change of single-pass singlet absorbance versus microwave frequency."""
    base = nv_spin.singlet_absorption(
        nv_spin.steady_state(replace(rates, w_mw=0.0)), sigma, n_nv, path_length
    )
    out = []
    for f in f_list:
        w = nv_spin.mw_drive_rate(f, shape, w_mw_peak)
        alpha = nv_spin.singlet_absorption(
            nv_spin.steady_state(replace(rates, w_mw=float(w))), sigma, n_nv, path_length
        )
        out.append(alpha - base)
    return np.asarray(out)


def kappa_for_peak(delta_alpha_peak: float, dI_peak: float = 0.18e-3) -> float:
    """Threshold-shift coefficient (A per unit absorbance) with dI = kappa * d_alpha."""
    if not delta_alpha_peak > 0:
        raise InvalidInputError("peak absorbance change must be positive")
    return dI_peak / delta_alpha_peak
