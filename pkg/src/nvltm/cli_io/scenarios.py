"""Scenario pipelines: synthesis, analysis and persistence for one configuration."""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import tempfile
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .. import laser_threshold as lt
from .. import nv_spin
from .. import signal_synth as ss
from ..analysis import fitting, lockin, sensitivity, spectral
from ..errors import NVLTMError, ScenarioError, UndefinedContrastError
from .config import ExperimentConfig, config_hash, print_config
from .csvio import export_csv

# reporting units: SI unit -> (conventional unit, factor)
DISPLAY_UNITS = {
    "A": ("mA", 1e3),
    "W": ("uW", 1e6),
    "Hz": ("MHz", 1e-6),
    "T": ("nT", 1e9),
    "T/rtHz": ("nT/rtHz", 1e9),
    "1": ("%", 100.0),
    "V/Hz": ("uV/kHz", 1e9),
    "V/rtHz": ("uV/rtHz", 1e6),
}

# noise budget of the magnetometry scenarios; laser_rin and the
# near-threshold multiplier come from calibrate_noise() with these inputs
ELECTRONIC_FLOOR = 2.0e-8  # V/rtHz
LASER_RIN = 1.3346725499016742e-07  # 1/rtHz
RIN_NEAR = 6.104646118895727
SENSITIVITY_FAR = 7.6e-9  # T/rtHz at I = 2 I_th,r^on
SENSITIVITY_NEAR = 17.0e-9  # T/rtHz at I = I_th,r^on


def rin_table(m_near: float = RIN_NEAR):
    """Laser-noise multiplier knots: m_near up to threshold, 1 from 1.5 I_th,r^on."""
    return ((0.5, m_near), (1.0, m_near), (1.5, 1.0), (100.0, 1.0))


def magnetometry_noise(m_near: float = RIN_NEAR, laser_rin: float = LASER_RIN) -> ss.NoiseSpec:
    return ss.NoiseSpec(
        shot=True, electronic_floor=ELECTRONIC_FLOOR, laser_rin=laser_rin, rin_table=rin_table(m_near)
    )


@dataclass
class Quantity:
    value: float
    unit: str
    display_value: float | None = None
    display_unit: str | None = None

    @classmethod
    def of(cls, value, unit):
        value = float(value)
        if unit in DISPLAY_UNITS:
            pu, k = DISPLAY_UNITS[unit]
            return cls(value, unit, value * k, pu)
        return cls(value, unit)


@dataclass
class RunReport:
    scenario: str
    config_hash: str
    seed: int | None
    quantities: dict[str, Quantity] = field(default_factory=dict)
    files: dict[str, str] = field(default_factory=dict)  # name -> sha256

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        d = json.loads(text)
        d["quantities"] = {k: Quantity(**v) for k, v in d["quantities"].items()}
        return cls(**d)

    def __getitem__(self, name):
        return self.quantities[name].value


def _current(cfg: ExperimentConfig, model: lt.PICurveModel) -> float:
    acq = cfg.sections["acquisition"]
    if acq["current"] > 0:
        return acq["current"]
    if acq["ratio"] > 0:
        return acq["ratio"] * lt.reverse_on_threshold(model)
    raise ScenarioError("set acquisition.current or acquisition.ratio")


def _mw_setting(cfg: ExperimentConfig):
    mw = cfg.sections["acquisition"]["mw"]
    if mw in ("off", "on"):
        return None if mw == "off" else lt.ON_RESONANCE
    from .config import _number

    return _number(mw, "Hz")


def _freqs(cfg: ExperimentConfig):
    s = cfg.sections["odmr"]
    return np.linspace(s["f_start"], s["f_stop"], s["n_points"])


def _seed(cfg: ExperimentConfig, k: int):
    return None if cfg.seed is None else cfg.seed + k


def run_pi_sweep(cfg: ExperimentConfig, out: Path):
    model, det, acq = cfg.pi_model(), cfg.detector(), cfg.sections["acquisition"]
    mw = _mw_setting(cfg)
    tr = ss.synth_pi_sweep(
        model, cfg.modulation(), acq["fs"], acq["duration"], cfg.noise(), cfg.seed,
        det, acq["pump"], mw, cfg.workers,
    )
    export_csv(out / "trace.csv", [
        ("time", "s", tr.times), ("current", "A", tr.meta["current"]), ("voltage", "V", tr.samples),
    ])
    (i_fw, p_fw), (i_rv, p_rv) = ss.sweep_branches(tr, det)
    export_csv(out / "pi_forward.csv", [("current", "A", i_fw), ("power", "W", p_fw)])
    export_csv(out / "pi_reverse.csv", [("current", "A", i_rv), ("power", "W", p_rv)])
    fw = fitting.fit_threshold(i_fw, p_fw)
    rv = fitting.fit_threshold(i_rv, p_rv)
    i_f, i_r = lt.thresholds(model, acq["pump"], mw)
    q = {
        "I_th_forward_fit": Quantity.of(fw["I_th"], "A"),
        "I_th_reverse_fit": Quantity.of(rv["I_th"], "A"),
        "hysteresis_fit": Quantity.of(fw["I_th"] - rv["I_th"], "A"),
        "P_step_fit": Quantity.of(fw["P_step"], "W"),
        "P_th_fit": Quantity.of(fw["P_step"] + fw["P_floor"], "W"),
        "slope_fit": Quantity.of(fw["slope"], "W/A"),
        "I_th_forward": Quantity.of(i_f, "A"),
        "I_th_reverse": Quantity.of(i_r, "A"),
    }
    for name, v in lt.threshold_ladder(model).items():
        q[name] = Quantity.of(v, "A")
    return q


def run_am_odmr(cfg: ExperimentConfig, out: Path):
    model, det, acq = cfg.pi_model(), cfg.detector(), cfg.sections["acquisition"]
    current = _current(cfg, model)
    freqs = _freqs(cfg)
    traces = ss.synth_am_odmr(
        model, freqs, cfg.modulation(), acq["fs"], acq["duration"], current,
        cfg.noise(), cfg.seed, det, acq["pump"], cfg.workers,
    )
    contrast, v_off = [], []
    for tr in traces:
        gate = tr.meta["gate"]
        von, voff = tr.samples[gate].mean(), tr.samples[~gate].mean()
        contrast.append(sensitivity.odmr_contrast(von, voff))
        v_off.append(voff)
    export_csv(out / "am_odmr.csv", [
        ("frequency", "Hz", freqs), ("contrast", "1", contrast), ("v_off", "V", v_off),
    ])

    ir = lt.reverse_on_threshold(model)
    ratios = np.asarray(cfg.sections["odmr"]["contrast_ratios"], dtype=float)
    step, ideal = [], []
    for x in ratios:
        step.append(lt.contrast_vs_current(model, x * ir, "step"))
        try:
            ideal.append(lt.contrast_vs_current(model, x * ir, "ideal"))
        except UndefinedContrastError:
            ideal.append(np.nan)
    export_csv(out / "contrast_curve.csv", [
        ("ratio", "1", ratios), ("current", "A", ratios * ir),
        ("contrast_step", "1", step), ("contrast_ideal", "1", ideal),
    ])
    c_th = lt.contrast_vs_current(model, ir)
    c_far = lt.contrast_limit(model)
    k = int(np.argmax(contrast))
    return {
        "current": Quantity.of(current, "A"),
        "peak_contrast": Quantity.of(contrast[k], "1"),
        "peak_frequency": Quantity.of(freqs[k], "Hz"),
        "C_th": Quantity.of(c_th, "1"),
        "C_far": Quantity.of(c_far, "1"),
        "C_at_2x": Quantity.of(lt.contrast_vs_current(model, lt.FAR_ABOVE_RATIO * ir), "1"),
        "enhancement": Quantity.of(c_th / c_far, "ratio"),
    }


def threshold_scan(cfg: ExperimentConfig, freqs, seed_offset: int = 0):
    """Fitted forward threshold for each microwave frequency."""
    model, det, acq = cfg.pi_model(), cfg.detector(), cfg.sections["acquisition"]
    sweep, noise = cfg.modulation(), cfg.noise()
    out = []
    for k, f in enumerate(freqs):
        tr = ss.synth_pi_sweep(
            model, sweep, acq["fs"], acq["duration"], noise, _seed(cfg, seed_offset + k),
            det, acq["pump"], float(f), cfg.workers,
        )
        (i_fw, p_fw), _ = ss.sweep_branches(tr, det)
        out.append(fitting.fit_threshold(i_fw, p_fw)["I_th"])
    return np.asarray(out)


def run_threshold_odmr(cfg: ExperimentConfig, out: Path):
    freqs = _freqs(cfg)
    i_th = threshold_scan(cfg, freqs)
    i_ref = threshold_scan(cfg, [cfg.sections["odmr"]["reference"]], seed_offset=freqs.size)[0]
    d_i = i_th - i_ref
    export_csv(out / "threshold_odmr.csv", [
        ("frequency", "Hz", freqs), ("I_th", "A", i_th), ("delta_I_th", "A", d_i),
    ])
    fit = fitting.fit_lorentzian(freqs, d_i, n_peaks=2)
    return {
        "I_th_reference": Quantity.of(i_ref, "A"),
        "splitting_2E": Quantity.of(fit["splitting"], "Hz"),
        "splitting_2E_stderr": Quantity.of(fit.stderr["splitting"], "Hz"),
        "fwhm": Quantity.of(fit["fwhm"], "Hz"),
        "peak_delta_I_th": Quantity.of(fitting.lorentzian_peak_value(fit, 2), "A"),
        "fit_converged": Quantity(float(fit.converged), "bool"),
    }


@dataclass(frozen=True)
class MagnetometrySetup:
    model: lt.PICurveModel
    fm: ss.ModulationSpec
    resonance: nv_spin.Lineshape
    detector: ss.Detector
    current: float
    fs: float
    enbw: float
    band: tuple[float, float]
    gamma_e: float


def magnetometry_setup(cfg: ExperimentConfig) -> MagnetometrySetup:
    mag, acq = cfg.sections["magnetometry"], cfg.sections["acquisition"]
    model = cfg.pi_model()
    res = nv_spin.Lineshape((mag["line_center"],), mag["line_fwhm"], (mag["line_amplitude"],))
    return MagnetometrySetup(
        model, cfg.modulation(), res, cfg.detector(), _current(cfg, model), acq["fs"],
        mag["enbw"], (mag["band_lo"], mag["band_hi"]), cfg.sections["spin"]["gamma_e"],
    )


def calibration_slope(setup: MagnetometrySetup, span: float = 2e6, points: int = 201):
    """Lock-in output versus FM centre frequency and its slope at the line centre."""
    c = setup.resonance.centers[0]
    fc = c + np.linspace(-span / 2, span / 2, points)
    v = ss.fm_demodulated_response(
        setup.model, setup.current, fc, setup.fm, setup.resonance, setup.detector
    )
    slope, f0 = fitting.lockin_slope(fc, v)
    return fc, v, slope, f0


def _mean_power(setup: MagnetometrySetup) -> float:
    return float(lt.lasing_power(setup.model, setup.current, 0.0, True))


def calibrate_noise(
    setup_far: MagnetometrySetup,
    setup_near: MagnetometrySetup,
    target_far: float = SENSITIVITY_FAR,
    target_near: float = SENSITIVITY_NEAR,
    electronic_floor: float = ELECTRONIC_FLOOR,
):
    """Laser RIN and near-threshold multiplier that hit the two sensitivity targets.

    Shot noise and the electronic floor are fixed; the remaining white
    density at the far point sets ``laser_rin`` (multiplier 1) and the
    near point sets the multiplier there.
    """
    out = []
    for setup, target in ((setup_far, target_far), (setup_near, target_near)):
        _, _, slope, _ = calibration_slope(setup)
        total = sensitivity.required_white_density(target, slope, setup.fs, setup.enbw, setup.band, setup.gamma_e)
        p = _mean_power(setup)
        shot = ss.white_density(ss.NoiseSpec(shot=True), p, setup.detector)
        rest = sensitivity.residual_density(total, shot, electronic_floor)
        out.append(rest / float(setup.detector.volts(p)))
    laser_rin = out[0]
    return laser_rin, out[1] / laser_rin


def _field_lsd(trace, setup, slope, f_ref, settle, segment):
    # the measured configuration has ENBW above f_mod; the leaked harmonics sit above the analysis band
    demod = lockin.lockin_demodulate(trace, f_ref, -np.pi / 2, setup.enbw, allow_wideband=True)
    demod = lockin.trim(demod, settle)
    return spectral.volts_to_tesla(spectral.lsd(demod, segment), slope, setup.gamma_e)


def run_fm_lockin(cfg: ExperimentConfig, out: Path):
    mag, acq = cfg.sections["magnetometry"], cfg.sections["acquisition"]
    setup = magnetometry_setup(cfg)
    noise = cfg.noise()
    fc, v, slope, f0 = calibration_slope(setup, mag["slope_span"], mag["slope_points"])
    export_csv(out / "lockin_curve.csv", [("frequency", "Hz", fc), ("lockin", "V", v)])

    total = acq["duration"] + mag["settle"]
    b0, fb = mag["field_amplitude"], mag["field_freq"]

    def field_fn(t):
        return b0 * np.sin(2 * np.pi * fb * t)

    spectra = {}
    for k, (name, f_center) in enumerate(
        (("sensitive", setup.resonance.centers[0]), ("insensitive", mag["f_insensitive"]))
    ):
        tr = ss.synth_fm_lockin_input(
            setup.model, f_center, setup.fm, setup.fs, total, setup.current, setup.resonance,
            noise, _seed(cfg, k), setup.detector, field=field_fn,
            field_shift=-setup.gamma_e, workers=cfg.workers,
        )
        sd = _field_lsd(tr, setup, slope, setup.fm.f_mod, mag["settle"], mag["segment"])
        spectra[name] = sd
        export_csv(out / f"lsd_{name}.csv", [("frequency", "Hz", sd.freqs), ("density", "T/rtHz", sd.values)])

    sens = spectra["sensitive"]
    k50 = int(np.argmin(np.abs(sens.freqs - fb)))
    empirical = spectral.empirical_sensitivity(spectra["insensitive"], setup.band)
    x = setup.current / lt.reverse_on_threshold(setup.model)
    white = ss.white_density(noise, _mean_power(setup), setup.detector, x)
    predicted = sensitivity.predicted_sensitivity(white, slope, setup.fs, setup.enbw, setup.band, setup.gamma_e)
    return {
        "current": Quantity.of(setup.current, "A"),
        "current_ratio": Quantity.of(x, "ratio"),
        "lockin_slope": Quantity.of(slope, "V/Hz"),
        "zero_crossing": Quantity.of(f0, "Hz"),
        "sensitivity": Quantity.of(empirical, "T/rtHz"),
        "sensitivity_predicted": Quantity.of(predicted, "T/rtHz"),
        "field_peak": Quantity.of(sens.values[k50], "T/rtHz"),
        "field_peak_expected": Quantity.of(b0 / np.sqrt(2), "T/rtHz"),
        "white_density": Quantity.of(white, "V/rtHz"),
    }


def run_noise_survey(cfg: ExperimentConfig, out: Path):
    model, det, acq = cfg.pi_model(), cfg.detector(), cfg.sections["acquisition"]
    noise = cfg.noise()
    ir = lt.reverse_on_threshold(model)
    ratios = np.asarray(cfg.sections["survey"]["ratios"], dtype=float)
    n = int(round(acq["fs"] * acq["duration"]))
    metric, rel = [], []
    for k, x in enumerate(ratios):
        P, lasing = lt.pi_sweep(model, np.full(n, x * ir), acq["pump"], 0.0, initial=True)
        if not lasing.all():
            raise ScenarioError(f"laser is off at I/I_th,r^on = {x}")
        tr = ss.TimeTrace(det.volts(P), acq["fs"], 0.0, {"units": "V"})
        tr = ss.add_noise(tr, noise, P, _seed(cfg, k), det, x, cfg.workers)
        m = spectral.laser_noise_metric(spectral.lsd(tr))
        metric.append(m)
        rel.append(m / float(det.volts(P[0])))
    export_csv(out / "noise_survey.csv", [
        ("ratio", "1", ratios), ("current", "A", ratios * ir),
        ("noise_1_5kHz", "V/rtHz", metric), ("relative_noise", "1/rtHz", rel),
    ])
    q = {f"noise_1_5kHz_x{x:g}": Quantity.of(m, "V/rtHz") for x, m in zip(ratios, metric)}
    q["I_th_r_on"] = Quantity.of(ir, "A")
    return q


RUNNERS = {
    "pi_sweep": run_pi_sweep,
    "am_odmr": run_am_odmr,
    "threshold_odmr": run_threshold_odmr,
    "fm_lockin_magnetometry": run_fm_lockin,
    "noise_survey": run_noise_survey,
}


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_scenario(cfg: ExperimentConfig, out=None) -> RunReport:
    """Run ``cfg`` and write its CSV files, ``config.txt`` and ``report.json``.

    Everything is first written to a hidden staging directory inside the
    output directory and moved into place only on success.
    """
    out_dir = Path(out if out is not None else cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".partial-", dir=out_dir))
    try:
        try:
            quantities = RUNNERS[cfg.scenario](cfg, stage)
        except (NVLTMError, ValueError, ArithmeticError) as exc:
            raise ScenarioError(f"scenario {cfg.scenario} failed: {exc}") from exc
        (stage / "config.txt").write_text(print_config(cfg), encoding="utf-8", newline="\n")
        files = {p.name: _sha256(p) for p in sorted(stage.iterdir())}
        report = RunReport(cfg.scenario, config_hash(cfg), cfg.seed, quantities, files)
        (stage / "report.json").write_text(report.to_json(), encoding="utf-8", newline="\n")
        for p in sorted(stage.iterdir()):
            os.replace(p, out_dir / p.name)
        return report
    finally:
        shutil.rmtree(stage, ignore_errors=True)


def load_report(path) -> RunReport:
    return RunReport.from_json(Path(path).read_text(encoding="utf-8"))


def calibrated_magnetometry_config(cfg: ExperimentConfig, ratio: float) -> ExperimentConfig:
    """Copy of ``cfg`` operating at ``ratio`` = I / I_th,r^on."""
    sections = {k: dict(v) for k, v in cfg.sections.items()}
    sections["acquisition"].update(current=0.0, ratio=float(ratio))
    return replace(cfg, sections=sections)
