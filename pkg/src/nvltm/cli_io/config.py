"""Plain-text experiment configuration.

Format::

    # comment
    [experiment]
    scenario = pi_sweep
    seed = 7

    [pi_curve]
    I_th_base = 26.75 mA
    P_step = 416 uW

Values may carry a unit suffix; they are converted to SI at parse time
and a suffix of the wrong dimension is rejected. A value without a suffix
is taken to be SI already. Vectors and pairs are comma separated, e.g.
``B = 0, 0, 6 mT`` or ``range = 20 mA, 35 mA``; rin tables are
``x:m`` knots, e.g. ``rin_table = 0.5:6, 1:6, 1.5:1, 100:1``.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field, replace

from .. import cavity, nv_spin
from .. import laser_threshold as lt
from .. import signal_synth as ss
from ..errors import ConfigError

SCENARIOS = ("pi_sweep", "am_odmr", "threshold_odmr", "fm_lockin_magnetometry", "noise_survey")

# dimension -> {suffix: factor to SI}
UNITS = {
    "1": {"": 1.0, "%": 1e-2, "ppm": 1e-6},
    "A": {"A": 1.0, "mA": 1e-3, "uA": 1e-6},
    "W": {"W": 1.0, "mW": 1e-3, "uW": 1e-6, "nW": 1e-9},
    "Hz": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9},
    "T": {"T": 1.0, "mT": 1e-3, "uT": 1e-6, "nT": 1e-9, "pT": 1e-12, "G": 1e-4},
    "s": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9},
    "m": {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "nm": 1e-9},
    "V": {"V": 1.0, "mV": 1e-3, "uV": 1e-6},
    "V/rtHz": {"V/rtHz": 1.0, "mV/rtHz": 1e-3, "uV/rtHz": 1e-6, "nV/rtHz": 1e-9},
    "1/rtHz": {"1/rtHz": 1.0},
    "1/s": {"1/s": 1.0, "s^-1": 1.0, "1/us": 1e6},
    "W/A": {"W/A": 1.0, "mW/mA": 1.0},
    "A/W": {"A/W": 1.0},
    "V/A": {"V/A": 1.0, "kV/A": 1e3},
    "Hz/T": {"Hz/T": 1.0, "MHz/mT": 1e9, "GHz/T": 1e9},
}


@dataclass(frozen=True)
class Key:
    kind: str  # float | int | bool | str | vec3 | pair | list | table
    dim: str = "1"
    default: object = None
    choices: tuple = ()


def _f(dim, default):
    return Key("float", dim, default)


_PI = lt.PICurveModel()
_RM = nv_spin.RateModel()
_CV = cavity.CavityConfig()
_NS = ss.NoiseSpec()
_DT = ss.Detector()

SCHEMA: dict[str, dict[str, Key]] = {
    "experiment": {
        "scenario": Key("str", choices=SCENARIOS),
        "seed": Key("int"),
        "out": Key("str", default="nvltm_out"),
        "workers": Key("int", default=1),
    },
    "spin": {
        "D": _f("Hz", nv_spin.D_ZFS),
        "E": _f("Hz", 2.45e6),
        "gamma_e": _f("Hz/T", nv_spin.GAMMA_E),
        "B": Key("vec3", "T", (0.0, 0.0, 0.0)),
        "fwhm": _f("Hz", 6.6e6),
    },
    "rates": {k: _f("1/s", getattr(_RM, k)) for k in ("k_rad", "k35", "k45", "k56", "k61", "k62", "w_pump", "w_mw")},
    "cavity": {
        "R1": _f("1", _CV.R1),
        "R_ff": _f("1", _CV.R_ff),
        "R2": _f("1", _CV.R2),
        "eta_overlap": _f("1", _CV.eta_overlap),
        "L_int": _f("m", _CV.L_int),
        "L_ext": _f("m", _CV.L_ext),
    },
    "pi_curve": {
        "I_th_base": _f("A", _PI.I_th_base),
        "slope_off": _f("W/A", _PI.slope_off),
        "slope_on": _f("W/A", _PI.slope_on),
        "P_step": _f("W", _PI.P_step),
        "P_floor": _f("W", _PI.P_floor),
        "dI_hyst": _f("A", _PI.dI_hyst),
        "dI_pump": _f("A", _PI.dI_pump),
        "dI_mw_peak": _f("A", _PI.dI_mw_peak),
    },
    "modulation": {
        "kind": Key("str", choices=("AM_square", "FM_sine", "current_sawtooth")),
        "f_mod": _f("Hz", None),
        "duty": _f("1", 0.5),
        "deviation": _f("Hz", 0.0),
        "range": Key("pair", "A", (0.0, 0.0)),
    },
    "noise": {
        "shot": Key("bool", default=False),
        "electronic_floor": _f("V/rtHz", 0.0),
        "laser_rin": _f("1/rtHz", 0.0),
        "rin_table": Key("table", "1", _NS.rin_table),
        "line_50hz": _f("V", 0.0),
        "line_freq": _f("Hz", 50.0),
        "drift_lowfreq": _f("V", 0.0),
    },
    "detector": {
        "responsivity": _f("A/W", _DT.responsivity),
        "gain": _f("V/A", _DT.gain),
        "wavelength": _f("m", _DT.wavelength),
    },
    "acquisition": {
        "fs": _f("Hz", 400e3),
        "duration": _f("s", 1.0),
        "current": _f("A", 0.0),
        "ratio": _f("1", 0.0),
        "pump": Key("bool", default=True),
        "mw": Key("str", default="off"),
        "preset": Key("str", default="default", choices=("default", "sawtooth_measurement")),
    },
    "odmr": {
        "f_start": _f("Hz", 2.85e9),
        "f_stop": _f("Hz", 2.89e9),
        "n_points": Key("int", default=81),
        "reference": _f("Hz", 2.95e9),
        "contrast_ratios": Key("list", "1", (1.0, 1.25, 1.5, 2.0, 3.0, 5.0, 10.0, 50.0)),
    },
    "magnetometry": {
        "line_center": _f("Hz", 2.706e9),
        "line_amplitude": _f("1", 0.5),
        "line_fwhm": _f("Hz", 6.6e6),
        "f_insensitive": _f("Hz", 1.31e9),
        "field_amplitude": _f("T", 100e-9),
        "field_freq": _f("Hz", 50.0),
        "settle": _f("s", 5e-3),
        "enbw": _f("Hz", 2.6e3),
        "slope_span": _f("Hz", 2e6),
        "slope_points": Key("int", default=201),
        "segment": _f("s", 1.0),
        "band_lo": _f("Hz", 0.0),
        "band_hi": _f("Hz", 500.0),
    },
    "survey": {
        "ratios": Key("list", "1", (1.0, 1.1, 1.25, 1.5, 2.0)),
    },
}

# sections each scenario cannot run without; the rest fall back to defaults
REQUIRED = {
    "pi_sweep": ("modulation",),
    "am_odmr": ("modulation",),
    "threshold_odmr": ("modulation", "odmr"),
    "fm_lockin_magnetometry": ("modulation", "noise"),
    "noise_survey": ("noise",),
}

SECTION_ORDER = tuple(SCHEMA)


@dataclass
class ExperimentConfig:
    """Validated configuration, all values in SI units."""

    scenario: str
    seed: int | None
    sections: dict[str, dict[str, object]] = field(default_factory=dict)

    def get(self, section: str, key: str):
        return self.sections[section][key]

    @property
    def out(self) -> str:
        return self.sections["experiment"]["out"]

    @property
    def workers(self) -> int:
        return self.sections["experiment"]["workers"]

    def with_overrides(self, seed=None, out=None, workers=None) -> "ExperimentConfig":
        sections = {k: dict(v) for k, v in self.sections.items()}
        exp = sections["experiment"]
        if seed is not None:
            exp["seed"] = int(seed)
        if out is not None:
            exp["out"] = str(out)
        if workers is not None:
            exp["workers"] = int(workers)
        return replace(self, seed=exp["seed"], sections=sections)

    # builders for the model objects

    def spin_system(self) -> nv_spin.SpinSystem:
        s = self.sections["spin"]
        return nv_spin.SpinSystem(D=s["D"], E=s["E"], gamma_e=s["gamma_e"], B=tuple(s["B"]))

    def rate_model(self) -> nv_spin.RateModel:
        return nv_spin.RateModel(**self.sections["rates"])

    def cavity(self) -> cavity.CavityConfig:
        return cavity.CavityConfig(**self.sections["cavity"])

    def mw_shape(self) -> nv_spin.Lineshape:
        s = self.sections["spin"]
        return lt.normalized_profile(nv_spin.zero_field_lineshape(self.spin_system(), s["fwhm"]))

    def pi_model(self) -> lt.PICurveModel:
        m = lt.PICurveModel(**self.sections["pi_curve"], mw_shape=self.mw_shape())
        if self.sections["acquisition"]["preset"] == "sawtooth_measurement":
            m = replace(m, I_th_base=lt.fig3d_model().I_th_base, dI_hyst=lt.fig3d_model().dI_hyst)
        return m

    def modulation(self) -> ss.ModulationSpec:
        s = self.sections["modulation"]
        return ss.ModulationSpec(s["kind"], s["f_mod"], s["duty"], s["deviation"], tuple(s["range"]))

    def noise(self) -> ss.NoiseSpec:
        s = dict(self.sections["noise"])
        s["rin_table"] = tuple(tuple(k) for k in s["rin_table"])
        return ss.NoiseSpec(**s)

    def detector(self) -> ss.Detector:
        return ss.Detector(**self.sections["detector"])


_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)\s*$")
_SECTION = re.compile(r"^\s*\[\s*([A-Za-z_][A-Za-z0-9_]*)\s*\]\s*$")
_NUM = re.compile(r"^([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S*)$")


def _strip_comment(line: str) -> str:
    return line.split("#", 1)[0]


def _number(text: str, dim: str, unit_hint: str | None = None) -> float:
    m = _NUM.match(text.strip())
    if not m:
        raise ValueError(f"cannot parse number {text.strip()!r}")
    value, unit = float(m.group(1)), m.group(2) or unit_hint or ""
    if unit == "" and dim != "1":
        return value
    for d, table in UNITS.items():
        if unit in table:
            if d != dim:
                raise ValueError(f"unit mismatch: {unit!r} is a {d} unit, expected {dim}")
            return value * table[unit]
    raise ValueError(f"unknown unit {unit!r}")


def _list_unit(parts):
    """A trailing unit on the last element applies to the whole list."""
    m = _NUM.match(parts[-1].strip())
    return m.group(2) if m and m.group(2) else None


def _value(text: str, key: Key):
    if key.kind == "str":
        if key.choices and text not in key.choices:
            raise ValueError(f"{text!r} is not one of {', '.join(key.choices)}")
        return text
    if key.kind == "int":
        try:
            return int(text)
        except ValueError:
            raise ValueError(f"expected an integer, got {text!r}") from None
    if key.kind == "bool":
        low = text.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if key.kind == "float":
        return _number(text, key.dim)
    parts = [p for p in text.split(",") if p.strip()]
    if key.kind in ("vec3", "pair"):
        n = 3 if key.kind == "vec3" else 2
        if len(parts) != n:
            raise ValueError(f"expected {n} comma-separated values")
        hint = _list_unit(parts)
        return tuple(_number(p, key.dim, hint) for p in parts)
    if key.kind == "list":
        hint = _list_unit(parts) if parts else None
        return tuple(_number(p, key.dim, hint) for p in parts)
    if key.kind == "table":
        knots = []
        for p in parts:
            if ":" in p:
                a, b = p.split(":", 1)
                knots.append((_number(a, "1"), _number(b, "1")))
            else:
                knots.append((_number(p, "1"), 0.0))
        return tuple(knots)
    raise AssertionError(key.kind)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a configuration text; raises ConfigError listing every problem."""
    errors: list[tuple[int, str]] = []
    raw: dict[str, dict[str, object]] = {}
    seen_at: dict[tuple[str, str], int] = {}
    section = None
    for ln, line in enumerate(text.splitlines(), start=1):
        body = _strip_comment(line)
        if not body.strip():
            continue
        m = _SECTION.match(body)
        if m:
            section = m.group(1)
            if section not in SCHEMA:
                errors.append((ln, f"unknown section [{section}]"))
                section = "__bad__"
            elif section in raw:
                errors.append((ln, f"duplicate section [{section}]"))
            raw.setdefault(section, {})
            continue
        m = _LINE.match(body)
        if not m:
            errors.append((ln, f"expected 'key = value', got {line.strip()!r}"))
            continue
        key, value = m.groups()
        if section is None:
            errors.append((ln, f"key {key!r} outside any section"))
            continue
        if section == "__bad__":
            continue
        schema = SCHEMA[section]
        if key not in schema:
            errors.append((ln, f"unknown key {key!r} in [{section}]"))
            continue
        if (section, key) in seen_at:
            errors.append((ln, f"duplicate key {key!r} in [{section}] (first on line {seen_at[section, key]})"))
            continue
        seen_at[section, key] = ln
        try:
            raw[section][key] = _value(value, schema[key])
        except ValueError as exc:
            errors.append((ln, f"{key}: {exc}"))

    raw.pop("__bad__", None)
    exp = raw.get("experiment")
    if exp is None:
        errors.append((0, "missing section [experiment]"))
        raise ConfigError(errors)
    scenario = exp.get("scenario")
    if scenario is None:
        errors.append((0, "missing key 'scenario' in [experiment]"))
        raise ConfigError(errors)
    for sec in REQUIRED[scenario]:
        if sec not in raw:
            errors.append((0, f"missing section [{sec}] required by scenario {scenario}"))

    sections = {}
    for sec, schema in SCHEMA.items():
        given = raw.get(sec, {})
        resolved = {}
        for key, spec in schema.items():
            if key in given:
                resolved[key] = given[key]
            elif spec.default is None and sec in raw and sec != "experiment":
                errors.append((0, f"missing key {key!r} in [{sec}]"))
            else:
                resolved[key] = spec.default
        sections[sec] = resolved
    if errors:
        raise ConfigError(errors)

    cfg = ExperimentConfig(scenario, sections["experiment"]["seed"], sections)
    try:
        _validate(cfg)
    except (ValueError, TypeError) as exc:
        raise ConfigError([(0, str(exc))]) from exc
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    """Build every model object once so their own invariants are enforced."""
    cfg.spin_system()
    cfg.rate_model()
    cfg.cavity()
    cfg.pi_model()
    noise = cfg.noise()
    cfg.detector()
    if cfg.sections["modulation"]["f_mod"] is not None:
        cfg.modulation()
    if noise.enabled and cfg.seed is None:
        raise ValueError("a seed is required when any noise source is enabled")
    acq = cfg.sections["acquisition"]
    if acq["mw"] not in ("off", "on"):
        _number(acq["mw"], "Hz")


def _fmt_float(v: float, dim: str) -> str:
    s = "%.17g" % v
    return s if dim == "1" else f"{s} {next(iter(UNITS[dim]))}"


def _fmt(value, key: Key) -> str:
    if key.kind == "bool":
        return "true" if value else "false"
    if key.kind in ("str", "int"):
        return str(value)
    if key.kind == "float":
        return _fmt_float(value, key.dim)
    if key.kind in ("vec3", "pair", "list"):
        return ", ".join(_fmt_float(v, key.dim) for v in value)
    if key.kind == "table":
        return ", ".join(f"{'%.17g' % a}:{'%.17g' % b}" for a, b in value)
    raise AssertionError(key.kind)


def print_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; ``parse_config(print_config(c)) == c``."""
    lines = []
    for sec in SECTION_ORDER:
        vals = cfg.sections[sec]
        required = [k for k, spec in SCHEMA[sec].items() if spec.default is None]
        if sec != "experiment" and any(vals.get(k) is None for k in required):
            # section absent from the input; printing defaults would make it incomplete
            continue
        lines.append(f"[{sec}]")
        for key, spec in SCHEMA[sec].items():
            v = vals.get(key)
            if v is None:
                continue
            lines.append(f"{key} = {_fmt(v, spec)}")
        lines.append("")
    return "\n".join(lines)


def config_hash(cfg: ExperimentConfig) -> str:
    """sha256 over the resolved SI values; the output directory and worker count are excluded."""
    payload = {sec: dict(vals) for sec, vals in cfg.sections.items()}
    payload["experiment"] = {k: v for k, v in payload["experiment"].items() if k not in ("out", "workers")}
    text = json.dumps(payload, sort_keys=True, default=list, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
