import pytest

from nvltm import laser_threshold as lt
from nvltm.cli_io.config import config_hash, load_config, parse_config, print_config
from nvltm.errors import ConfigError

MINIMAL = """
[experiment]
scenario = pi_sweep
seed = 1

[modulation]
kind = current_sawtooth
f_mod = 37 Hz
range = 20 mA, 35 mA
"""


def errors_of(text):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    return exc.value.errors


def test_minimal_pi_sweep_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.scenario == "pi_sweep"
    assert lt.thresholds(cfg.pi_model(), pump=False)[0] == pytest.approx(26.75e-3, abs=1e-12)
    assert cfg.modulation().range == pytest.approx((20e-3, 35e-3), rel=1e-15)


def test_units_normalized():
    cfg = parse_config(MINIMAL + "\n[pi_curve]\nP_step = 416 uW\nI_th_base = 26.75 mA\n[spin]\nB = 0, 0, 6 mT\n")
    assert cfg.get("pi_curve", "P_step") == pytest.approx(416e-6, rel=1e-15)
    assert cfg.get("pi_curve", "I_th_base") == pytest.approx(26.75e-3, rel=1e-15)
    assert cfg.get("spin", "B") == pytest.approx((0, 0, 6e-3), rel=1e-15)


def test_unit_mismatch_names_key_and_line():
    errs = errors_of(MINIMAL + "\n[pi_curve]\nI_th_base = 5 mT\n")
    assert len(errs) == 1
    line, msg = errs[0]
    assert line == 12
    assert "I_th_base" in msg and "unit mismatch" in msg


def test_duplicate_key():
    errs = errors_of(MINIMAL + "\n[pi_curve]\nP_step = 416 uW\nP_step = 400 uW\n")
    assert any("duplicate key 'P_step'" in m and ln == 13 for ln, m in errs)


def test_unknown_key_and_section():
    errs = errors_of(MINIMAL + "\n[pi_curve]\nP_stepp = 1 W\n[lasers]\nx = 1\n")
    msgs = [m for _, m in errs]
    assert any("unknown key 'P_stepp'" in m for m in msgs)
    assert any("unknown section [lasers]" in m for m in msgs)


def test_missing_section():
    errs = errors_of("[experiment]\nscenario = pi_sweep\n")
    assert any("missing section [modulation]" in m for _, m in errs)


def test_seed_required_with_noise():
    text = MINIMAL.replace("seed = 1\n", "") + "\n[noise]\nelectronic_floor = 1 uV/rtHz\n"
    errs = errors_of(text)
    assert any("seed is required" in m for _, m in errs)
    parse_config(MINIMAL.replace("seed = 1\n", ""))


def test_round_trip(configs_dir):
    for path in sorted(configs_dir.glob("*.cfg")):
        cfg = load_config(path)
        again = parse_config(print_config(cfg))
        assert again == cfg, path.name
        assert print_config(again) == print_config(cfg)


def test_hash_ignores_formatting():
    a = parse_config(MINIMAL)
    b = parse_config("# comment\n" + MINIMAL.replace(" = ", "=").replace("37 Hz", "0.037 kHz") + "\n\n")
    assert config_hash(a) == config_hash(b)


def test_hash_tracks_semantic_changes():
    a = parse_config(MINIMAL)
    assert config_hash(a) != config_hash(parse_config(MINIMAL.replace("37 Hz", "38 Hz")))
    assert config_hash(a) != config_hash(a.with_overrides(seed=2))
    # where the results go and how many threads make them does not change them
    assert config_hash(a) == config_hash(a.with_overrides(out="elsewhere", workers=4))


def test_bad_model_values_reported():
    errs = errors_of(MINIMAL + "\n[cavity]\nR1 = 1.5\n")
    assert errs and errs[0][0] == 0
