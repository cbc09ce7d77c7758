import numpy as np
import pytest

from nvltm.cli_io.csvio import export_csv, load_csv, load_spectrum
from nvltm.errors import InvalidInputError


def test_three_samples_four_lines(tmp_path):
    p = tmp_path / "t.csv"
    export_csv(p, [("time", "s", [0.0, 1.0, 2.0]), ("voltage", "V", [0.1, 0.2, 0.3])])
    raw = p.read_bytes()
    assert raw.count(b"\n") == 4 and b"\r" not in raw
    lines = raw.decode("utf-8").splitlines()
    assert lines[0] == "time [s],voltage [V]"
    assert lines[2] == "1,0.20000000000000001"


def test_bit_identical_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    vals = np.r_[rng.normal(size=1000) * 10.0 ** rng.integers(-300, 300, 1000), 0.0, -0.0, 5e-324, 1.7976931348623157e308]
    p = tmp_path / "r.csv"
    export_csv(p, [("x", "V/rtHz", vals)])
    unit, back = load_csv(p)["x"]
    assert unit == "V/rtHz"
    assert back.tobytes() == vals.tobytes()


def test_spectrum_validator(tmp_path):
    good = tmp_path / "good.csv"
    export_csv(good, [("frequency", "Hz", [0.0, 1.0, 2.0]), ("density", "V/rtHz", [1.0, 1.0, 1.0])])
    assert "density" in load_spectrum(good)
    bad = tmp_path / "bad.csv"
    export_csv(bad, [("frequency", "Hz", [0.0, 2.0, 1.0]), ("density", "V/rtHz", [1.0, 1.0, 1.0])])
    with pytest.raises(InvalidInputError):
        load_spectrum(bad)


def test_ragged_columns_rejected(tmp_path):
    with pytest.raises(InvalidInputError):
        export_csv(tmp_path / "x.csv", [("a", "1", [1.0]), ("b", "1", [1.0, 2.0])])


def test_io_error_has_path(tmp_path):
    target = tmp_path / "missing" / "x.csv"
    with pytest.raises(OSError, match="missing"):
        export_csv(target, [("a", "1", [1.0])])
    with pytest.raises(OSError, match="nope.csv"):
        load_csv(tmp_path / "nope.csv")


def test_bad_header(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("time,voltage\n1,2\n")
    with pytest.raises(InvalidInputError):
        load_csv(p)
