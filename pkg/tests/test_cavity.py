import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nvltm import cavity
from nvltm.errors import DivergentFinesseError, InvalidInputError

import oracles


def test_effective_reflectivity_example():
    re = cavity.effective_reflectivity(cavity.CavityConfig())
    assert re == pytest.approx(0.60, abs=0.01)
    assert re == pytest.approx(float(oracles.effective_reflectivity_mp("0.001", "0.9", "0.8")), rel=1e-14)


def test_effective_reflectivity_limits():
    assert cavity.effective_reflectivity(cavity.CavityConfig(eta_overlap=0.0, R_ff=0.03)) == pytest.approx(0.03, rel=1e-15)
    assert cavity.effective_reflectivity(cavity.CavityConfig(eta_overlap=1.0, R_ff=0.0, R2=0.7)) == pytest.approx(0.7, rel=1e-15)


def test_reflectivity_monotone_in_R2():
    r2 = np.linspace(0, 1, 101)
    vals = [cavity.effective_reflectivity(cavity.CavityConfig(R2=x)) for x in r2]
    assert np.all(np.diff(vals) > 0)


def test_finesse_examples():
    assert cavity.finesse(0.9, 0.6) == pytest.approx(10.15, abs=0.05)
    assert cavity.finesse(0.99, 0.99) == pytest.approx(312.6, abs=0.05)
    assert cavity.finesse(0.99, 0.99) == pytest.approx(float(oracles.finesse_mp("0.99", "0.99")), rel=1e-12)
    assert cavity.finesse(1e-12, 1e-12) < 1e-5


def test_finesse_divergent():
    with pytest.raises(DivergentFinesseError):
        cavity.finesse(1.0, 1.0)


@given(st.floats(0, 0.999), st.floats(0, 0.999))
def test_finesse_increasing(a, b):
    lo, hi = sorted((a, b))
    if lo < hi:
        assert cavity.finesse(lo, 1.0) < cavity.finesse(hi, 1.0)


def test_round_trips():
    assert cavity.round_trips(10.0) == pytest.approx(3.18, abs=0.005)
    assert cavity.round_trips(np.pi) == 1.0
    assert cavity.round_trips(312.6) == pytest.approx(99.5, abs=0.05)


def test_geometric_contrast():
    assert cavity.single_pass_contrast(0.0054, 3) == pytest.approx(0.0009, rel=1e-12)
    assert cavity.geometric_contrast(0.0, 3) == 0.0
    assert cavity.geometric_contrast(1e-6, 99.5) == pytest.approx(1.99e-4, rel=1e-12)


@given(st.floats(0, 1), st.floats(0.01, 1e3))
def test_contrast_inverse_roundtrip(c, n):
    back = cavity.single_pass_contrast(cavity.geometric_contrast(c, n), n)
    assert back == pytest.approx(c, rel=1e-15, abs=1e-300)


def test_config_validation():
    with pytest.raises(InvalidInputError):
        cavity.CavityConfig(R1=1.2)
    with pytest.raises(InvalidInputError):
        cavity.CavityConfig(L_ext=0.0)
