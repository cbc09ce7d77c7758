"""Compound-cavity optics for the diamond-coupled ECDL.

The three-mirror cavity (rear facet R1, AR-coated front facet R_ff and the
HR-coated diamond R2) is reduced to a two-mirror cavity R1 / R_e. Amplitudes
are treated as real and positive; there is no round-trip phase term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DivergentFinesseError, InvalidInputError


@dataclass(frozen=True)
class CavityConfig:
    R1: float = 0.90
    R_ff: float = 0.001
    R2: float = 0.90
    eta_overlap: float = 0.8
    L_int: float = 1.5e-3  # m
    L_ext: float = 30e-3  # m

    def __post_init__(self):
        for name in ("R1", "R_ff", "R2", "eta_overlap"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidInputError(f"{name} must lie in [0, 1], got {v}")
        if not (self.L_int > 0 and self.L_ext > 0):
            raise InvalidInputError("cavity lengths must be positive")

    @property
    def length(self) -> float:
        return self.L_int + self.L_ext


def effective_reflectivity(c: CavityConfig) -> float:
    """Power reflectivity of the front facet + external mirror subsystem."""
    num = math.sqrt(c.R_ff) + c.eta_overlap * math.sqrt(c.R2)
    den = 1.0 + c.eta_overlap * math.sqrt(c.R_ff * c.R2)
    return (num / den) ** 2


def finesse(R1: float, R_e: float) -> float:
    """Passive two-mirror finesse pi (R1 R_e)^(1/4) / (1 - (R1 R_e)^(1/2))."""
    prod = R1 * R_e
    if prod < 0:
        raise InvalidInputError("reflectivities must be non-negative")
    if prod >= 1:
        raise DivergentFinesseError(f"R1*R_e = {prod} >= 1, finesse diverges")
    return math.pi * prod**0.25 / (1.0 - math.sqrt(prod))


def round_trips(F: float) -> float:
    """Mean number of intracavity round trips, N = F / pi (not rounded)."""
    if F < 0:
        raise InvalidInputError("finesse must be >= 0")
    return F / math.pi


def geometric_contrast(C_single: float, N: float) -> float:
    """Cavity absorption contrast 2 N C_single.

    Each round trip passes the intracavity diamond twice, hence the 2.
    Valid for small single-pass absorbance only.
    """
    if C_single < 0 or N < 0:
        raise InvalidInputError("C_single and N must be >= 0")
    return 2.0 * N * C_single


def single_pass_contrast(C_cavity: float, N: float) -> float:
    """Inverse of :func:`geometric_contrast`."""
    if C_cavity < 0 or not N > 0:
        raise InvalidInputError("C_cavity must be >= 0 and N > 0")
    return C_cavity / (2.0 * N)
