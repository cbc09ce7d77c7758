"""NV ground-state spin physics and the six-level population model.

Level labels follow the usual zero-field picture:

    |1>  ground triplet, m_s = 0
    |2>  ground triplet, m_s = +-1 (lumped)
    |3>  excited triplet, m_s = 0
    |4>  excited triplet, m_s = +-1
    |5>  upper singlet
    |6>  lower (metastable) singlet, the 1042 nm absorber

All functions are pure; the dataclasses are frozen.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateModelError, InvalidInputError

GAMMA_E = 28.024e9  # Hz/T
D_ZFS = 2.87e9  # Hz
CARBON_DENSITY = 1.76e23  # cm^-3

_SQ3 = np.sqrt(3.0)
NV_AXES = (
    (1 / _SQ3, 1 / _SQ3, 1 / _SQ3),
    (1 / _SQ3, -1 / _SQ3, -1 / _SQ3),
    (-1 / _SQ3, 1 / _SQ3, -1 / _SQ3),
    (-1 / _SQ3, -1 / _SQ3, 1 / _SQ3),
)

# spin-1 matrices, basis (m_s = +1, 0, -1)
_SX = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / np.sqrt(2)
_SY = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex) / np.sqrt(2)
_SZ = np.diag([1.0, 0.0, -1.0]).astype(complex)


@dataclass(frozen=True)
class SpinSystem:
    """Ground-state spin Hamiltonian parameters.

    ``D``, ``E`` and ``gamma_e`` are in Hz (Hz/T); ``B`` is the lab-frame
    bias field in tesla.
    """

    D: float = D_ZFS
    E: float = 0.0
    gamma_e: float = GAMMA_E
    B: tuple[float, float, float] = (0.0, 0.0, 0.0)
    orientations: tuple[tuple[float, float, float], ...] = NV_AXES

    def __post_init__(self):
        if not self.D > 0:
            raise InvalidInputError(f"D must be positive, got {self.D}")
        if not self.E >= 0:
            raise InvalidInputError(f"E must be non-negative, got {self.E}")
        if not self.gamma_e > 0:
            raise InvalidInputError(f"gamma_e must be positive, got {self.gamma_e}")
        if len(self.B) != 3:
            raise InvalidInputError("B must be a 3-vector")
        if len(self.orientations) != 4:
            raise InvalidInputError(
                f"exactly four orientations required, got {len(self.orientations)}"
            )
        for k, n in enumerate(self.orientations):
            norm = float(np.linalg.norm(n))
            if len(n) != 3 or abs(norm - 1.0) > 1e-12:
                raise InvalidInputError(f"orientation {k} is not a unit vector (|n| = {norm!r})")


@dataclass(frozen=True)
class RateModel:
    """Transition rates of the six-level model, all in 1/s.

    Defaults are literature-typical room-temperature values; treat them as
    calibration knobs.
    """

    k_rad: float = 6.5e7
    k35: float = 1.1e7
    k45: float = 8.0e7
    k56: float = 1.0e9
    k61: float = 4.8e6
    k62: float = 1.6e6
    w_pump: float = 1.0e6
    w_mw: float = 0.0

    def __post_init__(self):
        for name in ("k_rad", "k35", "k45", "k56", "k61", "k62", "w_pump", "w_mw"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise InvalidInputError(f"rate {name} must be finite and >= 0, got {v}")

    def is_physical(self) -> bool:
        """True when the ISC orderings that produce spin polarization hold."""
        return self.k45 > self.k35 and self.k61 > self.k62


@dataclass(frozen=True)
class Populations:
    p: tuple[float, ...]

    def __post_init__(self):
        if len(self.p) != 6:
            raise InvalidInputError("six populations required")
        arr = np.asarray(self.p)
        if np.any(arr < -1e-15) or np.any(arr > 1 + 1e-15):
            raise InvalidInputError(f"populations outside [0, 1]: {self.p}")
        if abs(arr.sum() - 1.0) > 1e-12:
            raise InvalidInputError(f"populations sum to {arr.sum()!r}, not 1")

    def __getitem__(self, level: int) -> float:
        """1-based access, ``pops[6]`` is the lower singlet."""
        return self.p[level - 1]


@dataclass(frozen=True)
class Lineshape:
    """Sum of Lorentzians sharing one FWHM."""

    centers: tuple[float, ...]
    fwhm: float
    amplitudes: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if not self.fwhm > 0:
            raise InvalidInputError(f"fwhm must be positive, got {self.fwhm}")
        amps = self.amplitudes or (1.0,) * len(self.centers)
        if len(amps) != len(self.centers):
            raise InvalidInputError("one amplitude per center required")
        if not np.all(np.isfinite(amps)):
            raise InvalidInputError("amplitudes must be finite")
        object.__setattr__(self, "amplitudes", tuple(float(a) for a in amps))
        object.__setattr__(self, "centers", tuple(float(c) for c in self.centers))

    def scaled(self, factor: float) -> "Lineshape":
        return Lineshape(self.centers, self.fwhm, tuple(a * factor for a in self.amplitudes))


def _local_frame(n):
    n = np.asarray(n, dtype=float)
    ref = np.array([0.0, 0.0, 1.0])
    if abs(n @ ref) > 0.9:
        ref = np.array([1.0, 0.0, 0.0])
    x = ref - (ref @ n) * n
    x /= np.linalg.norm(x)
    y = np.cross(n, x)
    return x, y, n


def spin_hamiltonian(sys: SpinSystem, orientation: int) -> np.ndarray:
    """3x3 Hamiltonian (Hz) of one NV orientation, S_z along its axis."""
    x, y, z = _local_frame(sys.orientations[orientation])
    B = np.asarray(sys.B, dtype=float)
    bx, by, bz = B @ x, B @ y, B @ z
    H = sys.D * (_SZ @ _SZ) + sys.E * (_SX @ _SX - _SY @ _SY)
    H = H + sys.gamma_e * (bx * _SX + by * _SY + bz * _SZ)
    return H


def resonance_frequencies(sys: SpinSystem) -> list[tuple[int, float, float]]:
    """Transition frequencies from the lowest eigenstate, per orientation.

    Returns ``[(orientation, f_minus, f_plus), ...]`` in Hz.
    """
    out = []
    for k in range(len(sys.orientations)):
        w = np.linalg.eigvalsh(spin_hamiltonian(sys, k))
        f = np.sort(w[1:] - w[0])
        out.append((k, float(f[0]), float(f[1])))
    return out


def sorted_resonances(sys: SpinSystem) -> list[tuple[float, int]]:
    """All eight lines as ``(frequency, orientation)``, ascending.

    Ties in frequency fall back to orientation index.
    """
    lines = []
    for k, fm, fp in resonance_frequencies(sys):
        lines.append((fm, k))
        lines.append((fp, k))
    return sorted(lines)


def rate_matrix(m: RateModel) -> np.ndarray:
    """Generator Q with dp/dt = Q @ p (columns sum to zero)."""
    Q = np.zeros((6, 6))

    def flow(src, dst, rate):
        Q[dst, src] += rate
        Q[src, src] -= rate

    flow(0, 2, m.w_pump)
    flow(1, 3, m.w_pump)
    flow(2, 0, m.k_rad)
    flow(3, 1, m.k_rad)
    flow(2, 4, m.k35)
    flow(3, 4, m.k45)
    flow(4, 5, m.k56)
    flow(5, 0, m.k61)
    flow(5, 1, m.k62)
    flow(0, 1, m.w_mw)
    flow(1, 0, m.w_mw)
    return Q


def steady_state(m: RateModel) -> Populations:
    """Stationary populations of the six-level model.

    Without optical pumping the excited and singlet levels are empty and the
    ground triplet is split evenly between |1> and |2> (the unpolarized
    state; with ``w_mw > 0`` this is also the unique kernel vector).
    When the intersystem crossing does not distinguish the two spin branches
    (k35 == k45 and k61 == k62) the solution is symmetrized exactly, so the
    microwave rate leaves it bit-for-bit unchanged.
    """
    if m.w_pump == 0:
        return Populations((0.5, 0.5, 0.0, 0.0, 0.0, 0.0))
    symmetric = m.k35 == m.k45 and m.k61 == m.k62
    if symmetric:
        # exchange symmetry forces p1 = p2, so the microwave term carries no flow
        m = replace(m, w_mw=0.0)
    Q = rate_matrix(m)
    scale = np.max(np.abs(Q))
    Qn = Q / scale
    s = np.linalg.svd(Qn, compute_uv=False)
    if s[-2] < 1e-12 * s[0]:
        raise DegenerateModelError("rate matrix kernel is not one-dimensional")
    A = np.vstack([Qn, np.ones(6)])
    rhs = np.zeros(7)
    rhs[-1] = 1.0
    p, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    p = np.clip(p, 0.0, None)
    if symmetric:
        p[0] = p[1] = 0.5 * (p[0] + p[1])
        p[2] = p[3] = 0.5 * (p[2] + p[3])
    p /= p.sum()
    return Populations(tuple(float(v) for v in p))


def ppm_to_cm3(ppm: float) -> float:
    """Defect concentration in ppm (per carbon) to number density, cm^-3."""
    return ppm * 1e-6 * CARBON_DENSITY


def singlet_absorption(p: Populations, sigma: float, n_nv: float, path_length: float) -> float:
    """Single-pass absorbance sigma * n_nv * p6 * L (dimensionless).

    ``sigma`` in cm^2, ``n_nv`` in cm^-3, ``path_length`` in cm.
    """
    if sigma < 0 or n_nv < 0 or path_length < 0:
        raise InvalidInputError("sigma, n_nv and path_length must be >= 0")
    return sigma * (n_nv * p[6]) * path_length


def transmission(alpha: float) -> float:
    return float(np.exp(-alpha))


def odmr_lineshape(f_mw, shape: Lineshape):
    """Evaluate the sum of Lorentzians at ``f_mw`` (scalar or array)."""
    if not shape.fwhm > 0:
        raise InvalidInputError("fwhm must be positive")
    f = np.asarray(f_mw, dtype=float)
    hw2 = (shape.fwhm / 2) ** 2
    out = np.zeros_like(f)
    for c, a in zip(shape.centers, shape.amplitudes):
        out = out + a * hw2 / ((f - c) ** 2 + hw2)
    return out if out.ndim else float(out)


def mw_drive_rate(f_mw, shape: Lineshape, peak_rate: float):
    """Incoherent microwave mixing rate w_mw(f), Lorentzian in detuning.

    ``shape`` amplitudes are relative; ``peak_rate`` is the rate on an
    isolated line of unit amplitude.
    """
    return peak_rate * odmr_lineshape(f_mw, shape)


def zero_field_lineshape(sys: SpinSystem, fwhm: float, amplitude: float = 1.0) -> Lineshape:
    """Two-line strain-split profile of the first orientation at B = 0."""
    zf = SpinSystem(D=sys.D, E=sys.E, gamma_e=sys.gamma_e, orientations=sys.orientations)
    _, fm, fp = resonance_frequencies(zf)[0]
    return Lineshape((fm, fp), fwhm, (amplitude, amplitude))


def t2star_from_linewidth(fwhm: float) -> float:
    """Inhomogeneous dephasing time 1/(pi * fwhm), seconds."""
    if not fwhm > 0:
        raise InvalidInputError(f"fwhm must be positive, got {fwhm}")
    return 1.0 / (np.pi * fwhm)
