"""Curve fits used in the data reduction: Lorentzian peaks and laser thresholds."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateFitError, InvalidInputError, NoCrossingError, NoThresholdError

MAX_ITERATIONS = 200
XTOL = 1e-10


@dataclass
class FitResult:
    params: dict[str, float]
    stderr: dict[str, float]
    residual_rms: float
    converged: bool
    iterations: int
    units: dict[str, str] = field(default_factory=dict)
    covariance: np.ndarray | None = None

    def __getitem__(self, name):
        return self.params[name]


def levenberg_marquardt(fun, p0, max_iterations=MAX_ITERATIONS, xtol=XTOL):
    """Damped Gauss-Newton (Levenberg-Marquardt) with a central-difference Jacobian.

    ``fun(p)`` returns the residual vector. Returns
    ``(p, jacobian, residuals, converged, iterations)``.
    """
    p = np.asarray(p0, dtype=float).copy()
    r = fun(p)
    cost = r @ r
    lam = 1e-3
    converged = False
    it = 0
    J = _jacobian(fun, p, r)
    while it < max_iterations:
        it += 1
        A = J.T @ J
        g = J.T @ r
        d = np.diag(A).copy()
        d[d == 0] = 1.0
        improved = False
        while lam < 1e16:
            try:
                dp = np.linalg.solve(A + lam * np.diag(d), -g)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            p_new = p + dp
            r_new = fun(p_new)
            cost_new = r_new @ r_new
            if np.isfinite(cost_new) and cost_new <= cost:
                improved = True
                break
            lam *= 10
        if not improved:
            # no downhill step at any damping: we are at a minimum to working precision
            converged = True
            break
        small = np.linalg.norm(dp) <= xtol * (np.linalg.norm(p) + xtol)
        p, r, cost = p_new, r_new, cost_new
        lam = max(lam / 10, 1e-12)
        J = _jacobian(fun, p, r)
        if small or cost == 0:
            converged = True
            break
    return p, J, r, converged, it


def _jacobian(fun, p, r0):
    J = np.empty((r0.size, p.size))
    for j in range(p.size):
        h = 1e-7 * max(1.0, abs(p[j]))
        dp = p.copy()
        dp[j] += h
        J[:, j] = (fun(dp) - fun(p - (dp - p))) / (2 * h)
    return J


def _covariance(J, r, n_params):
    dof = max(r.size - n_params, 1)
    s2 = (r @ r) / dof
    try:
        return np.linalg.inv(J.T @ J) * s2
    except np.linalg.LinAlgError:
        return np.full((n_params, n_params), np.inf)


def lorentzian_model(x, centers, fwhm, amplitudes, offset):
    hw2 = (fwhm / 2) ** 2
    y = np.full_like(np.asarray(x, dtype=float), offset)
    for c, a in zip(centers, amplitudes):
        y = y + a * hw2 / ((x - c) ** 2 + hw2)
    return y


def _initial_guess(x, y, n_peaks):
    k = max(3, x.size // 10)
    offset = 0.5 * (np.median(y[:k]) + np.median(y[-k:]))
    dev = y - offset
    sign = 1.0 if dev.max() >= -dev.min() else -1.0
    dev = sign * dev
    ipk = int(np.argmax(dev))
    half = dev[ipk] / 2
    lo = ipk
    while lo > 0 and dev[lo] > half:
        lo -= 1
    hi = ipk
    while hi < x.size - 1 and dev[hi] > half:
        hi += 1
    width = max(x[hi] - x[lo], 2 * np.median(np.diff(x)))
    if n_peaks == 1:
        return [x[ipk]], width, [sign * dev[ipk]], offset
    mid = 0.5 * (x[hi] + x[lo])
    return [mid - width / 4, mid + width / 4], 0.6 * width, [sign * dev[ipk] / 1.3] * 2, offset


def fit_lorentzian(freqs, values, n_peaks: int = 1, init=None) -> FitResult:
    """Least-squares fit of ``n_peaks`` Lorentzians (shared FWHM) plus offset.

    ``init`` may be ``(centers, fwhm, amplitudes, offset)``; otherwise the
    start point comes from the highest point and a half-maximum width scan.
    Parameters are reported as ``center_1..``, ``fwhm``, ``amplitude_1..``,
    ``offset`` and, for two peaks, ``splitting``.
    """
    if n_peaks not in (1, 2):
        raise InvalidInputError("n_peaks must be 1 or 2")
    x = np.asarray(freqs, dtype=float)
    y = np.asarray(values, dtype=float)
    order = np.argsort(x)
    x, y = x[order], y[order]
    if x.size < 3 * (3 * n_peaks + 1):
        raise InvalidInputError(f"need at least {3 * (3 * n_peaks + 1)} points")
    if np.ptp(y) == 0:
        raise DegenerateFitError("data are constant")

    # fit in scaled units so every parameter is O(1)
    x0 = 0.5 * (x[0] + x[-1])
    xs = 0.5 * (x[-1] - x[0])
    ys = np.max(np.abs(y - np.median(y))) or 1.0
    u = (x - x0) / xs
    v = y / ys

    if init is None:
        c, w, a, off = _initial_guess(x, y, n_peaks)
    else:
        c, w, a, off = init
    p0 = np.r_[(np.asarray(c) - x0) / xs, w / xs, np.asarray(a) / ys, off / ys]

    def resid(p):
        return lorentzian_model(u, p[:n_peaks], p[n_peaks], p[n_peaks + 1 : 2 * n_peaks + 1], p[-1]) - v

    p, J, r, converged, its = levenberg_marquardt(resid, p0)
    cov = _covariance(J, r, p.size)
    scale = np.r_[[xs] * n_peaks, xs, [ys] * n_peaks, ys]
    p_phys = p * scale
    p_phys[:n_peaks] += x0
    p_phys[n_peaks] = abs(p_phys[n_peaks])
    cov_phys = cov * np.outer(scale, scale)

    names = [f"center_{i + 1}" for i in range(n_peaks)] + ["fwhm"]
    names += [f"amplitude_{i + 1}" for i in range(n_peaks)] + ["offset"]
    units = {nm: "Hz" for nm in names[: n_peaks + 1]}
    units.update({nm: "1" for nm in names[n_peaks + 1 :]})
    err = np.sqrt(np.abs(np.diag(cov_phys)))
    params = dict(zip(names, map(float, p_phys)))
    stderr = dict(zip(names, map(float, err)))
    if n_peaks == 2:
        params["splitting"] = abs(params["center_2"] - params["center_1"])
        var = cov_phys[0, 0] + cov_phys[1, 1] - 2 * cov_phys[0, 1]
        stderr["splitting"] = float(np.sqrt(abs(var)))
        units["splitting"] = "Hz"
    rms = float(np.sqrt(np.mean((r * ys) ** 2)))
    if converged and not (np.isfinite(rms) and np.all(np.isfinite(err))):
        converged = False
    return FitResult(params, stderr, rms, converged, its, units, cov_phys)


def lorentzian_peak_value(fit: FitResult, n_peaks: int) -> float:
    """Maximum of the fitted peak sum above the offset."""
    c = [fit.params[f"center_{i + 1}"] for i in range(n_peaks)]
    a = [fit.params[f"amplitude_{i + 1}"] for i in range(n_peaks)]
    w = fit.params["fwhm"]
    grid = np.linspace(min(c) - 2 * w, max(c) + 2 * w, 20001)
    vals = lorentzian_model(grid, c, w, a, 0.0)
    return float(vals[np.argmax(np.abs(vals))])


def fit_threshold(currents, powers, min_points: int = 3) -> FitResult:
    """Fit a constant floor below and a straight line above a threshold.

    Model: P(I) = P_floor + [I >= I_th] * (P_step + slope * (I - I_th)).
    The threshold is scanned over the sampled currents; for each candidate
    the two linear subproblems are solved in closed form from running sums.
    The reported ``I_th`` is the first sampled current on the lasing side.
    """
    x = np.asarray(currents, dtype=float)
    y = np.asarray(powers, dtype=float)
    order = np.argsort(x, kind="stable")
    x, y = x[order], y[order]
    n = x.size
    if n < 2 * min_points + 1:
        raise InvalidInputError("too few points for a threshold fit")

    xc = x - x.mean()
    ysc = np.max(np.abs(y)) or 1.0
    yn = y / ysc

    def cums(a):
        return np.r_[0.0, np.cumsum(a)]

    S1 = np.arange(n + 1, dtype=float)
    Sy, Syy = cums(yn), cums(yn * yn)
    Sx, Sxx, Sxy = cums(xc), cums(xc * xc), cums(xc * yn)

    k = np.arange(min_points, n - min_points + 1)
    k = k[x[k] > x[k - 1]]
    if k.size == 0:
        raise NoThresholdError("no distinct current values to place a threshold between")
    nl = S1[k]
    sse_left = Syy[k] - Sy[k] ** 2 / nl
    nr = n - k
    ry, ryy = Sy[n] - Sy[k], Syy[n] - Syy[k]
    rx, rxx, rxy = Sx[n] - Sx[k], Sxx[n] - Sxx[k], Sxy[n] - Sxy[k]
    vxx = rxx - rx**2 / nr
    vxy = rxy - rx * ry / nr
    with np.errstate(divide="ignore", invalid="ignore"):
        sse_right = ryy - ry**2 / nr - np.where(vxx > 0, vxy**2 / vxx, 0.0)
    sse = sse_left + sse_right
    best = int(k[np.argmin(sse)])

    i_th = x[best]
    p_floor = y[:best].mean()
    A = np.c_[np.ones(n - best), x[best:] - i_th]
    (icpt, slope), *_ = np.linalg.lstsq(A, y[best:], rcond=None)
    p_step = icpt - p_floor
    model = np.where(x >= i_th, p_floor + p_step + slope * (x - i_th), p_floor)
    resid = y - model
    rms = float(np.sqrt(np.mean(resid**2)))

    dy = np.abs(np.diff(y))
    dy = np.delete(dy, best - 1)
    # floor at rounding level so flat data cannot produce a spurious step
    noise = max(rms, float(np.median(dy)) if dy.size else 0.0, 1e-12 * ysc)
    if abs(p_step) <= 3 * noise:
        raise NoThresholdError(
            f"best step {p_step:.3g} is below 3x the residual noise {noise:.3g}"
        )

    # standard errors of the linear parameters at the chosen partition
    dof = max(n - 4, 1)
    s2 = resid @ resid / dof
    var_floor = s2 / best
    cov_line = s2 * np.linalg.pinv(A.T @ A)
    step_i = float(np.median(np.diff(np.unique(x)))) if np.unique(x).size > 1 else 0.0
    params = {"I_th": float(i_th), "slope": float(slope), "P_step": float(p_step), "P_floor": float(p_floor)}
    stderr = {
        "I_th": step_i / np.sqrt(12),
        "slope": float(np.sqrt(cov_line[1, 1])),
        "P_step": float(np.sqrt(cov_line[0, 0] + var_floor)),
        "P_floor": float(np.sqrt(var_floor)),
    }
    units = {"I_th": "A", "slope": "W/A", "P_step": "W", "P_floor": "W"}
    return FitResult(params, stderr, rms, True, 1, units)


def lockin_slope(freqs, values, window: float = 0.3):
    """Slope (V/Hz) and position of the central zero crossing of a dispersive curve.

    A straight line is fitted to the ``window`` fraction of points centred
    on the sign change closest to the middle of the frequency span.
    """
    x = np.asarray(freqs, dtype=float)
    y = np.asarray(values, dtype=float)
    order = np.argsort(x)
    x, y = x[order], y[order]
    s = np.sign(y)
    idx = np.flatnonzero((s[:-1] * s[1:] < 0) | (s[:-1] == 0))
    if idx.size == 0:
        raise NoCrossingError("values do not change sign")
    mid = 0.5 * (x[0] + x[-1])
    k = int(idx[np.argmin(np.abs(0.5 * (x[idx] + x[idx + 1]) - mid))])
    half = max(1, int(round(window * x.size / 2)))
    lo, hi = max(0, k + 1 - half), min(x.size, k + 1 + half)
    a, b = np.polyfit(x[lo:hi], y[lo:hi], 1)
    if a == 0:
        raise NoCrossingError("fitted slope is zero")
    return float(a), float(-b / a)
