"""Least-squares fits with linearised 95% confidence intervals.

All fits run in normalised coordinates (axis centred and scaled to unit
half-span, intensities scaled to unit peak) and are mapped back afterwards,
so results do not depend on the absolute axis offset or intensity scale.
The optimiser is scipy's trust-region reflective least squares driven by
analytic Jacobians.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import find_peaks, medfilt
from scipy.special import wofz

from .errors import DomainError, InsufficientDataError
from .spectra import Spectrum, saturation_model

Z95 = 1.959963984540054
GTOL_REL = 1e-8
XTOL = 1e-10
MAX_ITER = 200
_RANK_RTOL = 1e-10


@dataclass
class FitResult:
    params: dict
    ci95: dict
    covariance: np.ndarray
    residual_rms: float
    converged: bool
    iterations: int
    names: list = field(default_factory=list)
    initial_rms: float = float("nan")
    message: str = ""

    def to_dict(self):
        """JSON-ready dict; non-finite numbers become ``None``."""
        return {
            "params": {k: _finite(v) for k, v in self.params.items()},
            "ci95": {k: _finite(v) for k, v in self.ci95.items()},
            "covariance": [[_finite(v) for v in row] for row in np.asarray(self.covariance)],
            "residual_rms": float(self.residual_rms),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "names": list(self.names),
            "message": self.message,
        }


def _finite(v):
    v = float(v)
    return v if math.isfinite(v) else None


def _solve(residual, jacobian, x0, names, scales, offsets=None, sigma=None, bounds=None):
    """Run the optimiser in normalised units and return a physical FitResult.

    ``params_physical = offsets + scales * x`` element-wise.
    """
    x0 = np.asarray(x0, dtype=float)
    scales = np.asarray(scales, dtype=float)
    offsets = np.zeros_like(scales) if offsets is None else np.asarray(offsets, dtype=float)
    r0 = residual(x0)
    j0 = jacobian(x0)
    g0 = np.linalg.norm(j0.T @ r0)
    n, p = r0.size, x0.size
    try:
        sol = least_squares(residual, x0, jac=jacobian, method="trf", xtol=XTOL,
                            ftol=1e-15, gtol=1e-15, max_nfev=MAX_ITER,
                            bounds=(-np.inf, np.inf) if bounds is None else bounds)
        x, r, jac, nfev, status, msg = sol.x, sol.fun, sol.jac, sol.nfev, sol.status, sol.message
    except (ValueError, np.linalg.LinAlgError) as exc:
        x, r, jac, nfev, status, msg = x0, r0, j0, 0, -1, str(exc)
    # Re-evaluate: a step that did not reduce the cost is never returned.
    if np.sum(r ** 2) > np.sum(r0 ** 2):
        x, r, jac = x0, r0, j0
    grad = np.linalg.norm(jac.T @ r)
    sv = np.linalg.svd(jac, compute_uv=False)
    full_rank = sv.size == p and sv[0] > 0 and sv[-1] > _RANK_RTOL * sv[0]
    dof = max(n - p, 1)
    s2 = float(np.sum(r ** 2) / dof)
    if full_rank and np.all(np.isfinite(jac)):
        cov_n = s2 * np.linalg.inv(jac.T @ jac)
        cov_n = 0.5 * (cov_n + cov_n.T)
    else:
        cov_n = np.full((p, p), np.nan)
    grad_ok = grad <= GTOL_REL * g0 or grad == 0.0 or status in (2, 3, 4)
    converged = bool(full_rank and grad_ok and status != 0 and np.all(np.isfinite(x)))
    cov = cov_n * np.outer(scales, scales)
    phys = offsets + scales * x
    ci = Z95 * np.sqrt(np.clip(np.diag(cov), 0.0, None)) if converged else np.full(p, np.nan)
    if sigma is None:
        rms = math.sqrt(float(np.mean(r ** 2)))
        rms0 = math.sqrt(float(np.mean(r0 ** 2)))
    else:
        rms = math.sqrt(float(np.mean((r * sigma) ** 2)))
        rms0 = math.sqrt(float(np.mean((r0 * sigma) ** 2)))
    return FitResult(dict(zip(names, phys.tolist())), dict(zip(names, ci.tolist())), cov,
                     rms, converged, int(nfev), list(names), rms0,
                     msg if converged else f"not converged: {msg}")


# ---------------------------------------------------------------- Lorentzians

def multi_lorentzian_model(x, params):
    """``baseline + sum_k amp_k * (w_k/2)**2 / ((x - x_k)**2 + (w_k/2)**2)``.

    ``params`` is ``[baseline, x_1, w_1, amp_1, x_2, w_2, amp_2, ...]``.
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(params, dtype=float)
    y = np.full_like(x, p[0])
    for c, w, a in p[1:].reshape(-1, 3):
        h2 = 0.25 * w * w
        y += a * h2 / ((x - c) ** 2 + h2)
    return y


def multi_lorentzian_jacobian(x, params):
    x = np.asarray(x, dtype=float)
    p = np.asarray(params, dtype=float)
    jac = np.empty((x.size, p.size))
    jac[:, 0] = 1.0
    for k, (c, w, a) in enumerate(p[1:].reshape(-1, 3)):
        h = 0.5 * w
        d = x - c
        den = d * d + h * h
        jac[:, 1 + 3 * k] = a * 2.0 * h * h * d / den ** 2
        jac[:, 2 + 3 * k] = a * h * d * d / den ** 2
        jac[:, 3 + 3 * k] = h * h / den
    return jac


def lorentzian_names(n_lines):
    names = ["baseline"]
    for k in range(n_lines):
        names += [f"position{k}", f"fwhm{k}", f"amplitude{k}"]
    return names


def seed_peaks(x, y, n_lines, min_separation=0.0):
    """Initial (position, fwhm, amplitude) triples via median-filtered peak picking.

    Maxima closer than ``min_separation`` to an already chosen, taller one are
    treated as noise on the same line.
    """
    smooth = medfilt(y, 3) if y.size >= 3 else y
    idx, _ = find_peaks(np.concatenate([[-np.inf], smooth, [-np.inf]]))
    idx = idx - 1
    base = float(np.min(smooth))
    # Highest first; equal heights keep the leftmost peak first.
    order = sorted(idx.tolist(), key=lambda i: (-smooth[i], i))
    chosen = []
    for i in order:
        if len(chosen) == n_lines:
            break
        if all(abs(x[i] - x[j]) >= min_separation for j in chosen):
            chosen.append(i)
    if len(chosen) < n_lines:
        spare = [i for i in np.linspace(0, x.size - 1, n_lines + 2)[1:-1].astype(int)
                 if i not in chosen]
        chosen += spare[: n_lines - len(chosen)]
    chosen = sorted(chosen)
    step = float(np.median(np.diff(x)))
    return [(float(x[i]), 3.0 * step, max(float(smooth[i]) - base, 1e-12)) for i in chosen]


def fit_multi_lorentzian(spectrum: Spectrum, n_lines, init=None, sigma=None) -> FitResult:
    """Fit ``n_lines`` peak-normalised Lorentzians plus a constant baseline.

    ``init`` may supply ``(position, fwhm, amplitude)`` per line. Fitted lines
    are returned in ascending position order.
    """
    if n_lines < 1:
        raise DomainError("n_lines must be >= 1")
    x = np.asarray(spectrum.axis, dtype=float)
    y = np.asarray(spectrum.values, dtype=float)
    if x.size < 3 * n_lines + 1 or np.any(np.diff(x) <= 0):
        raise DomainError("axis too short or not strictly increasing for this many lines")
    x_mid = 0.5 * (x[0] + x[-1])
    x_half = 0.5 * (x[-1] - x[0])
    y_scale = float(np.max(np.abs(y))) or 1.0
    u = (x - x_mid) / x_half
    v = y / y_scale
    w = np.ones_like(v) if sigma is None else y_scale / np.asarray(sigma, dtype=float)

    triples = seed_peaks(x, y, n_lines) if init is None else [tuple(t) for t in init]
    if len(triples) != n_lines:
        raise DomainError("init must provide one triple per line")
    base0 = float(np.min(v)) if init is None else 0.0
    p0 = [base0]
    for c, fw, a in triples:
        p0 += [(c - x_mid) / x_half, fw / x_half, a / y_scale]

    def residual(p):
        return (multi_lorentzian_model(u, p) - v) * w

    def jacobian(p):
        return multi_lorentzian_jacobian(u, p) * w[:, None]

    scales = [y_scale] + [x_half, x_half, y_scale] * n_lines
    offsets = [0.0] + [x_mid, 0.0, 0.0] * n_lines
    res = _solve(residual, jacobian, p0, lorentzian_names(n_lines), scales, offsets,
                 None if sigma is None else np.asarray(sigma, dtype=float))
    if sigma is None:
        res.residual_rms *= y_scale
        res.initial_rms *= y_scale
    return _sort_lines(res, n_lines)


def _sort_lines(res: FitResult, n_lines):
    n = n_lines
    pos = [res.params[f"position{k}"] for k in range(n)]
    order = sorted(range(n), key=lambda k: (pos[k], k))
    if order == list(range(n)):
        for k in range(n):
            res.params[f"fwhm{k}"] = abs(res.params[f"fwhm{k}"])
        return res
    perm = [0]
    for k in order:
        perm += [1 + 3 * k, 2 + 3 * k, 3 + 3 * k]
    names = res.names
    vals = [res.params[names[i]] for i in perm]
    cis = [res.ci95[names[i]] for i in perm]
    res.params = dict(zip(names, vals))
    res.ci95 = dict(zip(names, cis))
    res.covariance = res.covariance[np.ix_(perm, perm)]
    for k in range(n):
        res.params[f"fwhm{k}"] = abs(res.params[f"fwhm{k}"])
    return res


def line_areas(res: FitResult, n_lines):
    """Integrated area of each fitted line (peak Lorentzian or Voigt parameters)."""
    if "area0" in res.params:
        return np.array([res.params[f"area{k}"] for k in range(n_lines)])
    return np.array([0.5 * math.pi * res.params[f"amplitude{k}"] * res.params[f"fwhm{k}"]
                     for k in range(n_lines)])


# ---------------------------------------------------------------- Voigt lines

_SQRT2 = math.sqrt(2.0)
_SQRTPI = math.sqrt(math.pi)


def _voigt_parts(d, sigma, gamma):
    """Voigt profile and its derivatives with respect to ``d`` and ``gamma``."""
    z = (d + 1j * gamma) / (sigma * _SQRT2)
    w = wofz(z)
    dw = -2.0 * z * w + 2j / _SQRTPI
    norm = sigma * math.sqrt(2.0 * math.pi)
    v = w.real / norm
    dv_dd = dw.real / (norm * sigma * _SQRT2)
    dv_dg = -dw.imag / (norm * sigma * _SQRT2)
    return v, dv_dd, dv_dg


def multi_voigt_model(x, params, sigma):
    """``baseline + sum_k area_k * Voigt(x - x_k; sigma, fwhm_k / 2)``.

    ``params`` is ``[baseline, x_1, fwhm_1, area_1, ...]`` with ``fwhm`` the
    Lorentzian FWHM and ``sigma`` the fixed Gaussian standard deviation.
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(params, dtype=float)
    y = np.full_like(x, p[0])
    for c, f, a in p[1:].reshape(-1, 3):
        y += a * _voigt_parts(x - c, sigma, 0.5 * f)[0]
    return y


def multi_voigt_jacobian(x, params, sigma):
    x = np.asarray(x, dtype=float)
    p = np.asarray(params, dtype=float)
    jac = np.empty((x.size, p.size))
    jac[:, 0] = 1.0
    for k, (c, f, a) in enumerate(p[1:].reshape(-1, 3)):
        v, dv_dd, dv_dg = _voigt_parts(x - c, sigma, 0.5 * f)
        jac[:, 1 + 3 * k] = -a * dv_dd
        jac[:, 2 + 3 * k] = 0.5 * a * dv_dg
        jac[:, 3 + 3 * k] = v
    return jac


def voigt_names(n_lines):
    names = ["baseline"]
    for k in range(n_lines):
        names += [f"position{k}", f"fwhm{k}", f"area{k}"]
    return names


def fit_multi_voigt(spectrum: Spectrum, n_lines, resolution=None, init=None,
                    sigma=None) -> FitResult:
    """Fit Lorentzians convolved with a Gaussian instrument response of known FWHM.

    ``resolution`` defaults to ``spectrum.metadata["resolution"]``. Line
    areas are fitted directly (``area{k}``); ``fwhm{k}`` is the Lorentzian part.
    """
    if resolution is None:
        resolution = spectrum.metadata.get("resolution")
    if not resolution or resolution <= 0:
        raise DomainError("Voigt fit needs a positive instrument resolution")
    if n_lines < 1:
        raise DomainError("n_lines must be >= 1")
    x = np.asarray(spectrum.axis, dtype=float)
    y = np.asarray(spectrum.values, dtype=float)
    if x.size < 3 * n_lines + 1 or np.any(np.diff(x) <= 0):
        raise DomainError("axis too short or not strictly increasing for this many lines")
    x_mid = 0.5 * (x[0] + x[-1])
    x_half = 0.5 * (x[-1] - x[0])
    y_scale = float(np.max(np.abs(y))) or 1.0
    u = (x - x_mid) / x_half
    v = y / y_scale
    sig_u = resolution / (2.0 * math.sqrt(2.0 * math.log(2.0))) / x_half

    if init is None:
        triples = []
        for c, _, peak in seed_peaks(x, y, n_lines, min_separation=resolution):
            # Peak height of a Gaussian-dominated Voigt is area / (sigma sqrt(2 pi)).
            area = peak * sig_u * x_half * math.sqrt(2.0 * math.pi)
            triples.append((c, 0.1 * resolution, area))
        base0 = float(np.min(v))
    else:
        triples = [tuple(t) for t in init]
        base0 = 0.0
    if len(triples) != n_lines:
        raise DomainError("init must provide one triple per line")
    p0 = [base0]
    for c, f, a in triples:
        p0 += [(c - x_mid) / x_half, f / x_half, a / (y_scale * x_half)]

    w = 1.0 if sigma is None else y_scale / np.asarray(sigma, dtype=float)

    def residual(p):
        return (multi_voigt_model(u, p, sig_u) - v) * w

    def jacobian(p):
        return multi_voigt_jacobian(u, p, sig_u) * np.reshape(w, (-1, 1))

    lower = np.full(len(p0), -np.inf)
    lower[2::3] = 0.0
    p0 = np.maximum(p0, lower)
    scales = [y_scale] + [x_half, x_half, y_scale * x_half] * n_lines
    offsets = [0.0] + [x_mid, 0.0, 0.0] * n_lines
    res = _solve(residual, jacobian, p0, voigt_names(n_lines), scales, offsets,
                 sigma=None if sigma is None else np.asarray(sigma, dtype=float),
                 bounds=(lower, np.full(len(p0), np.inf)))
    if sigma is None:
        res.residual_rms *= y_scale
        res.initial_rms *= y_scale
    return _sort_lines(res, n_lines)


# ---------------------------------------------------------------- Decays

def exponential_model(t, params):
    amp, tau, base = params
    return amp * np.exp(-np.asarray(t, dtype=float) / tau) + base


def exponential_jacobian(t, params):
    amp, tau, _ = params
    t = np.asarray(t, dtype=float)
    e = np.exp(-t / tau)
    return np.column_stack([e, amp * e * t / tau ** 2, np.ones_like(t)])


def fit_exponential(decay: Spectrum, tail_start=0.0, weighted=True) -> FitResult:
    """Fit ``A exp(-(t - t0)/tau) + B`` to the part of ``decay`` at ``t >= tail_start``.

    ``t0`` is the first retained time; ``amplitude`` refers to it. Poisson
    weights ``1/sqrt(max(counts, 1))`` are used when ``weighted``.
    """
    t = np.asarray(decay.axis, dtype=float)
    y = np.asarray(decay.values, dtype=float)
    keep = t >= tail_start
    t, y = t[keep], y[keep]
    if t.size < 4:
        raise InsufficientDataError("fewer than four samples beyond tail_start")
    if np.any(y < 0) or not np.any(y > 0):
        raise DomainError("decay counts must be non-negative with some positive values")
    t0, span = t[0], t[-1] - t[0]
    y_scale = float(y.max())
    s = (t - t0) / span
    v = y / y_scale
    sigma = np.sqrt(np.maximum(y, 1.0)) / y_scale if weighted else np.ones_like(v)
    w = 1.0 / sigma

    n_tail = max(3, t.size // 10)
    b0 = float(np.mean(v[-n_tail:]))
    a0 = float(v[0] - b0)
    sig = v - b0
    ok = sig > 0.05 * max(a0, 0.0)
    if a0 > 0 and ok.sum() >= 3:
        slope = np.polyfit(s[ok], np.log(sig[ok]), 1)[0]
        tau0 = -1.0 / slope if slope < 0 else 0.3
    else:
        tau0 = 0.3

    def residual(p):
        return (exponential_model(s, p) - v) * w

    def jacobian(p):
        return exponential_jacobian(s, p) * w[:, None]

    res = _solve(residual, jacobian, [max(a0, 0.0), tau0, b0],
                 ["amplitude", "tau", "baseline"], [y_scale, span, y_scale],
                 sigma=sigma * y_scale if weighted else None)
    if not weighted:
        res.residual_rms *= y_scale
        res.initial_rms *= y_scale
    if res.converged and not (res.params["tau"] > 0 and res.params["amplitude"] > 0):
        res.converged = False
        res.message = "not converged: no decaying component"
    return res


# ---------------------------------------------------------------- Saturation

def saturation_jacobian(powers, params):
    i_s, p_s = params
    p = np.asarray(powers, dtype=float)
    den = p + p_s
    return np.column_stack([p / den, -i_s * p / den ** 2])


def fit_saturation(data: Spectrum) -> FitResult:
    """Fit ``I(P) = i_sat * P / (P + p_sat)``."""
    p = np.asarray(data.axis, dtype=float)
    y = np.asarray(data.values, dtype=float)
    if np.unique(p).size < 3:
        raise InsufficientDataError("need at least three distinct powers")
    if not np.any(y != 0):
        raise DomainError("saturation data are all zero")
    p_scale = float(p.max())
    y_scale = float(np.max(np.abs(y)))
    q = p / p_scale
    v = y / y_scale

    def residual(x):
        return saturation_model(q, *x) - v

    def jacobian(x):
        return saturation_jacobian(q, x)

    # Half-saturation guess from the data crossing half of the plateau estimate.
    i0 = 1.2
    half = np.nonzero(v >= 0.5 * i0)[0]
    ps0 = float(q[half[0]]) if half.size and q[half[0]] > 0 else float(np.median(q[q > 0]))
    res = _solve(residual, jacobian, [i0, ps0], ["i_sat", "p_sat"], [y_scale, p_scale])
    res.residual_rms *= y_scale
    res.initial_rms *= y_scale
    return res


# ---------------------------------------------------------------- Drift

@dataclass
class DriftSeries:
    timestamps: np.ndarray
    positions: np.ndarray
    ci95: np.ndarray

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=float)
        self.positions = np.asarray(self.positions, dtype=float)
        self.ci95 = np.broadcast_to(np.asarray(self.ci95, dtype=float), self.positions.shape)
        if np.any(np.diff(self.timestamps) <= 0):
            raise DomainError("timestamps must be increasing")


@dataclass(frozen=True)
class DriftStats:
    peak_to_peak: float
    half_range: float
    within_ci_fraction: float


def drift_statistics(series: DriftSeries) -> DriftStats:
    pos = series.positions
    if pos.size < 2:
        raise InsufficientDataError("need at least two drift samples")
    ptp = float(pos.max() - pos.min())
    dev = np.abs(pos - pos.mean())
    return DriftStats(ptp, 0.5 * ptp, float(np.mean(dev <= series.ci95)))
