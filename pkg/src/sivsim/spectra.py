"""Forward models for PL, PLE, saturation and lifetime measurements."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import voigt_profile

from .errors import DomainError
from .rates import LINE_LEVELS, effective_linewidth, lifetime
from .structure import EmitterModel, transition_table

SPECTRUM_KINDS = ("PL", "PLE", "saturation", "decay")
DEFAULT_RESOLUTION = 10e9
_FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


@dataclass
class Spectrum:
    """A sampled curve.

    ``axis`` is a frequency offset (Hz) for PL/PLE, excitation power for
    saturation curves and time (s, bin centres) for decays.
    """

    kind: str
    axis: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SPECTRUM_KINDS:
            raise DomainError(f"unknown spectrum kind {self.kind!r}")
        self.axis = np.asarray(self.axis, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.axis.shape != self.values.shape or self.axis.ndim != 1:
            raise DomainError("axis and values must be 1-D arrays of equal length")
        _check_axis(self.axis)
        if np.any(self.values < 0):
            raise DomainError("spectrum values must be non-negative")


def _check_axis(axis):
    axis = np.asarray(axis, dtype=float)
    if axis.ndim != 1 or axis.size == 0 or not np.all(np.isfinite(axis)):
        raise DomainError("axis must be a non-empty finite 1-D array")
    if np.any(np.diff(axis) <= 0):
        raise DomainError("axis must be strictly increasing")
    return axis


def lorentzian(nu, nu0, fwhm):
    """Area-normalised Lorentzian line shape (1/Hz)."""
    if not fwhm > 0:
        raise DomainError(f"fwhm must be positive, got {fwhm!r}")
    hw = 0.5 * fwhm
    return (hw / math.pi) / ((np.asarray(nu, dtype=float) - nu0) ** 2 + hw ** 2)


def pl_spectrum(model: EmitterModel, temperature, resolution=DEFAULT_RESOLUTION, axis=None):
    """PL spectral density on ``axis`` (Hz offsets), spectrometer-broadened.

    With ``resolution = 0`` the four bare Lorentzians are returned; otherwise
    each line is convolved analytically with a Gaussian of FWHM ``resolution``.
    """
    if resolution < 0:
        raise DomainError("resolution must be >= 0")
    axis = _check_axis(axis)
    table = transition_table(model, temperature)
    values = np.zeros_like(axis)
    for line in table.lines:
        if resolution == 0:
            values += line.weight * lorentzian(axis, line.offset, line.fwhm)
        else:
            values += line.weight * voigt_profile(
                axis - line.offset, resolution * _FWHM_TO_SIGMA, 0.5 * line.fwhm)
    meta = {"T": float(temperature), "resolution": float(resolution), "power": 0.0, "seed": None}
    return Spectrum("PL", axis, values, meta)


def ple_spectrum(model: EmitterModel, temperature, line, power_ratio=0.0, axis=None):
    """Unit-peak excitation spectrum of one line, power broadened by ``sqrt(1 + P/Psat)``."""
    if line not in LINE_LEVELS:
        raise DomainError(f"unknown line label {line!r}")
    if power_ratio < 0:
        raise DomainError("power_ratio must be >= 0")
    axis = _check_axis(axis)
    fwhm = effective_linewidth(model, temperature, line) * math.sqrt(1.0 + power_ratio)
    hw = 0.5 * fwhm
    center = model.line_offset(line)
    values = hw ** 2 / ((axis - center) ** 2 + hw ** 2)
    meta = {"T": float(temperature), "resolution": 0.0, "power": float(power_ratio),
            "seed": None, "line": line, "fwhm": fwhm, "center": center}
    return Spectrum("PLE", axis, values, meta)


@dataclass(frozen=True)
class SaturationParams:
    i_sat: float
    p_sat: float

    def __post_init__(self):
        if not (self.i_sat > 0 and self.p_sat > 0):
            raise DomainError("i_sat and p_sat must be positive")


def saturation_model(powers, i_sat, p_sat):
    p = np.asarray(powers, dtype=float)
    return i_sat * p / (p + p_sat)


def saturation_curve(params: SaturationParams, powers):
    powers = np.asarray(powers, dtype=float)
    if np.any(powers < 0):
        raise DomainError("powers must be >= 0")
    values = saturation_model(powers, params.i_sat, params.p_sat)
    meta = {"T": None, "resolution": 0.0, "power": None, "seed": None,
            "i_sat": params.i_sat, "p_sat": params.p_sat}
    return Spectrum("saturation", powers, values, meta)


def decay_histogram(model: EmitterModel, temperature, bins, counts_total, seed=None):
    """Photon-arrival histogram after pulsed excitation.

    ``bins`` are bin edges (s). With ``seed=None`` the expected counts are
    returned (analytic mode); otherwise counts are Poisson-sampled from a
    Philox stream keyed by ``seed``.
    """
    edges = _check_axis(bins)
    if edges.size < 2:
        raise DomainError("need at least two bin edges")
    if not counts_total > 0:
        raise DomainError("counts_total must be positive")
    tau = lifetime(model.rates, temperature)
    cdf = -np.expm1(-(edges - edges[0]) / tau)
    expected = counts_total * np.diff(cdf) / cdf[-1]
    if seed is None:
        values = expected
    else:
        rng = np.random.Generator(np.random.Philox(seed))
        values = rng.poisson(expected).astype(float)
    centers = 0.5 * (edges[1:] + edges[:-1])
    meta = {"T": float(temperature), "resolution": float(edges[1] - edges[0]), "power": None,
            "seed": seed, "lifetime": tau}
    return Spectrum("decay", centers, values, meta)
