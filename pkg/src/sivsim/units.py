"""Physical constants and the handful of conversions the models need.

Frequencies are plain floats in hertz. Line positions are kept as offsets
from :data:`ZPL_REFERENCE_HZ` so that MHz detunings stay resolvable next to
a 406 THz carrier. Linewidths are FWHM in Hz; a decay rate ``r`` in s^-1
corresponds to a Lorentzian FWHM of ``r / (2*pi)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import constants as _c

from .errors import DomainError


@dataclass(frozen=True)
class Constants:
    planck: float = _c.h
    boltzmann: float = _c.k
    speed_of_light: float = _c.c
    elementary_charge: float = _c.e


CONSTANTS = Constants()

#: Default absolute frequency that line offsets are measured from (737 nm ZPL).
ZPL_REFERENCE_HZ = 406.74e12


def wavelength_to_frequency(wavelength):
    """Vacuum frequency ``c / wavelength`` in Hz for a wavelength in metres."""
    wl = np.asarray(wavelength, dtype=float)
    if not np.all(np.isfinite(wl)) or np.any(wl <= 0):
        raise DomainError(f"wavelength must be positive and finite, got {wavelength!r}")
    out = CONSTANTS.speed_of_light / wl
    return float(out) if out.ndim == 0 else out


def frequency_to_wavelength(frequency):
    """Inverse of :func:`wavelength_to_frequency`."""
    nu = np.asarray(frequency, dtype=float)
    if not np.all(np.isfinite(nu)) or np.any(nu <= 0):
        raise DomainError(f"frequency must be positive and finite, got {frequency!r}")
    out = CONSTANTS.speed_of_light / nu
    return float(out) if out.ndim == 0 else out


def check_temperature(temperature):
    if not (math.isfinite(temperature) and temperature > 0):
        raise DomainError(f"temperature must be > 0 K, got {temperature!r}")


def boltzmann_exponent(delta_e_hz, temperature):
    """Dimensionless ``h * dE / (k_B * T)`` for an energy gap given in Hz."""
    check_temperature(temperature)
    return CONSTANTS.planck * delta_e_hz / (CONSTANTS.boltzmann * temperature)


def ev_to_hz(energy_ev):
    return energy_ev * CONSTANTS.elementary_charge / CONSTANTS.planck


def rate_to_fwhm(rate):
    """Lorentzian FWHM (Hz) of a decay rate given in s^-1."""
    return rate / (2.0 * math.pi)


def fwhm_to_rate(fwhm):
    return 2.0 * math.pi * fwhm


def to_absolute(offset_hz, reference_hz=ZPL_REFERENCE_HZ):
    return reference_hz + offset_hz


def to_offset(absolute_hz, reference_hz=ZPL_REFERENCE_HZ):
    return absolute_hz - reference_hz
