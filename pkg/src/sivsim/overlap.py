"""Spectral overlap and indistinguishability between emitters.

The spectral overlap of two lines is the zero-lag normalised cross
correlation of their area-normalised Lorentzians::

    O = int L1 L2 / sqrt(int L1**2 * int L2**2)
      = 2 sqrt(g1 g2) (g1 + g2) / (delta**2 + (g1 + g2)**2)

with ``g`` the half widths and ``delta`` the detuning. ``O = 1`` only for
identical lines.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InsufficientDataError

TRANSFORM_LIMIT_BIN = 94e6


@dataclass(frozen=True)
class LineRecord:
    emitter_id: str
    orientation_class: str
    position: float
    fwhm: float
    position_ci95: float = 0.0

    def __post_init__(self):
        if not self.fwhm > 0:
            raise DomainError(f"fwhm must be positive for {self.emitter_id!r}")
        if not self.position_ci95 >= 0:
            raise DomainError("position_ci95 must be >= 0")


@dataclass(frozen=True)
class PairReport:
    a: str
    b: str
    detuning: float
    overlap: float
    mode_overlap: float


def spectral_overlap(fwhm1, fwhm2, detuning):
    if not (fwhm1 > 0 and fwhm2 > 0):
        raise DomainError("linewidths must be positive")
    g1, g2 = 0.5 * fwhm1, 0.5 * fwhm2
    s = g1 + g2
    return 2.0 * math.sqrt(g1 * g2) * s / (detuning ** 2 + s ** 2)


def lorentzian_overlap(a: LineRecord, b: LineRecord) -> float:
    return spectral_overlap(a.fwhm, b.fwhm, a.position - b.position)


def mode_overlap(fwhm1, fwhm2, detuning):
    """|<psi1|psi2>|**2 for single-sided exponential wavepackets."""
    if not (fwhm1 > 0 and fwhm2 > 0):
        raise DomainError("linewidths must be positive")
    r1, r2 = 2.0 * math.pi * fwhm1, 2.0 * math.pi * fwhm2
    return r1 * r2 / ((0.5 * (r1 + r2)) ** 2 + (2.0 * math.pi * detuning) ** 2)


def temporal_mode_overlap(a: LineRecord, b: LineRecord) -> float:
    return mode_overlap(a.fwhm, b.fwhm, a.position - b.position)


def pair_report(a: LineRecord, b: LineRecord) -> PairReport:
    return PairReport(a.emitter_id, b.emitter_id, b.position - a.position,
                      lorentzian_overlap(a, b), temporal_mode_overlap(a, b))


def _groups(records, same_class_only):
    if same_class_only:
        groups = {}
        for r in records:
            groups.setdefault(r.orientation_class, []).append(r)
        return [groups[k] for k in sorted(groups)]
    return [list(records)]


def _sorted(records):
    # Ties resolved by id so the result does not depend on input order.
    return sorted(records, key=lambda r: (r.position, str(r.emitter_id)))


def adjacent_pairs(records, same_class_only=True):
    """Neighbouring pairs after sorting by position (optionally per class)."""
    records = list(records)
    if len(records) < 2:
        raise InsufficientDataError("need at least two line records")
    pairs = []
    for group in _groups(records, same_class_only):
        g = _sorted(group)
        pairs.extend(zip(g[:-1], g[1:]))
    return pairs


def pairwise_detunings(records, same_class_only=False):
    """Ascending list of gaps between adjacent line positions (Hz)."""
    return sorted(b.position - a.position for a, b in adjacent_pairs(records, same_class_only))


@dataclass
class DetuningHistogram:
    edges: np.ndarray
    counts: np.ndarray
    sub_edges: np.ndarray
    sub_counts: np.ndarray


def detuning_histogram(detunings, primary_bin=TRANSFORM_LIMIT_BIN, sub_bins=10, n_primary=None):
    """Counts in ``primary_bin`` wide bins, with the first bin split into ``sub_bins``."""
    if not primary_bin > 0:
        raise DomainError("primary_bin must be positive")
    if int(sub_bins) < 1:
        raise DomainError("sub_bins must be >= 1")
    d = np.abs(np.asarray(detunings, dtype=float))
    if n_primary is None:
        n_primary = int(d.max() // primary_bin) + 1 if d.size else 1
    idx = np.floor(d / primary_bin).astype(np.int64)
    counts = np.bincount(idx[idx < n_primary], minlength=n_primary)
    sub_width = primary_bin / sub_bins
    first = d[idx == 0]
    sub_idx = np.minimum(np.floor(first / sub_width).astype(np.int64), sub_bins - 1)
    sub_counts = np.bincount(sub_idx, minlength=sub_bins)
    return DetuningHistogram(np.arange(n_primary + 1) * primary_bin, counts,
                             np.arange(sub_bins + 1) * sub_width, sub_counts)


def match_probability(records, threshold, same_class_only=False):
    """Fraction of records with another record closer than ``threshold``."""
    records = list(records)
    if len(records) < 2:
        raise InsufficientDataError("need at least two line records")
    hits = 0
    for i, r in enumerate(records):
        for j, s in enumerate(records):
            if i == j or (same_class_only and r.orientation_class != s.orientation_class):
                continue
            if abs(r.position - s.position) < threshold:
                hits += 1
                break
    return hits / len(records)
