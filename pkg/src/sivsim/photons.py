"""Kinetic Monte Carlo photon streams and intensity correlations.

The simulator is an exact jump process (competing exponential clocks) over
a :class:`~sivsim.rates.RateMatrix`. Random numbers come from numpy's
counter-based Philox generator seeded with the caller's integer seed and are
drawn in fixed blocks of :data:`CHUNK` so that a stream depends only on the
seed and the generator, never on the backend.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DomainError, InsufficientDataError
from .rates import RateMatrix

CHUNK = 1 << 16


@dataclass
class PhotonStream:
    arrival_times: np.ndarray
    duration: float
    seed: int | None = None
    model_hash: str = ""

    def __post_init__(self):
        self.arrival_times = np.asarray(self.arrival_times, dtype=float)
        t = self.arrival_times
        if t.size and (np.any(np.diff(t) <= 0) or t[0] < 0 or t[-1] >= self.duration):
            raise DomainError("arrival times must be strictly increasing within [0, duration)")

    def __len__(self):
        return self.arrival_times.size

    @property
    def mean_rate(self):
        return self.arrival_times.size / self.duration


def rate_matrix_digest(rm: RateMatrix) -> str:
    h = hashlib.sha256()
    h.update(repr(rm.states).encode())
    h.update(np.ascontiguousarray(rm.generator).tobytes())
    h.update(np.ascontiguousarray(rm.radiative).tobytes())
    h.update(repr(float(rm.pump)).encode())
    return h.hexdigest()


def _jump_tables(rm: RateMatrix):
    """Flatten outgoing transitions per state, splitting radiative from dark parts."""
    q, rad = rm.generator, rm.radiative
    n = q.shape[0]
    offsets = [0]
    targets, rates, is_rad = [], [], []
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            r = float(rad[i, j])
            dark = float(q[i, j]) - r
            if r > 0:
                targets.append(j)
                rates.append(r)
                is_rad.append(1)
            if dark > 1e-12 * abs(q[i, j]) and dark > 0:
                targets.append(j)
                rates.append(dark)
                is_rad.append(0)
        offsets.append(len(targets))
    offsets = np.asarray(offsets, dtype=np.int64)
    rates = np.asarray(rates, dtype=float)
    cum = np.empty_like(rates)
    totals = np.zeros(n)
    for i in range(n):
        lo, hi = offsets[i], offsets[i + 1]
        if hi > lo:
            cum[lo:hi] = np.cumsum(rates[lo:hi])
            totals[i] = cum[hi - 1]
    return (offsets, np.asarray(targets, dtype=np.int64), cum, totals,
            np.asarray(is_rad, dtype=np.uint8))


def _run(rm, t_end, efficiency, seed, n_jumps=None, record=False, backend=None):
    kern = backend or _kernels.backend
    offsets, targets, cum, totals, is_rad = _jump_tables(rm)
    rng = np.random.Generator(np.random.Philox(seed))
    state, t = 0, 0.0
    photons, dwell_parts, state_parts = [], [], []
    remaining = n_jumps
    while True:
        k = CHUNK if remaining is None else min(CHUNK, remaining)
        e = rng.standard_exponential(k)
        u = rng.random(k)
        v = rng.random(k)
        buf = np.empty(k)
        dwell = np.empty(k if record else 0)
        visited = np.empty(k if record else 0, dtype=np.int64)
        state, t, used, n_ph, finished = kern.kmc_chunk(
            offsets, targets, cum, totals, is_rad, e, u, v, float(efficiency),
            int(state), float(t), float(t_end), buf, dwell, visited)
        photons.append(buf[:n_ph].copy())
        if record:
            # Trajectories run with t_end = inf, so every consumed draw is a jump.
            dwell_parts.append(dwell[:used].copy())
            state_parts.append(visited[:used].copy())
        if remaining is not None:
            remaining -= used
            if remaining <= 0:
                break
        if finished:
            break
    times = np.concatenate(photons) if photons else np.empty(0)
    if record:
        return times, np.concatenate(dwell_parts), np.concatenate(state_parts)
    return times


def simulate_stream(rm: RateMatrix, duration, collection_efficiency=1.0, seed=0,
                    backend=None) -> PhotonStream:
    """Detected photon arrival times over ``[0, duration)``.

    Every radiative jump emits a photon, which is kept with probability
    ``collection_efficiency``. The trajectory starts in state 0.
    """
    if not duration > 0:
        raise DomainError("duration must be positive")
    if not 0 < collection_efficiency <= 1:
        raise DomainError("collection_efficiency must lie in (0, 1]")
    times = _run(rm, float(duration), collection_efficiency, seed, backend=backend)
    return PhotonStream(times, float(duration), seed, rate_matrix_digest(rm))


def simulate_trajectory(rm: RateMatrix, n_jumps, seed=0, backend=None):
    """Visited states and the sojourn time spent in each before jumping."""
    _, dwell, visited = _run(rm, math.inf, 1.0, seed, n_jumps=int(n_jumps), record=True,
                             backend=backend)
    return visited, dwell


def two_level_matrix(pump, decay) -> RateMatrix:
    """Two-state toy emitter with incoherent pumping and radiative decay."""
    if not (pump > 0 and decay > 0):
        raise DomainError("rates must be positive")
    q = np.array([[0.0, pump], [decay, 0.0]])
    rad = np.array([[0.0, 0.0], [decay, 0.0]])
    return RateMatrix.from_rates(("g", "e"), q, rad, pump)


@dataclass
class CorrelationHistogram:
    lags: np.ndarray
    g2: np.ndarray
    bin_width: float
    normalization: float
    counts: np.ndarray | None = None
    one_sided: bool = True
    n_photons: int = 0
    duration: float = 0.0
    meta: dict = field(default_factory=dict)


def _histogram(counts, bin_width, n_photons, duration, symmetric=False, meta=None):
    rate = n_photons / duration
    norm = rate * rate * duration * bin_width
    n_bins = counts.size
    lags = (np.arange(n_bins) + 0.5) * bin_width
    g2 = counts / norm if norm > 0 else np.zeros(n_bins)
    if symmetric:
        lags = np.concatenate([-lags[::-1], lags])
        g2 = np.concatenate([g2[::-1], g2])
        counts = np.concatenate([counts[::-1], counts])
    return CorrelationHistogram(lags, g2, float(bin_width), float(norm), counts,
                                not symmetric, int(n_photons), float(duration), meta or {})


def correlation_counts(stream: PhotonStream, bin_width, max_lag, start_stop=False, backend=None):
    """Raw pair counts per lag bin (one-sided, all pairs unless ``start_stop``)."""
    if not bin_width > 0:
        raise DomainError("bin_width must be positive")
    if len(stream) < 2:
        raise InsufficientDataError("at least two photons are needed for a correlation")
    n_bins = max(1, int(round(max_lag / bin_width)))
    kern = backend or _kernels.backend
    return kern.pair_counts(np.ascontiguousarray(stream.arrival_times), float(bin_width),
                            n_bins, bool(start_stop))


def g2_estimate(stream: PhotonStream, bin_width, max_lag, start_stop=False, symmetric=False,
                backend=None) -> CorrelationHistogram:
    """Second-order correlation normalised by ``r**2 * duration * bin_width``."""
    counts = correlation_counts(stream, bin_width, max_lag, start_stop, backend)
    return _histogram(counts, bin_width, len(stream), stream.duration, symmetric,
                      {"estimator": "start-stop" if start_stop else "full"})


def combine_histograms(histograms) -> CorrelationHistogram:
    """Merge one-sided histograms of independent shards (order independent)."""
    histograms = list(histograms)
    if not histograms:
        raise InsufficientDataError("nothing to combine")
    bw = histograms[0].bin_width
    if any(h.bin_width != bw or h.counts.size != histograms[0].counts.size or not h.one_sided
           for h in histograms):
        raise DomainError("histograms must share one-sided binning")
    counts = sum((h.counts for h in histograms), np.zeros_like(histograms[0].counts))
    n = sum(h.n_photons for h in histograms)
    duration = math.fsum(h.duration for h in histograms)
    # Shards are independent, so pairs never straddle two of them.
    return _histogram(counts, bw, n, duration, meta=dict(histograms[0].meta))


def analytic_g2_two_level(pump, decay, lags) -> CorrelationHistogram:
    if not (pump > 0 and decay > 0):
        raise DomainError("rates must be positive")
    lags = np.asarray(lags, dtype=float)
    g2 = -np.expm1(-(pump + decay) * np.abs(lags))
    bw = float(lags[1] - lags[0]) if lags.size > 1 else 0.0
    return CorrelationHistogram(lags, g2, bw, float("nan"), None, bool(np.all(lags >= 0)))


def poisson_stream(rate, duration, seed=0) -> PhotonStream:
    """Uncorrelated surrogate: ``N ~ Poisson(rate * duration)`` uniform arrival times."""
    rng = np.random.Generator(np.random.Philox(seed))
    n = rng.poisson(rate * duration)
    times = np.unique(rng.uniform(0.0, duration, n))
    return PhotonStream(times, float(duration), seed, "poisson")
