import math

import numpy as np
import pytest
from scipy import stats

from sivsim import _kernels
from sivsim import photons as P
from sivsim import rates as R
from sivsim.errors import DomainError, InsufficientDataError
from sivsim.structure import default_model

MODEL = default_model()
TOY = P.two_level_matrix(1e8, 1e8)


def test_pump_zero_gives_empty_stream():
    rm = R.build_rate_matrix(MODEL, 4.0, 0.0)
    s = P.simulate_stream(rm, 1e-4, seed=1)
    assert len(s) == 0 and s.duration == 1e-4


def test_same_seed_same_stream():
    a = P.simulate_stream(TOY, 1e-4, 0.7, seed=11)
    b = P.simulate_stream(TOY, 1e-4, 0.7, seed=11)
    c = P.simulate_stream(TOY, 1e-4, 0.7, seed=12)
    assert a.arrival_times.tobytes() == b.arrival_times.tobytes()
    assert a.model_hash == b.model_hash
    assert len(a) != len(c) or not np.array_equal(a.arrival_times, c.arrival_times)


@pytest.mark.skipif(_kernels.compiled_backend is None, reason="compiled kernel not built")
def test_backends_bit_identical():
    rm = R.build_rate_matrix(default_model(rates=R.RateParams().with_shelf()), 4.0, 1e8)
    fast = P.simulate_stream(rm, 5e-4, 0.4, seed=3, backend=_kernels.compiled_backend)
    slow = P.simulate_stream(rm, 5e-4, 0.4, seed=3, backend=_kernels.python_backend)
    assert fast.arrival_times.tobytes() == slow.arrival_times.tobytes()
    hf = P.correlation_counts(fast, 1e-9, 50e-9, backend=_kernels.compiled_backend)
    hs = P.correlation_counts(fast, 1e-9, 50e-9, backend=_kernels.python_backend)
    assert np.array_equal(hf, hs)
    for ss in (True, False):
        assert np.array_equal(
            P.correlation_counts(fast, 2e-9, 40e-9, ss, _kernels.compiled_backend),
            P.correlation_counts(fast, 2e-9, 40e-9, ss, _kernels.python_backend))


def test_pair_counts_brute_force():
    times = np.sort(np.random.default_rng(0).uniform(0, 1e-6, 300))
    bw, n_bins = 5e-9, 20
    d = (times[None, :] - times[:, None]).ravel()
    d = d[d > 0]
    expect = np.bincount((d // bw).astype(int)[d < bw * n_bins], minlength=n_bins)
    got = P.correlation_counts(P.PhotonStream(times, 1e-6), bw, bw * n_bins)
    assert np.array_equal(got, expect)
    # Start-stop keeps only the next photon.
    nxt = np.diff(times)
    ss = np.bincount((nxt // bw).astype(int)[nxt < bw * n_bins], minlength=n_bins)
    assert np.array_equal(P.correlation_counts(P.PhotonStream(times, 1e-6), bw, bw * n_bins,
                                               start_stop=True), ss)


def test_mean_rate_matches_flux():
    rm = R.build_rate_matrix(MODEL, 4.0, 1e8)
    eff, dur = 0.5, 2e-3
    s = P.simulate_stream(rm, dur, eff, seed=4)
    expect = R.radiative_flux(rm) * eff * dur
    assert abs(len(s) - expect) <= 3 * math.sqrt(expect)


@pytest.mark.parametrize("state", [0, 1])
def test_sojourn_times_are_exponential(state):
    visited, dwell = P.simulate_trajectory(TOY, 200_000, seed=8)
    sample = dwell[visited == state]
    assert sample.size >= 99_000
    rate = -TOY.generator[state, state]
    assert stats.kstest(sample, "expon", args=(0, 1 / rate)).pvalue > 0.01


def test_sojourns_in_full_model():
    rm = R.build_rate_matrix(MODEL, 4.0, 1e8)
    visited, dwell = P.simulate_trajectory(rm, 300_000, seed=2)
    for i in range(4):
        sample = dwell[visited == i]
        if sample.size < 1000:
            continue
        assert stats.kstest(sample, "expon", args=(0, 1 / rm.out_rate(i))).pvalue > 0.01


def test_g2_requires_photons():
    with pytest.raises(InsufficientDataError):
        P.g2_estimate(P.PhotonStream([1e-9], 1e-6), 1e-9, 1e-8)
    with pytest.raises(DomainError):
        P.g2_estimate(P.PhotonStream([1e-9, 2e-9], 1e-6), 0.0, 1e-8)


def test_analytic_g2():
    k = 3e8
    h = P.analytic_g2_two_level(1e8, 2e8, [0.0, math.log(2) / k, 1e-3])
    np.testing.assert_allclose(h.g2, [0.0, 0.5, 1.0], atol=1e-15)
    with pytest.raises(DomainError):
        P.analytic_g2_two_level(0.0, 1.0, [0.0])


def test_toy_g2_matches_closed_form():
    s = P.simulate_stream(TOY, 4e-3, seed=6)
    k = 2e8
    h = P.g2_estimate(s, 0.05 / k, 5.0 / k)
    an = P.analytic_g2_two_level(1e8, 1e8, h.lags).g2
    assert np.sqrt(np.mean((h.g2 - an) ** 2)) < 0.05
    assert h.one_sided and np.all(h.g2 >= 0)


def test_defaults_antibunched():
    s = P.simulate_stream(R.build_rate_matrix(MODEL, 4.0, 1e8), 2e-4, seed=7)
    assert P.g2_estimate(s, 0.1e-9, 1e-9).g2[0] < 0.5


def test_poisson_surrogate_flat():
    s = P.poisson_stream(1e7, 5e-3, seed=9)
    h = P.g2_estimate(s, 1e-8, 1e-6)
    sigma = 1 / math.sqrt(h.normalization)
    z = (h.g2 - 1) / sigma
    assert np.mean(np.abs(z) <= 3) >= 0.98
    assert abs(np.mean(h.g2) - 1) <= 3 * sigma / math.sqrt(h.g2.size)


def test_shelf_bunching():
    rm = R.build_rate_matrix(default_model(rates=R.RateParams().with_shelf()), 4.0, 1e8)
    s = P.simulate_stream(rm, 0.05, seed=10)
    coarse = P.g2_estimate(s, 50e-9, 20e-6)
    fine = P.g2_estimate(s, 0.5e-9, 100e-9)
    early = fine.g2[(fine.lags > 10e-9) & (fine.lags < 50e-9)]
    assert fine.g2[0] < 1.0 < 1.2 < early.mean()
    assert coarse.g2[coarse.lags > 10e-6].mean() == pytest.approx(1.0, abs=0.05)


def test_thinning_leaves_g2_unchanged():
    rm = R.build_rate_matrix(default_model(rates=R.RateParams().with_shelf()), 4.0, 1e8)
    full = P.simulate_stream(rm, 0.01, 1.0, seed=12)
    thin = P.simulate_stream(rm, 0.01, 0.3, seed=12)
    assert set(thin.arrival_times) <= set(full.arrival_times)
    hf = P.g2_estimate(full, 20e-9, 1e-6)
    ht = P.g2_estimate(thin, 20e-9, 1e-6)
    sigma = 1 / np.sqrt(ht.normalization)
    assert np.sqrt(np.mean(((ht.g2 - hf.g2) / sigma) ** 2)) < 2.0


def test_combine_is_associative_and_order_free():
    shards = [P.g2_estimate(P.simulate_stream(TOY, 2e-4, seed=s), 1e-9, 30e-9) for s in (1, 2, 3)]
    a = P.combine_histograms(shards)
    b = P.combine_histograms([shards[2], shards[0], shards[1]])
    c = P.combine_histograms([P.combine_histograms(shards[:2]), shards[2]])
    for other in (b, c):
        assert np.array_equal(a.counts, other.counts)
        assert a.g2.tobytes() == other.g2.tobytes()
        assert a.duration == other.duration
    assert a.n_photons == sum(h.n_photons for h in shards)
    with pytest.raises(InsufficientDataError):
        P.combine_histograms([])


def test_symmetric_histogram():
    s = P.simulate_stream(TOY, 1e-4, seed=1)
    h = P.g2_estimate(s, 1e-9, 10e-9, symmetric=True)
    assert not h.one_sided
    np.testing.assert_array_equal(h.lags, -h.lags[::-1])
    np.testing.assert_array_equal(h.g2, h.g2[::-1])


def test_stream_validation():
    with pytest.raises(DomainError):
        P.PhotonStream([2e-9, 1e-9], 1e-6)
    with pytest.raises(DomainError):
        P.PhotonStream([1e-9, 2e-6], 1e-6)
    with pytest.raises(DomainError):
        P.simulate_stream(TOY, 0.0)
    with pytest.raises(DomainError):
        P.simulate_stream(TOY, 1e-6, collection_efficiency=0.0)
    with pytest.raises(DomainError):
        P.two_level_matrix(0.0, 1.0)
