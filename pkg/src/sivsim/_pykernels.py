"""Pure-Python fallbacks for :mod:`sivsim._kmc_core`.

Keep the arithmetic in exactly the same order as the Cython source; the two
backends are tested for bit-identical output.
"""
import numpy as np


def kmc_chunk(offsets, targets, cum_rates, totals, radiative, exp_draws, u_choice, u_keep,
              efficiency, state, t, t_end, photons, dwell, visited):
    offsets = offsets.tolist()
    targets = targets.tolist()
    cum = cum_rates.tolist()
    totals = totals.tolist()
    radiative = radiative.tolist()
    record = dwell.shape[0] > 0
    state = int(state)
    t = float(t)
    finished = False
    n_ph = 0
    kept = []
    i = 0
    for e, u, v in zip(exp_draws.tolist(), u_choice.tolist(), u_keep.tolist()):
        tot = totals[state]
        if tot <= 0.0:
            t = t_end
            finished = True
            break
        dt = e / tot
        if t + dt >= t_end:
            t = t_end
            finished = True
            i += 1
            break
        t += dt
        x = u * tot
        j = offsets[state]
        hi = offsets[state + 1] - 1
        while j < hi and x >= cum[j]:
            j += 1
        if record:
            dwell[i] = dt
            visited[i] = state
        if radiative[j] and v < efficiency:
            kept.append(t)
        state = targets[j]
        i += 1
    n_ph = len(kept)
    if n_ph:
        photons[:n_ph] = kept
    return state, t, i, n_ph, finished


def pair_counts(times, bin_width, n_bins, start_stop=False):
    times = np.ascontiguousarray(times, dtype=float)
    counts = np.zeros(n_bins, dtype=np.int64)
    n = times.size
    for k in range(1, n):
        b = ((times[k:] - times[:-k]) / bin_width).astype(np.int64)
        b = b[b < n_bins]
        if b.size == 0:
            break
        counts += np.bincount(b, minlength=n_bins)
        if start_stop:
            break
    return counts
