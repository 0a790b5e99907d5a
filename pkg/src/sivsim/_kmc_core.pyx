# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the jump-process simulator and pair correlator.

Semantics are identical to ``sivsim._pykernels``; both consume the same
pre-drawn random numbers so results agree bit for bit.
"""
import numpy as np
cimport numpy as cnp

ctypedef cnp.int64_t i64


def kmc_chunk(const i64[::1] offsets, const i64[::1] targets, const double[::1] cum_rates,
              const double[::1] totals, const unsigned char[::1] radiative,
              const double[::1] exp_draws, const double[::1] u_choice, const double[::1] u_keep,
              double efficiency, i64 state, double t, double t_end,
              double[::1] photons, double[::1] dwell, i64[::1] visited):
    cdef Py_ssize_t k = exp_draws.shape[0]
    cdef bint record = dwell.shape[0] > 0
    cdef Py_ssize_t i = 0, j, lo, hi, n_ph = 0
    cdef double tot, dt, x
    cdef bint finished = False
    with nogil:
        while i < k:
            tot = totals[state]
            if tot <= 0.0:
                t = t_end
                finished = True
                break
            dt = exp_draws[i] / tot
            if t + dt >= t_end:
                t = t_end
                finished = True
                i += 1
                break
            t += dt
            x = u_choice[i] * tot
            lo = offsets[state]
            hi = offsets[state + 1] - 1
            j = lo
            while j < hi and x >= cum_rates[j]:
                j += 1
            if record:
                dwell[i] = dt
                visited[i] = state
            if radiative[j] and u_keep[i] < efficiency:
                photons[n_ph] = t
                n_ph += 1
            state = targets[j]
            i += 1
    return state, t, i, n_ph, finished


def pair_counts(const double[::1] times, double bin_width, i64 n_bins, bint start_stop=False):
    cdef Py_ssize_t n = times.shape[0]
    cdef Py_ssize_t i, j
    cdef i64 b
    cdef double d
    counts = np.zeros(n_bins, dtype=np.int64)
    cdef i64[::1] c = counts
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                d = times[j] - times[i]
                b = <i64>(d / bin_width)
                if b >= n_bins:
                    break
                c[b] += 1
                if start_stop:
                    break
    return counts
