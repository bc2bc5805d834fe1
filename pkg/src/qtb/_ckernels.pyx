# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled time-tag kernels.

All times are int64 picoseconds, sorted ascending.  Window and gate edges
are passed doubled (2 x ps) so half-picosecond edges stay exact.
"""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t, uint8_t

cnp.import_array()


cdef inline int64_t floordiv(int64_t a, int64_t b) nogil:
    cdef int64_t q = a // b
    if (a % b != 0) and ((a < 0) != (b < 0)):
        q -= 1
    return q


def delay_histogram(const int64_t[::1] ta, const int64_t[::1] tb, int64_t max_delay,
                    int64_t origin2, int64_t bin_width, Py_ssize_t nbins):
    cdef cnp.ndarray[int64_t, ndim=1] out = np.zeros(nbins, dtype=np.int64)
    cdef int64_t[::1] h = out
    cdef Py_ssize_t na = ta.shape[0], nb = tb.shape[0]
    cdef Py_ssize_t i, j, lo = 0
    cdef int64_t d, k, bw2 = 2 * bin_width
    with nogil:
        for i in range(na):
            # first b with tb >= ta - max_delay
            while lo < nb and tb[lo] < ta[i] - max_delay:
                lo += 1
            j = lo
            while j < nb and tb[j] <= ta[i] + max_delay:
                d = ta[i] - tb[j]
                k = floordiv(2 * d - origin2, bw2)
                if 0 <= k < nbins:
                    h[k] += 1
                j += 1
    return out


def count_greedy(const int64_t[::1] ta, const int64_t[::1] tb, int64_t offset, int64_t window):
    cdef Py_ssize_t na = ta.shape[0], nb = tb.shape[0]
    cdef Py_ssize_t i, j = 0
    cdef int64_t count = 0, d
    with nogil:
        for i in range(na):
            while j < nb and 2 * (tb[j] - offset - ta[i]) < -window:
                j += 1
            if j >= nb:
                break
            d = 2 * (tb[j] - offset - ta[i])
            if d <= window:
                count += 1
                j += 1
    return count


def gate_hits(const int64_t[::1] tc, const int64_t[::1] ta, int64_t lo2, int64_t hi2):
    cdef Py_ssize_t nc = tc.shape[0], na = ta.shape[0]
    cdef cnp.ndarray[uint8_t, ndim=1] out = np.zeros(nc, dtype=np.uint8)
    cdef uint8_t[::1] o = out
    cdef Py_ssize_t i, j = 0
    with nogil:
        for i in range(nc):
            while j < na and 2 * (ta[j] - tc[i]) < lo2:
                j += 1
            if j < na and 2 * (ta[j] - tc[i]) <= hi2:
                o[i] = 1
    return out.view(np.bool_)


def dead_time_mask(const int64_t[::1] times, const uint8_t[::1] channels,
                   const int64_t[::1] dead):
    cdef Py_ssize_t n = times.shape[0], i
    cdef Py_ssize_t nch = dead.shape[0]
    cdef cnp.ndarray[uint8_t, ndim=1] out = np.ones(n, dtype=np.uint8)
    cdef uint8_t[::1] keep = out
    cdef cnp.ndarray[int64_t, ndim=1] last_arr = np.zeros(nch, dtype=np.int64)
    cdef cnp.ndarray[uint8_t, ndim=1] seen_arr = np.zeros(nch, dtype=np.uint8)
    cdef int64_t[::1] last = last_arr
    cdef uint8_t[::1] seen = seen_arr
    cdef uint8_t c
    with nogil:
        for i in range(n):
            c = channels[i]
            if c >= nch or dead[c] <= 0:
                continue
            if seen[c] and times[i] - last[c] < dead[c]:
                keep[i] = 0
            else:
                seen[c] = 1
                last[c] = times[i]
    return out.view(np.bool_)
