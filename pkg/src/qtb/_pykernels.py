"""Numpy/pure-Python versions of the time-tag kernels.

Same signatures and bit-identical results as the compiled module; used
when the extension is not built or ``QTB_BACKEND=python`` is set.
"""
import numpy as np

_CHUNK = 1 << 20


def delay_histogram(ta, tb, max_delay, origin2, bin_width, nbins):
    ta = np.asarray(ta, dtype=np.int64)
    tb = np.asarray(tb, dtype=np.int64)
    out = np.zeros(nbins, dtype=np.int64)
    lo = np.searchsorted(tb, ta - max_delay, side="left")
    hi = np.searchsorted(tb, ta + max_delay, side="right")
    n = hi - lo
    start = 0
    while start < len(ta):
        # grow the chunk of a-tags until it holds about _CHUNK pairs
        csum = np.cumsum(n[start:])
        stop = start + max(1, int(np.searchsorted(csum, _CHUNK, side="right")))
        cnt = n[start:stop]
        total = int(cnt.sum())
        if total:
            ia = np.repeat(np.arange(start, stop), cnt)
            first = np.repeat(np.cumsum(cnt) - cnt, cnt)
            ib = lo[ia] + (np.arange(total) - first)
            d = ta[ia] - tb[ib]
            k = (2 * d - origin2) // (2 * bin_width)
            k = k[(k >= 0) & (k < nbins)]
            out += np.bincount(k, minlength=nbins)[:nbins]
        start = stop
    return out


def count_greedy(ta, tb, offset, window):
    ta = np.asarray(ta, dtype=np.int64).tolist()
    tb = np.asarray(tb, dtype=np.int64).tolist()
    nb = len(tb)
    j = 0
    count = 0
    for t in ta:
        while j < nb and 2 * (tb[j] - offset - t) < -window:
            j += 1
        if j >= nb:
            break
        if 2 * (tb[j] - offset - t) <= window:
            count += 1
            j += 1
    return count


def gate_hits(tc, ta, lo2, hi2):
    tc = np.asarray(tc, dtype=np.int64)
    ta = np.asarray(ta, dtype=np.int64)
    if len(ta) == 0:
        return np.zeros(len(tc), dtype=bool)
    # first tag with 2 (t - c) >= lo2, i.e. t >= c + ceil(lo2 / 2)
    j = np.searchsorted(ta, tc - ((-lo2) // 2), side="left")
    ok = j < len(ta)
    hit = np.zeros(len(tc), dtype=bool)
    hit[ok] = 2 * (ta[j[ok]] - tc[ok]) <= hi2
    return hit


def dead_time_mask(times, channels, dead):
    times = np.asarray(times, dtype=np.int64)
    channels = np.asarray(channels, dtype=np.uint8)
    dead = np.asarray(dead, dtype=np.int64)
    keep = np.ones(len(times), dtype=bool)
    for c in np.unique(channels):
        if c >= len(dead) or dead[c] <= 0:
            continue
        idx = np.flatnonzero(channels == c)
        t = times[idx]
        gap = np.diff(t)
        # a tag more than one dead time after its predecessor is always kept;
        # only runs of closely spaced tags need the sequential rule
        close = np.flatnonzero(gap < dead[c]) + 1
        if len(close) == 0:
            continue
        tl = t.tolist()
        last = None
        prev_i = -2
        for i in close.tolist():
            if i != prev_i + 1:
                last = tl[i - 1]          # run starts after a kept tag
            if tl[i] - last < dead[c]:
                keep[idx[i]] = False
            else:
                last = tl[i]
            prev_i = i
    return keep
