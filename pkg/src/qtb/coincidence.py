"""Counting engine over time-tag channels.

Channel arguments are sorted int64 picosecond arrays (``stream.channel(name)``);
time parameters are seconds.  The heavy loops live in the kernel backend
(compiled when available, see ``qtb._backend``).

Two counting conventions coexist on purpose:

* ``delay_histogram`` counts *all* pairs within range, as a g2-style
  correlation needs;
* ``count_coincidences`` matches tags one-to-one (greedy, earliest match),
  so its count is an event rate comparable to singles.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy import signal as _signal

from ._backend import kernels
from .errors import ConfigError, DomainError, PreconditionError
from .histogram import Histogram
from .quantities import PS_PER_S, seconds_to_ps


@dataclass(frozen=True)
class Gate:
    """Window ``[offset - width/2, offset + width/2]`` relative to a reference tag."""

    offset: float
    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise DomainError("gate width must be positive")

    def doubled_ps(self):
        off, w = seconds_to_ps(self.offset), seconds_to_ps(self.width)
        return 2 * off - w, 2 * off + w

    @classmethod
    def parse(cls, text):
        from .quantities import parse_time
        try:
            off, width = text.split(",")
        except ValueError:
            raise DomainError(f"gate must be 'offset,width', got {text!r}") from None
        return cls(parse_time(off), parse_time(width))


@dataclass(frozen=True)
class CoincidenceResult:
    count: int
    rate: float        # 1/s
    window: float      # s
    offset: float      # s
    duration: float    # s


def _as_times(x):
    t = np.ascontiguousarray(x, dtype=np.int64)
    if t.ndim != 1:
        raise PreconditionError("tag times must be a 1-D array")
    return t


def check_sorted(*arrays):
    for t in arrays:
        if len(t) > 1 and np.any(np.diff(t) < 0):
            raise PreconditionError("tag times are not sorted")


def _duration(duration, *arrays):
    if duration is not None:
        return float(duration)
    nonempty = [t for t in arrays if len(t)]
    if not nonempty:
        return 0.0
    lo = min(int(t[0]) for t in nonempty)
    hi = max(int(t[-1]) for t in nonempty)
    return (hi - lo) / PS_PER_S


def _rate(count, duration):
    return count / duration if duration > 0 else math.nan


def delay_histogram(a, b, bin_width, max_delay):
    """All-pairs histogram of ``t_a - t_b`` for ``|t_a - t_b| <= max_delay``.

    Bins are centred on multiples of ``bin_width`` (bin edges are symmetric
    about zero), half-open ``[lo, hi)``.  ``bin_width`` must be a whole
    number of picoseconds.
    """
    a, b = _as_times(a), _as_times(b)
    check_sorted(a, b)
    bw = seconds_to_ps(bin_width)
    if bw < 1 or abs(bw - bin_width * PS_PER_S) > 1e-6:
        raise DomainError("bin_width must be a positive whole number of picoseconds")
    T = seconds_to_ps(max_delay)
    if T < 0:
        raise DomainError("max_delay must be non-negative")
    m = (2 * T + bw) // (2 * bw)        # floor(T/bw + 1/2)
    nbins = 2 * m + 1
    origin2 = -(2 * m + 1) * bw
    counts = kernels.delay_histogram(a, b, T, origin2, bw, nbins)
    return Histogram(bw / PS_PER_S, origin2 / (2 * PS_PER_S), counts)


def count_coincidences(a, b, window, offset=0.0, duration=None):
    """One-to-one coincidences with ``t_b - t_a - offset`` in ``[-window/2, window/2]``.

    Tags are paired greedily: each a-tag, in time order, takes the earliest
    unused b-tag inside its window.
    """
    if not window > 0:
        raise DomainError("coincidence window must be positive")
    a, b = _as_times(a), _as_times(b)
    check_sorted(a, b)
    n = int(kernels.count_greedy(a, b, seconds_to_ps(offset), seconds_to_ps(window)))
    dur = _duration(duration, a, b)
    return CoincidenceResult(n, _rate(n, dur), window, offset, dur)


def accidental_coincidences(a, b, window, offset, period, shift=1, duration=None):
    """Shifted-window accidental estimate: the same count moved by ``shift`` pump periods."""
    return count_coincidences(a, b, window, offset + shift * period, duration)


def gate_hits(clock, a, gate):
    """Boolean per clock tag: does channel ``a`` have a tag inside ``gate``?"""
    clock, a = _as_times(clock), _as_times(a)
    check_sorted(clock, a)
    lo2, hi2 = gate.doubled_ps()
    return np.asarray(kernels.gate_hits(clock, a, lo2, hi2), dtype=bool)


def triple_coincidences(clock, a, b, gate_a, gate_b, period=None, duration=None):
    """Clock tags with at least one ``a`` tag in ``gate_a`` and one ``b`` tag in ``gate_b``.

    When the pump ``period`` is given, gates must fit inside one period.
    """
    if period is not None:
        for g in (gate_a, gate_b):
            if g.width > period or g.offset - g.width / 2 < -period or g.offset + g.width / 2 > 2 * period:
                raise ConfigError("gate wider than or outside the pump period")
        if abs(gate_a.offset - gate_b.offset) + (gate_a.width + gate_b.width) / 2 > period:
            raise ConfigError("gates together span more than one pump period")
    clock = _as_times(clock)
    hits = gate_hits(clock, a, gate_a) & gate_hits(clock, b, gate_b)
    n = int(np.count_nonzero(hits))
    dur = _duration(duration, clock)
    return CoincidenceResult(n, _rate(n, dur), gate_a.width, gate_a.offset, dur)


@dataclass(frozen=True)
class Peak:
    center: float   # s
    height: float   # smoothed counts per bin
    area: int       # raw counts within +-separation/2


def find_peaks(hist, min_separation, min_prominence):
    """Peaks of a histogram after 3-bin moving-average smoothing.

    Local maxima at least ``min_separation`` seconds apart with prominence
    of at least ``min_prominence`` counts; areas are raw counts summed over
    ``center +- min_separation/2``.
    """
    y = np.asarray(hist.counts, dtype=np.int64)
    if len(y) < 3:
        return []
    # integer 3-bin sums keep plateaus exactly flat (find_peaks then takes their middle)
    total3 = np.convolve(y, np.ones(3, dtype=np.int64), mode="same")
    smooth = total3 / 3.0
    sep_bins = max(1, int(round(min_separation / hist.bin_width)))
    idx, props = _signal.find_peaks(total3, distance=sep_bins, prominence=3.0 * min_prominence)
    half = sep_bins // 2
    centers = hist.centers
    out = []
    for i in idx:
        lo, hi = max(0, i - half), min(len(y), i + half + 1)
        out.append(Peak(float(centers[i]), float(smooth[i]), int(hist.counts[lo:hi].sum())))
    return out
