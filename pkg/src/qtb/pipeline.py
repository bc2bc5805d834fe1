"""Glue between simulated streams and the analysis layer: middle-slot
gates, per-port triple counts, fringe scans and their analytic
expectations."""
import math
from dataclasses import dataclass, field

import numpy as np

from . import coincidence, simulator
from .analysis import PORT_INDEX, PORT_PAIRS, FringeScan, fit_fringe, raw_visibility
from .coincidence import Gate

#: middle-slot gate width as a fraction of the bin separation
GATE_WIDTH_FRACTION = 0.8
#: gate centre shift after the nominal middle slot, in units of the bin separation;
#: the exponential decay tail makes arrivals late, so the gate is pushed late
#: to keep early-slot photons out
GATE_SHIFT_FRACTION = 0.3


def middle_gate(cfg, channel, width=None, shift=None):
    """Gate (relative to the clock tag) on the middle output slot of ``channel``."""
    dT = cfg.pump.bin_separation
    width = GATE_WIDTH_FRACTION * dT if width is None else width
    shift = GATE_SHIFT_FRACTION * dT if shift is None else shift
    center = cfg.pump.pulse_delay + dT + cfg.detector(channel).delay + shift
    return Gate(center, width)


def default_gates(cfg, width=None, shift=None):
    return {ch: middle_gate(cfg, ch, width, shift) for ch in ("A1", "A2", "B1", "B2")}


def triple_counts(stream, gates, clock="CLOCK"):
    """Clock-gated middle-middle counts for the four port pairs."""
    c = stream.channel(clock)
    hits = {ch: coincidence.gate_hits(c, stream.channel(ch), g) for ch, g in gates.items()}
    return {p: int(np.count_nonzero(hits[p[:2]] & hits[p[2:]])) for p in PORT_PAIRS}


def expected_triple_counts(cfg, gates, duration=None):
    duration = cfg.duration if duration is None else duration
    n = math.floor(duration * cfg.pump.repetition_rate + 1e-9)
    out = {}
    for p in PORT_PAIRS:
        i, j = PORT_INDEX[p]
        prob = simulator.expected_triple_probability(cfg, i, j, gates[p[:2]], gates[p[2:]])
        out[p] = n * prob
    return out


@dataclass
class FringeRun:
    scans: dict
    expected: dict
    betas: np.ndarray
    alpha: float
    dwell: float
    meta: list = field(default_factory=list)

    def fits(self):
        return {p: fit_fringe(self.scans[p]) for p in PORT_PAIRS}

    def expected_fits(self):
        return {p: fit_fringe(self.expected[p]) for p in PORT_PAIRS}

    def raw_visibility(self):
        return raw_visibility(list(self.fits().values()))

    def expected_raw_visibility(self):
        return raw_visibility(list(self.expected_fits().values()))


def _phase_cfg(cfg, alpha, beta, dwell, index):
    return cfg.replace(
        umzi_signal=simulator.UMZIConfig(cfg.umzi_signal.delay, alpha, cfg.umzi_signal.transmittance,
                                         cfg.umzi_signal.splitting_ratio),
        umzi_idler=simulator.UMZIConfig(cfg.umzi_idler.delay, beta, cfg.umzi_idler.transmittance,
                                        cfg.umzi_idler.splitting_ratio),
        duration=dwell,
        seed=int(np.random.SeedSequence(cfg.seed, spawn_key=(1_000_000 + index,)).generate_state(1)[0]),
    )


def run_fringe_scan(cfg, betas, total_duration=None, alpha=None, gates=None, threads=1,
                    keep_stream=None):
    """Simulate one acquisition per idler phase and collect triple counts.

    ``total_duration`` (default ``cfg.duration``) is split evenly over the
    phase settings; each setting gets its own seed derived from ``cfg.seed``.
    ``keep_stream(index, stream)`` is called with every simulated stream if
    given (e.g. to build a delay histogram) before it is discarded.
    """
    betas = np.asarray(betas, dtype=float)
    alpha = cfg.umzi_signal.phase if alpha is None else alpha
    total = cfg.duration if total_duration is None else total_duration
    dwell = total / len(betas)
    gates = default_gates(cfg) if gates is None else gates
    counts = {p: [] for p in PORT_PAIRS}
    expected = {p: [] for p in PORT_PAIRS}
    meta = []
    for k, beta in enumerate(betas):
        c = _phase_cfg(cfg, alpha, beta, dwell, k)
        stream = simulator.simulate_experiment(c, threads=threads)
        if keep_stream is not None:
            keep_stream(k, stream)
        tc = triple_counts(stream, gates)
        ex = expected_triple_counts(c, gates)
        for p in PORT_PAIRS:
            counts[p].append(tc[p])
            expected[p].append(ex[p])
        meta.append(stream.meta)
        del stream
    scans = {p: FringeScan(p, betas, counts[p], dwell, alpha) for p in PORT_PAIRS}
    exp_scans = {p: FringeScan(p, betas, expected[p], dwell, alpha) for p in PORT_PAIRS}
    return FringeRun(scans, exp_scans, betas, alpha, dwell, meta)


def expected_fringe(cfg, betas, dwell, alpha=None, gates=None):
    """Noise-free expected scans for the given settings (no simulation)."""
    alpha = cfg.umzi_signal.phase if alpha is None else alpha
    gates = default_gates(cfg) if gates is None else gates
    rows = {p: [] for p in PORT_PAIRS}
    for k, beta in enumerate(betas):
        ex = expected_triple_counts(_phase_cfg(cfg, alpha, beta, dwell, k), gates)
        for p in PORT_PAIRS:
            rows[p].append(ex[p])
    return {p: FringeScan(p, betas, rows[p], dwell, alpha) for p in PORT_PAIRS}


#: delay-histogram settings used for the two-fold A1 x B1 peak structure
HIST_BIN_WIDTH = 50e-12
HIST_MAX_DELAY = 3e-9


@dataclass
class RoundTrip:
    run: FringeRun
    histogram: object
    peaks: list

    def peak_offsets(self, bin_separation):
        """Distance (in bins) of each peak from the nearest multiple of ``bin_separation``."""
        h = self.histogram
        return [abs(p.center - round(p.center / bin_separation) * bin_separation) / h.bin_width
                for p in self.peaks]


def round_trip(cfg, phases=12, threads=1, bin_width=HIST_BIN_WIDTH, max_delay=HIST_MAX_DELAY,
               pair=("A1", "B1")):
    """Simulate a full fringe scan and analyse it like measured data.

    Besides the fringe fits, the two-fold delay histogram of ``pair`` is
    accumulated over all phase settings and its peaks located.  The range
    stays inside one pump period so that neighbouring double pulses do
    not add peaks of their own.
    """
    from .histogram import Histogram

    acc = {}

    def keep(k, stream):
        h = coincidence.delay_histogram(stream.channel(pair[0]), stream.channel(pair[1]),
                                        bin_width, max_delay)
        if "h" in acc:
            acc["h"] = Histogram(h.bin_width, h.origin, acc["h"].counts + h.counts)
        else:
            acc["h"] = h

    betas = np.linspace(0.0, 2 * math.pi, phases, endpoint=False)
    run = run_fringe_scan(cfg, betas, threads=threads, keep_stream=keep)
    hist = acc["h"]
    peaks = coincidence.find_peaks(hist, 0.5 * cfg.pump.bin_separation, min_prominence=20)
    return RoundTrip(run, hist, peaks)
