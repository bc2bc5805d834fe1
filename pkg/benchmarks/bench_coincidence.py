"""Throughput of the time-tag kernels, compiled against numpy fallback.

    python3 benchmarks/bench_coincidence.py [--tags 2000000] [--repeat 3]

Streams are uniform random tags at roughly 160 MHz-like spacing.  Every
kernel runs on the same inputs for both backends and the outputs are
compared before any timing is reported.
"""
import argparse
import time

import numpy as np

from qtb import _backend


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def make_inputs(n, seed=0):
    rng = np.random.default_rng(seed)
    span = n * 6250
    a = np.sort(rng.integers(0, span, n)).astype(np.int64)
    b = np.sort(rng.integers(0, span, n)).astype(np.int64)
    clock = np.arange(0, span, 6250, dtype=np.int64)
    times = np.sort(np.concatenate([a, b]))
    channels = rng.integers(1, 5, len(times)).astype(np.uint8)
    dead = np.array([0, 20_000, 20_000, 20_000, 20_000], np.int64)
    return a, b, clock, times, channels, dead


def cases(k, a, b, clock, times, channels, dead):
    return {
        "delay_histogram (3 ns, 10 ps bins)": lambda: np.asarray(k.delay_histogram(a, b, 3000, -3010, 10, 601)),
        "count_greedy (1 ns window)": lambda: k.count_greedy(a, b, 0, 1000),
        "gate_hits (1 ns gate)": lambda: np.asarray(k.gate_hits(clock, a, 4750, 6750), bool),
        "dead_time_mask (20 ns)": lambda: np.asarray(k.dead_time_mask(times, channels, dead), bool),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--tags", type=int, default=2_000_000, help="tags per channel (default 2e6)")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    inputs = make_inputs(args.tags)
    backends = _backend.available_backends()
    print(f"tags per channel: {args.tags:,}; backends: {', '.join(backends)}; default: {_backend.BACKEND}")
    timings = {}
    outputs = {}
    for name in backends:
        for label, fn in cases(_backend.get_backend(name), *inputs).items():
            dt, out = best_of(fn, args.repeat)
            timings[name, label] = dt
            outputs[name, label] = out
    labels = list(cases(_backend.get_backend("python"), *inputs))
    total = 2 * args.tags
    print(f"{'kernel':38s}" + "".join(f"{b:>16s}" for b in backends) + ("     speed-up" if len(backends) > 1 else ""))
    for label in labels:
        ref = outputs["python", label]
        for name in backends:
            if not np.array_equal(outputs[name, label], ref):
                raise SystemExit(f"{name} disagrees with python on {label}")
        row = f"{label:38s}" + "".join(f"{total / timings[b, label] / 1e6:11.1f} Mtag/s" for b in backends)
        if len(backends) > 1:
            row += f"{timings['python', label] / timings['cython', label]:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
