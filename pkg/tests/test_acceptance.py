"""Acceptance criteria, one test each.

Every test appends a row to ``conftest.ACCEPTANCE_ROWS``; the rows are
printed as a PASS/FAIL block at the end of the pytest run.  Reference
numbers marked [PUBLISHED] are the reported values, [DERIVED] ones were
computed independently (see the oracle notes next to each) and frozen.
"""
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_ROWS, random_stream
from qtb import analysis, coincidence, pairsource, pipeline, resonator, simulator
from qtb import tomography as tomo
from qtb.config import TimeBinState, UMZIConfig
from qtb.fixtures import (IDLER_SINGLES, RESONANCES, SIGNAL_SINGLES, data_path, experiment_config,
                          reference_rho)
from qtb.quantities import itu_c_channel_center
from test_coincidence import outer_histogram


def record(num, title, checks):
    """checks: list of (label, ok, detail). Records the row, then asserts."""
    ok = all(c[1] for c in checks)
    detail = "; ".join(f"{label}: {d}" + ("" if good else " (FAILED)") for label, good, d in checks)
    ACCEPTANCE_ROWS.append((num, title, ok, detail))
    assert ok, detail


def test_criterion_1_q_extraction():
    # [PUBLISHED] Q = 1.6e5, 1.9e5, 1.1e5; [DERIVED] center/linewidth = 1.63e5, 1.93e5, 1.11e5
    derived = {"C37": 1.63e5, "C27": 1.93e5, "C17": 1.11e5}
    published = {"C37": 1.6e5, "C27": 1.9e5, "C17": 1.1e5}
    checks = []
    t0 = time.perf_counter()
    for ch, width in RESONANCES.items():
        nu, t = resonator.read_trace(data_path(f"resonance_{ch}.csv"))
        fit = resonator.fit_resonance(nu, t)
        exact = itu_c_channel_center(int(ch[1:])) / width
        assert derived[ch] == pytest.approx(exact, rel=0.005)
        q = fit.q
        checks.append((f"{ch} Q", abs(q / derived[ch] - 1) < 0.02,
                       f"{q:.4g} vs {derived[ch]:.3g} (published {published[ch]:.2g})"))
    dt = time.perf_counter() - t0
    checks.append(("runtime", dt < 1.0, f"{dt:.3f} s"))
    record(1, "Q extraction", checks)


def test_criterion_2_singles_model():
    # [DERIVED] 1.29e6 * 1.28^2 + 1.15e5 * 1.28 + 30 = 2.2609e6; [PUBLISHED] "over 2.24 MHz"
    r = pairsource.eval_singles(IDLER_SINGLES, 1.28)
    record(2, "singles model", [
        ("R(1.28 mW)", abs(r / 2.26e6 - 1) < 0.01, f"{r:.5g} /s vs 2.26e6"),
        ("above 2.24 MHz", r > 2.24e6, f"{r / 1e6:.4f} MHz"),
    ])


def test_criterion_3_coherence_bandwidth():
    # [DERIVED] 1 / (2 pi 152 ps) = 1.0471 GHz; [PUBLISHED] 1.0 GHz
    bw = pairsource.bandwidth_from_coherence(152e-12)
    record(3, "coherence time to bandwidth", [
        ("bandwidth", abs(bw - 1.047e9) < 0.0005e9, f"{bw / 1e9:.4f} GHz vs 1.047"),
        ("vs 1.0 GHz", abs(bw / 1.0e9 - 1) < 0.05, f"{100 * (bw / 1e9 - 1):.1f}%"),
    ])


def test_criterion_4_pgr_formula():
    # [DERIVED] coefficient back-solved as 1.19e6 * 1.29e6 / 1.35e7 = 1.137e5 /s/mW^2
    coef = 1.137e5
    p = 1.28
    stats = pairsource.PairStatistics(coef * p * p + 40.0, 40.0)
    r = pairsource.infer_pgr(SIGNAL_SINGLES, IDLER_SINGLES, p, stats)
    record(4, "pair generation rate", [
        ("PGR per mW^2", abs(r.per_mw2 / 1.35e7 - 1) < 0.01, f"{r.per_mw2:.5g} vs 1.35e7"),
    ])


def test_criterion_5_bell_statistics():
    # [DERIVED] S = 2 sqrt(2) 0.9555 = 2.70256, (0.9555 - 1/sqrt 2)/0.0018 = 137.99
    r = analysis.chsh_from_visibility(0.9555, 0.0018)
    thr = analysis.chsh_from_visibility(1 / math.sqrt(2), 0.0018)
    record(5, "Bell statistics", [
        ("n_sigma", abs(r.n_sigma - 138.0) <= 0.5, f"{r.n_sigma:.3f}"),
        ("S", abs(r.s - 2.702) <= 0.001, f"{r.s:.5f}"),
        ("S at threshold", abs(thr.s - 2.0) < 1e-12, f"{thr.s:.15f}"),
    ])


def test_criterion_6_tomography():
    # [DERIVED] <phi+|rho|phi+> of the renormalised printed matrix = 0.94282
    # (hand expansion: (rho_00 + rho_33 + 2 Re rho_03) / 2); [PUBLISHED] 94.37 +- 0.22 %
    t0 = time.perf_counter()
    rho_ref = tomo.renormalize(reference_rho())
    with pytest.warns(Warning):
        f_direct = tomo.fidelity(rho_ref)
    hand = 0.5 * (rho_ref[0, 0] + rho_ref[3, 3] + 2 * rho_ref[0, 3]).real
    records = tomo.read_counts(data_path("tomography_1e6.json"))
    mle = tomo.mle_reconstruct(records)
    f_mle = tomo.fidelity(mle.rho)
    mc = tomo.monte_carlo_uncertainty(records, 100, seed=0)
    dt = time.perf_counter() - t0
    record(6, "tomography golden test", [
        ("direct fidelity", abs(f_direct - 0.9415) <= 0.002 and abs(f_direct - hand) < 1e-12,
         f"{f_direct:.5f}"),
        ("MLE fidelity", 0.93 <= f_mle <= 0.95, f"{f_mle:.5f}"),
        ("MLE converged", mle.converged, f"{mle.iterations} iterations"),
        ("MC trials", len(mc.values) == 100, f"std {mc.std:.2g}, {len(mc.dropped)} dropped"),
        ("runtime", dt < 60, f"{dt:.1f} s"),
    ])


@pytest.mark.slow
def test_criterion_7_round_trip():
    cfg = experiment_config()
    assert cfg.duration == 10.0 and cfg.pump.mean_pairs == 0.05
    t0 = time.perf_counter()
    rt = pipeline.round_trip(cfg, phases=12)
    raw, exp = rt.run.raw_visibility(), rt.run.expected_raw_visibility()
    dt = time.perf_counter() - t0
    dev = (raw.visibility - exp.visibility) / raw.sigma
    centers = sorted(round(p.center * 1e9, 3) for p in rt.peaks)
    targets = np.array([-2.5, -1.25, 0.0, 1.25, 2.5]) * 1e-9
    bin_w = rt.histogram.bin_width
    matched = len(rt.peaks) == 5 and all(
        abs(p.center - t) <= bin_w * (1 + 1e-9) for p, t in zip(sorted(rt.peaks, key=lambda p: p.center), targets))
    record(7, "end-to-end round trip", [
        ("raw V", raw.visibility >= 0.95, f"{raw.visibility:.5f} +- {raw.sigma:.5f}"),
        ("vs analytic", abs(dev) <= 3, f"expected {exp.visibility:.5f}, {dev:+.2f} sigma"),
        ("five peaks", matched, f"{centers} ns, bin {bin_w * 1e12:.0f} ps"),
        ("runtime", dt < 120, f"{dt:.1f} s"),
    ])


def test_criterion_8_property_suites():
    rng = np.random.default_rng(8)
    checks = []

    # coincidence engine against the all-pairs definition
    bad = 0
    for _ in range(200):
        total = int(rng.integers(2, 10_001))
        na = int(rng.integers(1, total))
        span = int(rng.integers(1_000, 50_000_000))
        a, b = random_stream(rng, na, span), random_stream(rng, total - na, span)
        bw, T = int(rng.integers(1, 2_000)), int(rng.integers(0, 20_000))
        got = coincidence.delay_histogram(a, b, bw * 1e-12, T * 1e-12).counts
        bad += not np.array_equal(got, outer_histogram(a, b, bw, T))
    checks.append(("brute-force histogram", bad == 0, f"{200 - bad}/200 bit-exact"))

    # UMZI probability conservation
    worst = 0.0
    for _ in range(2000):
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        v /= np.linalg.norm(v)
        u = UMZIConfig(1.25e-9, rng.uniform(0, 2 * math.pi), rng.uniform(0.01, 1), rng.uniform(0.01, 0.99))
        out = simulator.apply_umzi(v[0], v[1], u)
        worst = max(worst, abs(np.sum(np.abs(out) ** 2) - u.transmittance))
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    P = simulator.joint_outcome_probabilities(TimeBinState.pure(psi / np.linalg.norm(psi)),
                                              UMZIConfig(phase=0.3), UMZIConfig(phase=1.1))
    worst = max(worst, abs(P.sum() - 1))
    checks.append(("UMZI conservation", worst <= 1e-12, f"max error {worst:.1e}"))

    # log-log exponents of the brightness figure of merit
    mw = pairsource.MaterialWaveguide(8e-19, 0.39e-12, 1.5557e-6)
    fom = pairsource.brightness_figure_of_merit

    def slope(f, x):
        return math.log(f(2 * x) / f(x)) / math.log(2)

    exps = [
        slope(lambda v: fom(pairsource.MaterialWaveguide(v, mw.a_eff, mw.pump_wavelength), 17e-6, 1e9), mw.n2),
        slope(lambda v: fom(pairsource.MaterialWaveguide(mw.n2, v, mw.pump_wavelength), 17e-6, 1e9), mw.a_eff),
        slope(lambda v: fom(mw, v, 1e9), 17e-6),
        slope(lambda v: fom(mw, 17e-6, v), 1e9),
    ]
    checks.append(("exponents", np.allclose(exps, [2, -2, -2, -3], atol=1e-12),
                   "{" + ", ".join(f"{e:+.0f}" for e in exps) + "}"))

    # MLE output invariants on random count sets
    worst = 0.0
    for k in range(25):
        counts = rng.poisson(rng.uniform(0, 200, 16))
        counts[0] += 1
        res = tomo.mle_reconstruct([tomo.MeasurementRecord(s, int(c)) for s, c in zip(tomo.SETTINGS, counts)])
        r = res.rho
        worst = max(worst, np.abs(r - r.conj().T).max(), abs(np.trace(r).real - 1),
                    max(0.0, -np.linalg.eigvalsh(r).min()))
    checks.append(("MLE physical", worst <= 1e-12, f"25 random count sets, worst {worst:.1e}"))

    # determinism
    cfg = experiment_config(duration=0.02)
    d1 = simulator.simulate_experiment(cfg).digest()
    d2 = simulator.simulate_experiment(cfg, threads=3).digest()
    recs = tomo.read_counts(data_path("tomography_1e4.json"))
    m1 = tomo.monte_carlo_uncertainty(recs, 5, seed=1).values
    m2 = tomo.monte_carlo_uncertainty(recs, 5, seed=1, threads=2).values
    checks.append(("determinism", d1 == d2 and np.array_equal(m1, m2), f"stream sha256 {d1[:12]}"))
    record(8, "property suites", checks)
