"""``qtb`` command-line interface.

Every command writes ``<out>/<command>_report.json`` (a RunReport with
input digests, echoed parameters, unit-tagged results and warnings) plus
plot-data CSV files, and optionally SVG figures (``--svg``).

Exit codes: 0 success, 2 configuration error, 3 analysis error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
import traceback
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, QtbError
from .quantities import parse_time

EXIT_OK, EXIT_CONFIG, EXIT_ANALYSIS = 0, 2, 3


# report --------------------------------------------------------------------


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    return v


class RunReport:
    def __init__(self, command):
        self.command = command
        self.inputs = {}
        self.parameters = {}
        self.results = {}
        self.outputs = []
        self.warnings = []

    def add_input(self, path):
        self.inputs[str(path)] = file_digest(path)

    def add(self, name, value, unit):
        self.results[name] = {"value": value, "unit": unit}

    def to_json(self):
        return _jsonable({
            "command": self.command,
            "version": __version__,
            "inputs": self.inputs,
            "parameters": self.parameters,
            "results": self.results,
            "outputs": self.outputs,
            "warnings": self.warnings,
        })

    def write(self, outdir):
        path = Path(outdir) / f"{self.command}_report.json"
        path.write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")
        return path

    def summary(self):
        lines = [f"{self.command}:"]
        for k, r in self.results.items():
            v = r["value"]
            text = f"{v:.6g}" if isinstance(v, float) else str(v)
            lines.append(f"  {k} = {text} {r['unit']}".rstrip())
        lines.extend(f"  warning: {w}" for w in self.warnings)
        return "\n".join(lines)


def _out(args, name):
    return Path(args.out) / name


def _csv(path, header, columns, report):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(f"{v:.10g}" if isinstance(v, float) else str(v) for v in row) + "\n")
    report.outputs.append(str(path))


def _svg(args, report, name, series, **labels):
    if not args.svg:
        return
    from .plotting import svg_plot
    path = _out(args, name)
    svg_plot(path, series, **labels)
    report.outputs.append(str(path))


def _time_arg(text):
    try:
        return parse_time(text)
    except QtbError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _gate_arg(text):
    from .coincidence import Gate
    try:
        return Gate.parse(text)
    except QtbError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


# commands ------------------------------------------------------------------


def cmd_simulate(args, report):
    from . import simulator
    from .config import ExperimentConfig

    report.add_input(args.config)
    cfg = ExperimentConfig.load(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.duration is not None:
        changes["duration"] = args.duration
    cfg = cfg.replace(**changes).validate() if changes else cfg
    report.parameters = cfg.to_json()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        stream = simulator.simulate_experiment(cfg, threads=args.threads)
    report.warnings.extend(str(w.message) for w in caught)
    path = _out(args, args.stream_name)
    stream.save(path)
    report.outputs.append(str(path))
    report.add("tags", len(stream), "count")
    for name, n in stream.counts().items():
        report.add(f"tags_{name}", n, "count")
    report.add("pairs_emitted", stream.meta["pairs_emitted"], "count")
    report.add("pump_periods", stream.meta["pump_periods"], "count")
    report.add("dead_time_fraction", stream.meta["dead_time_fraction"], "1")
    report.add("stream_sha256", stream.digest(), "sha256")


def _load_stream(args, report):
    from .tagstream import TagStream
    report.add_input(args.stream)
    return TagStream.load(args.stream)


def cmd_hist(args, report):
    from . import coincidence, pairsource

    stream = _load_stream(args, report)
    report.parameters = {"a": args.a, "b": args.b, "bin_width_s": args.bin_width,
                         "max_delay_s": args.max_delay, "fit": args.fit}
    h = coincidence.delay_histogram(stream.channel(args.a), stream.channel(args.b),
                                    args.bin_width, args.max_delay)
    path = _out(args, "histogram.csv")
    h.to_csv(path)
    report.outputs.append(str(path))
    report.add("total", h.total, "count")
    peaks = coincidence.find_peaks(h, args.peak_separation, args.min_prominence)
    report.add("peak_centers", [p.center for p in peaks], "s")
    report.add("peak_areas", [p.area for p in peaks], "count")
    series = [{"x": h.centers * 1e9, "y": h.counts, "label": f"{args.a} x {args.b}"}]
    if args.fit:
        fit = pairsource.fit_double_exponential(h)
        report.add("tau", fit.tau, "s")
        report.add("tau_stderr", fit.stderr["tau"], "s")
        report.add("bandwidth", fit.bandwidth, "Hz")
        report.add("bandwidth_stderr", fit.bandwidth_stderr, "Hz")
        report.add("center", fit.center, "s")
        report.add("baseline", fit.baseline, "count/bin")
        report.add("reduced_chi2", fit.reduced_chi2, "1")
        model = fit.amplitude * np.exp(-np.abs(h.centers - fit.center) / fit.tau) + fit.baseline
        _csv(_out(args, "histogram_fit.csv"), ["bin_center_s", "count", "model"],
             [h.centers, h.counts, model], report)
        series.append({"x": h.centers * 1e9, "y": model, "label": "double-exponential fit"})
    _svg(args, report, "histogram.svg", series, xlabel="delay (ns)", ylabel="coincidences per bin")


def cmd_coinc(args, report):
    from . import coincidence, pairsource

    stream = _load_stream(args, report)
    report.parameters = {"a": args.a, "b": args.b, "window_s": args.window, "offset_s": args.offset,
                         "period_s": args.period}
    a, b = stream.channel(args.a), stream.channel(args.b)
    cc = coincidence.count_coincidences(a, b, args.window, args.offset)
    report.add("coincidences", cc.count, "count")
    report.add("coincidence_rate", cc.rate, "1/s")
    report.add("duration", cc.duration, "s")
    if args.period:
        acc = coincidence.accidental_coincidences(a, b, args.window, args.offset, args.period)
        report.add("accidentals", acc.count, "count")
        report.add("accidental_rate", acc.rate, "1/s")
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            value, err = pairsource.car_with_error(cc.count, acc.count)
        report.warnings.extend(str(w.message) for w in caught)
        report.add("car", value, "1")
        report.add("car_stderr", err, "1")


def cmd_triple(args, report):
    from . import coincidence

    stream = _load_stream(args, report)
    report.parameters = {"clock": args.clock, "a": args.a, "b": args.b,
                         "gate_a": [args.gate_a.offset, args.gate_a.width],
                         "gate_b": [args.gate_b.offset, args.gate_b.width], "period_s": args.period}
    res = coincidence.triple_coincidences(stream.channel(args.clock), stream.channel(args.a),
                                          stream.channel(args.b), args.gate_a, args.gate_b,
                                          period=args.period)
    report.add("triples", res.count, "count")
    report.add("triple_rate", res.rate, "1/s")
    report.add("duration", res.duration, "s")


def cmd_fringe(args, report):
    from . import analysis

    for p in args.scans:
        report.add_input(p)
    report.parameters = {"alpha_rad": args.alpha}
    scans = analysis.read_fringe_scans(args.scans, alpha=args.alpha)
    fits = {}
    series = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        for p, scan in scans.items():
            f = analysis.fit_fringe(scan)
            fits[p] = f
            report.add(f"V_{p}", f.visibility, "1")
            report.add(f"V_{p}_sigma", f.sigma, "1")
            report.add(f"phase_offset_{p}", f.phase_offset, "rad")
            beta, rate = analysis.fringe_curve(f, scan.alpha)
            _csv(_out(args, f"fringe_{p}.csv"), ["phase_rad", "rate_model_per_s"], [beta, rate], report)
            series.append({"x": scan.phases, "y": scan.rates, "style": "points", "label": p})
            series.append({"x": beta, "y": rate})
    report.warnings.extend(str(w.message) for w in caught)
    raw = analysis.raw_visibility(list(fits.values()))
    report.add("raw_visibility", raw.visibility, "1")
    report.add("raw_visibility_sigma", raw.sigma, "1")
    if not raw.weighted:
        report.warnings.append("a visibility had zero uncertainty; unweighted mean used")
    chsh = analysis.chsh_from_visibility(raw.visibility, raw.sigma)
    report.add("chsh_s", chsh.s, "1")
    report.add("chsh_n_sigma", chsh.n_sigma, "sigma")
    if set(scans) == set(analysis.PORT_PAIRS):
        x, E, sE = analysis.correlation_from_scans(scans)
        ef = analysis.fit_correlation(x, E, sE)
        report.add("correlation_visibility", ef.visibility, "1")
        report.add("correlation_visibility_sigma", ef.sigma, "1")
        _csv(_out(args, "correlation.csv"), ["alpha_plus_beta_rad", "E", "E_sigma"], [x, E, sE], report)
        _svg(args, report, "correlation.svg",
             [{"x": x, "y": E, "style": "points", "label": "E"},
              {"x": np.linspace(0, 2 * np.pi, 200),
               "y": ef.visibility * np.cos(np.linspace(0, 2 * np.pi, 200) + ef.phase_offset),
               "label": f"V = {ef.visibility:.4f}"}],
             xlabel="alpha + beta (rad)", ylabel="E")
    _svg(args, report, "fringes.svg", series, xlabel="beta (rad)", ylabel="rate (1/s)")


def cmd_chsh(args, report):
    from . import analysis

    report.parameters = {"visibility": args.visibility, "sigma": args.sigma}
    r = analysis.chsh_from_visibility(args.visibility, args.sigma)
    report.add("chsh_s", r.s, "1")
    report.add("chsh_n_sigma", r.n_sigma, "sigma")
    report.add("violates", bool(r.s > 2.0), "bool")


def cmd_tomo(args, report):
    from . import tomography as tomo

    report.add_input(args.counts)
    trials = 1000 if args.full else args.trials
    report.parameters = {"trials": trials, "seed": args.seed, "target": "phi_plus"}
    records = tomo.read_counts(args.counts)
    lin = tomo.linear_inversion(records)
    if not lin.physical:
        report.warnings.append(f"linear inversion is non-physical (min eigenvalue {lin.min_eigenvalue:.3g})")
    mle = tomo.mle_reconstruct(records)
    if not mle.converged:
        report.warnings.append("maximum-likelihood ascent hit the iteration cap")
    F = tomo.fidelity(mle.rho)
    target = np.outer(tomo.PHI_PLUS, tomo.PHI_PLUS.conj())
    report.add("fidelity", F, "1")
    report.add("purity", tomo.purity(mle.rho), "1")
    report.add("trace_distance_to_target", tomo.trace_distance(mle.rho, target), "1")
    report.add("log_likelihood", mle.log_likelihood, "1")
    report.add("iterations", mle.iterations, "count")
    report.add("linear_inversion_fidelity", float(np.vdot(tomo.PHI_PLUS, lin.rho @ tomo.PHI_PLUS).real), "1")
    mc_std = None
    if trials >= 2:
        mc = tomo.monte_carlo_uncertainty(records, trials, seed=args.seed, threads=args.threads)
        mc_std = mc.std
        report.add("mc_mean", mc.mean, "1")
        report.add("mc_std", mc.std, "1")
        report.add("mc_dropped", len(mc.dropped), "count")
        _csv(_out(args, "mc_fidelities.csv"), ["trial", "fidelity"],
             [list(range(len(mc.values))), mc.values], report)
    report.add("trials", trials, "count")
    rho_path = _out(args, "rho.json")
    tomo.write_density(rho_path, mle.rho, fidelity=F, purity=tomo.purity(mle.rho),
                       trace_distance_to_target=tomo.trace_distance(mle.rho, target),
                       mc_std=mc_std, trials=trials)
    report.outputs.append(str(rho_path))
    idx = [f"{r}{c}" for r in range(4) for c in range(4)]
    _csv(_out(args, "rho.csv"), ["entry", "re", "im"],
         [idx, list(mle.rho.real.ravel()), list(mle.rho.imag.ravel())], report)


def cmd_fit_resonance(args, report):
    from . import resonator

    report.parameters = {"traces": [str(p) for p in args.traces]}
    series = []
    for path in args.traces:
        report.add_input(path)
        nu, t = resonator.read_trace(path)
        fit = resonator.fit_resonance(nu, t)
        tag = Path(path).stem
        r = fit.resonance
        report.add(f"{tag}_center", r.center, "Hz")
        report.add(f"{tag}_linewidth", r.linewidth, "Hz")
        report.add(f"{tag}_linewidth_stderr", fit.stderr["linewidth"], "Hz")
        report.add(f"{tag}_t_min", r.t_min, "1")
        report.add(f"{tag}_q", fit.q, "1")
        report.add(f"{tag}_q_stderr", fit.q_stderr, "1")
        report.add(f"{tag}_residual_rms", fit.rms, "1")
        model = resonator.transmission(r, nu)
        _csv(_out(args, f"{tag}_fit.csv"), ["frequency_hz", "transmission", "model"], [nu, t, model], report)
        series.append({"x": (nu - r.center) / 1e9, "y": t, "style": "points", "label": tag})
        series.append({"x": (nu - r.center) / 1e9, "y": model})
    _svg(args, report, "resonances.svg", series, xlabel="detuning (GHz)", ylabel="transmission")


def cmd_fit_singles(args, report):
    from . import pairsource

    report.add_input(args.sweep)
    report.parameters = {"sweep": str(args.sweep), "power_mw": args.power}
    p, rate, sigma = pairsource.read_power_sweep(args.sweep)
    fit = pairsource.fit_singles(p, rate, sigma)
    m, e = fit.model, fit.stderr
    report.add("a", m.a, "1/(s mW^2)")
    report.add("a_stderr", e.a, "1/(s mW^2)")
    report.add("b", m.b, "1/(s mW)")
    report.add("b_stderr", e.b, "1/(s mW)")
    report.add("c", m.c, "1/s")
    report.add("c_stderr", e.c, "1/s")
    report.add("residual_rms", fit.residual_rms, "1/s")
    if fit.negative_dark:
        report.warnings.append("fitted dark-count term is negative")
    if args.power is not None:
        report.add("rate_at_power", pairsource.eval_singles(m, args.power), "1/s")
    grid = np.linspace(0.0, float(p.max()), 100)
    _csv(_out(args, "singles_fit.csv"), ["power_mw", "rate_model_per_s", "sfwm_per_s"],
         [grid, m(grid), m.sfwm_rate(grid)], report)
    _svg(args, report, "singles.svg",
         [{"x": p, "y": rate, "style": "points", "label": "measured"},
          {"x": grid, "y": m(grid), "label": "a P^2 + b P + c"}],
         xlabel="pump power (mW)", ylabel="singles (1/s)")


def cmd_brightness(args, report):
    from . import pairsource

    design = pairsource.MaterialWaveguide(args.n2, args.a_eff, args.wavelength)
    ref = pairsource.MaterialWaveguide(args.ref_n2 or args.n2, args.ref_a_eff or args.a_eff, args.wavelength)
    ref_radius = args.ref_radius or args.radius
    ref_linewidth = args.ref_linewidth or args.linewidth
    report.parameters = {"design": {"n2": args.n2, "a_eff": args.a_eff, "radius": args.radius,
                                    "linewidth": args.linewidth, "wavelength": args.wavelength},
                         "reference": {"n2": ref.n2, "a_eff": ref.a_eff, "radius": ref_radius,
                                       "linewidth": ref_linewidth}}
    fom = pairsource.brightness_figure_of_merit(design, args.radius, args.linewidth)
    fom_ref = pairsource.brightness_figure_of_merit(ref, ref_radius, ref_linewidth)
    ratio = fom / fom_ref
    report.add("gamma", pairsource.nonlinear_coefficient(design), "1/(W m)")
    report.add("figure_of_merit", fom, "relative")
    report.add("ratio_to_reference", ratio, "1")
    only_linewidth = (ref.n2 == design.n2 and ref.a_eff == design.a_eff and ref_radius == args.radius
                      and ref_linewidth != args.linewidth)
    if only_linewidth:
        report.add("linewidth_exponent", math.log(ratio) / math.log(args.linewidth / ref_linewidth), "1")


def cmd_fixtures(args, report):
    from . import fixtures

    report.parameters = {"seed": args.seed}
    for path in fixtures.generate_all(args.out, seed=args.seed):
        report.outputs.append(str(path))
    report.add("files", len(report.outputs), "count")


def cmd_roundtrip(args, report):
    from . import pipeline
    from .config import ExperimentConfig

    report.add_input(args.config)
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed).validate()
    report.parameters = {"config": cfg.to_json(), "phases": args.phases}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rt = pipeline.round_trip(cfg, phases=args.phases, threads=args.threads)
    report.warnings.extend(str(w.message) for w in caught)
    fits, exp = rt.run.fits(), rt.run.expected_fits()
    for p, f in fits.items():
        report.add(f"V_{p}", f.visibility, "1")
        report.add(f"V_{p}_sigma", f.sigma, "1")
        report.add(f"V_{p}_expected", exp[p].visibility, "1")
    raw, raw_exp = rt.run.raw_visibility(), rt.run.expected_raw_visibility()
    report.add("raw_visibility", raw.visibility, "1")
    report.add("raw_visibility_sigma", raw.sigma, "1")
    report.add("raw_visibility_expected", raw_exp.visibility, "1")
    report.add("deviation", (raw.visibility - raw_exp.visibility) / raw.sigma, "sigma")
    report.add("peak_centers", [p.center for p in rt.peaks], "s")
    from .analysis import write_fringe_scans
    path = _out(args, "roundtrip_scans.csv")
    write_fringe_scans(path, rt.run.scans)
    report.outputs.append(str(path))
    hpath = _out(args, "roundtrip_histogram.csv")
    rt.histogram.to_csv(hpath)
    report.outputs.append(str(hpath))
    _svg(args, report, "roundtrip_histogram.svg",
         [{"x": rt.histogram.centers * 1e9, "y": rt.histogram.counts, "label": "A1 x B1"}],
         xlabel="delay (ns)", ylabel="coincidences per bin")


# parser --------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=".", help="output directory (created if missing; default: .)")
    common.add_argument("--seed", type=int, default=None,
                        help="random seed; commands that draw random numbers use 0 when omitted")
    common.add_argument("--threads", type=int, default=1, help="maximum worker threads (default 1)")
    common.add_argument("--svg", action="store_true", help="also write SVG figures")
    common.add_argument("--quiet", action="store_true", help="do not print the result summary")

    parser = argparse.ArgumentParser(prog="qtb", description=__doc__.split("\n\n")[0],
                                     formatter_class=argparse.RawDescriptionHelpFormatter,
                                     epilog="exit codes: 0 success, 2 configuration error, 3 analysis error")
    parser.add_argument("--version", action="version", version=f"qtb {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, func, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        p.set_defaults(func=func)
        return p

    p = add("simulate", cmd_simulate, "simulate a time-tag stream from an experiment config")
    p.add_argument("--config", required=True, help="ExperimentConfig JSON file")
    p.add_argument("--duration", type=_time_arg, default=None, help="override duration (e.g. 10s, 500ms)")
    p.add_argument("--stream-name", default="stream.ttag", help="output stream file name (default stream.ttag)")

    def stream_args(p, a="A1", b="B1"):
        p.add_argument("--stream", required=True, help="TTAG or TSV time-tag file")
        p.add_argument("--a", default=a, help=f"first channel name (default {a})")
        p.add_argument("--b", default=b, help=f"second channel name (default {b})")

    p = add("hist", cmd_hist, "delay histogram of t_a - t_b, optional double-exponential fit")
    stream_args(p)
    p.add_argument("--bin-width", type=_time_arg, default=_time_arg("10ps"), help="bin width (default 10ps)")
    p.add_argument("--max-delay", type=_time_arg, default=_time_arg("3ns"), help="histogram half range (default 3ns)")
    p.add_argument("--fit", action="store_true", help="fit A exp(-|t-t0|/tau) + B and report tau and bandwidth")
    p.add_argument("--peak-separation", type=_time_arg, default=_time_arg("600ps"),
                   help="minimum distance between reported peaks (default 600ps)")
    p.add_argument("--min-prominence", type=float, default=20.0, help="minimum peak prominence in counts")

    p = add("coinc", cmd_coinc, "two-fold coincidences, shifted-window accidentals and CAR")
    stream_args(p, "SIG", "IDL")
    p.add_argument("--window", type=_time_arg, default=_time_arg("1ns"), help="coincidence window (default 1ns)")
    p.add_argument("--offset", type=_time_arg, default=0.0, help="expected t_b - t_a (default 0)")
    p.add_argument("--period", type=_time_arg, default=None,
                   help="pump period; enables the accidental estimate one period away")

    p = add("triple", cmd_triple, "clock-gated three-fold coincidences")
    stream_args(p)
    p.add_argument("--clock", default="CLOCK", help="clock channel name (default CLOCK)")
    p.add_argument("--gate-a", type=_gate_arg, required=True, help="gate 'offset,width' after the clock, e.g. 2.6ns,1ns")
    p.add_argument("--gate-b", type=_gate_arg, required=True, help="gate for channel b, same syntax")
    p.add_argument("--period", type=_time_arg, default=None, help="pump period for gate sanity checks")

    p = add("fringe", cmd_fringe, "fit fringe scans: per-port V, weighted raw V, E(alpha+beta), CHSH")
    p.add_argument("--scans", nargs="+", required=True,
                   help="CSV phase_rad,count,dwell_s (one file with a port column or one file per port pair)")
    p.add_argument("--alpha", type=float, default=0.0, help="fixed phase of the signal interferometer (rad)")

    p = add("chsh", cmd_chsh, "CHSH value and violation significance from a visibility")
    p.add_argument("--visibility", type=float, required=True, help="raw visibility V")
    p.add_argument("--sigma", type=float, required=True, help="1-sigma uncertainty of V")

    p = add("tomo", cmd_tomo, "two-qubit tomography: MLE density matrix, fidelity, Monte Carlo spread")
    p.add_argument("--counts", required=True, help="counts JSON {setting: {count, dwell_s}}")
    p.add_argument("--trials", type=int, default=100, help="Monte Carlo trials (default 100; 0 disables)")
    p.add_argument("--full", action="store_true", help="run 1000 Monte Carlo trials")

    p = add("fit-resonance", cmd_fit_resonance, "Lorentzian fit of transmission traces: linewidth and Q")
    p.add_argument("--traces", nargs="+", required=True, help="CSV traces (frequency_hz or wavelength_nm)")

    p = add("fit-singles", cmd_fit_singles, "fit singles R(P) = a P^2 + b P + c to a power sweep")
    p.add_argument("--sweep", required=True, help="CSV power_mw,counts,dwell_s")
    p.add_argument("--power", type=float, default=None, help="evaluate the fitted model at this power (mW)")

    p = add("brightness", cmd_brightness, "relative pair-rate figure of merit n2^2/(A_eff^2 R^2 dnu^3)")
    p.add_argument("--n2", type=float, default=8e-19, help="Kerr index n2 in m^2/W (default 8e-19)")
    p.add_argument("--a-eff", type=float, default=0.39e-12, help="effective area in m^2 (default 0.39e-12)")
    p.add_argument("--radius", type=float, default=17e-6, help="ring radius in m (default 17e-6)")
    p.add_argument("--linewidth", type=float, default=1.0e9, help="loaded linewidth in Hz (default 1e9)")
    p.add_argument("--wavelength", type=float, default=1.5557e-6, help="pump wavelength in m (default 1.5557e-6)")
    p.add_argument("--ref-n2", type=float, default=None, help="reference design n2 (default: same as design)")
    p.add_argument("--ref-a-eff", type=float, default=None, help="reference design A_eff")
    p.add_argument("--ref-radius", type=float, default=None, help="reference design radius")
    p.add_argument("--ref-linewidth", type=float, default=None, help="reference design linewidth")

    add("fixtures", cmd_fixtures, "regenerate the synthetic fixture files into --out")

    p = add("roundtrip", cmd_roundtrip, "simulate a fringe scan and analyse it end to end")
    p.add_argument("--config", required=True, help="ExperimentConfig JSON with both interferometers")
    p.add_argument("--phases", type=int, default=12, help="number of idler phase settings (default 12)")
    return parser


def _module_of(exc):
    """Innermost qtb module in the traceback (for error messages)."""
    name = None
    for frame, _ in traceback.walk_tb(exc.__traceback__):
        mod = frame.f_globals.get("__name__", "")
        if mod.startswith("qtb.") and mod not in ("qtb.cli", "qtb.errors"):
            name = mod.split(".", 1)[1].lstrip("_")
    return name or "cli"


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is None and args.command not in ("simulate", "roundtrip"):
        # simulate/roundtrip fall back to the seed stored in the config
        args.seed = 0
    Path(args.out).mkdir(parents=True, exist_ok=True)
    report = RunReport(args.command)
    t0 = time.perf_counter()
    try:
        args.func(args, report)
    except ConfigError as exc:
        print(f"qtb {args.command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QtbError, ValueError, OSError, KeyError) as exc:
        print(f"qtb {args.command}: analysis error in {_module_of(exc)}: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    report.add("runtime", time.perf_counter() - t0, "s")
    path = report.write(args.out)
    if not args.quiet:
        print(report.summary())
        print(f"report: {path}")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
