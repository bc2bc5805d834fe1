"""Synthetic data sets shipped in ``qtb/data`` and the code that makes them.

Every generator is deterministic in its seed.  ``generate_all(outdir)``
rewrites the whole set; the shipped copies were produced with seed 42.

Reference numbers used here:

* resonance linewidths 1.19, 1.00 and 1.73 GHz at ITU C37, C27 and C17,
  with an extinction floor of 0.1 (a placeholder depth);
* singles coefficients a = 1.29e6 /s/mW^2, b = 1.15e5 /s/mW, c = 30 /s for
  the idler arm and a = 1.19e6 for the signal arm (its linear term is not
  known and 1.0e5 is used);
* port-pair fringe visibilities 0.9463, 0.9578, 0.9699, 0.9577;
* a four-decimal two-qubit density matrix whose trace is 0.9986 before
  renormalisation (``REFERENCE_RHO``).
"""
from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

from . import resonator, tomography
from .analysis import PORT_PAIRS, FringeScan, parity, write_fringe_scans
from .config import DetectorConfig, ExperimentConfig, PumpConfig, UMZIConfig
from .pairsource import SinglesModel
from .quantities import itu_c_channel_center

REFERENCE_RHO = np.array([
    [0.5300, -0.0215 + 0.0355j, -0.0089 + 0.0296j, 0.4530 - 0.0292j],
    [-0.0215 - 0.0355j, 0.0124, 0.0078 + 0.0056j, -0.0038 - 0.0126j],
    [-0.0089 - 0.0296j, 0.0078 - 0.0056j, 0.0092, 0.0116 - 0.0260j],
    [0.4530 + 0.0292j, -0.0038 + 0.0126j, 0.0116 + 0.0260j, 0.4470],
])

RESONANCES = {"C37": 1.19e9, "C27": 1.00e9, "C17": 1.73e9}
RESONANCE_T_MIN = 0.1

IDLER_SINGLES = SinglesModel(1.29e6, 1.15e5, 30.0)
SIGNAL_SINGLES = SinglesModel(1.19e6, 1.0e5, 30.0)

PORT_VISIBILITIES = {"A1B1": 0.9463, "A1B2": 0.9578, "A2B1": 0.9699, "A2B2": 0.9577}

SEED = 42


def data_path(name):
    """Filesystem path of a shipped data file."""
    return Path(resources.files("qtb") / "data" / name)


def reference_rho():
    """``REFERENCE_RHO`` divided by its trace."""
    return tomography.renormalize(REFERENCE_RHO)


# experiment configurations ----------------------------------------------

def experiment_config(seed=SEED, duration=10.0):
    """|phi+> through two interferometers: mu 0.05, eta 0.9, 30 Hz darks, 30 ps jitter."""
    return ExperimentConfig(
        pump=PumpConfig(mean_pairs=0.05),
        umzi_signal=UMZIConfig(),
        umzi_idler=UMZIConfig(),
        detectors={"default": DetectorConfig(efficiency=0.9, dark_rate=30.0, jitter_sigma=30e-12)},
        duration=duration, seed=seed, clock="conditional",
    ).validate()


def correlation_config(seed=SEED, duration=10.0):
    """Signal/idler run at a low pair rate with a 10% end-to-end efficiency.

    mu = 1e-3 per pump period puts the coincidence-to-accidental ratio in
    the 10^3 range.
    """
    return ExperimentConfig(
        pump=PumpConfig(mean_pairs=1e-3),
        detectors={"default": DetectorConfig(efficiency=0.1, dark_rate=30.0, jitter_sigma=30e-12)},
        duration=duration, seed=seed, clock="conditional",
    ).validate()


# resonances ----------------------------------------------------------------

def resonance_trace(channel, seed=SEED, points=41, span=10e9, noise=0.003):
    n = int(channel.lstrip("C"))
    res = resonator.Resonance(itu_c_channel_center(n), RESONANCES[channel], RESONANCE_T_MIN)
    nu = res.center + np.linspace(-span / 2, span / 2, points)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(n,)))
    t = resonator.transmission(res, nu) + rng.normal(0.0, noise, points)
    return nu, t


# singles -------------------------------------------------------------------

def power_sweep(model, seed=SEED, powers=None, dwell=1.0):
    powers = np.round(np.arange(0.1, 1.41, 0.1), 3) if powers is None else np.asarray(powers, float)
    rng = np.random.default_rng(seed)
    counts = rng.poisson(model(powers) * dwell)
    return powers, counts, np.full(powers.shape, float(dwell))


def write_power_sweep(path, powers, counts, dwell, comment=None):
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write("power_mw,counts,dwell_s\n")
        for p, n, d in zip(powers, counts, dwell):
            fh.write(f"{p:.4f},{int(n)},{d:.6g}\n")


# fringes -------------------------------------------------------------------

def fringe_scans(seed=SEED, phases=12, mean_counts=3000.0, dwell=10.0, alpha=0.0):
    """Poisson fringe scans N = K (1 + s V cos(alpha + beta)) per port pair."""
    betas = np.linspace(0.0, 2 * math.pi, phases, endpoint=False)
    rng = np.random.default_rng(seed)
    out = {}
    for p in PORT_PAIRS:
        mean = mean_counts * (1 + parity(p) * PORT_VISIBILITIES[p] * np.cos(alpha + betas))
        out[p] = FringeScan(p, betas, rng.poisson(mean), dwell, alpha)
    return out


# tomography ----------------------------------------------------------------

def tomography_counts(per_setting, seed=SEED):
    return tomography.simulate_counts(reference_rho(), per_setting, seed=seed)


# everything ----------------------------------------------------------------

def generate_all(outdir, seed=SEED):
    """Write every fixture file into ``outdir``; returns the written paths."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def put(name):
        written.append(out / name)
        return out / name

    experiment_config(seed).save(put("experiment.json"))
    correlation_config(seed).save(put("correlation.json"))
    for ch, lw in RESONANCES.items():
        nu, t = resonance_trace(ch, seed)
        resonator.write_trace(put(f"resonance_{ch}.csv"), nu, t,
                              comment=f"ITU {ch}, linewidth {lw / 1e9:.2f} GHz, T_min {RESONANCE_T_MIN}")
    for arm, model in (("idler", IDLER_SINGLES), ("signal", SIGNAL_SINGLES)):
        sweep = power_sweep(model, seed + (arm == "signal"))
        write_power_sweep(put(f"singles_{arm}.csv"), *sweep,
                          comment=f"{arm} singles a={model.a:g} b={model.b:g} c={model.c:g}")
    write_fringe_scans(put("fringes.csv"), fringe_scans(seed))
    for per, name in ((1_000_000, "tomography_1e6.json"), (10_000, "tomography_1e4.json")):
        tomography.write_counts(put(name), tomography_counts(per, seed))
    (out / "reference_rho.json").write_text(json.dumps({"rho": tomography.density_to_json(REFERENCE_RHO)},
                                                       indent=2) + "\n")
    written.append(out / "reference_rho.json")
    return written
