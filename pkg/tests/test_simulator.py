import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from qtb import coincidence, pairsource, pipeline, simulator
from qtb.analysis import PORT_INDEX, PORT_PAIRS, parity
from qtb.config import (DetectorConfig, ExperimentConfig, PumpConfig, SourceConfig, TimeBinState,
                        UMZIConfig)
from qtb.errors import ConfigError, DomainError
from qtb.fixtures import correlation_config, experiment_config

IDEAL_DET = DetectorConfig(efficiency=1.0, dark_rate=0.0, jitter_sigma=0.0, dead_time=0.0)

finite = dict(allow_nan=False, allow_infinity=False)


@given(st.floats(0, 1, **finite), st.floats(0, 2 * math.pi, **finite), st.floats(0, 2 * math.pi, **finite),
       st.floats(0.01, 0.99, **finite), st.floats(0.01, 1.0, **finite), st.floats(0, 2 * math.pi, **finite))
@settings(max_examples=300, deadline=None)
def test_umzi_conserves_probability(theta, chi, phase, r, trans, g):
    a_e = math.cos(theta * math.pi / 2) * np.exp(1j * g)
    a_l = math.sin(theta * math.pi / 2) * np.exp(1j * chi)
    out = simulator.apply_umzi(a_e, a_l, UMZIConfig(1.25e-9, phase, trans, r))
    assert np.sum(np.abs(out) ** 2) == pytest.approx(trans, abs=1e-12)


def test_umzi_single_early_photon():
    for phase in (0.0, 0.7, 3.0):
        p = np.abs(simulator.apply_umzi(1.0, 0.0, UMZIConfig(phase=phase))) ** 2
        assert np.allclose(p, [[0.25, 0.25, 0.0], [0.25, 0.25, 0.0]], atol=1e-15)


def test_umzi_rejects_supernormalised_input():
    with pytest.raises(DomainError):
        simulator.apply_umzi(1.0, 0.5, UMZIConfig())


@given(st.floats(0, 2 * math.pi, **finite), st.floats(0, 2 * math.pi, **finite))
@settings(max_examples=100, deadline=None)
def test_phi_plus_middle_middle_probabilities(alpha, beta):
    state = TimeBinState.phi_plus()
    for p in PORT_PAIRS:
        i, j = PORT_INDEX[p]
        got = simulator.central_peak_probability(state, UMZIConfig(phase=alpha), UMZIConfig(phase=beta), i, j)
        assert got == pytest.approx((1 + parity(p) * math.cos(alpha + beta)) / 16, abs=1e-12)


@given(st.lists(st.floats(-1, 1, **finite), min_size=8, max_size=8),
       st.floats(0, 2 * math.pi, **finite), st.floats(0, 2 * math.pi, **finite))
@settings(max_examples=100, deadline=None)
def test_postselected_fraction_is_one_quarter(v, alpha, beta):
    psi = np.array(v[0::2]) + 1j * np.array(v[1::2])
    if np.linalg.norm(psi) < 1e-3:
        return
    state = TimeBinState.pure(psi / np.linalg.norm(psi))
    P = simulator.joint_outcome_probabilities(state, UMZIConfig(phase=alpha), UMZIConfig(phase=beta))
    assert P.sum() == pytest.approx(1.0, abs=1e-12)
    assert P[:, 1, :, 1].sum() == pytest.approx(0.25, abs=1e-12)


def _short(cfg, duration=0.05, **kw):
    return cfg.replace(duration=duration, **kw).validate()


def test_clock_only_stream():
    cfg = ExperimentConfig(pump=PumpConfig(mean_pairs=0.0), umzi_signal=UMZIConfig(), umzi_idler=UMZIConfig(),
                           detectors={"default": DetectorConfig(dark_rate=0.0)}, duration=1e-3, clock="all")
    s = simulator.simulate_experiment(cfg)
    assert len(s) == s.counts()["CLOCK"] == math.floor(1e-3 * 160e6)


def test_zero_duration_gives_empty_stream():
    s = simulator.simulate_experiment(experiment_config(duration=0.0))
    assert len(s) == 0


def test_ideal_odd_parity_has_no_central_coincidences():
    cfg = ExperimentConfig(pump=PumpConfig(mean_pairs=0.01, pulse_smear=False), umzi_signal=UMZIConfig(),
                           umzi_idler=UMZIConfig(), detectors={"default": IDEAL_DET}, duration=0.02,
                           seed=3, clock="all")
    s = simulator.simulate_experiment(cfg)
    gates = pipeline.default_gates(cfg)
    counts = pipeline.triple_counts(s, gates)
    expected = pipeline.expected_triple_counts(cfg, gates)
    assert counts["A1B1"] > 1000 and counts["A2B2"] > 1000
    # odd-parity events come only from multi-pair emission, a fraction of order mu
    odd, odd_exp = counts["A1B2"] + counts["A2B1"], expected["A1B2"] + expected["A2B1"]
    assert odd_exp < 0.01 * (expected["A1B1"] + expected["A2B2"])
    assert abs(odd - odd_exp) < 4 * odd_exp ** 0.5 + 1


def test_determinism_and_thread_independence():
    cfg = _short(experiment_config(), 0.02, segment_periods=1 << 18)
    a = simulator.simulate_experiment(cfg)
    b = simulator.simulate_experiment(cfg)
    c = simulator.simulate_experiment(cfg, threads=4)
    assert a.digest() == b.digest() == c.digest()
    assert simulator.simulate_experiment(cfg.replace(seed=43)).digest() != a.digest()


def test_segment_boundaries_do_not_change_statistics():
    cfg = _short(experiment_config(), 0.02)
    n1 = len(simulator.simulate_experiment(cfg.replace(segment_periods=1 << 16)))
    n2 = len(simulator.simulate_experiment(cfg.replace(segment_periods=1 << 24)))
    assert abs(n1 - n2) < 5 * math.sqrt(n1)


def test_delay_mismatch_is_a_config_error():
    with pytest.raises(ConfigError) as ei:
        ExperimentConfig(umzi_signal=UMZIConfig(delay=1.3e-9), umzi_idler=UMZIConfig()).validate()
    assert ei.value.path == "umzi_signal.delay_s"


def test_heavy_dead_time_loss_is_flagged():
    cfg = _short(experiment_config(), 0.002, pump=PumpConfig(mean_pairs=3.0))
    with pytest.warns(RuntimeWarning, match="dead time"):
        s = simulator.simulate_experiment(cfg)
    assert s.meta["dead_time_fraction"] > 0.1
    assert s.meta["warnings"]


def test_tag_counts_match_poisson_expectation():
    cfg = experiment_config(duration=1.0)
    s = simulator.simulate_experiment(cfg)
    expected = sum(simulator.expected_singles_rate(cfg, ch) for ch in cfg.photon_channels) * cfg.duration
    observed = s.meta["detections_before_dead_time"]
    assert abs(observed - expected) < 5 * math.sqrt(expected)
    per_pair = 2 * 0.9 * s.meta["pairs_emitted"]
    assert abs(observed - per_pair - 4 * 30.0) < 5 * math.sqrt(per_pair)


def test_triple_counts_agree_with_analytic_rate():
    cfg = experiment_config(duration=0.5, seed=11)
    gates = pipeline.default_gates(cfg)
    chi2 = 0.0
    for k, beta in enumerate(np.linspace(0, 2 * math.pi, 4, endpoint=False)):
        c = cfg.replace(umzi_idler=UMZIConfig(phase=beta), seed=100 + k)
        obs = pipeline.triple_counts(simulator.simulate_experiment(c), gates)
        exp = pipeline.expected_triple_counts(c, gates)
        chi2 += sum((obs[p] - exp[p]) ** 2 / exp[p] for p in PORT_PAIRS)
    assert stats.chi2.sf(chi2, 16) > 1e-3


@pytest.mark.filterwarnings("ignore::qtb.errors.UnphysicalWarning")
def test_noise_free_fringe_visibility_near_one():
    # multi-pair emission caps V near 1 - mu, so keep mu small
    cfg = ExperimentConfig(pump=PumpConfig(mean_pairs=2e-3, pulse_smear=False), umzi_signal=UMZIConfig(),
                           umzi_idler=UMZIConfig(), detectors={"default": IDEAL_DET}, duration=0.3,
                           seed=5, clock="conditional")
    run = pipeline.run_fringe_scan(cfg, np.linspace(0, 2 * math.pi, 6, endpoint=False))
    for p, f in run.fits().items():
        assert f.visibility > 0.99, p
    off = {p: f.phase_offset for p, f in run.fits().items()}
    d = (off["A1B2"] - off["A1B1"]) % (2 * math.pi)
    assert d == pytest.approx(math.pi, abs=0.05)


def test_correlation_run_pairs_and_coherence_time():
    ideal = ExperimentConfig(pump=PumpConfig(mean_pairs=1e-3), detectors={"default": IDEAL_DET},
                             duration=0.01, seed=1, clock="conditional")
    s = simulator.simulate_correlation_run(ideal)
    sig, idl = s.channel("SIG"), s.channel("IDL")
    assert len(sig) == len(idl) > 0
    tau_ps = 10 * 152
    j = np.searchsorted(idl, sig - tau_ps)
    assert np.all(np.abs(idl[np.minimum(j, len(idl) - 1)] - sig) <= tau_ps)

    cfg = correlation_config(duration=2.0)
    s = simulator.simulate_correlation_run(cfg)
    h = coincidence.delay_histogram(s.channel("SIG"), s.channel("IDL"), 10e-12, 1e-9)
    fit = pairsource.fit_double_exponential(h)
    assert fit.tau == pytest.approx(152e-12, rel=0.10)


def test_dark_only_histogram_is_flat():
    cfg = ExperimentConfig(pump=PumpConfig(mean_pairs=0.0),
                           detectors={"default": DetectorConfig(dark_rate=2e5, dead_time=0.0)},
                           duration=1.0, seed=9, clock="conditional")
    s = simulator.simulate_correlation_run(cfg)
    h = coincidence.delay_histogram(s.channel("SIG"), s.channel("IDL"), 1e-9, 50e-9)
    y = h.counts[1:-1]   # edge bins cover a partial range
    chi2 = ((y - y.mean()) ** 2 / y.mean()).sum()
    assert stats.chi2.sf(chi2, len(y) - 1) > 0.01


def test_config_json_round_trip(tmp_path):
    cfg = experiment_config()
    p = tmp_path / "c.json"
    cfg.save(p)
    again = ExperimentConfig.load(p)
    assert again.to_json() == cfg.to_json()
    mixed = {"state": {"density_re": (np.eye(4) / 4).tolist(), "density_im": np.zeros((4, 4)).tolist()}}
    assert ExperimentConfig.from_json(mixed).state.density[0, 0] == 0.25


@pytest.mark.parametrize("doc,path", [
    ({"pump": {"repetition_rate_hz": "fast"}}, "pump.repetition_rate_hz"),
    ({"detectors": {"A1": {"efficiency": 2}}}, "detectors.A1.efficiency"),
    ({"state": [1, 0, 0]}, "state"),
    ({"clock": "sometimes"}, "clock"),
    ({"bogus": 1}, "$"),
])
def test_config_errors_carry_field_path(doc, path):
    with pytest.raises(ConfigError) as ei:
        ExperimentConfig.from_json(doc)
    assert ei.value.path == path


def test_source_and_state_validation():
    with pytest.raises(ConfigError):
        SourceConfig(coherence_time=-1).validate()
    with pytest.raises(ConfigError):
        TimeBinState.pure([1, 1, 0, 0])
    assert TimeBinState.dephased_phi_plus(0.9).density[0, 3] == pytest.approx(0.45)
