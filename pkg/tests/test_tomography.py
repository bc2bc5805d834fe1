import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtb import tomography as tm
from qtb.errors import DegenerateDataError, DomainError, FitError, NoDataError, UnphysicalWarning
from qtb.fixtures import reference_rho


def random_rho(rng, rank=4):
    g = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
    a = g @ g.conj().T
    return a / np.trace(a).real


def assert_physical(rho):
    assert np.max(np.abs(rho - rho.conj().T)) < 1e-12
    assert abs(np.trace(rho).real - 1) < 1e-12
    assert np.linalg.eigvalsh(rho).min() > -1e-12


def test_settings_and_labels():
    assert len(tm.SETTINGS) == 16 and len(set(tm.SETTINGS)) == 16
    for s in tm.SETTINGS:
        assert tm.parse_setting(tm.setting_label(s)) == s
    assert tm.parse_setting("+i+i") == ("+i", "+i")
    assert tm.parse_setting("e+i") == ("e", "+i")
    with pytest.raises(DomainError):
        tm.parse_setting("xy")


def test_projector_probabilities_for_phi_plus():
    rho = np.outer(tm.PHI_PLUS, tm.PHI_PLUS.conj())
    assert tm.predicted_probability(rho, ("e", "e")) == pytest.approx(0.5)
    assert tm.predicted_probability(rho, ("e", "l")) == pytest.approx(0.0, abs=1e-15)
    assert tm.predicted_probability(rho, ("+", "+")) == pytest.approx(0.5)
    # phi+ is anti-correlated in the circular basis pair (+i, +i)
    assert tm.predicted_probability(rho, ("+i", "+i")) == pytest.approx(0.0, abs=1e-15)


def test_reference_matrix_fidelity():
    rho = tm.renormalize(reference_rho())
    with pytest.warns(UnphysicalWarning):
        f = tm.fidelity(rho)
    assert f == pytest.approx(0.9415, abs=0.002)
    with pytest.raises(DomainError):
        tm.fidelity(reference_rho() * 1.1)
    with pytest.raises(DomainError):
        tm.fidelity(np.eye(4) / 4, target=[1, 1, 0, 0])


def test_fidelity_is_linear_in_rho(rng):
    a, b = random_rho(rng), random_rho(rng)
    for lam in (0.0, 0.3, 1.0):
        mix = lam * a + (1 - lam) * b
        assert tm.fidelity(mix) == pytest.approx(lam * tm.fidelity(a) + (1 - lam) * tm.fidelity(b), abs=1e-14)


def test_state_utilities(rng):
    rho = random_rho(rng)
    assert tm.trace_distance(rho, rho) == pytest.approx(0, abs=1e-14)
    assert tm.purity(np.eye(4) / 4) == pytest.approx(0.25)
    bad = np.diag([0.6, 0.5, 0.0, -0.1]).astype(complex)
    p = tm.psd_project(bad)
    assert_physical(p)
    assert tm.check_physical(bad, strict=False) == ["negative eigenvalue"]
    with pytest.raises(DegenerateDataError):
        tm.psd_project(-np.eye(4))


def test_noiseless_linear_inversion_is_exact(rng):
    for _ in range(5):
        rho = random_rho(rng)
        p = np.einsum("kab,ba->k", tm._PROJECTORS, rho).real
        records = [tm.MeasurementRecord(s, int(round(c))) for s, c in zip(tm.SETTINGS, p * 4e12)]
        assert tm.trace_distance(tm.linear_inversion(records).rho, rho) < 1e-9


def test_likelihood_gradient_matches_finite_differences(rng):
    recs = tm.simulate_counts(random_rho(rng), 1000, seed=1)
    counts, dwell = tm._ordered(recs)
    like = tm._Likelihood(counts, dwell)
    x = tm._params_from_rho(random_rho(rng))
    g = like.gradient(x)
    h = 1e-6
    num = np.array([(like.value(x + h * e) - like.value(x - h * e)) / (2 * h) for e in np.eye(16)])
    assert np.allclose(g, num, rtol=1e-5, atol=1e-5 * np.abs(num).max())


def test_parametrisation_round_trip(rng):
    rho = random_rho(rng)
    back = tm._rho_from_params(tm._params_from_rho(rho, floor=0.0))
    assert np.allclose(back, rho, atol=1e-12)


@given(st.lists(st.integers(0, 500), min_size=16, max_size=16))
@settings(max_examples=40, deadline=None)
def test_mle_output_is_always_physical(counts):
    if sum(counts[tm.SETTINGS.index(s)] for s in tm.COMPUTATIONAL) == 0:
        return
    recs = [tm.MeasurementRecord(s, c) for s, c in zip(tm.SETTINGS, counts)]
    res = tm.mle_reconstruct(recs)
    assert_physical(res.rho)
    assert all(b >= a for a, b in zip(res.history, res.history[1:]))


def test_mle_round_trip_on_random_states():
    rng = np.random.default_rng(99)
    for k in range(10):
        rho = random_rho(rng, rank=int(rng.integers(1, 5)))
        res = tm.mle_reconstruct(tm.simulate_counts(rho, 10**6, seed=k))
        assert res.converged
        assert tm.trace_distance(res.rho, rho) < 0.01


def test_mle_on_noiseless_phi_plus():
    rho = np.outer(tm.PHI_PLUS, tm.PHI_PLUS.conj())
    res = tm.mle_reconstruct(tm.expected_records(rho, 10**6))
    assert tm.fidelity(res.rho) > 0.999


def test_monte_carlo_is_seeded_and_thread_independent():
    recs = tm.simulate_counts(tm.psd_project(reference_rho()), 10**4, seed=3)
    a = tm.monte_carlo_uncertainty(recs, 8, seed=5)
    b = tm.monte_carlo_uncertainty(recs, 8, seed=5, threads=4)
    assert np.array_equal(a.values, b.values)
    assert not a.dropped
    with pytest.raises(DomainError):
        tm.monte_carlo_uncertainty(recs, 1)


def test_monte_carlo_reports_failed_trials():
    recs = tm.simulate_counts(tm.psd_project(reference_rho()), 10**4, seed=3)
    with pytest.raises(FitError):
        tm.monte_carlo_uncertainty(recs, 4, max_iter=1)


def test_monte_carlo_std_scales_as_inverse_root_n():
    rho = tm.psd_project(reference_rho())
    ns = np.array([1e3, 1e4, 1e5])
    stds = [tm.monte_carlo_uncertainty(tm.simulate_counts(rho, int(n), seed=7), 40, seed=1).std for n in ns]
    slope = np.polyfit(np.log(ns), np.log(stds), 1)[0]
    assert slope == pytest.approx(-0.5, abs=0.1)


def test_record_validation_and_io(tmp_path):
    with pytest.raises(DomainError):
        tm.MeasurementRecord(("e", "e"), -1)
    with pytest.raises(DomainError):
        tm.MeasurementRecord(("e", "e"), 1, dwell=0)
    recs = tm.simulate_counts(np.eye(4) / 4, 100, seed=2, dwell=2.0)
    with pytest.raises(DomainError, match="missing"):
        tm.linear_inversion(recs[:-1])
    with pytest.raises(DomainError, match="duplicate"):
        tm.linear_inversion(recs + recs[:1])
    with pytest.raises(NoDataError):
        tm.mle_reconstruct([tm.MeasurementRecord(s, 0) for s in tm.SETTINGS])
    p = tmp_path / "c.json"
    tm.write_counts(p, recs)
    assert tm.read_counts(p) == recs
    p.write_text("{not json")
    with pytest.raises(DomainError):
        tm.read_counts(p)
    d = tmp_path / "rho.json"
    rho = random_rho(np.random.default_rng(0))
    tm.write_density(d, rho, fidelity=0.5)
    assert np.allclose(tm.read_density(d), rho, atol=1e-15)


def test_unequal_dwell_is_normalised():
    rho = tm.psd_project(reference_rho())
    base = tm.expected_records(rho, 10**5)
    longer = [tm.MeasurementRecord(r.setting, r.count * 3, 3.0) if k % 2 else r for k, r in enumerate(base)]
    assert np.allclose(tm.measured_probabilities(base), tm.measured_probabilities(longer))
