import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtb import analysis as an
from qtb.errors import DegenerateDataError, DomainError, NoDataError, UnphysicalWarning


def _scan(port, V, phases, A=1000.0, dwell=1.0, alpha=0.0):
    rate = A * (1 + an.parity(port) * V * np.cos(alpha + phases))
    return an.FringeScan(port, phases, rate * dwell, dwell, alpha)


@given(st.floats(0.0, 0.99), st.floats(0, 2 * math.pi), st.sampled_from(an.PORT_PAIRS))
@settings(max_examples=100, deadline=None)
def test_noiseless_fringe_fit(V, alpha, port):
    phases = np.linspace(0, 2 * math.pi, 12, endpoint=False)
    r = an.fit_fringe(_scan(port, V, phases, alpha=alpha))
    assert r.visibility == pytest.approx(V, abs=1e-9)
    if V > 0.05:
        expected = 0.0 if an.parity(port) > 0 else math.pi
        d = (r.phase_offset - expected + math.pi) % (2 * math.pi) - math.pi
        assert abs(d) < 1e-6


def test_fringe_errors_are_calibrated():
    rng = np.random.default_rng(8)
    phases = np.linspace(0, 2 * math.pi, 12, endpoint=False)
    pulls = []
    for _ in range(400):
        s = _scan("A1B1", 0.95, phases, A=3000.0)
        r = an.fit_fringe(an.FringeScan("A1B1", phases, rng.poisson(s.counts), 1.0))
        pulls.append((r.visibility - 0.95) / r.sigma)
    assert abs(np.mean(pulls)) < 0.2 and 0.85 < np.std(pulls) < 1.15


def test_fringe_input_checks():
    with pytest.raises(DegenerateDataError):
        an.fit_fringe(an.FringeScan("A1B1", [0, 0, 2 * math.pi], [1, 2, 3], 1.0))
    with pytest.raises(DomainError):
        an.FringeScan("A3B1", [0, 1, 2], [1, 2, 3], 1.0)
    with pytest.raises(DomainError):
        an.FringeScan("A1B1", [0, 1, 2], [1, -2, 3], 1.0)
    with pytest.warns(UnphysicalWarning):
        r = an.fit_fringe(an.FringeScan("A1B1", [0, 2, 4], [100, 0, 0], 1.0))
    assert r.unphysical


def test_correlation_coefficient_identity():
    phases = np.linspace(0, 2 * math.pi, 8, endpoint=False)
    scans = {p: _scan(p, 0.9, phases, dwell=1.0 + k) for k, p in enumerate(an.PORT_PAIRS)}
    x, E, sE = an.correlation_from_scans(scans)
    assert np.allclose(E, 0.9 * np.cos(x), atol=1e-12)
    fit = an.fit_correlation(x, E)
    assert fit.visibility == pytest.approx(0.9, abs=1e-9)
    with pytest.raises(NoDataError):
        an.correlation_coefficient(0, 0, 0, 0)
    assert an.correlation_coefficient_error(50, 0, 0, 50) == 0.0


def test_chsh_threshold_and_limits():
    r = an.chsh_from_visibility(an.CHSH_THRESHOLD, 0.01)
    assert r.s == pytest.approx(2.0, abs=1e-15) and r.n_sigma == pytest.approx(0.0, abs=1e-12)
    assert an.chsh_from_visibility(1.0, 0.01).s == pytest.approx(2 * math.sqrt(2))
    for v, s in ((0.9, 0.0), (1.2, 0.01), (-0.1, 0.01)):
        with pytest.raises(DomainError):
            an.chsh_from_visibility(v, s)


def test_raw_visibility_weighting():
    R = an.VisibilityResult
    rv = an.raw_visibility([R(0.9, 0.01, 0, 0, 1), R(1.0, 0.02, 0, 0, 1)])
    assert rv.weighted and rv.visibility == pytest.approx((0.9 * 4 + 1.0) / 5)
    assert rv.sigma == pytest.approx(1 / math.sqrt(1e4 + 2500))
    rv = an.raw_visibility([R(0.9, 0.0, 0, 0, 1), R(1.0, 0.0, 0, 0, 1)])
    assert not rv.weighted and rv.visibility == pytest.approx(0.95)
    with pytest.raises(NoDataError):
        an.raw_visibility([])


def test_accidental_subtraction_clips():
    s = an.FringeScan("A1B1", [0, 1, 2], [10, 5, 0], 1.0)
    assert an.subtract_accidentals(s, 6).counts.tolist() == [4, 0, 0]


def test_fringe_csv_round_trip(tmp_path):
    phases = np.linspace(0, 2 * math.pi, 6, endpoint=False)
    scans = {p: _scan(p, 0.9, phases, dwell=2.0) for p in an.PORT_PAIRS}
    for s in scans.values():
        s.counts = np.round(s.counts)
    f = tmp_path / "fr.csv"
    an.write_fringe_scans(f, scans)
    back = an.read_fringe_scans(f)
    for p in an.PORT_PAIRS:
        assert np.allclose(back[p].phases, scans[p].phases) and np.array_equal(back[p].counts, scans[p].counts)
    single = tmp_path / "scan_A2B1.csv"
    single.write_text("phase_rad,count,dwell_s\n0,1,1\n1,2,1\n2,3,1\n")
    assert list(an.read_fringe_scans([single])) == ["A2B1"]
