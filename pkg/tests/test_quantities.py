import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qtb import quantities as q
from qtb.errors import DomainError


def test_c37_is_near_1547_7_nm():
    nu = q.itu_c_channel_center(37)
    assert nu == 193.7e12
    assert q.frequency_to_wavelength(nu) == pytest.approx(1547.72e-9, abs=0.01e-9)


@pytest.mark.parametrize("n", [0, 73, 2.5, -1])
def test_bad_itu_channel(n):
    with pytest.raises(DomainError):
        q.itu_c_channel_center(n)


@given(st.floats(1e-7, 1e-4))
def test_wavelength_round_trip(lam):
    assert q.frequency_to_wavelength(q.wavelength_to_frequency(lam)) == pytest.approx(lam, rel=1e-14)


@given(st.floats(-60, 30))
def test_dbm_round_trip(dbm):
    assert q.mw_to_dbm(q.dbm_to_mw(dbm)) == pytest.approx(dbm, abs=1e-12)


def test_db_and_power_helpers():
    assert q.db_to_ratio(3.0103) == pytest.approx(0.5, rel=1e-5)
    assert q.ratio_to_db(0.1) == pytest.approx(10.0)
    assert q.mw_to_w(1.28) == pytest.approx(1.28e-3)
    assert q.w_to_mw(2e-3) == pytest.approx(2.0)
    for bad in (0.0, -1.0):
        with pytest.raises(DomainError):
            q.mw_to_dbm(bad)
        with pytest.raises(DomainError):
            q.wavelength_to_frequency(bad)


@pytest.mark.parametrize("text,value", [
    ("1.25ns", 1.25e-9), ("300 ps", 300e-12), ("2", 2.0), (" 20 us ", 20e-6), ("1e-3 s", 1e-3), (".5ms", 5e-4),
])
def test_parse_time(text, value):
    assert q.parse_time(text) == pytest.approx(value, rel=1e-15)


def test_parse_time_rejects_garbage():
    with pytest.raises(DomainError):
        q.parse_time("soon")


def test_picosecond_rounding():
    assert q.seconds_to_ps(1.25e-9) == 1250
    assert q.seconds_to_ps(0.6e-12) == 1
    assert q.ps_to_seconds(6250) == pytest.approx(6.25e-9)
    assert q.is_telecom_wavelength(1.55e-6) and not q.is_telecom_wavelength(780e-9)
    assert math.isclose(q.SPEED_OF_LIGHT, 299792458.0)
