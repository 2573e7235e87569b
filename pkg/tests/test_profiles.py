import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from holeburn.errors import ParameterError
from holeburn.profiles import (
    GAUSSIAN,
    LORENTZIAN,
    PSEUDO_VOIGT,
    LineProfile,
    ZeemanConfig,
    drive_lorentzian,
    profile_value,
    zeeman_splittings,
)


def test_lorentzian_peak_is_two_over_pi():
    p = LineProfile(LORENTZIAN, fwhm_mhz=1.0)
    assert profile_value(p, 0.0) == pytest.approx(2.0 / np.pi, rel=1e-12)


def test_lorentzian_half_maximum_at_half_fwhm():
    p = LineProfile(LORENTZIAN, fwhm_mhz=1.0)
    peak = profile_value(p, 0.0)
    assert profile_value(p, 0.5) == pytest.approx(0.5 * peak, rel=1e-12)
    assert profile_value(p, -0.5) == pytest.approx(0.5 * peak, rel=1e-12)


def test_gaussian_half_maximum_at_half_fwhm():
    p = LineProfile(GAUSSIAN, fwhm_mhz=3.7)
    peak = profile_value(p, 0.0)
    assert profile_value(p, 1.85) == pytest.approx(0.5 * peak, rel=1e-12)


@pytest.mark.parametrize(
    "profile",
    [
        LineProfile(LORENTZIAN, 1.0),
        LineProfile(GAUSSIAN, 2.5),
        LineProfile(PSEUDO_VOIGT, 22.7e3, mix=0.37),
        LineProfile(PSEUDO_VOIGT, 0.3, mix=0.9),
    ],
)
def test_profiles_integrate_to_one(profile):
    # quadrature oracle; semi-infinite halves keep the peak on a boundary.
    # Lorentzian tails carry ~4e-3 beyond +-50 FWHM, so the full line is needed
    # to verify unit area at 1e-6.
    area = sum(
        quad(lambda f: profile_value(profile, f), a, b, limit=400)[0]
        for a, b in [(-np.inf, 0.0), (0.0, np.inf)]
    )
    assert area == pytest.approx(1.0, abs=1e-6)


@given(
    st.sampled_from([LORENTZIAN, GAUSSIAN, PSEUDO_VOIGT]),
    st.floats(0.01, 1e4),
    st.floats(0.0, 1.0),
    st.floats(-1e5, 1e5),
)
def test_profiles_are_even(kind, fwhm, mix, f):
    p = LineProfile(kind, fwhm, mix=mix)
    a, b = profile_value(p, f), profile_value(p, -f)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-300)


@given(st.floats(0.1, 100.0), st.floats(-200.0, 200.0))
def test_pseudo_voigt_limits_match_pure_profiles(fwhm, f):
    lor = profile_value(LineProfile(PSEUDO_VOIGT, fwhm, mix=0.0), f)
    gau = profile_value(LineProfile(PSEUDO_VOIGT, fwhm, mix=1.0), f)
    assert lor == pytest.approx(profile_value(LineProfile(LORENTZIAN, fwhm), f), rel=1e-14)
    assert gau == pytest.approx(profile_value(LineProfile(GAUSSIAN, fwhm), f), rel=1e-14)


def test_profile_rejects_bad_parameters():
    with pytest.raises(ParameterError):
        LineProfile(LORENTZIAN, fwhm_mhz=0.0)
    with pytest.raises(ParameterError):
        LineProfile(PSEUDO_VOIGT, 1.0, mix=1.5)
    with pytest.raises(ParameterError):
        LineProfile("voigt", 1.0)


def test_drive_lorentzian_is_peak_normalized():
    assert drive_lorentzian(0.0, 3.0) == 1.0
    assert drive_lorentzian(1.5, 3.0) == pytest.approx(0.5)


def test_zeeman_splittings_match_reported_field_values():
    # ground splitting ~6 GHz at 213.8 mT with g_e = 2.005
    s = zeeman_splittings(ZeemanConfig(g_e=2.005, g_h=0.91, field_mt=213.8))
    assert s.delta_g_ghz == pytest.approx(6.0, rel=0.01)
    assert s.delta_e_ghz == pytest.approx(2.73, rel=0.01)
    s2 = zeeman_splittings(ZeemanConfig(g_e=2.005, g_h=2.55, field_mt=213.8))
    assert s2.delta_e_ghz == pytest.approx(7.65, rel=0.01)
    assert s2.delta_ad_ghz == pytest.approx(s2.delta_g_ghz + s2.delta_e_ghz, rel=1e-12)
    assert s2.delta_bc_ghz == pytest.approx(abs(s2.delta_e_ghz - s2.delta_g_ghz), rel=1e-12)


def test_zeeman_splittings_vanish_at_zero_field():
    s = zeeman_splittings(ZeemanConfig(g_e=2.0, g_h=1.0, field_mt=0.0))
    assert s.delta_g_ghz == 0.0
    assert s.delta_e_ghz == 0.0
    assert s.delta_bc_ghz == 0.0
    assert s.delta_ad_ghz == 0.0


@given(st.floats(0.01, 5.0), st.floats(0.01, 5.0), st.floats(0.0, 1e3), st.floats(0.1, 10.0))
def test_zeeman_homogeneous_in_field(g_e, g_h, b, scale):
    s1 = zeeman_splittings(ZeemanConfig(g_e, g_h, b))
    s2 = zeeman_splittings(ZeemanConfig(g_e, g_h, b * scale))
    for attr in ("delta_g_ghz", "delta_e_ghz", "delta_ad_ghz"):
        assert getattr(s2, attr) == pytest.approx(scale * getattr(s1, attr), rel=1e-9, abs=1e-12)


def test_zeeman_rejects_negative_field():
    with pytest.raises(ParameterError):
        ZeemanConfig(2.0, 1.0, -1.0)
