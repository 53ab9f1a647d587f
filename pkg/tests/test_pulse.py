import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from psbm.pulse import (PulseSpec, lemma1_exact, psd, pulse_inner_product, quadrature_grid, rrc1_spectrum,
                        rrc1_value, rrc_spectrum, rrc_value, simpson_weights, spectral_efficiency,
                        truncation_study, write_psd_csv, write_truncation_csv)


def rrc_mp(alpha, t):
    """High-precision direct evaluation of the RRC prototype (not at singular points)."""
    a = mpmath.mpf(alpha)
    t = mpmath.mpf(t)
    num = mpmath.sin((1 - a) * mpmath.pi * t) / (mpmath.pi * t) + 4 * a * mpmath.cos((1 + a) * mpmath.pi * t) / mpmath.pi
    return num / (1 - 16 * a * a * t * t)


def lag_integral_spectral(x):
    """int rrc_1(t) rrc_1(t - x) dt via Parseval: int_{-1}^{1} cos^2(pi f / 2) cos(2 pi f x) df."""
    with mpmath.workdps(30):
        return float(mpmath.quad(lambda f: mpmath.cos(mpmath.pi * f / 2) ** 2 * mpmath.cos(2 * mpmath.pi * f * x),
                                 [-1, 0, 1]))


# -- point values ---------------------------------------------------------

@pytest.mark.parametrize("alpha", [0.0, 0.25, 0.5, 1.0, 1.5, 2.0])
def test_value_at_origin(alpha):
    assert rrc_value(alpha, 0.0) == pytest.approx(1 - alpha + 4 * alpha / math.pi, abs=1e-15)


def test_rrc1_known_points():
    assert rrc1_value(0.0) == pytest.approx(4 / math.pi, abs=1e-15)
    assert rrc1_value(0.25) == pytest.approx(1.0, abs=1e-12)
    assert rrc1_value(0.5) == pytest.approx(4 / (3 * math.pi), abs=1e-15)
    assert rrc_value(1.0, 0.37) == pytest.approx(rrc1_value(0.37), abs=1e-14)


@pytest.mark.parametrize("alpha", [0.22, 0.5, 1.0, 1.7])
def test_singular_point_matches_high_precision_limit(alpha):
    t0 = 1 / (4 * alpha)
    with mpmath.workdps(50):
        limit = float(rrc_mp(alpha, mpmath.mpf(t0) + mpmath.mpf("1e-30")))
    assert rrc_value(alpha, t0) == pytest.approx(limit, abs=1e-10)
    for eps in (1e-9, 1e-7, 3e-6, 1e-4):
        with mpmath.workdps(50):
            ref = float(rrc_mp(alpha, mpmath.mpf(t0) + mpmath.mpf(eps)))
        assert rrc_value(alpha, t0 + eps) == pytest.approx(ref, abs=1e-8)


@given(st.floats(0, 2), st.floats(-20, 20))
def test_even_in_time(alpha, t):
    assert rrc_value(alpha, t) == rrc_value(alpha, -t)


@given(st.floats(0.01, 2), st.floats(0.0, 6.0))
@settings(max_examples=60)
def test_matches_mpmath_away_from_singularities(alpha, t):
    if t < 1e-3 or abs(1 - 16 * alpha * alpha * t * t) < 1e-3:
        return
    with mpmath.workdps(30):
        ref = float(rrc_mp(alpha, t))
    assert rrc_value(alpha, t) == pytest.approx(ref, abs=1e-12)


def test_array_and_scalar_agree():
    t = np.linspace(-3, 3, 97)
    arr = rrc_value(0.5, t)
    assert np.allclose(arr, [rrc_value(0.5, x) for x in t], atol=0, rtol=0)


# -- PulseSpec ------------------------------------------------------------

@pytest.mark.parametrize("kwargs", [dict(alpha=-0.1), dict(alpha=2.1), dict(period=0), dict(trunc_halfwidth=0),
                                    dict(oversampling=1), dict(oversampling=2.5)])
def test_pulse_spec_rejects_invalid(kwargs):
    with pytest.raises(ValueError):
        PulseSpec(**kwargs)


@given(st.floats(0, 2), st.floats(0.1, 4), st.floats(0.5, 6), st.integers(2, 32))
@settings(max_examples=40)
def test_sampled_pulse_is_even(alpha, period, d, os_):
    t, p = PulseSpec(alpha, period, d, os_).sample()
    assert np.array_equal(p, p[::-1])
    assert np.allclose(t, -t[::-1], atol=1e-12 * period * d)


def test_sampled_pulse_unit_energy():
    t, p = PulseSpec(1.0, 2.0, 8.0, 32).sample()
    assert np.sum(p * p) * (t[1] - t[0]) == pytest.approx(1.0, abs=1e-4)


# -- quadrature -----------------------------------------------------------

def test_simpson_weights_integrate_cubic_exactly():
    t, w = quadrature_grid(1.5, 0.1)
    assert np.dot(w, t ** 3 - 2 * t ** 2 + 1) == pytest.approx(integrate.quad(lambda x: x ** 3 - 2 * x ** 2 + 1, -1.5, 1.5)[0], abs=1e-12)
    with pytest.raises(ValueError):
        simpson_weights(4, 0.1)


def test_quadrature_grid_symmetric_even_intervals():
    t, w = quadrature_grid(4.0, 1 / 1024)
    assert (t.size - 1) % 2 == 0
    assert t[0] == -4.0 and t[-1] == 4.0
    assert np.array_equal(w, w[::-1])


# -- lag integrals --------------------------------------------------------

@pytest.mark.parametrize("n", range(0, 13))
def test_lemma_values_against_spectral_oracle(n):
    assert lemma1_exact(n) == pytest.approx(lag_integral_spectral(n / 4), abs=1e-12)


def test_lemma_known_values():
    assert lemma1_exact(0) == 1.0
    assert lemma1_exact(1) == pytest.approx(8 / (3 * math.pi))
    assert lemma1_exact(2) == 0.5
    assert lemma1_exact(3) == pytest.approx(8 / (15 * math.pi))
    assert lemma1_exact(5) == pytest.approx(-8 / (105 * math.pi))
    assert lemma1_exact(4) == 0.0
    with pytest.raises(ValueError):
        lemma1_exact(-1)


@pytest.mark.parametrize("n", [0, 1, 2, 3, 5, 8, 11])
def test_truncated_inner_product_converges(n):
    exact = lemma1_exact(n)
    assert pulse_inner_product(1.0, n / 4, 8.0) == pytest.approx(exact, abs=1e-5)
    assert pulse_inner_product(1.0, n / 4, 32.0) == pytest.approx(exact, abs=1e-6)


@given(st.floats(0, 2), st.floats(-3, 3))
@settings(max_examples=25, deadline=None)
def test_inner_product_even_in_offset(alpha, x):
    assert pulse_inner_product(alpha, x, 2.0) == pulse_inner_product(alpha, -x, 2.0)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 1.0])
def test_nyquist_orthogonality_of_rrc(alpha):
    # lags at integer pulse periods vanish for the full-length pulse
    for k in (1, 2, 3):
        assert abs(pulse_inner_product(alpha, k, 32.0)) < 2e-4


def test_truncation_study_rows():
    rows = truncation_study([0, 1, 2], [1.0, 4.0])
    assert [(r.n, r.d) for r in rows] == [(0, 1.0), (0, 4.0), (1, 1.0), (1, 4.0), (2, 1.0), (2, 4.0)]
    at4 = [r.ratio for r in rows if r.d == 4.0]
    assert all(abs(x - 1) < 1e-3 for x in at4)
    at1 = [r.ratio for r in rows if r.d == 1.0]
    assert max(abs(x - 1) for x in at1) > 1e-3


def test_truncation_csv(tmp_path):
    import io

    buf = io.StringIO()
    write_truncation_csv(truncation_study([0], [4.0]), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "n,d,ratio"
    assert lines[1].startswith("0,4.0,")


# -- spectra --------------------------------------------------------------

@pytest.mark.parametrize("alpha", [0.25, 0.5, 1.0])
def test_spectrum_matches_fourier_transform(alpha):
    t, w = quadrature_grid(64.0, 1 / 64)
    p = rrc_value(alpha, t)
    for f in (0.0, 0.2, 0.45, 0.6, 0.9):
        numeric = np.dot(w, p * np.cos(2 * np.pi * f * t))
        assert rrc_spectrum(alpha, f) == pytest.approx(numeric, abs=2e-3)


def test_rrc1_spectrum_closed_form():
    f = np.linspace(-1.2, 1.2, 25)
    assert np.allclose(rrc1_spectrum(f), rrc_spectrum(1.0, f), atol=1e-12)
    assert rrc1_spectrum(0.5) == pytest.approx(math.cos(math.pi / 4))
    assert rrc1_spectrum(1.1) == 0.0


def test_spectrum_above_unit_rolloff_has_unit_energy():
    f = np.linspace(-2, 2, 4001)
    s = rrc_spectrum(1.5, f, d=16.0)
    assert integrate.trapezoid(s ** 2, f) == pytest.approx(1.0, abs=5e-3)


@pytest.mark.parametrize("alpha,ts", [(1.0, 1.0), (1.0, 0.5), (0.5, 1.0)])
def test_psd_integrates_to_power(alpha, ts):
    pulse = PulseSpec(alpha, 1.0)
    total = integrate.quad(lambda f: psd(pulse, [1.0], f, symbol_period=ts), -1.5, 1.5, limit=200)[0]
    assert total == pytest.approx(1.0 / ts, rel=1e-6)


def test_psd_with_correlated_symbols():
    pulse = PulseSpec(1.0, 2.0)
    f = np.linspace(-0.5, 0.5, 11)
    base = psd(pulse, [1.0], f, symbol_period=1.0)
    corr = psd(pulse, [1.0, 0.5], f, symbol_period=1.0)
    assert np.allclose(corr, base * (1 + np.cos(2 * np.pi * f)))
    with pytest.raises(ValueError):
        psd(pulse, [0.0], f)


def test_psd_csv_header():
    import io

    buf = io.StringIO()
    write_psd_csv([0.0, 0.1], [1.0, 0.5], buf)
    assert buf.getvalue().splitlines() == ["f,psd", "0.0,1.0", "0.1,0.5"]


def test_spectral_efficiency():
    assert spectral_efficiency(1.0, 0.5) == pytest.approx(2.0)
    assert spectral_efficiency(0.0) == pytest.approx(2.0)
    assert spectral_efficiency(1.0) == pytest.approx(1.0)
    assert spectral_efficiency(0.5) == pytest.approx(2 / 1.5)
