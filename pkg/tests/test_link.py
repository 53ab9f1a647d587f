import io

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from psbm.link import (DiscreteLink, build_isi_matrix, complex_gaussian, factorize, gen_noise, isi_eigenvalues,
                       noise_sum_variance, transmit, two_stream_view)


def test_isi_matrix_structure():
    a = build_isi_matrix(4)
    expected = np.array([[1, .5, 0, 0], [.5, 1, .5, 0], [0, .5, 1, .5], [0, 0, .5, 1]])
    assert np.array_equal(a, expected)
    assert np.array_equal(build_isi_matrix(1), [[1.0]])
    for bad in (0, -2, 2.5):
        with pytest.raises(ValueError):
            build_isi_matrix(bad)


@pytest.mark.parametrize("n", [1, 2, 3, 8, 17, 64])
def test_eigenvalues_closed_form(n):
    assert np.allclose(np.sort(isi_eigenvalues(n)), scipy.linalg.eigvalsh(build_isi_matrix(n)), atol=1e-12)
    assert np.all(isi_eigenvalues(n) > 0)


@pytest.mark.parametrize("n", [1, 2, 5, 9, 40])
def test_factor_matches_scipy_cholesky(n):
    a = build_isi_matrix(n)
    a0 = factorize(a)
    assert np.allclose(a0, scipy.linalg.cholesky(a, lower=True), atol=1e-14)
    assert np.max(np.abs(a0 @ a0.T - a)) < 1e-14
    assert np.allclose(a0, np.tril(a0))


def test_factor_two_by_two():
    assert np.allclose(factorize(build_isi_matrix(2)), [[1, 0], [0.5, np.sqrt(0.75)]])


def test_factor_rejects_bad_input():
    with pytest.raises(ValueError):
        factorize(np.ones((2, 3)))
    with pytest.raises(ValueError):
        factorize(np.array([[1.0, 0.2], [0.1, 1.0]]))
    with pytest.raises(ValueError):
        factorize(np.ones((3, 3)) + np.eye(3))
    with pytest.raises(np.linalg.LinAlgError):
        factorize(np.array([[1.0, 1.0, 0], [1.0, 1.0, 0.5], [0, 0.5, 1.0]]))


@given(hnp.arrays(float, st.integers(1, 12), elements=st.floats(0.1, 3.0)),
       st.floats(-0.45, 0.45))
@settings(max_examples=40)
def test_factor_on_diagonally_dominant_tridiagonals(diag, off):
    n = diag.size
    a = np.diag(diag + 1.0) + off * (np.eye(n, k=1) + np.eye(n, k=-1))
    a0 = factorize(a)
    assert np.allclose(a0 @ a0.T, a, atol=1e-12)


def test_noiseless_transmit():
    assert np.allclose(transmit([1, 1, 1], 1.0, 0.0), [1.5, 2.0, 1.5])
    assert np.allclose(transmit([1, 0, 0], 2j, 0.0), [2j, 1j, 0])
    h = np.array([1.0, 2.0, 3.0])
    assert np.allclose(transmit([0, 1, 0], h, 0.0), [0.5, 2.0, 1.5])
    with pytest.raises(ValueError):
        transmit([1, 1], [1, 1, 1], 0.0)
    with pytest.raises(ValueError):
        transmit([1, 1], 1.0, 0.5)


def test_batched_transmit_matches_rowwise():
    rng = np.random.default_rng(3)
    s = complex_gaussian(rng, (5, 6))
    h = complex_gaussian(rng, (5, 1))
    r = transmit(s, h, 0.0)
    for b in range(5):
        assert np.allclose(r[b], transmit(s[b], h[b, 0], 0.0))


def test_whitening_inverts_factor():
    link = DiscreteLink(7, 0.1)
    rng = np.random.default_rng(0)
    w = complex_gaussian(rng, (3, 7))
    assert np.allclose(link.whiten(w @ link.a0.T), w, atol=1e-12)
    buf = io.StringIO()
    link.write_csv(buf, "a0")
    assert len(buf.getvalue().splitlines()) == 7
    with pytest.raises(ValueError):
        DiscreteLink(3, -1.0)


def test_complex_gaussian_moments():
    rng = np.random.default_rng(11)
    z = complex_gaussian(rng, 400_000, 2.5)
    assert np.mean(np.abs(z) ** 2) == pytest.approx(2.5, rel=0.01)
    assert abs(np.mean(z * z)) < 0.02
    assert np.var(z.real) == pytest.approx(1.25, rel=0.01)


@pytest.mark.parametrize("method", ["triangular", "fir"])
def test_noise_covariance(method):
    rng = np.random.default_rng(5)
    n, sigma = 6, 0.7
    w = gen_noise(n, sigma, method, rng, size=200_000)
    cov = (w.T @ w.conj()).real / w.shape[0]
    assert np.allclose(cov, sigma ** 2 * build_isi_matrix(n), atol=0.01)


@pytest.mark.parametrize("n", [2, 5, 9])
def test_sum_variance(n):
    assert noise_sum_variance(n) == 2 * n - 1
    ones = np.ones(n)
    assert ones @ build_isi_matrix(n) @ ones == noise_sum_variance(n)


def test_noise_validation():
    rng = np.random.default_rng()
    with pytest.raises(ValueError):
        gen_noise(3, 0.0, rng=rng)
    with pytest.raises(ValueError):
        gen_noise(3, 1.0, "bogus", rng)
    with pytest.raises(ValueError):
        gen_noise(3, 1.0)
    with pytest.raises(ValueError):
        noise_sum_variance(0)


def test_two_stream_view():
    a, b = two_stream_view(np.arange(7))
    assert a.tolist() == [0, 2, 4, 6] and b.tolist() == [1, 3, 5]


def test_noise_seed_reproducible():
    a = gen_noise(4, 1.0, rng=np.random.default_rng(9), size=3)
    b = gen_noise(4, 1.0, rng=np.random.default_rng(9), size=3)
    assert np.array_equal(a, b)
