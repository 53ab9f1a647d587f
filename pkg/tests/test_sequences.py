import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psbm.link import build_isi_matrix
from psbm.sequences import (Frame, SpreadingPair, alternating_pilot_sequence, bits_to_psk, build_frame,
                            diff_decode_raw, diff_encode, diff_frame, double_pilot_combine, gray_decode,
                            gray_encode, interleave_streams, make_spreading_pair, near_orthogonality_probability,
                            near_orthogonality_threshold, noiseless_samples, orthogonality_probability,
                            psk_alphabet, psk_slice, psk_slice_index, psk_to_bits, repetition_sequences,
                            repetition_snr_ratio, spread_sequence, verify_isi_free_subsequence)

cplx = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)


# -- frames ---------------------------------------------------------------

def test_build_frame_layout():
    f = build_frame(2, 1, [10, 20, 30, 40], pilot=5)
    assert f.roles == ("pilot", "zero", "data", "data", "zero", "pilot", "zero", "data", "data", "zero", "pilot")
    assert f.values.tolist() == [5, 0, 10, 20, 0, 5, 0, 30, 40, 0, 5]
    assert f.data_positions.tolist() == [2, 3, 7, 8]
    assert f.pilot_positions.tolist() == [0, 5, 10]


def test_build_frame_guards_isolate_pilots():
    # zeros around each data group keep pilot samples free of data ISI
    rng = np.random.default_rng(0)
    f = build_frame(4, 2, rng.standard_normal(8) + 1j * rng.standard_normal(8))
    r = noiseless_samples(f)
    clean = noiseless_samples(f.with_data(np.zeros(8)))
    assert np.allclose(r[f.pilot_positions], clean[f.pilot_positions])


def test_frame_validation():
    with pytest.raises(ValueError):
        build_frame(3, 1, [1, 2])
    with pytest.raises(ValueError):
        Frame(("pilot", "bogus"), [1, 1], 4, 1)
    with pytest.raises(ValueError):
        Frame(("zero",), [1], 4, 1)
    with pytest.raises(ValueError):
        Frame(("data",), [1, 2], 4, 1)
    with pytest.warns(UserWarning):
        build_frame(1, 2, [1.0])
    with pytest.raises(ValueError):
        build_frame(2, 1, [1, 2]).with_data([1, 2, 3])


@given(st.integers(1, 4), st.integers(1, 3), st.lists(cplx, min_size=1, max_size=3))
@settings(max_examples=40)
def test_frame_text_round_trip(ld, lp, groups):
    data = np.repeat(np.asarray(groups, dtype=complex), ld)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        f = build_frame(ld, lp, data, pilot=1 - 1j)
        g = Frame.loads(f.dumps())
    assert g.roles == f.roles and g.ld == f.ld and g.lp == f.lp
    assert np.array_equal(g.values, f.values)
    assert g.dumps() == f.dumps()


def test_frame_loads_errors():
    with pytest.raises(ValueError):
        Frame.loads("pilot,1.0,0.0\n")
    with pytest.raises(ValueError):
        Frame.loads("# Ld=4 Lp=1\npilot,1.0\n")


# -- alternating pilots ---------------------------------------------------

def test_alternating_layout():
    f = alternating_pilot_sequence([10, 20, 30], pilot=2)
    assert f.values.tolist() == [-2, 10, 2, 20, -2, 30, 2]
    assert f.data_positions.tolist() == [1, 3, 5]


@given(st.lists(cplx, min_size=1, max_size=20), cplx)
@settings(max_examples=60)
def test_alternating_data_samples_are_isi_free(data, pilot):
    f = alternating_pilot_sequence(data, pilot)
    residual = verify_isi_free_subsequence(f)
    assert np.allclose(residual[f.data_positions], 0, atol=1e-9)


def test_isi_residual_is_neighbour_average():
    s = np.array([1, 2, 4, 8], dtype=complex)
    assert np.allclose(verify_isi_free_subsequence(s), [1, 2.5, 5, 2])


def test_double_pilot_combination():
    d, p = 0.3 - 0.7j, 1.0
    r = noiseless_samples([d, p, p, -d])
    assert double_pilot_combine(r[1], r[2]) == pytest.approx(3 * p)


# -- repetition -----------------------------------------------------------

def test_repetition_sequences():
    nyq, ps = repetition_sequences(3, 2.0)
    assert nyq.tolist() == [2, 0, 2, 0, 2]
    assert np.allclose(ps, np.full(5, 2 / np.sqrt(2)))
    assert np.sum(np.abs(nyq) ** 2) == pytest.approx(np.sum(np.abs(ps) ** 2) * 6 / 5)
    with pytest.raises(ValueError):
        repetition_sequences(1)


@pytest.mark.parametrize("n", [2, 3, 4, 8, 16, 100])
def test_repetition_ratio_from_matrix_algebra(n):
    # sum combiner: signal 1^T A s, noise variance 1^T A 1 (coloured) vs identity for Nyquist
    _, ps = repetition_sequences(n)
    a = build_isi_matrix(ps.size)
    ones = np.ones(ps.size)
    snr_psbm = abs(ones @ a @ ps) ** 2 / (ones @ a @ ones)
    snr_nyq = n ** 2 / n
    assert repetition_snr_ratio(n) == pytest.approx(snr_psbm / snr_nyq, rel=1e-12)


def test_repetition_ratio_tends_to_two():
    assert 10 * math.log10(repetition_snr_ratio(10 ** 6)) == pytest.approx(10 * math.log10(2), abs=1e-5)


# -- spreading ------------------------------------------------------------

def test_walsh_pair():
    p = make_spreading_pair("walsh", 4)
    assert p.c1.tolist() == [1, 1, 1, 1] and p.c2.tolist() == [1, 1, -1, -1]
    assert p.aligned_cross == 0
    assert p.shifted_cross == -1
    with pytest.raises(ValueError):
        make_spreading_pair("walsh", 6)
    with pytest.raises(ValueError):
        make_spreading_pair("walsh", 4, rows=(1, 1))
    with pytest.raises(ValueError):
        make_spreading_pair("bogus", 4)
    with pytest.raises(ValueError):
        make_spreading_pair("random", 4)


def test_random_pair_respects_bound():
    rng = np.random.default_rng(2)
    for _ in range(20):
        p = make_spreading_pair("random", 8, rng, max_aligned=0)
        assert p.aligned_cross == 0
        assert set(np.abs(p.c1)) == {1.0}


def test_spread_sequence_layout():
    pair = SpreadingPair([1, -1], [1, 1])
    assert spread_sequence(2, 3j, pair).tolist() == [3j, 2, 3j, -2]
    assert interleave_streams([1, 2], [3, 4]).tolist() == [1, 3, 2, 4]
    with pytest.raises(ValueError):
        interleave_streams([1], [1, 2])
    with pytest.raises(ValueError):
        SpreadingPair([1], [1])


@pytest.mark.parametrize("n", range(1, 9))
def test_orthogonality_probability_matches_enumeration(n):
    hits = total = 0
    for c1 in itertools.product((-1, 1), repeat=n):
        for c2 in itertools.product((-1, 1), repeat=n):
            total += 1
            hits += sum(x * y for x, y in zip(c1, c2)) == 0
    assert orthogonality_probability(n) == hits / total


@pytest.mark.parametrize("n,kappa", [(4, 0.5), (6, 0.34), (8, 0.25), (7, 0.6)])
def test_near_orthogonality_matches_enumeration(n, kappa):
    theta = near_orthogonality_threshold(n, kappa)
    hits = sum(abs(sum(c)) <= theta for c in itertools.product((-1, 1), repeat=n))
    assert near_orthogonality_probability(n, kappa) == hits / 2 ** n


def test_near_orthogonality_reference_values():
    assert orthogonality_probability(4) == 0.375
    assert near_orthogonality_threshold(100, 0.1) == 5
    assert near_orthogonality_threshold(10, 0.1) == 1
    assert near_orthogonality_probability(100, 0.1) == pytest.approx(0.382701, abs=1e-6)
    assert near_orthogonality_probability(8, 0.0) == orthogonality_probability(8)


@given(st.integers(1, 80), st.floats(0, 1), st.floats(0, 1))
def test_near_orthogonality_monotone_in_kappa(n, k1, k2):
    lo, hi = sorted((k1, k2))
    assert near_orthogonality_probability(n, lo) <= near_orthogonality_probability(n, hi)


# -- PSK and differential encoding -----------------------------------------

@pytest.mark.parametrize("m", [2, 4, 8, 16])
def test_psk_alphabet(m):
    pts = psk_alphabet(m)
    assert np.allclose(np.abs(pts), 1)
    assert pts[0] == 1
    assert np.allclose(psk_slice(pts * 0.9 * np.exp(0.2j * np.pi / m), m), pts)


def test_psk_qpsk_exact():
    assert psk_alphabet(4).tolist() == [1, 1j, -1, -1j]
    with pytest.raises(ValueError):
        psk_alphabet(6)


@pytest.mark.parametrize("m", [2, 4, 8, 16])
def test_gray_neighbours_differ_in_one_bit(m):
    bits = psk_to_bits(np.arange(m), m).reshape(m, -1)
    for k in range(m):
        assert np.sum(bits[k] != bits[(k + 1) % m]) == 1


@given(st.sampled_from([2, 4, 8]), st.data())
def test_bits_round_trip(m, data):
    k = int(math.log2(m))
    bits = np.array(data.draw(st.lists(st.integers(0, 1), min_size=k, max_size=8 * k).filter(lambda b: len(b) % k == 0)))
    sym = bits_to_psk(bits, m)
    idx = psk_slice_index(sym, m)
    assert np.array_equal(psk_to_bits(idx, m), bits)


@given(st.integers(0, 2 ** 20))
def test_gray_inverse(k):
    assert int(gray_decode(gray_encode(k))) == k


@given(st.lists(st.integers(0, 7), min_size=1, max_size=30))
def test_diff_round_trip_noiseless_nyquist(idx):
    c = psk_alphabet(8)[idx]
    s = diff_frame(c)
    assert s[0] == 1
    decoded = psk_slice(s[1:] * np.conj(s[:-1]), 8)
    assert np.allclose(decoded, c)


def test_diff_encode_rejects_non_unit():
    with pytest.raises(ValueError):
        diff_encode([1, 2])


@given(st.lists(st.integers(0, 3), min_size=2, max_size=16))
def test_psbm_differential_recursion_noiseless(idx):
    c = psk_alphabet(4)[idx]
    s = diff_frame(c)
    r = noiseless_samples(s)
    past, prev = 1.0 + 0j, 0.0 + 0j
    out = []
    for n in range(c.size):
        # r_n = s_n + (s_{n-1} + s_{n+1}) / 2 with the reference as s_0
        dec = psk_slice(diff_decode_raw(r[n], past, prev), 4)
        out.append(dec)
        prev = dec
        past = past * dec
    assert np.allclose(out, c)
