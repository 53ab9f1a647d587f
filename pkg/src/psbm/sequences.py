"""
Transmitted symbol sequences for PSBM links.

Pilot/data frames, alternating-sign pilot designs, repetition, spreading
pairs and differential PSK. Sequences are plain complex numpy arrays unless
role labels are needed, in which case a :class:`Frame` is used.
"""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.linalg import hadamard

from .link import build_isi_matrix

ROLES = ("pilot", "data", "zero")


# --------------------------------------------------------------------------
# Frames
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Frame:
    roles: tuple
    values: np.ndarray
    ld: int
    lp: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "roles", tuple(self.roles))
        if len(self.roles) != values.size:
            raise ValueError("roles and values differ in length")
        bad = [r for r in self.roles if r not in ROLES]
        if bad:
            raise ValueError(f"unknown role(s) {sorted(set(bad))}")
        zeros = np.array([r == "zero" for r in self.roles], dtype=bool)
        if np.any(values[zeros] != 0):
            raise ValueError("zero-role positions must carry the value 0")
        if self.ld < 1 or self.lp < 1:
            raise ValueError("Ld and Lp must be positive")
        if self.lp >= self.ld:
            warnings.warn(f"pilot group length Lp={self.lp} is not small compared with Ld={self.ld}",
                          stacklevel=3)

    def __len__(self) -> int:
        return self.values.size

    def positions(self, role: str) -> np.ndarray:
        return np.flatnonzero(np.array([r == role for r in self.roles], dtype=bool))

    @property
    def data_positions(self) -> np.ndarray:
        return self.positions("data")

    @property
    def pilot_positions(self) -> np.ndarray:
        return self.positions("pilot")

    def with_data(self, data) -> "Frame":
        data = np.asarray(data, dtype=complex).ravel()
        pos = self.data_positions
        if data.size != pos.size:
            raise ValueError(f"expected {pos.size} data symbols, got {data.size}")
        values = self.values.copy()
        values[pos] = data
        return Frame(self.roles, values, self.ld, self.lp)

    def dumps(self) -> str:
        buf = io.StringIO()
        buf.write(f"# Ld={self.ld} Lp={self.lp}\n")
        for role, v in zip(self.roles, self.values):
            buf.write(f"{role},{float(v.real)!r},{float(v.imag)!r}\n")
        return buf.getvalue()

    @classmethod
    def loads(cls, text: str) -> "Frame":
        ld = lp = None
        roles, values = [], []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    key, _, val = tok.partition("=")
                    if key == "Ld":
                        ld = int(val)
                    elif key == "Lp":
                        lp = int(val)
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: expected 'role,re,im', got {raw!r}")
            roles.append(parts[0].strip())
            values.append(complex(float(parts[1]), float(parts[2])))
        if ld is None or lp is None:
            raise ValueError("missing '# Ld=.. Lp=..' header")
        return cls(tuple(roles), np.array(values, dtype=complex), ld, lp)


def build_frame(ld: int, lp: int, data, pilot: complex = 1.0) -> Frame:
    """[Lp pilots] 0 [Ld data] 0 [Lp pilots] 0 ... ending with a pilot group."""
    if ld <= 0 or lp <= 0:
        raise ValueError("Ld and Lp must be positive")
    data = np.asarray(data, dtype=complex).ravel()
    if data.size == 0 or data.size % ld:
        raise ValueError(f"data length {data.size} is not a positive multiple of Ld={ld}")
    roles, values = [], []

    def pilots():
        roles.extend(["pilot"] * lp)
        values.extend([pilot] * lp)

    pilots()
    for g in range(data.size // ld):
        roles.append("zero")
        values.append(0)
        roles.extend(["data"] * ld)
        values.extend(data[g * ld:(g + 1) * ld])
        roles.append("zero")
        values.append(0)
        pilots()
    return Frame(tuple(roles), np.array(values, dtype=complex), ld, lp)


def alternating_pilot_sequence(data, pilot: complex = 1.0) -> Frame:
    """(-p, d1, p, d2, -p, ...) closed by a pilot; the k-th pilot is (-1)^(k+1) p."""
    data = np.asarray(data, dtype=complex).ravel()
    if data.size == 0:
        raise ValueError("data must be non-empty")
    n = data.size
    values = np.empty(2 * n + 1, dtype=complex)
    values[0::2] = pilot * (-1.0) ** (np.arange(n + 1) + 1)
    values[1::2] = data
    roles = tuple("pilot" if i % 2 == 0 else "data" for i in range(values.size))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return Frame(roles, values, n, 1)


def _as_values(seq) -> np.ndarray:
    return seq.values if isinstance(seq, Frame) else np.asarray(seq, dtype=complex)


def noiseless_samples(seq) -> np.ndarray:
    """Matched-filter samples s A of a finite block."""
    s = _as_values(seq)
    return s @ build_isi_matrix(s.size)


def verify_isi_free_subsequence(seq) -> np.ndarray:
    """ISI residual (s A - s) at every position of the block."""
    s = _as_values(seq)
    return noiseless_samples(s) - s


def double_pilot_combine(r_n: complex, r_next: complex) -> complex:
    """Sum of the two middle samples of (d, p, p, -d): noiselessly 3 h p."""
    return r_n + r_next


def repetition_sequences(n: int, d: complex = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Nyquist (d, 0, d, ..., 0, d) with N copies and PSBM (d, ..., d)/sqrt(2) with 2N-1 copies."""
    if int(n) != n or n < 2:
        raise ValueError(f"N must be an integer >= 2, got {n}")
    n = int(n)
    nyq = np.zeros(2 * n - 1, dtype=complex)
    nyq[::2] = d
    psbm = np.full(2 * n - 1, d / np.sqrt(2.0), dtype=complex)
    return nyq, psbm


def repetition_snr_ratio(n: int) -> float:
    """Combined-SNR ratio of PSBM repetition over Nyquist repetition, (2N - 3/2)/N."""
    if n < 2:
        raise ValueError("N must be >= 2")
    return (2 * n - 1.5) / n


# --------------------------------------------------------------------------
# Spreading
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SpreadingPair:
    c1: np.ndarray
    c2: np.ndarray

    def __post_init__(self):
        c1 = np.asarray(self.c1, dtype=complex)
        c2 = np.asarray(self.c2, dtype=complex)
        if c1.shape != c2.shape or c1.ndim != 1 or c1.size < 2:
            raise ValueError("spreading sequences must be 1-D, equal length, N >= 2")
        object.__setattr__(self, "c1", c1)
        object.__setattr__(self, "c2", c2)

    @property
    def n(self) -> int:
        return self.c1.size

    @property
    def aligned_cross(self) -> complex:
        return complex(np.sum(self.c1 * np.conj(self.c2)))

    @property
    def shifted_cross(self) -> complex:
        return complex(np.sum(self.c2[1:] * np.conj(self.c1[:-1])))


def make_spreading_pair(kind: str, n: int, rng: np.random.Generator | None = None,
                        rows: tuple[int, int] | None = None,
                        max_aligned: float | None = None, max_tries: int = 100000) -> SpreadingPair:
    """Walsh rows of the Sylvester Hadamard matrix, or iid random +-1 sequences.

    Walsh defaults to rows (0, N/2). Random pairs are redrawn until
    |aligned_cross| <= max_aligned when a bound is given.
    """
    if int(n) != n or n < 2:
        raise ValueError(f"N must be an integer >= 2, got {n}")
    n = int(n)
    if kind == "walsh":
        if n & (n - 1):
            raise ValueError(f"Walsh sequences need N a power of two, got {n}")
        i, j = rows if rows is not None else (0, n // 2)
        h = hadamard(n)
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise ValueError(f"invalid Walsh row pair {(i, j)} for N={n}")
        return SpreadingPair(h[i].astype(float), h[j].astype(float))
    if kind == "random":
        if rng is None:
            raise ValueError("random spreading needs an explicit generator")
        for _ in range(max_tries):
            pair = SpreadingPair(rng.choice([-1.0, 1.0], n), rng.choice([-1.0, 1.0], n))
            if max_aligned is None or abs(pair.aligned_cross) <= max_aligned:
                return pair
        raise RuntimeError(f"no pair with |aligned_cross| <= {max_aligned} in {max_tries} draws")
    raise ValueError(f"unknown spreading kind {kind!r}")


def orthogonality_probability(n: int) -> float:
    """P(sum c1_n c2_n = 0) for iid equiprobable +-1 sequences of length N."""
    if int(n) != n or n < 1:
        raise ValueError(f"N must be a positive integer, got {n}")
    n = int(n)
    if n % 2:
        return 0.0
    return float(Fraction(math.comb(n, n // 2), 2 ** n))


def near_orthogonality_threshold(n: int, kappa: float) -> int:
    """theta = kappa N / 2 rounded half away from zero."""
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    return int(math.floor(kappa * n / 2.0 + 0.5 + 1e-12))


def near_orthogonality_probability(n: int, kappa: float) -> float:
    """P(|S| <= theta) with S = 2K - N, K ~ Binomial(N, 1/2), computed exactly."""
    if int(n) != n or n < 1:
        raise ValueError(f"N must be a positive integer, got {n}")
    n = int(n)
    theta = near_orthogonality_threshold(n, kappa)
    total = sum(math.comb(n, k) for k in range(n + 1) if abs(2 * k - n) <= theta)
    return float(Fraction(total, 2 ** n))


def spread_streams(d1: complex, d2: complex, pair: SpreadingPair) -> tuple[np.ndarray, np.ndarray]:
    """a_n = d1 c1_n, b_n = d2 c2_n."""
    return d1 * pair.c1, d2 * pair.c2


def interleave_streams(first, second) -> np.ndarray:
    """(first_1, second_1, first_2, second_2, ...)."""
    first = np.asarray(first, dtype=complex)
    second = np.asarray(second, dtype=complex)
    if first.shape[-1] != second.shape[-1]:
        raise ValueError("streams must have equal length")
    out = np.empty(first.shape[:-1] + (2 * first.shape[-1],), dtype=complex)
    out[..., 0::2] = first
    out[..., 1::2] = second
    return out


def spread_sequence(d1: complex, d2: complex, pair: SpreadingPair) -> np.ndarray:
    """Transmitted chip sequence (b_1, a_1, b_2, a_2, ..., b_N, a_N).

    With this order each a_n sits between b_n and b_{n+1}, so the
    cross-talk into the first despreader is governed by aligned_cross and
    shifted_cross.
    """
    a, b = spread_streams(d1, d2, pair)
    return interleave_streams(b, a)


# --------------------------------------------------------------------------
# PSK and differential encoding
# --------------------------------------------------------------------------

def psk_alphabet(m: int) -> np.ndarray:
    """exp(j 2 pi k / M), k = 0..M-1."""
    if m < 2 or m & (m - 1):
        raise ValueError(f"M must be a power of two >= 2, got {m}")
    pts = np.exp(2j * np.pi * np.arange(m) / m)
    # snap to exact axes where applicable (keeps QPSK products exact)
    pts.real[np.abs(pts.real) < 1e-15] = 0.0
    pts.imag[np.abs(pts.imag) < 1e-15] = 0.0
    return pts


def bits_per_symbol(m: int) -> int:
    return int(m).bit_length() - 1


def gray_encode(k):
    k = np.asarray(k)
    return k ^ (k >> 1)


def gray_decode(g):
    g = np.asarray(g).copy()
    shift = g >> 1
    while np.any(shift):
        g ^= shift
        shift >>= 1
    return g


def bits_to_psk(bits, m: int) -> np.ndarray:
    """Gray-mapped M-PSK; bits are grouped MSB first."""
    k = bits_per_symbol(m)
    bits = np.asarray(bits, dtype=np.int64)
    if bits.shape[-1] % k:
        raise ValueError(f"bit count {bits.shape[-1]} is not a multiple of {k}")
    groups = bits.reshape(bits.shape[:-1] + (-1, k))
    labels = groups @ (1 << np.arange(k - 1, -1, -1))
    return psk_alphabet(m)[gray_decode(labels)]


def psk_to_bits(indices, m: int) -> np.ndarray:
    """Inverse of :func:`bits_to_psk` acting on constellation indices."""
    k = bits_per_symbol(m)
    labels = gray_encode(np.asarray(indices, dtype=np.int64))
    bits = (labels[..., None] >> np.arange(k - 1, -1, -1)) & 1
    return bits.reshape(labels.shape[:-1] + (-1,))


def psk_slice_index(z, m: int) -> np.ndarray:
    """Index of the nearest M-PSK point (angle sector decision)."""
    ang = np.angle(np.asarray(z))
    return np.mod(np.rint(ang * m / (2 * np.pi)).astype(np.int64), m)


def psk_slice(z, m: int) -> np.ndarray:
    return psk_alphabet(m)[psk_slice_index(z, m)]


def diff_encode(c) -> np.ndarray:
    """s_k = c_k s_{k-1} with s_{-1} = 1 (the reference itself is not returned)."""
    c = np.asarray(c, dtype=complex)
    if c.size and np.max(np.abs(np.abs(c) - 1.0)) > 1e-9:
        raise ValueError("differential encoding needs unit-modulus symbols")
    return np.cumprod(c, axis=-1)


def diff_frame(c) -> np.ndarray:
    """Block actually transmitted: the reference 1 followed by diff_encode(c)."""
    s = diff_encode(c)
    ref = np.ones(s.shape[:-1] + (1,), dtype=complex)
    return np.concatenate([ref, s], axis=-1)


def diff_decode_raw(r_n: complex, past: complex, prev: complex) -> complex:
    """2 r_n conj(past) - conj(prev) - 2.

    ``past`` is the product of the decisions before c_n and ``prev`` the
    decision c_{n-1}. For n = 0 use past = 1 and prev = 0 (block start).
    """
    return 2.0 * r_n * np.conj(past) - np.conj(prev) - 2.0


def diff_decode_step(r_n: complex, past: complex, prev: complex, m: int) -> complex:
    return complex(psk_slice(diff_decode_raw(r_n, past, prev), m))
