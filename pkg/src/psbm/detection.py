"""
Receivers for the symbol-rate PSBM model.

All detectors accept a single block (1-D) or a batch of blocks (2-D, one
block per row). Channel estimates may be scalars, one per block, or full
per-sample gain vectors.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.linalg import solve_triangular

from .link import build_isi_matrix, factorize
from .sequences import SpreadingPair, psk_alphabet

MAX_CANDIDATES = 2 ** 20


@dataclass(frozen=True)
class DetectorConfig:
    alphabet: np.ndarray = field(default_factory=lambda: psk_alphabet(2))
    use_wmf: bool = True
    csi: str = "perfect"
    max_exhaustive_len: int = 16

    def __post_init__(self):
        alpha = np.asarray(self.alphabet, dtype=complex).ravel()
        if alpha.size == 0:
            raise ValueError("alphabet must be non-empty")
        if self.csi not in ("perfect", "estimated"):
            raise ValueError(f"csi must be 'perfect' or 'estimated', got {self.csi!r}")
        if self.max_exhaustive_len < 1:
            raise ValueError("max_exhaustive_len must be positive")
        object.__setattr__(self, "alphabet", alpha)


@dataclass(frozen=True)
class ChannelEstimate:
    h_hat: complex | np.ndarray
    error_variance: float | np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.error_variance) < 0):
            raise ValueError("error variance must be non-negative")

    @classmethod
    def perfect(cls, h) -> "ChannelEstimate":
        h = np.asarray(h, dtype=complex)
        return cls(h if h.ndim else complex(h), np.zeros(h.shape) if h.ndim else 0.0)


def whiten(r, a0: np.ndarray) -> np.ndarray:
    """r A0^{-T} by a triangular solve."""
    r = np.asarray(r)
    a0 = np.asarray(a0, dtype=float)
    if r.shape[-1] != a0.shape[0]:
        raise ValueError(f"block length {r.shape[-1]} does not match factor order {a0.shape[0]}")
    if np.any(np.diag(a0) == 0):
        raise np.linalg.LinAlgError("singular triangular factor")
    return solve_triangular(a0, r.T, lower=True).T


def _gain_rows(h, batch: int, n: int) -> np.ndarray:
    """Broadcast channel estimates to shape (batch, 1) or (batch, n)."""
    h = np.asarray(h, dtype=complex)
    if h.ndim == 0:
        return np.full((batch, 1), complex(h))
    if h.ndim == 1:
        if batch == 1 and h.size == n:
            return h[None, :]
        if h.size == batch:
            return h[:, None]
    if h.ndim == 2 and h.shape[0] == batch and h.shape[1] in (1, n):
        return h
    raise ValueError(f"cannot broadcast channel estimate of shape {h.shape} to {batch} blocks of length {n}")


class MLDetector:
    """Exhaustive ML search over the data positions of a block.

    Known symbols (pilots, zeros) are fixed in ``template``. Candidates are
    enumerated in lexicographic alphabet order; the first minimiser wins.
    With ``use_wmf`` the metric is the whitened distance, otherwise the
    plain Euclidean distance between r and s A diag(h).
    """

    def __init__(self, n: int, alphabet, data_positions=None, template=None,
                 use_wmf: bool = True, max_exhaustive_len: int = 16):
        self.alphabet = np.asarray(alphabet, dtype=complex).ravel()
        self.n = int(n)
        self.data_positions = (np.arange(self.n) if data_positions is None
                               else np.asarray(data_positions, dtype=int))
        n_data = self.data_positions.size
        m = self.alphabet.size
        if n_data > max_exhaustive_len or m ** n_data > MAX_CANDIDATES:
            raise ValueError(f"exhaustive ML over {m}^{n_data} candidates exceeds the limit "
                             f"(N <= {max_exhaustive_len}, M^N <= {MAX_CANDIDATES})")
        self.template = (np.zeros(self.n, dtype=complex) if template is None
                         else np.asarray(template, dtype=complex).copy())
        self.use_wmf = bool(use_wmf)
        self.a = build_isi_matrix(self.n)
        self.a0 = factorize(self.a)
        idx = np.array(list(itertools.product(range(m), repeat=n_data)), dtype=np.int64)
        self.candidate_indices = idx.reshape(-1, n_data)
        full = np.tile(self.template, (self.candidate_indices.shape[0], 1))
        full[:, self.data_positions] = self.alphabet[self.candidate_indices]
        self.candidates = full
        self.signal = full @ self.a  # s A, before channel gains
        self.g = whiten(self.signal, self.a0) if self.use_wmf else self.signal
        self.g_energy = np.sum(np.abs(self.g) ** 2, axis=1)

    def metrics(self, r, h_hat) -> np.ndarray:
        r = np.atleast_2d(np.asarray(r, dtype=complex))
        h = _gain_rows(h_hat, r.shape[0], self.n)
        z = whiten(r, self.a0) if self.use_wmf else r
        if h.shape[1] == 1:
            cross = z @ np.conj(self.g).T
            return (np.abs(h) ** 2 * self.g_energy[None, :]
                    - 2.0 * np.real(np.conj(h) * cross) + np.sum(np.abs(z) ** 2, axis=1, keepdims=True))
        # per-sample gains: hypotheses differ per block, process in sub-batches
        n_cand = self.g.shape[0]
        out = np.empty((r.shape[0], n_cand))
        step = max(1, (1 << 21) // (n_cand * self.n))
        for lo in range(0, r.shape[0], step):
            hi = min(lo + step, r.shape[0])
            g = self.signal[None, :, :] * h[lo:hi, None, :]
            if self.use_wmf:
                g = whiten(g.reshape(-1, self.n), self.a0).reshape(g.shape)
            out[lo:hi] = np.sum(np.abs(z[lo:hi, None, :] - g) ** 2, axis=2)
        return out

    def detect_indices(self, r, h_hat) -> np.ndarray:
        best = np.argmin(self.metrics(r, h_hat), axis=1)
        return self.candidate_indices[best]

    def detect(self, r, h_hat) -> np.ndarray:
        out = self.alphabet[self.detect_indices(r, h_hat)]
        return out[0] if np.ndim(r) == 1 else out


def ml_detect(r, a: np.ndarray, a0: np.ndarray, h_hat, cfg: DetectorConfig) -> np.ndarray:
    """Exhaustive ML sequence decision for a block with every position carrying data."""
    r = np.asarray(r, dtype=complex)
    n = r.shape[-1]
    if n > cfg.max_exhaustive_len:
        raise ValueError(f"block length {n} exceeds max_exhaustive_len={cfg.max_exhaustive_len}")
    if a.shape != (n, n) or a0.shape != (n, n):
        raise ValueError("matrix order does not match block length")
    det = MLDetector(n, cfg.alphabet, use_wmf=cfg.use_wmf, max_exhaustive_len=cfg.max_exhaustive_len)
    if not (np.allclose(det.a, a) and np.allclose(det.a0, a0)):
        raise ValueError("only the PSBM ISI matrix and its triangular factor are supported")
    return det.detect(r, h_hat)


def nearest_index(z, alphabet) -> np.ndarray:
    """Index of the nearest alphabet point; ties go to the lower index."""
    z = np.asarray(z, dtype=complex)
    alphabet = np.asarray(alphabet, dtype=complex)
    return np.argmin(np.abs(z[..., None] - alphabet) ** 2, axis=-1)


def symbol_slicer(r, h_hat, alphabet) -> np.ndarray:
    """Per-sample nearest-point decision on r / h_hat."""
    h = np.asarray(h_hat, dtype=complex)
    if np.any(h == 0):
        raise ValueError("channel estimate must be non-zero")
    r = np.asarray(r, dtype=complex)
    if h.ndim == 1 and r.ndim == 2 and h.size == r.shape[0]:
        h = h[:, None]
    alphabet = np.asarray(alphabet, dtype=complex)
    return alphabet[nearest_index(r / h, alphabet)]


def sic_detect(r, h_hat, alphabet, order: str = "b_first") -> tuple[np.ndarray, np.ndarray]:
    """Two-stream SIC for the layout (a_1, b_1, a_2, b_2, ...).

    b_n is sliced from its own sample with the a-interference left in;
    (b_{n-1} + b_n)/2 is then removed from the a samples before slicing.
    """
    if order != "b_first":
        raise ValueError(f"unsupported SIC order {order!r}")
    r = np.asarray(r, dtype=complex)
    h = np.asarray(h_hat, dtype=complex)
    if h.ndim == 1 and r.ndim == 2:
        h = h[:, None]
    ra, rb = r[..., 0::2], r[..., 1::2]
    b_hat = symbol_slicer(rb, h, alphabet) if rb.shape[-1] else rb.copy()
    prev_b = np.concatenate([np.zeros(b_hat.shape[:-1] + (1,), dtype=complex), b_hat], axis=-1)
    # a_n sits between b_{n-1} and b_n; the last a may have no right-hand b
    left = prev_b[..., :ra.shape[-1]]
    right = np.zeros_like(ra)
    right[..., :b_hat.shape[-1]] = b_hat[..., :ra.shape[-1]]
    a_hat = symbol_slicer(ra - h * (left + right) / 2.0, h, alphabet)
    return a_hat, b_hat


def lmmse_estimate(pilot_obs, pilot_vals, noise_cov, prior_var: float = 1.0) -> ChannelEstimate:
    """Scalar-channel LMMSE from observations r = h q + n, n ~ CN(0, C), h ~ CN(0, prior_var).

    ``pilot_obs`` may be a batch (one row per block) sharing q and C.
    """
    q = np.atleast_1d(np.asarray(pilot_vals, dtype=complex))
    obs = np.asarray(pilot_obs, dtype=complex)
    c = np.atleast_2d(np.asarray(noise_cov, dtype=complex))
    if c.shape != (q.size, q.size):
        raise ValueError("noise covariance does not match the pilot count")
    if not np.any(q != 0):
        raise ValueError("pilots must be non-zero")
    if not prior_var > 0:
        raise ValueError("prior variance must be positive")
    try:
        chol = np.linalg.cholesky(c)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("noise covariance is not positive definite") from exc
    cq = np.linalg.solve(chol.conj().T, np.linalg.solve(chol, q))  # C^{-1} q
    info = float(np.real(np.vdot(q, cq)))
    err = 1.0 / (info + 1.0 / prior_var)
    h_hat = err * (obs @ np.conj(cq))
    return ChannelEstimate(h_hat, err)


class PilotCombination(NamedTuple):
    value: complex | np.ndarray
    n_pilots: int
    residual: complex | np.ndarray | None


def pilot_combiner(r, variant: str = "as_stated", data_hat=None, h_hat=None, data_true=None) -> PilotCombination:
    """Sign-weighted pilot sum for the alternating frame (-p, d_1, p, d_2, ..., +-p).

    ``as_stated`` sums pilots 1..N with weights (-1)^n, leaving (-1)^N h d_N / 2.
    ``all_pilots`` also includes pilot N+1, which cancels all data terms.
    ``decision_directed`` subtracts h_hat (d_{n-1} + d_n)/2 from each of the
    N+1 pilot samples using ``data_hat`` before combining.

    ``residual`` is the remaining data interference per unit channel gain,
    available when ``data_true`` is given.
    """
    r = np.asarray(r, dtype=complex)
    if r.shape[-1] % 2 != 1 or r.shape[-1] < 3:
        raise ValueError("alternating frame must have odd length 2N+1 >= 3")
    n = (r.shape[-1] - 1) // 2
    pilots = r[..., 0::2]
    signs = (-1.0) ** (np.arange(n + 1) + 1)

    def isi_at_pilots(d):
        d = np.asarray(d, dtype=complex)
        pad = np.zeros(d.shape[:-1] + (1,), dtype=complex)
        ext = np.concatenate([pad, d, pad], axis=-1)
        return (ext[..., :-1] + ext[..., 1:]) / 2.0

    if variant == "as_stated":
        used = n
        value = pilots[..., :n] @ signs[:n]
    elif variant == "all_pilots":
        used = n + 1
        value = pilots @ signs
    elif variant == "decision_directed":
        if data_hat is None or h_hat is None:
            raise ValueError("decision_directed needs data_hat and h_hat")
        used = n + 1
        h = np.asarray(h_hat, dtype=complex)
        if h.ndim == 1 and pilots.ndim == 2:
            h = h[:, None]
        value = (pilots - h * isi_at_pilots(data_hat)) @ signs
    else:
        raise ValueError(f"unknown combiner variant {variant!r}")

    residual = None
    if data_true is not None:
        isi = isi_at_pilots(data_true)
        if variant == "decision_directed":
            isi = isi - isi_at_pilots(data_hat)
        residual = isi[..., :used] @ signs[:used]
    return PilotCombination(value, used, residual)


class DespreadResult(NamedTuple):
    d1: complex | np.ndarray
    d2: complex | np.ndarray
    d1_cross: complex  # coefficient of d2 in the d1 estimate
    d2_cross: complex  # coefficient of d1 in the d2 estimate


def despread(a_samples, b_samples, pair: SpreadingPair) -> DespreadResult:
    """Correlate the a and b sample streams of (b_1, a_1, ..., b_N, a_N) with their codes.

    Each output is normalised by N, so noiselessly
    d1_hat = d1 + d1_cross d2 and d2_hat = d2 + d2_cross d1.
    """
    ra = np.asarray(a_samples, dtype=complex)
    rb = np.asarray(b_samples, dtype=complex)
    n = pair.n
    if ra.shape[-1] != n or rb.shape[-1] != n:
        raise ValueError(f"expected {n} samples per stream")
    d1 = ra @ np.conj(pair.c1) / n
    d2 = rb @ np.conj(pair.c2) / n
    al, sh = pair.aligned_cross, pair.shifted_cross
    return DespreadResult(d1, d2, (np.conj(al) + sh) / (2 * n), (al + np.conj(sh)) / (2 * n))


def repetition_combine(r, scheme: str):
    """Sum of all samples of a repetition frame.

    For ``nyquist`` pass the N symbol-instant samples; for ``psbm`` the
    2N-1 samples of the (d, ..., d)/sqrt(2) block.
    """
    if scheme not in ("nyquist", "psbm"):
        raise ValueError(f"unknown scheme {scheme!r}")
    return np.sum(np.asarray(r, dtype=complex), axis=-1)


def diff_decode_sequence(r, alphabet, n_data: int | None = None) -> np.ndarray:
    """Decision-feedback differential decoding of a PSBM block.

    ``r`` holds the samples of the block (1, t_0, t_1, ...); sample n yields
    c_n from 2 r_n conj(past) - conj(c_{n-1}) - 2, starting with past = 1
    and c_{-1} = 0.
    """
    single = np.ndim(r) == 1
    r = np.atleast_2d(np.asarray(r, dtype=complex))
    alphabet = np.asarray(alphabet, dtype=complex)
    k = r.shape[1] - 1 if n_data is None else int(n_data)
    past = np.ones(r.shape[0], dtype=complex)
    prev = np.zeros(r.shape[0], dtype=complex)
    out = np.empty((r.shape[0], k), dtype=complex)
    for n in range(k):
        raw = 2.0 * r[:, n] * np.conj(past) - np.conj(prev) - 2.0
        c = alphabet[nearest_index(raw, alphabet)]
        out[:, n] = c
        past = past * c
        prev = c
    return out[0] if single else out


def nyquist_diff_decode(r, alphabet) -> np.ndarray:
    """c_n = slice(r_{n+1} conj(r_n)) for the block (1, t_0, t_1, ...)."""
    r = np.asarray(r, dtype=complex)
    return np.asarray(alphabet)[nearest_index(r[..., 1:] * np.conj(r[..., :-1]), alphabet)]
