"""
Symbol-rate equivalent model of PSBM signalling.

With the 100% roll-off pulse and symbols every half pulse period, the
sampled matched-filter output of a block of N symbols is

    r = s A diag(h) + w A0^T,

where A is the symmetric tridiagonal matrix with unit diagonal and 1/2 on
the first off-diagonals, A = A0 A0^T, and w is iid circular Gaussian.
Row-vector convention throughout.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

NOISE_METHODS = ("triangular", "fir")


def build_isi_matrix(n: int) -> np.ndarray:
    """The N x N tridiagonal ISI matrix (1 on the diagonal, 1/2 beside it)."""
    if int(n) != n or n < 1:
        raise ValueError(f"block length must be a positive integer, got {n}")
    n = int(n)
    off = np.full(n - 1, 0.5)
    return np.eye(n) + np.diag(off, 1) + np.diag(off, -1)


def isi_eigenvalues(n: int) -> np.ndarray:
    """Closed-form spectrum 1 + cos(k pi / (N + 1)), k = 1..N (descending)."""
    k = np.arange(1, n + 1)
    return 1.0 + np.cos(k * np.pi / (n + 1))


def factorize(a: np.ndarray) -> np.ndarray:
    """Lower-triangular A0 with A = A0 A0^T for a symmetric tridiagonal A.

    Uses the two-term Cholesky recurrence; a non-positive pivot raises
    :class:`numpy.linalg.LinAlgError`.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if not np.allclose(a, a.T, rtol=0, atol=1e-14):
        raise ValueError("matrix must be symmetric")
    n = a.shape[0]
    if n > 2 and np.any(np.triu(a, 2) != 0):
        raise ValueError("matrix must be tridiagonal")
    l0 = np.zeros_like(a)
    prev_sub = 0.0
    for i in range(n):
        pivot = a[i, i] - prev_sub ** 2
        if not pivot > 0:
            raise np.linalg.LinAlgError(f"non-positive pivot {pivot!r} at row {i}")
        l0[i, i] = np.sqrt(pivot)
        if i + 1 < n:
            prev_sub = a[i + 1, i] / l0[i, i]
            l0[i + 1, i] = prev_sub
    return l0


@dataclass(frozen=True)
class DiscreteLink:
    """Block length, ISI matrix, its factor and the per-sample noise level."""

    n: int
    sigma_w: float = 0.0
    a: np.ndarray = field(init=False, repr=False, compare=False)
    a0: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.sigma_w >= 0:
            raise ValueError(f"sigma_w must be non-negative, got {self.sigma_w}")
        a = build_isi_matrix(self.n)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "a0", factorize(a))

    def transmit(self, s, h, rng: np.random.Generator | None = None,
                 method: str = "triangular") -> np.ndarray:
        return transmit(s, h, self.sigma_w, rng, method=method, a=self.a, a0=self.a0)

    def whiten(self, r) -> np.ndarray:
        """r A0^{-T}; turns the coloured noise back into iid noise."""
        r = np.asarray(r)
        return solve_triangular(self.a0, r.T, lower=True).T

    def write_csv(self, fh, which: str = "a") -> None:
        m = {"a": self.a, "a0": self.a0}[which]
        writer = csv.writer(fh, lineterminator="\n")
        for row in m:
            writer.writerow([repr(float(v)) for v in row])


def complex_gaussian(rng: np.random.Generator, size, variance: float = 1.0) -> np.ndarray:
    """Circular complex Gaussian, E|z|^2 = variance (variance/2 per dimension)."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def gen_noise(n: int, sigma_w: float, method: str = "triangular",
              rng: np.random.Generator | None = None, size: int | None = None) -> np.ndarray:
    """Coloured noise with covariance sigma_w^2 A (per complex sample).

    ``triangular``: w = u A0^T, block exact.
    ``fir``: w_n = (u_n + u_{n-1}) / sqrt(2), stationary; the first sample
    uses a fresh u_{-1}, so every sample has variance sigma_w^2.

    Returns shape (N,) or (size, N).
    """
    if not sigma_w > 0:
        raise ValueError(f"sigma_w must be positive, got {sigma_w}")
    if method not in NOISE_METHODS:
        raise ValueError(f"unknown noise method {method!r}; expected one of {NOISE_METHODS}")
    if rng is None:
        raise ValueError("an explicit random generator is required")
    shape = (n,) if size is None else (size, n)
    var = sigma_w ** 2
    if method == "triangular":
        u = complex_gaussian(rng, shape, var)
        return u @ factorize(build_isi_matrix(n)).T
    u = complex_gaussian(rng, shape[:-1] + (n + 1,), var)
    return (u[..., 1:] + u[..., :-1]) / np.sqrt(2.0)


def transmit(s, h, sigma_w: float, rng: np.random.Generator | None = None,
             method: str = "triangular", a: np.ndarray | None = None,
             a0: np.ndarray | None = None) -> np.ndarray:
    """r = s A diag(h) + w A0^T.

    ``h`` may be a scalar (block fading), a length-N vector, or anything
    broadcasting against ``s``, e.g. (B, 1) per-block gains for a batch of
    blocks with shape (B, N).
    """
    s = np.asarray(s, dtype=complex)
    n = s.shape[-1]
    h = np.asarray(h, dtype=complex)
    if h.ndim > 0 and h.shape[-1] not in (1, n):
        raise ValueError(f"gain length {h.shape[-1]} does not match block length {n}")
    if a is None:
        a = build_isi_matrix(n)
    elif a.shape != (n, n):
        raise ValueError("ISI matrix size does not match the block length")
    r = (s @ a) * h
    if sigma_w > 0:
        if rng is None:
            raise ValueError("an explicit random generator is required when sigma_w > 0")
        if method == "triangular":
            a0 = factorize(a) if a0 is None else a0
            r = r + complex_gaussian(rng, s.shape, sigma_w ** 2) @ a0.T
        else:
            size = None if s.ndim == 1 else int(np.prod(s.shape[:-1]))
            w = gen_noise(n, sigma_w, "fir", rng, size)
            r = r + w.reshape(s.shape)
    return r


def noise_sum_variance(n: int) -> int:
    """Variance of the sum of N consecutive coloured noise samples, in units of sigma_w^2."""
    if int(n) != n or n < 1:
        raise ValueError(f"N must be a positive integer, got {n}")
    return 2 * int(n) - 1


def two_stream_view(r) -> tuple[np.ndarray, np.ndarray]:
    """Split r into (r_1, r_3, ...) and (r_2, r_4, ...), counting from one."""
    r = np.asarray(r)
    return r[..., 0::2], r[..., 1::2]
