"""
Root raised-cosine (RRC) pulse family.

Point evaluation with removable-singularity handling, truncated inner
products, the closed-form lag values of the 100% roll-off pulse, and
spectra / power spectral densities of linearly modulated signals.

Time arguments of the ``rrc_*`` functions are normalized to the pulse
period Tp, so ``rrc_value(alpha, t)`` is the dimensionless prototype and the
unit-energy pulse of period Tp is ``rrc_value(alpha, t / Tp) / sqrt(Tp)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

# Quadrature step in units of Tp.
DEFAULT_STEP = 1.0 / 1024
DEFAULT_TRUNCATION = 4.0
ORACLE_TRUNCATION = 8.0

# |1 - 16 alpha^2 t^2| below this switches to the Taylor form.
_SINGULAR_WINDOW = 1e-6


@dataclass(frozen=True)
class PulseSpec:
    """One RRC pulse: roll-off, period Tp, truncation half-width d (in Tp)
    and samples per Tp."""

    alpha: float = 1.0
    period: float = 1.0
    trunc_halfwidth: float = DEFAULT_TRUNCATION
    oversampling: int = 16

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 2.0:
            raise ValueError(f"alpha must lie in [0, 2], got {self.alpha}")
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period}")
        if not self.trunc_halfwidth > 0:
            raise ValueError(f"trunc_halfwidth must be positive, got {self.trunc_halfwidth}")
        if int(self.oversampling) != self.oversampling or self.oversampling < 2:
            raise ValueError(f"oversampling must be an integer >= 2, got {self.oversampling}")

    @property
    def dt(self) -> float:
        return self.period / self.oversampling

    @property
    def half_length(self) -> int:
        """Number of samples on each side of the pulse centre."""
        return int(round(self.trunc_halfwidth * self.oversampling))

    def sample(self) -> tuple[np.ndarray, np.ndarray]:
        """Sampled unit-energy pulse ``p(t) = rrc(t/Tp)/sqrt(Tp)`` on the
        symmetric grid ``t = k*dt``, ``|k| <= half_length``.

        Both halves come from the same |k| values, so the samples are
        exactly even-symmetric.
        """
        k = np.arange(-self.half_length, self.half_length + 1)
        t = k * self.dt
        p = rrc_value(self.alpha, np.abs(k) / self.oversampling) / math.sqrt(self.period)
        return t, p


def _rrc_singular(alpha: float, t: np.ndarray) -> np.ndarray:
    """rrc_alpha near |t| = 1/(4 alpha) from second-order expansions of the
    numerator and denominator about that point (both vanish there)."""
    t0 = 1.0 / (4.0 * alpha)
    delta = t - t0
    c = 1.0 - alpha
    b = 1.0 + alpha
    pt = math.pi * t0
    s = math.sin(c * math.pi * t0)
    s1 = c * math.pi * math.cos(c * math.pi * t0)
    s2 = -((c * math.pi) ** 2) * s
    # sin(c pi t) / (pi t)
    g1 = s1 / pt - s / (pt * t0)
    g2 = s2 / pt - 2.0 * s1 / (pt * t0) + 2.0 * s / (pt * t0 * t0)
    # (4 alpha / pi) cos(b pi t)
    h1 = -4.0 * alpha * b * math.sin(b * math.pi * t0)
    h2 = -4.0 * alpha * b * b * math.pi * math.cos(b * math.pi * t0)
    d1 = -32.0 * alpha * alpha * t0
    d2 = -32.0 * alpha * alpha
    return (g1 + h1 + 0.5 * (g2 + h2) * delta) / (d1 + 0.5 * d2 * delta)


def rrc_value(alpha: float, t):
    """Prototype RRC pulse rrc_alpha(t), t in pulse periods.

    Removable singularities at t = 0 and |t| = 1/(4 alpha) return the
    analytic limit. Accepts scalars or arrays; the result is exactly even in t.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    scalar = np.ndim(t) == 0
    t = np.abs(np.asarray(t, dtype=float))
    a = float(alpha)
    c = 1.0 - a
    denom = 1.0 - 16.0 * a * a * t * t
    # np.sinc(x) = sin(pi x)/(pi x), so c*sinc(c t) = sin(c pi t)/(pi t) with the t=0 limit.
    numer = c * np.sinc(c * t) + 4.0 * a * np.cos((1.0 + a) * np.pi * t) / np.pi
    near = np.abs(denom) < _SINGULAR_WINDOW if a > 0 else np.zeros(t.shape, dtype=bool)
    out = numer / np.where(near, 1.0, denom)
    if near.any():
        out = np.where(near, _rrc_singular(a, t), out)
    return float(out) if scalar else out


def rrc1_value(t):
    """rrc_1(t) = 4 cos(2 pi t) / (pi (1 - 16 t^2)), limit 1 at |t| = 1/4."""
    scalar = np.ndim(t) == 0
    t = np.abs(np.asarray(t, dtype=float))
    denom = 1.0 - 16.0 * t * t
    near = np.abs(denom) < _SINGULAR_WINDOW
    out = 4.0 * np.cos(2.0 * np.pi * t) / (np.pi * np.where(near, 1.0, denom))
    if near.any():
        out = np.where(near, _rrc_singular(1.0, t), out)
    return float(out) if scalar else out


def simpson_weights(n_points: int, step: float) -> np.ndarray:
    """Composite Simpson weights for an odd number of equispaced points."""
    if n_points < 3 or n_points % 2 == 0:
        raise ValueError("Simpson's rule needs an odd number (>= 3) of points")
    w = np.ones(n_points)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (step / 3.0)


def quadrature_grid(d: float, step: float = DEFAULT_STEP) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric grid on [-d, d] with an even number of intervals no wider
    than ``step``, and matching Simpson weights."""
    if not d > 0:
        raise ValueError(f"truncation half-width must be positive, got {d}")
    n = int(math.ceil(2.0 * d / step - 1e-9))
    n += n % 2
    h = 2.0 * d / n
    t = h * (np.arange(n + 1) - n // 2)
    return t, simpson_weights(n + 1, h)


def pulse_inner_product(alpha: float, offset: float, d: float = ORACLE_TRUNCATION,
                        step: float = DEFAULT_STEP) -> float:
    """Truncated inner product  int_{-d}^{d} rrc_a(t) rrc_a(t - offset) dt.

    Offset and d are in pulse periods. The integral is even in ``offset`` by
    construction (the absolute value is used).
    """
    t, w = quadrature_grid(d, step)
    x = abs(float(offset))
    return float(np.dot(w, rrc_value(alpha, t) * rrc_value(alpha, t - x)))


def lemma1_exact(n: int) -> float:
    """Closed form of  int rrc_1(t) rrc_1(t - n/4) dt  over the real line.

    Odd lags alternate in sign: +8/(3 pi), +8/(15 pi), -8/(105 pi),
    +8/(315 pi), ... i.e. (-1)^((n+1)/2) * 8 / (pi (n-2) n (n+2)).
    """
    if int(n) != n or n < 0:
        raise ValueError(f"n must be a non-negative integer, got {n}")
    n = int(n)
    if n == 0:
        return 1.0
    if n == 1:
        return 8.0 / (3.0 * math.pi)
    if n == 2:
        return 0.5
    if n % 2 == 1:
        sign = -1.0 if ((n + 1) // 2) % 2 else 1.0
        return sign * 8.0 / (math.pi * (n - 2) * n * (n + 2))
    return 0.0


class TruncationRow(NamedTuple):
    n: int
    d: float
    ratio: float


def truncation_study(n_values: Iterable[int], d_grid: Iterable[float],
                     step: float = DEFAULT_STEP) -> list[TruncationRow]:
    """Truncated lag integrals of rrc_1 at offsets n/4 against their exact values.

    ``ratio`` is truncated/exact where the exact value is non-zero; for the
    zero-valued lags (even n > 2) it holds the absolute truncated value.
    """
    rows = []
    for n in n_values:
        exact = lemma1_exact(n)
        for d in d_grid:
            value = pulse_inner_product(1.0, n / 4.0, d, step)
            ratio = value / exact if exact != 0.0 else abs(value)
            rows.append(TruncationRow(int(n), float(d), ratio))
    return rows


def rrc_spectrum(alpha: float, f, d: float = ORACLE_TRUNCATION):
    """Fourier transform of the prototype pulse rrc_alpha at normalized
    frequency f (cycles per Tp).

    Closed form (square root of the raised-cosine spectrum) for alpha <= 1.
    For alpha > 1 the cosine transform of the pulse truncated to [-d, d] is
    evaluated numerically.
    """
    scalar = np.ndim(f) == 0
    f = np.abs(np.asarray(f, dtype=float))
    if alpha > 1.0:
        t, w = quadrature_grid(d)
        p = rrc_value(alpha, t) * w
        out = np.cos(2.0 * np.pi * np.multiply.outer(f, t)) @ p
    elif alpha == 0.0:
        out = np.where(f <= 0.5, 1.0, 0.0)
    else:
        lo = (1.0 - alpha) / 2.0
        hi = (1.0 + alpha) / 2.0
        roll = np.cos(np.pi / (2.0 * alpha) * np.clip(f - lo, 0.0, None))
        out = np.where(f <= lo, 1.0, np.where(f <= hi, roll, 0.0))
    return float(out) if scalar else out


def rrc1_spectrum(f):
    """cos(pi f / 2) for |f| <= 1, else 0."""
    scalar = np.ndim(f) == 0
    f = np.abs(np.asarray(f, dtype=float))
    out = np.where(f <= 1.0, np.cos(np.pi * f / 2.0), 0.0)
    return float(out) if scalar else out


def psd(pulse: PulseSpec, symbol_autocorr: Sequence[complex], f,
        symbol_period: float | None = None):
    """Power spectral density of a linearly modulated signal.

    S(f) = (1/Ts) |P(f)|^2 sum_k R_s(k) exp(j 2 pi f k Ts), with
    P(f) = sqrt(Tp) RRC_alpha(Tp f) the transform of the unit-energy pulse.

    Parameters
    ----------
    pulse : PulseSpec
        Transmit pulse (period Tp).
    symbol_autocorr : sequence
        R_s(0), R_s(1), ... for non-negative lags; negative lags follow from
        conjugate symmetry.
    f : float or array
        Frequency in 1/(time unit of ``pulse.period``).
    symbol_period : float, optional
        Ts. Defaults to Tp (Nyquist signalling); PSBM uses Tp / 2.
    """
    r = np.asarray(symbol_autocorr, dtype=complex)
    if r.size == 0 or not r[0].real > 0:
        raise ValueError("R_s(0) must be positive")
    ts = pulse.period if symbol_period is None else float(symbol_period)
    scalar = np.ndim(f) == 0
    f = np.asarray(f, dtype=float)
    k = np.arange(1, r.size)
    phase = np.exp(2j * np.pi * np.multiply.outer(f, k) * ts)
    corr = r[0].real + 2.0 * np.real(phase @ r[1:]) if k.size else np.full(f.shape, r[0].real)
    spec = rrc_spectrum(pulse.alpha, pulse.period * f, pulse.trunc_halfwidth)
    out = (pulse.period / ts) * np.abs(spec) ** 2 * corr
    return float(out) if scalar else out


def spectral_efficiency(alpha: float, tau: float = 0.0) -> float:
    """Symbols/s per Hz of one-sided occupied bandwidth (1 + alpha)/(2 Tp)
    when symbols are sent every Ts = (1 - tau) Tp."""
    return 2.0 / ((1.0 + alpha) * (1.0 - tau))


def write_truncation_csv(rows: Iterable[TruncationRow], fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["n", "d", "ratio"])
    for row in rows:
        writer.writerow([row.n, repr(row.d), repr(row.ratio)])


def write_psd_csv(freqs, values, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["f", "psd"])
    for f, s in zip(np.atleast_1d(freqs), np.atleast_1d(values)):
        writer.writerow([repr(float(f)), repr(float(s))])
