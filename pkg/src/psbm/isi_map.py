"""ISI tap counting over the roll-off / packing-factor plane."""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, signal
from scipy.interpolate import CubicSpline

from .pulse import DEFAULT_STEP, DEFAULT_TRUNCATION, pulse_inner_product, quadrature_grid, rrc_value

DEFAULT_THRESHOLDS = (0.1, 0.05, 0.02, 0.01)


@dataclass(frozen=True)
class IsiTapProfile:
    lags: np.ndarray
    values: np.ndarray
    symbol_spacing: float

    def tap(self, k: int) -> float:
        return float(self.values[int(np.flatnonzero(self.lags == k)[0])])


def isi_taps(alpha: float, tau: float, d: float = DEFAULT_TRUNCATION, max_lag: int = 8,
             step: float = DEFAULT_STEP) -> IsiTapProfile:
    """Matched-filter taps of RRC signalling with packing factor tau.

    Tap k is the truncated inner product at offset k (1 - tau) pulse periods.
    """
    if not 0.0 <= tau < 1.0:
        raise ValueError(f"packing factor must satisfy 0 <= tau < 1, got {tau}")
    spacing = 1.0 - tau
    half = np.array([pulse_inner_product(alpha, k * spacing, d, step) for k in range(max_lag + 1)])
    lags = np.arange(-max_lag, max_lag + 1)
    values = np.concatenate([half[:0:-1], half])
    return IsiTapProfile(lags, values, spacing)


def isi_count(profile: IsiTapProfile, mu: float) -> int:
    """Number of non-zero lags whose tap magnitude exceeds mu."""
    if not mu > 0:
        raise ValueError(f"threshold must be positive, got {mu}")
    mask = (profile.lags != 0) & (np.abs(profile.values) > mu)
    return int(mask.sum())


def _strictly_increasing(values) -> bool:
    return bool(np.all(np.diff(values) > 0))


@dataclass(frozen=True)
class IsiScanConfig:
    alpha_grid: tuple
    tau_grid: tuple
    mu_thresholds: tuple = DEFAULT_THRESHOLDS
    trunc_halfwidth: float = DEFAULT_TRUNCATION
    max_lag: int = 8

    def __post_init__(self):
        errors = []
        a = np.asarray(self.alpha_grid, dtype=float)
        t = np.asarray(self.tau_grid, dtype=float)
        if a.size == 0 or not _strictly_increasing(a) or a.min() < 0 or a.max() > 2:
            errors.append("alpha_grid must be non-empty, strictly increasing, within [0, 2]")
        if t.size == 0 or not _strictly_increasing(t) or t.min() < 0 or t.max() >= 1:
            errors.append("tau_grid must be non-empty, strictly increasing, within [0, 1)")
        if len(self.mu_thresholds) == 0 or any(m <= 0 for m in self.mu_thresholds):
            errors.append("mu_thresholds must be a non-empty list of positive values")
        if not self.trunc_halfwidth > 0:
            errors.append("trunc_halfwidth must be positive")
        if int(self.max_lag) != self.max_lag or self.max_lag < 1:
            errors.append("max_lag must be a positive integer")
        if errors:
            raise ValueError("; ".join(errors))

    @classmethod
    def default(cls, **overrides) -> "IsiScanConfig":
        kw = dict(
            alpha_grid=tuple(np.round(np.arange(0, 201) * 0.01, 10)),
            tau_grid=tuple(np.round(np.arange(0, 96) * 0.01, 10)),
        )
        kw.update(overrides)
        return cls(**kw)


@dataclass
class IsiCountGrid:
    alpha_grid: np.ndarray
    tau_grid: np.ndarray
    mu_thresholds: tuple
    counts: np.ndarray  # (n_alpha, n_tau, n_mu)
    taps: np.ndarray = field(repr=False, default=None)  # (n_alpha, n_tau, max_lag)

    def mu_index(self, mu: float) -> int:
        idx = [i for i, m in enumerate(self.mu_thresholds) if np.isclose(m, mu, rtol=1e-12, atol=0)]
        if not idx:
            raise ValueError(f"threshold {mu} not present in grid {self.mu_thresholds}")
        return idx[0]

    def count_at(self, alpha: float, tau: float, mu: float) -> int:
        i = int(np.argmin(np.abs(self.alpha_grid - alpha)))
        j = int(np.argmin(np.abs(self.tau_grid - tau)))
        return int(self.counts[i, j, self.mu_index(mu)])

    def classify(self, mu: float) -> np.ndarray:
        """'red' for no ISI above mu, 'blue' for exactly two taps, '' otherwise."""
        c = self.counts[:, :, self.mu_index(mu)]
        return np.where(c == 0, "red", np.where(c == 2, "blue", ""))

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["alpha", "tau", "mu", "count"])
        for i, a in enumerate(self.alpha_grid):
            for j, t in enumerate(self.tau_grid):
                for m, mu in enumerate(self.mu_thresholds):
                    writer.writerow([repr(float(a)), repr(float(t)), repr(float(mu)),
                                     int(self.counts[i, j, m])])


def truncated_autocorrelation(alpha: float, d: float, max_offset: float,
                              step: float = DEFAULT_STEP) -> CubicSpline:
    """Spline of  C(x) = int_{-d}^{d} rrc_a(t) rrc_a(t - x) dt  for 0 <= x <= max_offset.

    All offsets on the quadrature grid are obtained from a single FFT
    correlation; off-grid offsets are interpolated.
    """
    t, w = quadrature_grid(d, step)
    h = t[1] - t[0]
    n_shift = int(np.ceil(max_offset / h)) + 4
    ext = t[0] - h * np.arange(n_shift, 0, -1)
    g = rrc_value(alpha, np.concatenate([ext, t]))
    u = w * rrc_value(alpha, t)
    # c[k] = sum_i g[k + i] u[i]; offset x_j = j h pairs with k = n_shift - j
    c = signal.correlate(g, u, mode="valid", method="fft")
    x = h * np.arange(n_shift + 1)
    return CubicSpline(x, c[::-1])


def _scan_row(alpha: float, config: IsiScanConfig, step: float) -> np.ndarray:
    spacing = 1.0 - np.asarray(config.tau_grid, dtype=float)
    lags = np.arange(1, config.max_lag + 1)
    offsets = np.multiply.outer(spacing, lags)
    spline = truncated_autocorrelation(alpha, config.trunc_halfwidth, float(offsets.max()), step)
    return spline(offsets)


def scan_plane(config: IsiScanConfig, threads: int = 1, step: float = DEFAULT_STEP) -> IsiCountGrid:
    """Count ISI taps above each threshold for every (alpha, tau) cell.

    Rows (one per alpha) are independent; ``threads`` only changes speed.
    """
    alphas = np.asarray(config.alpha_grid, dtype=float)
    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        rows = list(pool.map(lambda a: _scan_row(a, config, step), alphas))
    taps = np.stack(rows)  # positive lags only; taps are even in the lag
    mus = np.asarray(config.mu_thresholds, dtype=float)
    counts = 2 * (np.abs(taps)[..., None] > mus).sum(axis=2)
    return IsiCountGrid(alphas, np.asarray(config.tau_grid, dtype=float),
                        tuple(config.mu_thresholds), counts.astype(int), taps)


@dataclass(frozen=True)
class Region:
    alpha_min: float
    alpha_max: float
    tau_min: float
    tau_max: float
    n_cells: int

    def contains(self, alpha: float, tau: float, tol: float = 1e-9) -> bool:
        return (self.alpha_min - tol <= alpha <= self.alpha_max + tol
                and self.tau_min - tol <= tau <= self.tau_max + tol)


def find_two_tap_regions(grid: IsiCountGrid, mu: float) -> list[Region]:
    """Bounding boxes of 4-connected clusters of count-2 cells."""
    mask = grid.counts[:, :, grid.mu_index(mu)] == 2
    labels, n = ndimage.label(mask)
    regions = []
    for lab, sl in enumerate(ndimage.find_objects(labels), start=1):
        ia, it = sl
        regions.append(Region(
            float(grid.alpha_grid[ia.start]), float(grid.alpha_grid[ia.stop - 1]),
            float(grid.tau_grid[it.start]), float(grid.tau_grid[it.stop - 1]),
            int((labels[sl] == lab).sum()),
        ))
    return regions
