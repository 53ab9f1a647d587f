"""
Oversampled waveform modulator and matched-filter receiver.

This is the validation path for the symbol-rate model in :mod:`psbm.link`:
pulses are placed on a fine grid and the matched filter is a direct
correlation on that grid. Noise is not added here.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .pulse import PulseSpec


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: float  # samples per symbol period Ts
    t0: float  # time of samples[0], in units of Ts
    symbol_period: float = 1.0

    @property
    def dt(self) -> float:
        return self.symbol_period / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        return (self.t0 + np.arange(self.samples.size) / self.sample_rate) * self.symbol_period

    def energy(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2) * self.dt)

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "re", "im"])
        for t, x in zip(self.times, self.samples):
            writer.writerow([repr(float(t)), repr(float(x.real)), repr(float(x.imag))])


def _samples_per_symbol(pulse: PulseSpec, symbol_period: float) -> int:
    step = symbol_period / pulse.dt
    if abs(step - round(step)) > 1e-9 or round(step) < 1:
        raise ValueError("symbol period must be a positive integer number of samples")
    return int(round(step))


def linear_modulate(symbols, pulse: PulseSpec, symbol_period: float) -> Waveform:
    """x(t) = sum_k s_k p(t - k Ts) with p the unit-energy truncated RRC pulse."""
    s = np.asarray(symbols, dtype=complex).ravel()
    if s.size == 0:
        raise ValueError("symbol sequence is empty")
    sps = _samples_per_symbol(pulse, symbol_period)
    _, p = pulse.sample()
    impulses = np.zeros((s.size - 1) * sps + 1, dtype=complex)
    impulses[::sps] = s
    x = np.convolve(impulses, p)
    return Waveform(x, float(sps), -pulse.half_length / sps, symbol_period)


def modulate_nyquist(symbols, pulse: PulseSpec) -> Waveform:
    """Nyquist signalling: one symbol per pulse period."""
    return linear_modulate(symbols, pulse, pulse.period)


def psbm_pulse(symbol_period: float = 1.0, oversampling: int = 16,
               trunc_halfwidth: float = 4.0) -> PulseSpec:
    """The 100% roll-off pulse of period 2 Ts; ``oversampling`` is per 2 Ts."""
    if oversampling % 2:
        raise ValueError("PSBM needs an even number of samples per pulse period")
    return PulseSpec(1.0, 2.0 * symbol_period, trunc_halfwidth, oversampling)


def modulate_psbm(symbols, symbol_period: float = 1.0, oversampling: int = 16,
                  trunc_halfwidth: float = 4.0) -> Waveform:
    """PSBM signal: rrc_1((t - k Ts) / (2 Ts)) / sqrt(2 Ts) per symbol."""
    pulse = psbm_pulse(symbol_period, oversampling, trunc_halfwidth)
    return linear_modulate(symbols, pulse, symbol_period)


def matched_filter_sample(y: Waveform, pulse: PulseSpec, n_symbols: int) -> np.ndarray:
    """Matched-filter output sampled at t = n Ts, n = 0..n_symbols-1.

    The RRC pulse is real and even, so the matched filter is the pulse itself
    and r_n = int y(t) p(t - n Ts) dt. The waveform is taken as zero outside
    its stored samples.
    """
    sps = _samples_per_symbol(pulse, y.symbol_period)
    if abs(y.dt - pulse.dt) > 1e-12 * pulse.dt:
        raise ValueError("waveform and pulse sample grids differ")
    if n_symbols < 1:
        raise ValueError("n_symbols must be positive")
    _, p = pulse.sample()
    half = pulse.half_length
    origin = -y.t0 * y.sample_rate  # sample index of t = 0
    if abs(origin - round(origin)) > 1e-9:
        raise ValueError("t = 0 does not fall on the waveform sample grid")
    centres = int(round(origin)) + sps * np.arange(n_symbols)
    lo = max(0, half - int(centres[0]))
    hi = max(0, int(centres[-1]) + half + 1 - y.samples.size)
    x = np.pad(y.samples, (lo, hi))
    windows = (centres + lo)[:, None] + np.arange(-half, half + 1)
    return (x[windows] @ p) * y.dt


def psbm_matched_filter(y: Waveform, n_symbols: int, oversampling: int = 16,
                        trunc_halfwidth: float = 4.0,
                        mf_halfwidth: float | None = None) -> np.ndarray:
    """PSBM matched filter.

    ``mf_halfwidth`` (in units of 2 Ts) defaults to twice the transmit
    truncation, so the receiver pulse spans the whole support of a
    transmitted replica and only transmit-side truncation remains.
    """
    if mf_halfwidth is None:
        mf_halfwidth = 2.0 * trunc_halfwidth
    pulse = psbm_pulse(y.symbol_period, oversampling, mf_halfwidth)
    return matched_filter_sample(y, pulse, n_symbols)


def sampled_pulse_energy(pulse: PulseSpec) -> float:
    _, p = pulse.sample()
    return float(np.sum(p * p) * pulse.dt)
