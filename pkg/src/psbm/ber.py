"""
Seeded Monte Carlo BER engine.

Every SNR point draws blocks in fixed-size chunks. Chunk c at SNR index j
uses three independent streams derived from
``SeedSequence(master_seed, spawn_key=(j, c, purpose))`` for the data,
the fading and the noise. Chunks are accumulated strictly in order and the
point stops after the first chunk that reaches ``min_errors`` or
``max_bits``, so results do not depend on the number of worker threads.

SNR convention: gamma_b = 1 / (2 sigma^2) with sigma^2 the noise variance
per real dimension, i.e. the complex noise variance per sample is
N0 = 1 / (k gamma_b) for k bits per unit-energy symbol.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

from . import __version__
from .detection import (MLDetector, despread, diff_decode_sequence, lmmse_estimate, nearest_index,
                        nyquist_diff_decode, pilot_combiner, repetition_combine, sic_detect)
from .link import build_isi_matrix, complex_gaussian, factorize
from .sequences import (alternating_pilot_sequence, bits_per_symbol, build_frame, diff_frame,
                        make_spreading_pair, psk_alphabet, repetition_sequences, spread_sequence)

SCHEMES = ("nyquist", "psbm")
DESIGNS = ("plain", "pilot_frame", "alternating_pilot", "repetition", "spreading", "differential")
CHANNELS = ("awgn", "rayleigh_block", "rayleigh_symbol")
CSI_MODES = ("perfect", "estimated")
DETECTORS = ("ml_wmf", "ml_plain", "slicer", "sic", "diff")
MODULATIONS = {"bpsk": 2, "qpsk": 4, "8psk": 8}

DATA, FADING, NOISE = 0, 1, 2

# (scheme, design) -> allowed detectors
COMPATIBILITY = {
    ("nyquist", "plain"): ("slicer",),
    ("nyquist", "pilot_frame"): ("slicer",),
    ("nyquist", "alternating_pilot"): ("slicer",),
    ("nyquist", "repetition"): ("slicer",),
    ("nyquist", "differential"): ("diff",),
    ("psbm", "plain"): ("ml_wmf", "ml_plain", "sic"),
    ("psbm", "pilot_frame"): ("ml_wmf", "ml_plain"),
    ("psbm", "alternating_pilot"): ("ml_wmf", "ml_plain"),
    ("psbm", "repetition"): ("slicer",),
    ("psbm", "spreading"): ("slicer",),
    ("psbm", "differential"): ("diff",),
}


@dataclass
class SimConfig:
    scheme: str = "nyquist"
    design: str = "plain"
    channel: str = "awgn"
    csi: str = "perfect"
    detector: str = "slicer"
    modulation: str = "bpsk"
    ld: int = 4
    lp: int = 1
    snr_db: tuple = (0.0, 2.0, 4.0, 6.0, 8.0)
    min_errors: int = 200
    max_bits: int = 10_000_000
    master_seed: int = 0
    blocks_per_chunk: int = 4096
    noise_method: str = "triangular"
    repetition_n: int = 2
    spreading_kind: str = "walsh"
    spreading_n: int = 4
    pilot: float = 1.0
    name: str = ""

    def errors(self) -> list[str]:
        """Every problem with the configuration (empty when valid)."""
        errs = []

        def choice(name, value, options):
            if value not in options:
                errs.append(f"{name}: {value!r} is not one of {list(options)}")

        choice("scheme", self.scheme, SCHEMES)
        choice("design", self.design, DESIGNS)
        choice("channel", self.channel, CHANNELS)
        choice("csi", self.csi, CSI_MODES)
        choice("detector", self.detector, DETECTORS)
        choice("modulation", self.modulation, MODULATIONS)
        choice("noise_method", self.noise_method, ("triangular", "fir"))
        choice("spreading_kind", self.spreading_kind, ("walsh", "random"))
        for name in ("ld", "lp", "min_errors", "max_bits", "blocks_per_chunk", "repetition_n", "spreading_n"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                errs.append(f"{name}: must be a positive integer, got {v!r}")
        if len(self.snr_db) == 0:
            errs.append("snr_db: must be a non-empty list")
        elif not all(np.isfinite(float(v)) for v in self.snr_db):
            errs.append("snr_db: values must be finite")
        if not isinstance(self.master_seed, (int, np.integer)) or not 0 <= self.master_seed < 2 ** 64:
            errs.append(f"master_seed: must be an unsigned 64-bit integer, got {self.master_seed!r}")
        if not self.pilot > 0:
            errs.append("pilot: must be positive")
        if errs:
            return errs
        allowed = COMPATIBILITY.get((self.scheme, self.design))
        if allowed is None:
            errs.append(f"design {self.design!r} is not available for scheme {self.scheme!r}")
        elif self.detector not in allowed:
            errs.append(f"detector {self.detector!r} is incompatible with {self.scheme}/{self.design}; "
                        f"use one of {list(allowed)}")
        if self.csi == "estimated" and self.design not in ("pilot_frame", "alternating_pilot"):
            errs.append("csi: estimated CSI needs design pilot_frame or alternating_pilot")
        if self.csi == "estimated" and self.channel == "rayleigh_symbol":
            errs.append("csi: estimated CSI is only defined for block fading or AWGN")
        if self.design == "differential" and self.channel != "awgn":
            errs.append("channel: differential designs are simulated over AWGN only")
        if self.detector == "sic" and self.modulation != "bpsk":
            errs.append("modulation: SIC is implemented for BPSK")
        if self.design == "spreading":
            if self.spreading_kind == "walsh" and self.spreading_n & (self.spreading_n - 1):
                errs.append("spreading_n: Walsh spreading needs a power of two")
            if self.spreading_n < 2:
                errs.append("spreading_n: must be >= 2")
        if self.design == "repetition" and self.repetition_n < 2:
            errs.append("repetition_n: must be >= 2")
        if self.channel == "rayleigh_symbol" and self.design in ("repetition", "spreading"):
            errs.append(f"channel: {self.design} is simulated with block fading or AWGN only")
        return errs

    def validate(self) -> "SimConfig":
        errs = self.errors()
        if errs:
            raise ValueError("invalid simulation config:\n  " + "\n  ".join(errs))
        return self

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["snr_db"] = [float(v) for v in self.snr_db]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown config field(s): {unknown}")
        d = dict(d)
        if "snr_db" in d:
            d["snr_db"] = tuple(float(v) for v in d["snr_db"])
        return cls(**d)

    def replace(self, **kw) -> "SimConfig":
        return dataclasses.replace(self, **kw)


@dataclass(frozen=True)
class BerPoint:
    snr_db: float
    bits: int
    errors: int

    @property
    def ber(self) -> float:
        return self.errors / self.bits if self.bits else float("nan")

    @property
    def ci(self) -> float:
        """95% normal-approximation half-width."""
        p = self.ber
        return 1.96 * math.sqrt(p * (1.0 - p) / self.bits) if self.bits else float("nan")


@dataclass
class BerCurve:
    config: SimConfig
    points: list = field(default_factory=list)
    manifest: dict = field(default_factory=dict)

    @property
    def snr_db(self) -> np.ndarray:
        return np.array([p.snr_db for p in self.points])

    @property
    def ber(self) -> np.ndarray:
        return np.array([p.ber for p in self.points])

    @property
    def ci(self) -> np.ndarray:
        return np.array([p.ci for p in self.points])

    def point(self, snr_db: float) -> BerPoint:
        for p in self.points:
            if abs(p.snr_db - snr_db) < 1e-9:
                return p
        raise KeyError(snr_db)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["snr_db", "bits", "errors", "ber", "ci"])
        for p in self.points:
            writer.writerow([repr(float(p.snr_db)), p.bits, p.errors, repr(p.ber), repr(p.ci)])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "config": self.config.to_dict(),
            "points": [{"snr_db": p.snr_db, "bits": p.bits, "errors": p.errors,
                        "ber": p.ber, "ci": p.ci} for p in self.points],
            "manifest": self.manifest,
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "BerCurve":
        doc = json.loads(text)
        pts = [BerPoint(p["snr_db"], p["bits"], p["errors"]) for p in doc["points"]]
        return cls(SimConfig.from_dict(doc["config"]), pts, doc.get("manifest", {}))


def snr_to_sigma(gamma_b_db: float, bits_per_symbol: int = 1) -> float:
    """Noise standard deviation per real dimension, sqrt(1 / (2 k gamma_b))."""
    if math.isinf(gamma_b_db) and gamma_b_db > 0:
        return 0.0
    gamma = 10.0 ** (gamma_b_db / 10.0)
    return math.sqrt(1.0 / (2.0 * bits_per_symbol * gamma))


def theoretical_bpsk_awgn(gamma_b) -> np.ndarray | float:
    """Q(sqrt(2 gamma_b)) for linear gamma_b."""
    g = np.asarray(gamma_b, dtype=float)
    if np.any(g < 0):
        raise ValueError("gamma_b must be non-negative")
    out = 0.5 * erfc(np.sqrt(g))
    return float(out) if out.ndim == 0 else out


def _stream(cfg: SimConfig, snr_idx: int, chunk: int, purpose: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(cfg.master_seed), spawn_key=(snr_idx, chunk, purpose))
    return np.random.Generator(np.random.PCG64(ss))


class _Scenario:
    """Precomputed frame layout and receiver for one configuration."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.m = MODULATIONS[cfg.modulation]
        self.k = bits_per_symbol(self.m)
        self.alphabet = psk_alphabet(self.m)
        p = cfg.pilot
        design = cfg.design
        self.pair = None
        if design == "plain":
            self.template = np.zeros(cfg.ld, dtype=complex)
            self.data_pos = np.arange(cfg.ld)
        elif design == "pilot_frame":
            fr = build_frame(cfg.ld, cfg.lp, np.zeros(cfg.ld), p)
            self.template, self.data_pos = fr.values, fr.data_positions
            self.pilot_pos = fr.pilot_positions
        elif design == "alternating_pilot":
            fr = alternating_pilot_sequence(np.zeros(cfg.ld), p)
            self.template, self.data_pos = fr.values, fr.data_positions
            self.pilot_pos = fr.pilot_positions
        elif design == "differential":
            self.template = np.ones(cfg.ld + 1, dtype=complex)
            self.data_pos = np.arange(1, cfg.ld + 1)
        elif design == "repetition":
            nyq, ps = repetition_sequences(cfg.repetition_n, 1.0)
            self.template = nyq if cfg.scheme == "nyquist" else ps
            self.data_pos = np.array([0])
        elif design == "spreading":
            self.pair = make_spreading_pair(cfg.spreading_kind, cfg.spreading_n,
                                            np.random.default_rng(np.random.SeedSequence(
                                                int(cfg.master_seed), spawn_key=(2 ** 31,))))
            self.template = spread_sequence(1.0, 1.0, self.pair)
            self.data_pos = np.array([0, 1])
        self.n = self.template.size
        self.n_data = self.data_pos.size
        self.a = build_isi_matrix(self.n) if cfg.scheme == "psbm" else np.eye(self.n)
        self.a0 = factorize(self.a) if cfg.scheme == "psbm" else np.eye(self.n)
        self.ml = None
        if cfg.detector in ("ml_wmf", "ml_plain"):
            self.ml = MLDetector(self.n, self.alphabet, self.data_pos, self.template,
                                 use_wmf=cfg.detector == "ml_wmf")

    # -- transmitted blocks --------------------------------------------------
    def symbols(self, idx: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        data = self.alphabet[idx]
        batch = idx.shape[0]
        if cfg.design == "differential":
            return diff_frame(data)
        if cfg.design == "repetition":
            return data[:, :1] * self.template[None, :]
        if cfg.design == "spreading":
            s = np.empty((batch, self.n), dtype=complex)
            s[:, 0::2] = data[:, 1:2] * self.pair.c2
            s[:, 1::2] = data[:, 0:1] * self.pair.c1
            return s
        s = np.tile(self.template, (batch, 1))
        s[:, self.data_pos] = data
        return s

    # -- receiver ------------------------------------------------------------
    def channel_estimate(self, r: np.ndarray, h: np.ndarray, n0: float):
        cfg = self.cfg
        if cfg.csi == "perfect":
            return h
        prior = 1.0  # unit-power Rayleigh prior, also used for AWGN runs
        if cfg.design == "pilot_frame":
            # pilot samples are free of data ISI: zero separators on both sides
            q = (self.template @ self.a)[self.pilot_pos]
            cov = n0 * self.a[np.ix_(self.pilot_pos, self.pilot_pos)]
            return lmmse_estimate(r[:, self.pilot_pos], q, cov, prior).h_hat
        comb = pilot_combiner(r, "all_pilots").value
        npil = self.pilot_pos.size
        return lmmse_estimate(comb[:, None], [npil * cfg.pilot], [[npil * n0]], prior).h_hat

    def detect(self, r: np.ndarray, h_hat) -> np.ndarray:
        """Decided data-symbol indices, shape (batch, n_data)."""
        cfg = self.cfg
        alphabet = self.alphabet
        h = np.asarray(h_hat)
        hcol = h[:, None] if h.ndim == 1 else h
        if self.ml is not None:
            return self.ml.detect_indices(r, h_hat)
        if cfg.design == "differential":
            if cfg.scheme == "psbm":
                dec = diff_decode_sequence(r, alphabet, cfg.ld)
            else:
                dec = nyquist_diff_decode(r, alphabet)
            return nearest_index(dec, alphabet)
        if cfg.detector == "sic":
            a_hat, b_hat = sic_detect(r, h_hat, alphabet)
            s_hat = np.empty(r.shape, dtype=complex)
            s_hat[:, 0::2], s_hat[:, 1::2] = a_hat, b_hat
            return nearest_index(s_hat, alphabet)
        if cfg.design == "repetition":
            z = repetition_combine(r[:, 0::2] if cfg.scheme == "nyquist" else r, cfg.scheme)
            return nearest_index(z[:, None] / hcol, alphabet)
        if cfg.design == "spreading":
            res = despread(r[:, 1::2], r[:, 0::2], self.pair)
            z = np.stack([res.d1, res.d2], axis=1)
            return nearest_index(z / hcol, alphabet)
        # nyquist slicer on data positions
        rd = r[:, self.data_pos]
        hd = hcol[:, self.data_pos] if (h.ndim == 2 and h.shape[1] == self.n) else hcol
        return nearest_index(rd / hd, alphabet)

    # -- one chunk -------------------------------------------------------------
    def run_chunk(self, snr_idx: int, chunk: int, n0: float) -> tuple[int, int]:
        cfg = self.cfg
        b = cfg.blocks_per_chunk
        rng_d = _stream(cfg, snr_idx, chunk, DATA)
        rng_f = _stream(cfg, snr_idx, chunk, FADING)
        rng_n = _stream(cfg, snr_idx, chunk, NOISE)
        idx = rng_d.integers(0, self.m, size=(b, self.n_data))
        s = self.symbols(idx)
        if cfg.channel == "awgn":
            h = np.ones(b, dtype=complex)
        elif cfg.channel == "rayleigh_block":
            h = complex_gaussian(rng_f, b)
        else:
            h = complex_gaussian(rng_f, (b, self.n))
        hcol = h[:, None] if h.ndim == 1 else h
        u = complex_gaussian(rng_n, (b, self.n + 1), n0)
        if cfg.scheme == "psbm" and cfg.noise_method == "fir":
            w = (u[:, 1:] + u[:, :-1]) / np.sqrt(2.0)
        elif cfg.scheme == "psbm":
            w = u[:, :-1] @ self.a0.T
        else:
            w = u[:, :-1]
        r = (s @ self.a) * hcol + w
        h_hat = self.channel_estimate(r, h, n0)
        dec = self.detect(r, h_hat)
        diff = gray_labels(dec) ^ gray_labels(idx)
        errors = int(sum(np.count_nonzero((diff >> i) & 1) for i in range(self.k)))
        return errors, b * self.n_data * self.k


def gray_labels(indices: np.ndarray) -> np.ndarray:
    ind = np.asarray(indices, dtype=np.int64)
    return ind ^ (ind >> 1)


def _run_point(sc: _Scenario, snr_idx: int, snr_db: float, pool: ThreadPoolExecutor | None,
               threads: int) -> BerPoint:
    cfg = sc.cfg
    n0 = 2.0 * snr_to_sigma(snr_db, sc.k) ** 2
    bits = errors = 0
    chunk = 0
    while True:
        wave = list(range(chunk, chunk + max(1, threads)))
        if pool is None:
            results = [sc.run_chunk(snr_idx, c, n0) for c in wave]
        else:
            results = list(pool.map(lambda c: sc.run_chunk(snr_idx, c, n0), wave))
        for e, nb in results:
            errors += e
            bits += nb
            chunk += 1
            if errors >= cfg.min_errors or bits >= cfg.max_bits:
                return BerPoint(float(snr_db), bits, errors)


def run_ber(cfg: SimConfig, threads: int = 1) -> BerCurve:
    """Simulate every SNR point of ``cfg``; ``threads`` changes speed only."""
    cfg.validate()
    sc = _Scenario(cfg)
    t0 = time.perf_counter()
    threads = max(1, int(threads))
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        points = [_run_point(sc, j, s, pool, threads) for j, s in enumerate(cfg.snr_db)]
    finally:
        if pool is not None:
            pool.shutdown()
    manifest = {
        "tool_version": __version__,
        "master_seed": int(cfg.master_seed),
        "frame": [[float(v.real), float(v.imag)] for v in sc.template],
        "data_positions": [int(i) for i in sc.data_pos],
        "noise_convention": "complex noise variance per sample N0 = 1/(k gamma_b)",
        "wall_clock_s": time.perf_counter() - t0,
    }
    if sc.pair is not None:
        manifest["spreading"] = {"c1": sc.pair.c1.real.tolist(), "c2": sc.pair.c2.real.tolist()}
    return BerCurve(cfg, points, manifest)


def _crossing_db(curve: BerCurve, target: float) -> float:
    snr, ber = curve.snr_db, curve.ber
    order = np.argsort(snr)
    snr, ber = snr[order], ber[order]
    for i in range(len(snr) - 1):
        b0, b1 = ber[i], ber[i + 1]
        if b0 >= target >= b1 and b0 > 0 and b1 > 0 and b0 != b1:
            t = (math.log10(b0) - math.log10(target)) / (math.log10(b0) - math.log10(b1))
            return float(snr[i] + t * (snr[i + 1] - snr[i]))
        if b0 == target:
            return float(snr[i])
    if ber[-1] == target:
        return float(snr[-1])
    raise ValueError(f"curve {curve.config.name or curve.config.scheme!r} does not bracket BER {target}")


def measure_gap(curve_a: BerCurve, curve_b: BerCurve, target_ber: float) -> float:
    """SNR of curve_a minus SNR of curve_b at target_ber (log-linear interpolation)."""
    return _crossing_db(curve_a, target_ber) - _crossing_db(curve_b, target_ber)


def throughput_report(cfg: SimConfig) -> dict:
    """Slots per frame, overhead and transmission time relative to Nyquist.

    PSBM places one symbol every Ts with a 2 Ts pulse; Nyquist signalling
    with the same pulse places one symbol every 2 Ts. Repetition frames are
    already laid out on the Ts grid for both schemes.
    """
    cfg.validate()
    sc = _Scenario(cfg)
    slots = sc.n
    roles_zero = int(np.sum(sc.template == 0)) if cfg.design in ("pilot_frame", "alternating_pilot") else 0
    if cfg.design in ("pilot_frame", "alternating_pilot"):
        pilots = int(sc.pilot_pos.size)
    elif cfg.design == "differential":
        pilots = 1  # reference symbol
    else:
        pilots = 0
    if cfg.design == "repetition":
        n_ts = slots
        nyquist_ts = slots
    else:
        n_ts = slots if cfg.scheme == "psbm" else 2 * slots
        nyquist_ts = 2 * slots
    data_syms = sc.n_data
    return {
        "scheme": cfg.scheme,
        "design": cfg.design,
        "slots": slots,
        "data_symbols": data_syms,
        "pilot_symbols": pilots,
        "zero_symbols": roles_zero,
        "overhead": (slots - data_syms) / slots,
        "duration_ts": n_ts,
        "nyquist_duration_ts": nyquist_ts,
        "relative_time": n_ts / nyquist_ts,
        "symbols_per_ts": slots / n_ts,
    }
