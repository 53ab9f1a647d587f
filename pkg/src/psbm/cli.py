"""Command-line front end.

Exit status: 0 on success, 1 when a verification fails, 2 for usage or
configuration errors, 3 for I/O failures.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import io
import json
import logging
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .ber import SimConfig, measure_gap, run_ber, throughput_report
from .isi_map import IsiScanConfig, find_two_tap_regions, scan_plane
from .pulse import (PulseSpec, lemma1_exact, pulse_inner_product, psd, truncation_study, write_psd_csv,
                    write_truncation_csv)
from .sequences import (Frame, alternating_pilot_sequence, build_frame, near_orthogonality_probability,
                        noiseless_samples, orthogonality_probability)

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
PRESETS = ("fig1", "fig2", "fig5", "fig7", "fig8", "fig9", "fig10")

# two-tap regions quoted for the (alpha, tau) plane at mu = 0.01
REFERENCE_REGIONS = (
    ("psbm", 1.0, 1.0, 0.5, 0.5),
    ("near-1.07", 1.07, 1.07, 0.70, 0.71),
    ("high-rolloff", 1.65, 1.85, 0.47, 0.50),
)

log = logging.getLogger("psbm")


class ConfigError(Exception):
    pass


# --------------------------------------------------------------------------
# config handling
# --------------------------------------------------------------------------

def _read_config(args) -> configparser.ConfigParser | None:
    cp = configparser.ConfigParser(interpolation=None)
    if args.config and args.preset:
        raise ConfigError("--config and --preset are mutually exclusive")
    try:
        if args.preset:
            if args.preset not in PRESETS:
                raise ConfigError(f"unknown preset {args.preset!r}; choose from {list(PRESETS)}")
            text = resources.files("psbm").joinpath("presets", f"{args.preset}.ini").read_text()
            cp.read_string(text, source=f"<preset {args.preset}>")
        elif args.config:
            with open(args.config, encoding="utf-8") as fh:
                cp.read_file(fh)
        else:
            return None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return cp


def parse_float_list(text: str) -> list[float]:
    """'0, 2, 4' or 'start:stop:step' (stop inclusive)."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ValueError(f"range must be start:stop:step with step > 0, got {text!r}")
        n = int(np.floor((parts[1] - parts[0]) / parts[2] + 1e-9)) + 1
        return [round(parts[0] + i * parts[2], 10) for i in range(max(n, 0))]
    return [float(p) for p in text.replace(";", ",").split(",") if p.strip()]


_SIM_FIELDS = {f.name: f for f in dataclasses.fields(SimConfig)}


def _sim_from_section(name: str, section) -> tuple[SimConfig | None, list[str]]:
    errs, kw = [], {}
    for key, raw in section.items():
        if key in ("target_ber",):
            continue
        if key not in _SIM_FIELDS:
            errs.append(f"[{name}] {key}: unknown field")
            continue
        default = _SIM_FIELDS[key].default
        try:
            if key == "snr_db":
                kw[key] = tuple(parse_float_list(raw))
            elif isinstance(default, bool):
                kw[key] = section.getboolean(key)
            elif isinstance(default, int):
                kw[key] = int(raw, 0) if isinstance(raw, str) else int(raw)
            elif isinstance(default, float):
                kw[key] = float(raw)
            else:
                kw[key] = raw.strip()
        except ValueError as exc:
            errs.append(f"[{name}] {key}: cannot parse {raw!r} ({exc})")
    kw.setdefault("name", name)
    if errs:
        return None, errs
    cfg = SimConfig(**kw)
    return cfg, [f"[{name}] {e}" for e in cfg.errors()]


# --------------------------------------------------------------------------
# output helpers
# --------------------------------------------------------------------------

class Outputs:
    def __init__(self, out_dir: str):
        self.dir = Path(out_dir)
        self.files: list[str] = []

    def write(self, name: str, text: str) -> Path:
        path = self.dir / name
        try:
            self.dir.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
        self.files.append(str(path))
        return path

    def manifest(self, command: str, params: dict, seed, t0: float) -> None:
        doc = {
            "command": command,
            "parameters": params,
            "tool_version": __version__,
            "master_seed": seed,
            "outputs": list(self.files),
            "wall_clock_s": time.perf_counter() - t0,
        }
        self.write("manifest.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x: float) -> str:
    return repr(float(x))


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_pulse_verify(args, cp, out: Outputs) -> tuple[int, dict]:
    sec = cp["pulse-verify"] if cp is not None and cp.has_section("pulse-verify") else {}
    d_max = args.d_max if args.d_max is not None else float(sec.get("d_max", 8.0))
    n_max = int(sec.get("n_max", 12))
    tol = args.tol if args.tol is not None else float(sec.get("tolerance", 1e-3))
    d_grid = parse_float_list(sec.get("d_grid", "")) or sorted({1.0, 2.0, 3.0, 4.0, 6.0, 8.0, d_max} - {0.0})
    d_grid = [d for d in d_grid if d <= d_max] or [d_max]
    if d_max <= 0:
        raise ConfigError("d_max must be positive")
    if d_max < 4:
        log.warning("d_max=%g is below 4; truncation errors are expected", d_max)
    rows = truncation_study(range(0, 3), d_grid)
    buf = io.StringIO()
    write_truncation_csv(rows, buf)
    out.write("truncation.csv", buf.getvalue())
    status = EXIT_OK
    lines = []
    for n in range(n_max + 1):
        num = pulse_inner_product(1.0, n / 4.0, d_max)
        exact = lemma1_exact(n)
        err = abs(num - exact)
        ok = err <= tol
        status = status if ok else EXIT_VERIFY
        lines.append((n, _fmt(d_max), _fmt(num), _fmt(exact), _fmt(err), "PASS" if ok else "FAIL"))
        print(f"{'PASS' if ok else 'FAIL'} n={n:2d} d={d_max:g} numeric={num:+.9f} exact={exact:+.9f} err={err:.2e}")
    out.write("lemma_check.csv", _csv_text(["n", "d", "numeric", "exact", "abs_err", "status"], lines))
    return status, {"d_max": d_max, "n_max": n_max, "tolerance": tol, "d_grid": d_grid}


def _isi_config(cp) -> IsiScanConfig:
    if cp is None or not cp.has_section("isi-map"):
        return IsiScanConfig.default()
    sec = cp["isi-map"]
    kw = {}
    errs = []
    try:
        if "alpha" in sec:
            kw["alpha_grid"] = tuple(parse_float_list(sec["alpha"]))
        if "tau" in sec:
            kw["tau_grid"] = tuple(parse_float_list(sec["tau"]))
        if "mu" in sec:
            kw["mu_thresholds"] = tuple(parse_float_list(sec["mu"]))
            if not kw["mu_thresholds"]:
                errs.append("[isi-map] mu: threshold list is empty")
        if "d" in sec:
            kw["trunc_halfwidth"] = float(sec["d"])
        if "max_lag" in sec:
            kw["max_lag"] = int(sec["max_lag"])
    except ValueError as exc:
        errs.append(f"[isi-map] {exc}")
    unknown = set(sec) - {"alpha", "tau", "mu", "d", "max_lag"}
    errs.extend(f"[isi-map] {k}: unknown field" for k in sorted(unknown))
    if errs:
        raise ConfigError("\n".join(errs))
    try:
        return IsiScanConfig.default(**kw)
    except ValueError as exc:
        raise ConfigError(f"[isi-map] {exc}") from exc


def cmd_isi_map(args, cp, out: Outputs) -> tuple[int, dict]:
    cfg = _isi_config(cp)
    grid = scan_plane(cfg, threads=args.threads)
    buf = io.StringIO()
    grid.write_csv(buf)
    out.write("isi_map.csv", buf.getvalue())
    rows = []
    for mu in grid.mu_thresholds:
        for reg in find_two_tap_regions(grid, mu):
            rows.append((_fmt(mu), _fmt(reg.alpha_min), _fmt(reg.alpha_max), _fmt(reg.tau_min),
                         _fmt(reg.tau_max), reg.n_cells))
    out.write("regions.csv", _csv_text(["mu", "alpha_min", "alpha_max", "tau_min", "tau_max", "cells"], rows))
    # summary of the reference regions: tau as given and mirrored to 1 - tau
    mu_ref = 0.01 if any(np.isclose(m, 0.01) for m in grid.mu_thresholds) else grid.mu_thresholds[-1]
    regions = find_two_tap_regions(grid, mu_ref)
    print(f"two-tap regions at mu={mu_ref:g}: {len(regions)}")
    for label, a0, a1, t0, t1 in REFERENCE_REGIONS:
        for coord, (u0, u1) in (("tau", (t0, t1)), ("1-tau", (1 - t1, 1 - t0))):
            hits = [r for r in regions
                    if r.alpha_min <= a1 + 1e-9 and r.alpha_max >= a0 - 1e-9
                    and r.tau_min <= u1 + 1e-9 and r.tau_max >= u0 - 1e-9]
            state = "present" if hits else "absent"
            detail = "; ".join(f"alpha {r.alpha_min:.2f}-{r.alpha_max:.2f}, tau {r.tau_min:.2f}-{r.tau_max:.2f}"
                               for r in hits)
            print(f"  {label:13s} alpha {a0:.2f}-{a1:.2f}, {coord} {u0:.2f}-{u1:.2f}: {state}"
                  + (f" ({detail})" if detail else ""))
    params = {"alpha_grid": [float(a) for a in cfg.alpha_grid], "tau_grid": [float(t) for t in cfg.tau_grid],
              "mu_thresholds": list(cfg.mu_thresholds), "d": cfg.trunc_halfwidth, "max_lag": cfg.max_lag}
    if len(cfg.alpha_grid) * len(cfg.tau_grid) > 50:
        params = {k: v for k, v in params.items() if k not in ("alpha_grid", "tau_grid")}
        params.update(alpha=[cfg.alpha_grid[0], cfg.alpha_grid[-1], len(cfg.alpha_grid)],
                      tau=[cfg.tau_grid[0], cfg.tau_grid[-1], len(cfg.tau_grid)])
    return EXIT_OK, params


def cmd_psd(args, cp, out: Outputs) -> tuple[int, dict]:
    sec = cp["psd"] if cp is not None and cp.has_section("psd") else {}
    alpha = args.alpha if args.alpha is not None else float(sec.get("alpha", 1.0))
    tau = args.tau if args.tau is not None else float(sec.get("tau", 0.5))
    fmax = float(sec.get("fmax", 1.5))
    n_points = int(sec.get("points", 601))
    if not 0 <= tau < 1:
        raise ConfigError("tau must satisfy 0 <= tau < 1")
    pulse = PulseSpec(alpha, 1.0, 4.0, 16)
    f = np.linspace(-fmax, fmax, n_points)
    values = psd(pulse, [1.0], f, symbol_period=1.0 - tau)
    buf = io.StringIO()
    write_psd_csv(f, values, buf)
    out.write("psd.csv", buf.getvalue())
    return EXIT_OK, {"alpha": alpha, "tau": tau, "fmax": fmax, "points": n_points}


def cmd_frame(args, cp, out: Outputs) -> tuple[int, dict]:
    if args.file:
        try:
            text = Path(args.file).read_text(encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot read {args.file}: {exc}") from exc
        try:
            frame = Frame.loads(text)
        except ValueError as exc:
            raise ConfigError(f"{args.file}: {exc}") from exc
        params = {"file": args.file}
    else:
        data = np.array([complex(x) for x in args.data.split(",")]) if args.data else np.ones(args.ld)
        if args.design == "alternating":
            frame = alternating_pilot_sequence(data, args.pilot)
        else:
            frame = build_frame(args.ld, args.lp, data, args.pilot)
        params = {"design": args.design, "ld": args.ld, "lp": args.lp, "pilot": args.pilot,
                  "data": [[float(d.real), float(d.imag)] for d in data]}
    out.write("frame.txt", frame.dumps())
    y = noiseless_samples(frame)
    rows = [(i, role, _fmt(v.real), _fmt(v.imag), _fmt(s.real), _fmt(s.imag))
            for i, (role, v, s) in enumerate(zip(frame.roles, frame.values, y))]
    out.write("frame_samples.csv", _csv_text(["index", "role", "re", "im", "sample_re", "sample_im"], rows))
    sys.stdout.write(frame.dumps())
    return EXIT_OK, params


def cmd_spread_prob(args, cp, out: Outputs) -> tuple[int, dict]:
    sec = cp["spread-prob"] if cp is not None and cp.has_section("spread-prob") else {}
    n_max = args.n_max if args.n_max is not None else int(sec.get("n_max", 64))
    kappas = parse_float_list(args.kappa) if args.kappa else parse_float_list(sec.get("kappa", "0.05, 0.1"))
    if n_max < 2:
        raise ConfigError("n_max must be at least 2")
    if any(k < 0 for k in kappas):
        raise ConfigError("kappa values must be non-negative")
    header = ["N", "p_orth"] + [f"p_kappa_{k:g}" for k in kappas]
    rows = []
    for n in range(2, n_max + 1):
        rows.append([n, _fmt(orthogonality_probability(n))]
                    + [_fmt(near_orthogonality_probability(n, k)) for k in kappas])
    out.write("spread_prob.csv", _csv_text(header, rows))
    return EXIT_OK, {"n_max": n_max, "kappa": kappas}


def cmd_ber(args, cp, out: Outputs) -> tuple[int, dict]:
    if cp is None:
        raise ConfigError("ber needs --config or --preset")
    sections = [s for s in cp.sections() if s != "paired"]
    if not sections:
        raise ConfigError("config defines no experiments")
    seed_in_config = "master_seed" in cp.defaults() or any("master_seed" in cp[s] for s in sections)
    if args.seed is None and not seed_in_config:
        log.warning("no seed given; using the default master_seed 0")
    configs, errs = [], []
    for name in sections:
        cfg, e = _sim_from_section(name, cp[name])
        errs.extend(e)
        if cfg is not None:
            if args.seed is not None:
                cfg = cfg.replace(master_seed=args.seed)
            configs.append(cfg)
    if args.paired and configs:
        seed = configs[0].master_seed
        configs = [c.replace(master_seed=seed) for c in configs]
    pairs, target = [], 1e-3
    if cp.has_section("paired"):
        target = float(cp["paired"].get("target_ber", target))
        for item in cp["paired"].get("pairs", "").split(","):
            if item.strip():
                a, _, b = item.partition(":")
                pairs.append((a.strip(), b.strip()))
                for x in (a.strip(), b.strip()):
                    if x not in sections:
                        errs.append(f"[paired] pairs: unknown experiment {x!r}")
    if errs:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(errs))
    curves = {}
    for cfg in configs:
        curve = run_ber(cfg, threads=args.threads)
        curves[cfg.name] = curve
        stem = f"{cfg.name}_{cfg.scheme}_{cfg.detector}_seed{cfg.master_seed}"
        payload = json.loads(curve.to_json())
        payload["manifest"].pop("wall_clock_s", None)
        out.write(stem + ".json", json.dumps(payload, indent=2, sort_keys=True) + "\n")
        out.write(stem + ".csv", curve.to_csv())
        tp = throughput_report(cfg)
        print(f"{cfg.name}: " + ", ".join(f"{p.snr_db:g} dB {p.ber:.3e}" for p in curve.points)
              + f" | relative time {tp['relative_time']:g}")
    status = EXIT_OK
    gaps = []
    if args.paired or pairs:
        for a, b in pairs:
            try:
                g = measure_gap(curves[a], curves[b], target)
                gaps.append((a, b, _fmt(target), _fmt(g)))
                print(f"gap {a} - {b} at BER {target:g}: {g:.3f} dB")
            except ValueError as exc:
                print(f"gap {a} - {b}: {exc}")
                gaps.append((a, b, _fmt(target), "nan"))
                status = EXIT_VERIFY
        if gaps:
            out.write("gaps.csv", _csv_text(["curve_a", "curve_b", "target_ber", "gap_db"], gaps))
    params = {"experiments": [c.to_dict() for c in configs], "paired": bool(args.paired),
              "pairs": [list(p) for p in pairs], "target_ber": target}
    return status, params


COMMANDS = {
    "pulse-verify": cmd_pulse_verify,
    "isi-map": cmd_isi_map,
    "psd": cmd_psd,
    "frame": cmd_frame,
    "spread-prob": cmd_spread_prob,
    "ber": cmd_ber,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--preset", help=f"bundled configuration, one of {', '.join(PRESETS)}")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--seed", type=lambda s: int(s, 0), default=None, help="master seed (unsigned 64-bit)")
    common.add_argument("--threads", type=int, default=1, help="worker threads; affects speed only")

    parser = argparse.ArgumentParser(prog="psbm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pulse-verify", parents=[common], help="truncated-integral check of the 100%% roll-off pulse")
    p.add_argument("--d-max", type=float, default=None, help="truncation half-width in pulse periods")
    p.add_argument("--tol", type=float, default=None, help="absolute tolerance (default 1e-3)")

    sub.add_parser("isi-map", parents=[common], help="ISI tap counts over the (alpha, tau) plane")

    p = sub.add_parser("psd", parents=[common], help="power spectral density of uncorrelated symbols")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--tau", type=float, default=None)

    p = sub.add_parser("frame", parents=[common], help="build or validate a pilot/data frame")
    p.add_argument("--file", help="frame description to validate and echo")
    p.add_argument("--design", choices=("pilot_frame", "alternating"), default="pilot_frame")
    p.add_argument("--ld", type=int, default=4)
    p.add_argument("--lp", type=int, default=1)
    p.add_argument("--pilot", type=float, default=1.0)
    p.add_argument("--data", help="comma-separated data symbols (Python complex syntax)")

    p = sub.add_parser("spread-prob", parents=[common], help="orthogonality probabilities of random +-1 sequences")
    p.add_argument("--n-max", type=int, default=None)
    p.add_argument("--kappa", default=None, help="comma-separated kappa values")

    p = sub.add_parser("ber", parents=[common], help="Monte Carlo BER curves")
    p.add_argument("--paired", action="store_true", help="share one seed across experiments and report gaps")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s", stream=sys.stderr)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        parser.error("--seed must be an unsigned 64-bit integer")
    if args.threads < 1:
        parser.error("--threads must be positive")
    out = Outputs(args.out)
    t0 = time.perf_counter()
    try:
        cp = _read_config(args)
        status, params = COMMANDS[args.command](args, cp, out)
        seed = args.seed
        if seed is None and args.command == "ber":
            exps = params.get("experiments", [])
            seed = exps[0]["master_seed"] if exps else 0
        out.manifest(args.command, params, seed, t0)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return status


if __name__ == "__main__":
    sys.exit(main())
