"""Command-line front end.

Commands::

    zfmag simulate --config run.json [--out DIR] [--seed N] [--workers N]
    zfmag table1   [--config grid.json] [--cells FILTER] [--realizations N]
    zfmag scan     --config scan.json  [--out DIR]
    zfmag filter   --config run.json   [--out DIR]
    zfmag validate [--inject-error sy-sign]

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 validation failure.  Every run writes plain CSV plus a JSON manifest
embedding the fully resolved configuration and its hash; re-running a
manifest's configuration reproduces the CSV bit for bit (independent of
``--workers``).
"""

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (REFERENCE_T2_US, fit_signal_decay, fit_t2,
                       format_table1, reproduce_table1, spectrum_scan,
                       table1_to_csv)
from .config import ConfigError, config_hash, load_config, resolve_run_config
from .engine import EngineError, run_ensemble
from .hamiltonian import DriveConfig
from .noise import NoiseConfig
from .sequence import (build_sequence, fourier_coefficient,
                       fourier_coefficient_numeric, resonance_tau,
                       response_function)
from .spin1 import SensorParams
from .units import ghz, khz, mhz, to_us, us
from .validation import run_validation

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_VALIDATION = 3


def _write_manifest(out_dir: Path, command: str, resolved: dict,
                    outputs, started: float):
    manifest = {
        "tool": "zfmag",
        "version": __version__,
        "command": command,
        "config_hash": config_hash(resolved),
        "config": resolved,
        "outputs": [str(p.name) for p in outputs],
        "wall_clock_s": round(time.monotonic() - started, 3),
    }
    path = out_dir / f"{command}_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    return path


def cmd_simulate(args) -> int:
    started = time.monotonic()
    raw = load_config(args.config)
    cfg = resolve_run_config(raw)
    if args.seed is not None:
        cfg.resolved["ensemble"]["base_seed"] = args.seed
    if args.realizations is not None:
        cfg.resolved["ensemble"]["n_realizations"] = args.realizations
    n = cfg.resolved["ensemble"]["n_realizations"]
    seed = cfg.resolved["ensemble"]["base_seed"]
    workers = args.workers if args.workers is not None else cfg.workers

    result = run_ensemble(cfg.sensor, cfg.drive, cfg.signal, cfg.sequence,
                          cfg.noise, cfg.integrator, cfg.sampling,
                          n_realizations=n, base_seed=seed, workers=workers)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "timeseries.csv"
    result.write_csv(csv_path)
    doc_path = out_dir / "result.json"
    doc = result.to_document()
    doc["config"] = cfg.resolved
    doc["config_hash"] = config_hash(cfg.resolved)
    doc_path.write_text(json.dumps(doc, indent=2) + "\n")
    manifest = _write_manifest(out_dir, "simulate", cfg.resolved,
                               [csv_path, doc_path], started)
    print(f"wrote {csv_path}, {doc_path}, {manifest}")
    return EXIT_OK


def _parse_cells_filter(spec: str):
    """Parse 'omega_rf=4,control=ldd,t2star=1.8' into grid restrictions."""
    allowed = {"omega_rf": float, "control": str, "t2star": float}
    out = {}
    for item in spec.split(","):
        if not item.strip():
            continue
        if "=" not in item:
            raise ConfigError(f"--cells: expected key=value, got {item!r}")
        key, _, value = item.partition("=")
        key = key.strip()
        if key not in allowed:
            raise ConfigError(f"--cells: unknown key {key!r} "
                              f"(use {sorted(allowed)})")
        kind = allowed[key]
        out.setdefault(key, []).append(
            kind(value.strip().lower() if kind is str else value))
    return out


def cmd_table1(args) -> int:
    started = time.monotonic()
    raw = load_config(args.config) if args.config else {}
    grid = {
        "omega_rf_mhz": raw.get("omega_rf_mhz", [2.0, 4.0, 6.0]),
        "controls": [c.lower() for c in raw.get("controls",
                                                ["none", "dd", "ldd"])],
        "t2star_us": raw.get("t2star_us", [0.9, 1.8, 5.4, 10.0]),
    }
    if args.cells:
        flt = _parse_cells_filter(args.cells)
        if "omega_rf" in flt:
            grid["omega_rf_mhz"] = [w for w in grid["omega_rf_mhz"]
                                    if w in flt["omega_rf"]]
        if "control" in flt:
            grid["controls"] = [c for c in grid["controls"]
                                if c in flt["control"]]
        if "t2star" in flt:
            grid["t2star_us"] = [t for t in grid["t2star_us"]
                                 if t in flt["t2star"]]
    if not all(grid.values()):
        raise ConfigError("--cells filter selects an empty grid")

    n = args.realizations or int(raw.get("n_realizations", 200))
    seed = args.seed if args.seed is not None else int(raw.get("base_seed",
                                                               20_2400))
    workers = args.workers or int(raw.get("workers", 1))
    cells = reproduce_table1(grid["omega_rf_mhz"], grid["controls"],
                             grid["t2star_us"], n_realizations=n,
                             base_seed=seed, workers=workers,
                             progress=print)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "table1.csv"
    table1_to_csv(cells, csv_path)
    txt_path = out_dir / "table1.txt"
    txt_path.write_text(format_table1(cells) + "\n")
    resolved = {"grid": grid, "ensemble": {"n_realizations": n,
                                           "base_seed": seed}}
    manifest = _write_manifest(out_dir, "table1", resolved,
                               [csv_path, txt_path], started)
    print(format_table1(cells))
    print(f"wrote {csv_path}, {txt_path}, {manifest}")
    if any(c.error for c in cells):
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_scan(args) -> int:
    started = time.monotonic()
    raw = load_config(args.config) if args.config else {}
    sensor = SensorParams(d=ghz(raw.get("d_ghz", 2.87)),
                          ex=mhz(raw.get("ex_mhz", 5.0)))
    drive = DriveConfig.resonant(sensor,
                                 rf_rabi=mhz(raw.get("rf_rabi_mhz", 6.0)),
                                 mw_rabi=mhz(raw.get("mw_rabi_mhz", 40.0)))
    center = khz(raw.get("center_detuning_khz", 100.0))
    if "detunings_khz" in raw:
        detunings = [khz(x) for x in raw["detunings_khz"]]
    else:
        detunings = khz(100.0) + np.linspace(-khz(40), khz(40), 17)
    noise = NoiseConfig(
        t2star=us(raw["t2star_us"]) if raw.get("t2star_us") else None,
        eta_r=raw.get("eta_r", 0.005), eta_m=raw.get("eta_m", 0.005))
    n = args.realizations or int(raw.get("n_realizations", 100))
    seed = args.seed if args.seed is not None else int(raw.get("base_seed",
                                                               77_0000))
    workers = args.workers or int(raw.get("workers", 1))
    total = us(raw["total_time_us"]) if raw.get("total_time_us") else None

    scan = spectrum_scan(sensor, drive, khz(raw.get("g_ac_khz", 5.0)),
                         detunings, center, noise=noise, n_realizations=n,
                         base_seed=seed, workers=workers, total_time=total)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "spectrum.csv"
    scan.write_csv(csv_path)
    resolved = {"scan": scan.config,
                "detunings": [float(d) for d in scan.detunings]}
    manifest = _write_manifest(out_dir, "scan", resolved, [csv_path], started)
    peak = scan.peak_detuning()
    print(f"peak contrast at detuning {peak / (2e6 * np.pi):.4f} MHz x 2pi")
    print(f"wrote {csv_path}, {manifest}")
    return EXIT_OK


def cmd_filter(args) -> int:
    """Dump the response function f(t) and its Fourier coefficients."""
    started = time.monotonic()
    raw = load_config(args.config) if args.config else {}
    tau = us(raw.get("tau_us", 2.5))
    n_pulses = int(raw.get("n_pulses", 8))
    family = raw.get("family", "cpmg")
    seq = build_sequence(family, n_pulses, tau,
                         us(raw.get("pulse_duration_us", 0.0)))
    resp = response_function(seq)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    ft_path = out_dir / "response_function.csv"
    edges = np.concatenate([[0.0], resp.flip_times, [resp.total_duration]])
    with open(ft_path, "w") as fh:
        fh.write("t_start_s,t_end_s,f\n")
        sign = 1.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            fh.write(f"{lo:.17g},{hi:.17g},{sign:+.0f}\n")
            sign = -sign

    an_path = out_dir / "fourier_coefficients.csv"
    with open(an_path, "w") as fh:
        fh.write("n,a_n_closed_form,a_n_quadrature\n")
        for n in range(1, 21):
            closed = fourier_coefficient(seq, n)
            quad = fourier_coefficient_numeric(resp, n, 4.0 * tau)
            fh.write(f"{n},{closed:.12g},{quad:.12g}\n")
    manifest = _write_manifest(out_dir, "filter", {"sequence": seq.to_dict()},
                               [ft_path, an_path], started)
    print(f"wrote {ft_path}, {an_path}, {manifest}")
    return EXIT_OK


def cmd_validate(args) -> int:
    ops = None
    if args.inject_error == "sy-sign":
        import numpy as np
        from .spin1 import SX, SY, SZ
        ops = (SX.copy(), -SY.copy(), SZ.copy())
        print("running with an injected sign error in Sy (self-test mode)")
    results = run_validation(ops=ops)
    for res in results:
        print(res.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_VALIDATION if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zfmag",
        description="Zero-field AC magnetometry simulator for spin-1 "
                    "clock sensors")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help="JSON configuration file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the base seed")
        p.add_argument("--workers", type=int, default=None,
                       help="worker process count (does not change results)")
        p.add_argument("--realizations", type=int, default=None,
                       help="override the ensemble size")

    p = sub.add_parser("simulate", help="run one ensemble, write CSV")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("table1", help="reproduce the coherence-time grid")
    common(p, config_required=False)
    p.add_argument("--cells", default="",
                   help="restrict the grid, e.g. 'omega_rf=4,control=ldd'")
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("scan", help="sensing-spectrum scan over detuning")
    common(p, config_required=False)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("filter", help="dump response function and filter "
                                      "coefficients")
    common(p, config_required=False)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("validate", help="run the fast invariant suite")
    p.add_argument("--inject-error", choices=["sy-sign"], default=None,
                   help="self-test: corrupt Sy and expect failures")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EngineError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
