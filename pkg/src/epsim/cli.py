"""``epsim`` command-line entry point.

    epsim spectrum|encircle|phase|transfer-map --config <file> [--out DIR] [--jobs N] [--seed S]

Exit codes: 0 success, 1 I/O failure, 2 invalid configuration, 3 runtime
failure (post-selection exhausted or integrator drift).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path


from . import __version__, analysis, protocols, spectra
from .config import ConfigError, RunConfig, list_presets, load_config
from .evolve import PostSelectionError, StepSizeError, nh_trajectory, write_trajectory_csv
from .paths import DIRECTIONS

__all__ = ["main", "cmd_spectrum", "cmd_encircle", "cmd_phase", "cmd_transfer_map", "COMMANDS"]

ENV_JOBS = "EPSIM_JOBS"
PI_TOLERANCE = 0.3


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if value is None:
        return ""
    return f"{float(value):.12g}"


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_json(path: Path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(cfg: RunConfig, outputs: list[Path], timings: dict, metadata: dict) -> Path:
    manifest = {
        "config": cfg.snapshot(),
        "version": __version__,
        "outputs": {p.name: _sha256(p) for p in outputs},
        "timings_s": timings,
        "metadata": metadata,
    }
    target = cfg.output_dir / "manifest.json"
    fd, tmp = tempfile.mkstemp(dir=cfg.output_dir, prefix=".manifest-", suffix=".json")
    with os.fdopen(fd, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, target)
    return target


def _pool_map(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def cmd_spectrum(cfg: RunConfig) -> list[Path]:
    """Riemann-surface table plus the static EP markers."""
    opts = cfg.options
    t0 = time.perf_counter()
    table = spectra.riemann_surface(opts["j"], opts["delta"], opts["gamma"])
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    surface = cfg.output_dir / "riemann_surface.csv"
    spectra.write_riemann_csv(surface, table)
    markers = cfg.output_dir / "ep_markers.csv"
    _write_csv(markers, ("J", "Delta"),
               [(ep.J_ep, ep.Delta_ep) for ep in spectra.ep_locations(opts["gamma"])])
    outputs = [surface, markers]
    _write_manifest(cfg, outputs, {"total": time.perf_counter() - t0},
                    {"rows": int(table["J"].size)})
    return outputs


TOMOGRAPHY_HEADER = ("t_us", "x", "y", "z", "survival", "x_eig", "y_eig", "z_eig")


def cmd_encircle(cfg: RunConfig) -> list[Path]:
    """Pause-and-measure tomography along one loop."""
    t0 = time.perf_counter()
    records = protocols.run_encircle_tomography(
        cfg.loop, cfg.engine, cfg.options["n_pauses"], cfg.shots, cfg.seed, cfg.rates, cfg.integrator)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.output_dir / "tomography.csv"
    _write_csv(path, TOMOGRAPHY_HEADER,
               [(r.t_s, r.x, r.y, r.z, r.survival, r.x_eig, r.y_eig, r.z_eig) for r in records])
    outputs = [path]
    stride = cfg.options["trajectory_stride"]
    if stride > 0 and cfg.engine == "nh":
        times, states = nh_trajectory(protocols.initial_eigenstate(cfg.loop), cfg.loop,
                                      cfg.loop.T, cfg.integrator, stride)
        traj = cfg.output_dir / "trajectory.csv"
        write_trajectory_csv(traj, times, states)
        outputs.append(traj)
    _write_manifest(cfg, outputs, {"total": time.perf_counter() - t0},
                    {"n_pauses": cfg.options["n_pauses"], "direction": cfg.loop.direction,
                     "shots": cfg.shots or "exact"})
    return outputs


def _phase_task(args):
    loop, engine, rates, integrator, targets, n_points = args
    rho = protocols.evolve_interferometer(loop, engine, rates, integrator)
    return [protocols.scan_from_state(rho, loop, t, n_points) for t in targets]


def cmd_phase(cfg: RunConfig) -> list[Path]:
    """Interferometric phase scan over ``J_min`` for each direction and target."""
    opts = cfg.options
    t0 = time.perf_counter()
    base = cfg.loop
    keys = [(d, float(j)) for d in opts["directions"] for j in opts["j_min"]]
    tasks = [(base.with_(J_min=j, Delta_amp=DIRECTIONS[d] * abs(base.Delta_amp)),
              cfg.engine, cfg.rates, cfg.integrator, opts["targets"], opts["n_phase_points"])
             for d, j in keys]
    scans = [s for group in _pool_map(_phase_task, tasks, cfg.jobs) for s in group]

    fringe_rows, summaries, fits = [], [], {}
    for scan in scans:
        fit = analysis.fit_fringe(scan)
        fits[(scan.direction, scan.target, scan.j_min)] = fit
        for phi, p in zip(scan.phases, scan.p_f):
            fringe_rows.append((phi, p, scan.target, scan.direction, scan.j_min))
        summaries.append({
            "direction": scan.direction, "target": scan.target, "j_min": scan.j_min,
            "contrast": fit.contrast, "chi_rad": fit.chi, "offset": fit.offset,
            "reliable": fit.reliable, "p_psi_plus": scan.p_psi_plus,
            "p_psi_minus": scan.p_psi_minus, "survival": scan.survival,
        })

    differences = []
    if {"ccw", "cw"} <= set(opts["directions"]):
        for target in opts["targets"]:
            for j in opts["j_min"]:
                diff = analysis.phase_difference_summary(fits[("ccw", target, float(j))],
                                                         fits[("cw", target, float(j))])
                differences.append({
                    "target": target, "j_min": float(j), "delta_chi_rad": diff.delta_chi,
                    "reliable": diff.reliable,
                    "pi_difference": bool(diff.reliable
                                          and abs(abs(diff.delta_chi) - math.pi) <= PI_TOLERANCE),
                })

    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    fringe_path = cfg.output_dir / "phase_fringes.csv"
    _write_csv(fringe_path, ("phase_rad", "p_f", "target", "direction", "j_min"), fringe_rows)
    summary_path = cfg.output_dir / "phase_summary.json"
    _write_json(summary_path, {"n_phase_points": opts["n_phase_points"],
                               "fringes": summaries, "phase_differences": differences})
    outputs = [fringe_path, summary_path]
    _write_manifest(cfg, outputs, {"total": time.perf_counter() - t0},
                    {"n_phase_points": opts["n_phase_points"], "cells": len(keys)})
    return outputs


TRANSFER_HEADER = ("j_min", "period_us", "direction", "p_psi_minus", "survival", "error")


def cmd_transfer_map(cfg: RunConfig) -> list[Path]:
    """One-period ``P(psi_-)`` on a ``(J_min, T)`` grid; one heatmap per direction."""
    opts = cfg.options
    t0 = time.perf_counter()
    cells = []
    for direction in opts["directions"]:
        cells += protocols.run_transfer_map(opts["j_min"], opts["period_us"], direction, cfg.engine,
                                            cfg.loop, cfg.rates, cfg.integrator, cfg.jobs)
    cells.sort(key=lambda c: (c.direction, c.J_min, c.T))

    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.output_dir / "transfer_map.csv"
    _write_csv(path, TRANSFER_HEADER,
               [(c.J_min, c.T, c.direction, c.P_psi_minus, c.survival, c.error or "") for c in cells])
    outputs = [path]
    for direction in opts["directions"]:
        lookup = {(c.J_min, c.T): c.P_psi_minus for c in cells if c.direction == direction}
        heat = cfg.output_dir / f"transfer_map_{direction}_heatmap.csv"
        periods = sorted(set(float(t) for t in opts["period_us"]))
        rows = [[j] + [lookup[(j, t)] for t in periods] for j in sorted(set(float(v) for v in opts["j_min"]))]
        _write_csv(heat, ["j_min\\period_us"] + [_fmt(t) for t in periods], rows)
        outputs.append(heat)
    failed = sum(c.error is not None for c in cells)
    _write_manifest(cfg, outputs, {"total": time.perf_counter() - t0},
                    {"cells": len(cells), "failed_cells": failed})
    return outputs


COMMANDS = {
    "spectrum": ("spectrum", cmd_spectrum),
    "encircle": ("tomography", cmd_encircle),
    "phase": ("phase", cmd_phase),
    "transfer-map": ("transfer_map", cmd_transfer_map),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="epsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"epsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True,
                       help=f"config file or preset name ({', '.join(list_presets())})")
        p.add_argument("--out", help="output directory (overrides [output].dir)")
        p.add_argument("--jobs", type=int, help=f"worker processes (fallback: ${ENV_JOBS})")
        p.add_argument("--seed", type=int, help="sampling seed (overrides [sampling].seed)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    experiment, command = COMMANDS[args.command]
    jobs = args.jobs
    if jobs is None and os.environ.get(ENV_JOBS):
        try:
            jobs = int(os.environ[ENV_JOBS])
        except ValueError:
            print(f"epsim: invalid {ENV_JOBS}={os.environ[ENV_JOBS]!r}", file=sys.stderr)
            return 2
    try:
        cfg = load_config(args.config, seed=args.seed, out=args.out, jobs=jobs)
        if cfg.experiment != experiment:
            raise ConfigError(f"'{args.command}' runs experiment {experiment!r}, "
                              f"config declares {cfg.experiment!r}")
    except ConfigError as exc:
        print(f"epsim: config error: {exc}", file=sys.stderr)
        return 2
    try:
        outputs = command(cfg)
    except (PostSelectionError, StepSizeError) as exc:
        print(f"epsim: runtime error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        where = exc.filename or cfg.output_dir
        print(f"epsim: I/O error at {where}: {exc.strerror or exc}", file=sys.stderr)
        return 1
    for p in outputs:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
