"""Run-configuration loading and validation.

Configs are TOML files (JSON is accepted too, including a run manifest whose
``config`` entry is re-run verbatim). Bundled presets are addressable by name,
e.g. ``fig1e``.
"""

from __future__ import annotations

import copy
import json
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .evolve import DissipationRates, IntegratorConfig
from .paths import DIRECTIONS, ParameterLoop
from .protocols import DEFAULT_N_PAUSES, DEFAULT_N_PHASE_POINTS, ENGINES, TARGETS
from .spectra import InvalidParameterError

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "list_presets", "EXPERIMENTS"]

EXPERIMENTS = ("spectrum", "tomography", "phase", "transfer_map")


class ConfigError(ValueError):
    """The run configuration is malformed or inconsistent."""


def list_presets() -> list[str]:
    root = resources.files("epsim") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def _read(source: str | Path) -> dict:
    path = Path(source)
    if not path.exists():
        preset = resources.files("epsim") / "presets" / f"{source}.toml"
        if preset.is_file():
            return tomllib.loads(preset.read_text())
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    try:
        if path.suffix == ".json":
            data = json.loads(text)
            # a run manifest carries the resolved config under "config"
            return data["config"] if "config" in data and "experiment" not in data else data
        return tomllib.loads(text)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc


def grid_values(entry, name: str) -> np.ndarray:
    """A grid is a list of numbers or a ``{start, stop, num}`` table."""
    if isinstance(entry, dict):
        try:
            values = np.linspace(float(entry["start"]), float(entry["stop"]), int(entry["num"]))
        except KeyError as exc:
            raise ConfigError(f"grid {name!r} needs start/stop/num, missing {exc}") from None
    elif isinstance(entry, (list, tuple)):
        values = np.array([float(v) for v in entry])
    else:
        raise ConfigError(f"grid {name!r} must be a list or a start/stop/num table")
    if values.size == 0:
        raise ConfigError(f"grid {name!r} is empty")
    if not np.all(np.isfinite(values)):
        raise ConfigError(f"grid {name!r} has non-finite values")
    return values


@dataclass
class RunConfig:
    experiment: str
    engine: str
    rates: DissipationRates
    integrator: IntegratorConfig
    loop: ParameterLoop | None
    shots: int | None
    seed: int
    output_dir: Path
    jobs: int
    options: dict[str, Any] = field(default_factory=dict)
    raw: dict[str, Any] = field(default_factory=dict)

    def snapshot(self) -> dict[str, Any]:
        """Resolved config that re-runs to the same outputs."""
        snap = copy.deepcopy(self.raw)
        snap["experiment"] = self.experiment
        snap["engine"] = self.engine
        snap.setdefault("sampling", {})
        snap["sampling"]["seed"] = self.seed
        snap["sampling"]["shots"] = "exact" if self.shots is None else self.shots
        snap.setdefault("output", {})["dir"] = str(self.output_dir)
        snap.setdefault("parallel", {})["jobs"] = self.jobs
        return snap


def _block(data: dict, name: str) -> dict:
    value = data.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"[{name}] must be a table")
    return value


def _directions(values) -> list[str]:
    values = list(values)
    bad = [d for d in values if d not in DIRECTIONS]
    if bad or not values:
        raise ConfigError(f"directions must be a non-empty subset of {sorted(DIRECTIONS)}, got {values}")
    return values


def parse_config(data: dict, *, seed: int | None = None, out: str | Path | None = None,
                 jobs: int | None = None) -> RunConfig:
    """Validate a config mapping; command-line overrides win over file values."""
    data = copy.deepcopy(data)
    experiment = data.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {experiment!r}")
    engine = data.get("engine", "nh")
    if engine not in ENGINES:
        raise ConfigError(f"engine must be one of {ENGINES}, got {engine!r}")

    try:
        rates = DissipationRates.from_config(_block(data, "rates"))
        integ = _block(data, "integrator")
        integrator = IntegratorConfig(dt=float(integ.get("dt_us", 1e-3)))
        loop = None
        if experiment != "spectrum":
            if "loop" not in data:
                raise ConfigError(f"{experiment} needs a [loop] block")
            loop = ParameterLoop.from_config(_block(data, "loop"), gamma=rates.gamma_e)
    except InvalidParameterError as exc:
        raise ConfigError(str(exc)) from exc

    sampling = _block(data, "sampling")
    shots_raw = sampling.get("shots", "exact")
    if shots_raw == "exact":
        shots = None
    elif isinstance(shots_raw, int) and not isinstance(shots_raw, bool) and shots_raw >= 1:
        shots = shots_raw
    else:
        raise ConfigError(f"shots must be 'exact' or a positive integer, got {shots_raw!r}")
    seed = int(sampling.get("seed", 0) if seed is None else seed)

    output_dir = Path(out if out is not None else _block(data, "output").get("dir", "out"))
    if jobs is None:
        jobs = int(_block(data, "parallel").get("jobs", 1))
    if jobs < 1:
        raise ConfigError(f"jobs must be >= 1, got {jobs}")

    section = _block(data, experiment)
    options: dict[str, Any] = {}
    if experiment == "spectrum":
        options["j"] = grid_values(section.get("j", []), "spectrum.j")
        options["delta"] = grid_values(section.get("delta", []), "spectrum.delta")
        options["gamma"] = float(section.get("gamma", rates.gamma_e))
        if not (math.isfinite(options["gamma"]) and options["gamma"] >= 0):
            raise ConfigError("spectrum.gamma must be finite and >= 0")
    elif experiment == "tomography":
        options["n_pauses"] = int(section.get("n_pauses", DEFAULT_N_PAUSES))
        options["trajectory_stride"] = int(section.get("trajectory_stride", 0))
        if options["n_pauses"] < 2:
            raise ConfigError("tomography.n_pauses must be >= 2")
        if options["trajectory_stride"] < 0:
            raise ConfigError("tomography.trajectory_stride must be >= 0")
    elif experiment == "phase":
        options["j_min"] = grid_values(section.get("j_min", [loop.J_min]), "phase.j_min")
        options["directions"] = _directions(section.get("directions", [loop.direction]))
        options["targets"] = list(section.get("targets", TARGETS))
        if not options["targets"] or any(t not in TARGETS for t in options["targets"]):
            raise ConfigError(f"phase.targets must be a non-empty subset of {TARGETS}")
        options["n_phase_points"] = int(section.get("n_phase_points", DEFAULT_N_PHASE_POINTS))
        if options["n_phase_points"] < 5:
            raise ConfigError("phase.n_phase_points must be >= 5")
    elif experiment == "transfer_map":
        options["j_min"] = grid_values(section.get("j_min", []), "transfer_map.j_min")
        options["period_us"] = grid_values(section.get("period_us", []), "transfer_map.period_us")
        if np.any(options["period_us"] <= 0):
            raise ConfigError("transfer_map.period_us values must be > 0")
        options["directions"] = _directions(section.get("directions", [loop.direction]))

    return RunConfig(experiment, engine, rates, integrator, loop, shots, seed,
                     output_dir, jobs, options, data)


def load_config(source: str | Path, **overrides) -> RunConfig:
    """Read and validate a config file or bundled preset name."""
    return parse_config(_read(source), **overrides)
