"""The three experiments: loop tomography, phase interferometry, transfer maps.

Each experiment accepts ``engine="nh"`` (post-selected no-jump evolution under
the effective Hamiltonian) or ``engine="lindblad"`` (four-level master
equation followed by post-selection).
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import analysis
from .evolve import (
    E, F, G,
    DissipationRates,
    IntegratorConfig,
    PostSelectionError,
    StepSizeError,
    apply_rotation,
    embed_qubit_state,
    postselect_ef,
    propagate_lindblad,
    propagate_lindblad_at,
    propagate_nh,
    propagate_nh_at,
)
from .paths import DIRECTIONS, ParameterLoop, loop_arrays, loop_params
from .spectra import HamiltonianParams, InvalidParameterError, eigensystem

__all__ = [
    "ENGINES",
    "TARGETS",
    "DEFAULT_N_PAUSES",
    "DEFAULT_N_PHASE_POINTS",
    "TomographyRecord",
    "FringeScan",
    "TransferMapCell",
    "initial_eigenstate",
    "tracked_eigenstates",
    "run_encircle_tomography",
    "prepare_reference_superposition",
    "evolve_interferometer",
    "fringe_from_state",
    "run_phase_interferometry",
    "scan_from_state",
    "transfer_cell",
    "run_transfer_map",
]

ENGINES = ("nh", "lindblad")
TARGETS = ("psi_plus", "psi_minus")

# Not given by the experiment description; reported in output metadata.
DEFAULT_N_PAUSES = 60
DEFAULT_N_PHASE_POINTS = 21

# Preparation puts the |h> reference in phase with |f> using a Y-axis pulse.
PREP_FH_PHASE = 0.5 * math.pi
# R_ef^{+pi/2} about +Y maps (|e>+|f>)/sqrt2 -> |f>; about -Y maps (|f>-|e>)/sqrt2 -> |f>.
TARGET_AXIS_PHASE = {"psi_plus": 0.5 * math.pi, "psi_minus": -0.5 * math.pi}


def _check_engine(engine: str, rates: DissipationRates | None) -> None:
    if engine not in ENGINES:
        raise InvalidParameterError(f"engine must be one of {ENGINES}, got {engine!r}")
    if engine == "lindblad" and rates is None:
        raise InvalidParameterError("the lindblad engine needs dissipation rates")


def initial_eigenstate(loop: ParameterLoop, branch: str = "minus") -> np.ndarray:
    """Normalized ``psi_-`` (or ``psi_+``) of the loop's ``t = 0`` Hamiltonian."""
    pair = eigensystem(loop_params(loop, 0.0))
    return (pair.psi_minus if branch == "minus" else pair.psi_plus).copy()


def tracked_eigenstates(loop: ParameterLoop, times: Sequence[float], branch: str = "minus",
                        substeps: int = 64) -> list[np.ndarray]:
    """Instantaneous right eigenvector followed continuously from ``t = 0``.

    Between requested times the parameters are subdivided ``substeps`` times and
    at each sample the eigenvector with the largest overlap with the previous one
    is kept. Around an enclosed EP this winds from ``psi_-`` onto ``psi_+``.
    """
    prev = initial_eigenstate(loop, branch)
    out = []
    t_prev = 0.0
    for t in times:
        for s in np.linspace(t_prev, t, substeps + 1)[1:] if t > t_prev else []:
            J, D = loop_arrays(loop, s)
            pair = eigensystem(HamiltonianParams(float(J), float(D), loop.gamma))
            a = abs(np.vdot(prev, pair.psi_plus))
            b = abs(np.vdot(prev, pair.psi_minus))
            prev = pair.psi_plus if a > b else pair.psi_minus
        t_prev = t
        out.append(prev.copy())
    return out


@dataclass(frozen=True)
class TomographyRecord:
    t_s: float
    x: float
    y: float
    z: float
    survival: float
    x_eig: float = math.nan
    y_eig: float = math.nan
    z_eig: float = math.nan


def _sampled(value: float, shots: int, rng) -> float:
    p = 0.5 * (1.0 + value)
    return 2.0 * analysis.sample_expectation(p, shots, rng) - 1.0


def run_encircle_tomography(loop: ParameterLoop, engine: str = "nh", n_pauses: int = DEFAULT_N_PAUSES,
                            shots: int | None = None, seed: int = 0,
                            rates: DissipationRates | None = None,
                            cfg: IntegratorConfig | None = None) -> list[TomographyRecord]:
    """Bloch vector of the post-selected qubit at ``n_pauses`` times in ``[0, T]``.

    The qubit starts in ``psi_-`` of the ``t = 0`` Hamiltonian. With ``shots``
    set, each Pauli value is replaced by a binomial estimate from that many
    single-shot outcomes along the axis (seeded per pause and axis). The
    ``*_eig`` fields hold the continuously tracked instantaneous eigenstate.
    """
    _check_engine(engine, rates)
    if n_pauses < 2:
        raise InvalidParameterError("n_pauses must be >= 2")
    cfg = cfg or IntegratorConfig()
    times = np.linspace(0.0, loop.T, n_pauses)
    psi0 = initial_eigenstate(loop)

    if engine == "nh":
        results = propagate_nh_at(psi0, loop, times, cfg)
        blochs = [analysis.bloch_vector(r.psi) for r in results]
        survivals = [r.survival for r in results]
    else:
        rho0 = np.outer(embed_qubit_state(psi0), embed_qubit_state(psi0).conj())
        blochs, survivals = [], []
        for rho in propagate_lindblad_at(rho0, loop, times, rates, cfg):
            rho_ef, prob = postselect_ef(rho)
            blochs.append(analysis.pauli_components(rho_ef))
            survivals.append(prob)

    overlay = [analysis.bloch_vector(v) for v in tracked_eigenstates(loop, times)]

    records = []
    for k, (t, (x, y, z), surv, eig) in enumerate(zip(times, blochs, survivals, overlay)):
        if shots is not None:
            rng = np.random.default_rng([seed, k])
            x, y, z = (_sampled(v, shots, rng) for v in (x, y, z))
        records.append(TomographyRecord(float(t), x, y, z, surv, *eig))
    return records


@dataclass(frozen=True)
class FringeScan:
    """Detection probability of ``|f>`` versus the final reference-pulse phase.

    ``p_psi_plus``/``p_psi_minus`` are biorthogonal populations of the
    post-selected qubit after the loop and ``survival`` is the weight left in
    the ``{e, f, h}`` manifold; they come from the same run as the fringe.
    """

    phases: np.ndarray
    p_f: np.ndarray
    target: str
    direction: str = ""
    j_min: float = math.nan
    p_psi_plus: float = math.nan
    p_psi_minus: float = math.nan
    survival: float = math.nan


def prepare_reference_superposition() -> np.ndarray:
    """``(|h> + |psi_->)/sqrt2`` (up to global phase) built from ``|g>`` by ideal pulses."""
    psi = np.zeros(4, dtype=complex)
    psi[G] = 1.0
    psi = apply_rotation(psi, "ge", math.pi, 0.0)
    psi = apply_rotation(psi, "ef", math.pi, 0.0)
    psi = apply_rotation(psi, "fh", 0.5 * math.pi, PREP_FH_PHASE)
    psi = apply_rotation(psi, "ef", 0.5 * math.pi, 0.5 * math.pi)
    return psi


def evolve_interferometer(loop: ParameterLoop | None, engine: str = "nh",
                          rates: DissipationRates | None = None,
                          cfg: IntegratorConfig | None = None) -> np.ndarray:
    """Prepared three-level state after one full loop, as a 4x4 matrix.

    Under ``nh`` the result is the unnormalized projector of the no-jump state
    (``|h>`` idles untouched); under ``lindblad`` it is the full density matrix.
    ``loop=None`` skips the evolution entirely (null interferometer).
    """
    psi = prepare_reference_superposition()
    if loop is None:
        return np.outer(psi, psi.conj())
    _check_engine(engine, rates)
    if engine == "nh":
        q = psi[E:F + 1]
        norm = np.linalg.norm(q)
        res = propagate_nh(q / norm, loop, loop.T, cfg)
        out = psi.copy()
        out[E:F + 1] = norm * res.psi
        return np.outer(out, out.conj())
    return propagate_lindblad(np.outer(psi, psi.conj()), loop, loop.T, rates, cfg)


def fringe_from_state(rho: np.ndarray, target: str, n_phase_points: int = DEFAULT_N_PHASE_POINTS,
                      postselect: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Rotate ``target`` into ``|f>`` and scan the closing ``f-h`` pulse phase.

    At phase 0 the closing pulse exactly undoes the preparation pulse. With
    ``postselect`` the |f> probability is conditioned on not having decayed to
    ``|g>``.
    """
    if target not in TARGETS:
        raise InvalidParameterError(f"target must be one of {TARGETS}, got {target!r}")
    if n_phase_points < 5:
        raise InvalidParameterError("need at least 5 phase points")
    rho = apply_rotation(rho, "ef", 0.5 * math.pi, TARGET_AXIS_PHASE[target])
    phases = 2.0 * math.pi * np.arange(n_phase_points) / n_phase_points
    p_f = np.empty(n_phase_points)
    for k, phi in enumerate(phases):
        r = apply_rotation(rho, "fh", 0.5 * math.pi, PREP_FH_PHASE + math.pi + phi)
        kept = float(np.trace(r).real - r[G, G].real) if postselect else 1.0
        if not kept >= 1e-12:
            raise PostSelectionError(f"interferometer survival {kept:.3g} below 1e-12")
        p_f[k] = r[F, F].real / kept
    return phases, p_f


def run_phase_interferometry(loop: ParameterLoop | None, engine: str = "nh", target: str = "psi_plus",
                             n_phase_points: int = DEFAULT_N_PHASE_POINTS,
                             rates: DissipationRates | None = None,
                             cfg: IntegratorConfig | None = None) -> FringeScan:
    """Ramsey-type measurement of the phase picked up by ``psi_-`` over one loop.

    Sequence: ``R_ge^pi``, ``R_ef^pi``, ``R_fh^{pi/2}``, ``R_ef^{pi/2}`` (Y) to
    reach ``(|h> + |psi_->)/sqrt2``; one loop period of evolution;
    ``R_ef^{+/-pi/2}`` to bring ``target`` into ``|f>``; closing ``R_fh^{pi/2}``
    with its phase swept over ``[0, 2 pi)``.
    """
    rho = evolve_interferometer(loop, engine, rates, cfg)
    return scan_from_state(rho, loop, target, n_phase_points)


def scan_from_state(rho: np.ndarray, loop: ParameterLoop | None, target: str,
                    n_phase_points: int = DEFAULT_N_PHASE_POINTS) -> FringeScan:
    """Build a :class:`FringeScan` from an evolved interferometer state."""
    phases, p_f = fringe_from_state(rho, target, n_phase_points)
    kept = float(np.trace(rho).real - rho[G, G].real)
    rho_ef, _ = postselect_ef(rho)
    if loop is None:
        # no evolution: decompose in the Hermitian-limit basis (|e> +/- |f>)/sqrt2
        final = HamiltonianParams(1.0, 0.0, 0.0)
        direction, j_min = "", math.nan
    else:
        final = loop_params(loop, loop.T)
        direction, j_min = loop.direction, loop.J_min
    pops = analysis.eigenstate_populations(rho_ef, final)
    return FringeScan(phases, p_f, target, direction, j_min, pops.P_plus, pops.P_minus, kept)


@dataclass(frozen=True)
class TransferMapCell:
    J_min: float
    T: float
    direction: str
    P_psi_minus: float
    survival: float = math.nan
    error: str | None = None


def _cell_loop(template: ParameterLoop, J_min: float, T: float, direction: str) -> ParameterLoop:
    if direction not in DIRECTIONS:
        raise InvalidParameterError(f"direction must be 'ccw' or 'cw', got {direction!r}")
    return template.with_(J_min=float(J_min), T=float(T),
                          Delta_amp=DIRECTIONS[direction] * abs(template.Delta_amp))


def transfer_cell(loop: ParameterLoop, engine: str = "nh", rates: DissipationRates | None = None,
                  cfg: IntegratorConfig | None = None) -> TransferMapCell:
    """``P(psi_-)`` after one period starting from ``psi_-``; failures are flagged."""
    psi0 = initial_eigenstate(loop)
    final = loop_params(loop, loop.T)
    try:
        if engine == "nh":
            res = propagate_nh(psi0, loop, loop.T, cfg)
            state, survival = res.normalized(), res.survival
        else:
            rho0 = np.outer(embed_qubit_state(psi0), embed_qubit_state(psi0).conj())
            state, survival = postselect_ef(propagate_lindblad(rho0, loop, loop.T, rates, cfg))
        P = analysis.eigenstate_populations(state, final).P_minus
    except (PostSelectionError, StepSizeError) as exc:
        return TransferMapCell(loop.J_min, loop.T, loop.direction, math.nan, math.nan, str(exc))
    return TransferMapCell(loop.J_min, loop.T, loop.direction, P, survival)


def _cell_task(args):
    return transfer_cell(*args)


def run_transfer_map(J_min_grid: Sequence[float], T_grid: Sequence[float], direction: str,
                     engine: str = "nh", loop_template: ParameterLoop | None = None,
                     rates: DissipationRates | None = None, cfg: IntegratorConfig | None = None,
                     jobs: int = 1) -> list[TransferMapCell]:
    """One-period ``P(psi_-)`` over a ``(J_min, T)`` grid for one direction.

    ``loop_template`` supplies ``J_max``, ``|Delta_amp|`` and ``gamma``. Cells are
    independent; with ``jobs > 1`` they run in a process pool. Output is ordered
    by ``(J_min, T)`` grid index regardless of ``jobs``.
    """
    if len(J_min_grid) == 0 or len(T_grid) == 0:
        raise InvalidParameterError("transfer map grids must be non-empty")
    _check_engine(engine, rates)
    if loop_template is None:
        raise InvalidParameterError("run_transfer_map needs a loop template")
    cfg = cfg or IntegratorConfig()
    tasks = [(_cell_loop(loop_template, j, t, direction), engine, rates, cfg)
             for j in J_min_grid for t in T_grid]
    if jobs <= 1:
        return [_cell_task(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_cell_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
