"""State propagation: post-selected no-jump dynamics and the Lindblad oracle.

Level ordering for the four-level transmon is ``(|g>, |e>, |f>, |h>)``; the
qubit submanifold uses ``(|e>, |f>)``. Both engines use the classical
fixed-step Runge-Kutta scheme with the Hamiltonian evaluated at the proper
stage times.

The two engines keep their own diagonal conventions: the non-Hermitian engine
puts ``Delta - i gamma/2`` on ``|e>`` while the Lindblad engine uses
``Delta/2 (|e><e| - |f><f|)``. They differ by ``Delta/2`` times the qubit
identity, which leaves Bloch vectors and populations unchanged and integrates
to zero over a closed loop.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields
from typing import NamedTuple

import numpy as np

from .paths import ParameterLoop, ScheduleRangeError, loop_arrays
from .spectra import InvalidParameterError

__all__ = [
    "G", "E", "F", "H",
    "PostSelectionError",
    "StepSizeError",
    "DissipationRates",
    "IntegratorConfig",
    "NHResult",
    "propagate_nh",
    "propagate_nh_at",
    "nh_trajectory",
    "propagate_lindblad",
    "propagate_lindblad_at",
    "lindblad_superoperator",
    "postselect_ef",
    "apply_rotation",
    "rotation_matrix",
    "embed_qubit_state",
    "write_trajectory_csv",
    "TRAJECTORY_CSV_HEADER",
]

G, E, F, H = 0, 1, 2, 3
_PAIRS = {"ge": (G, E), "ef": (E, F), "fh": (F, H)}

SURVIVAL_FLOOR = 1e-12
TRACE_DRIFT_LIMIT = 1e-6

TRAJECTORY_CSV_HEADER = ("t_us", "re_psi_e", "im_psi_e", "re_psi_f", "im_psi_f", "norm2")


class PostSelectionError(RuntimeError):
    """The post-selected branch carries too little probability to condition on."""


class StepSizeError(RuntimeError):
    """Numerical drift exceeded tolerance; retry with a smaller ``dt``."""


@dataclass(frozen=True)
class DissipationRates:
    """Relaxation (``gamma_x``) and dephasing (``gamma_2x``) rates in 1/us."""

    gamma_e: float = 0.0
    gamma_f: float = 0.0
    gamma_h: float = 0.0
    gamma_2e: float = 0.0
    gamma_2f: float = 0.0
    gamma_2h: float = 0.0

    def __post_init__(self):
        for fld in fields(self):
            value = getattr(self, fld.name)
            if not math.isfinite(value) or value < 0:
                raise InvalidParameterError(f"{fld.name} must be finite and >= 0, got {value!r}")

    @classmethod
    def measured(cls) -> "DissipationRates":
        """The full set of measured device rates."""
        return cls(6.2, 0.32, 0.36, 3.7, 0.9, 1.4)

    @classmethod
    def from_config(cls, block: dict) -> "DissipationRates":
        names = {f.name for f in fields(cls)}
        unknown = set(block) - names
        if unknown:
            raise InvalidParameterError(f"unknown rate keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in block.items()})

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def jump_operators(self) -> list[np.ndarray]:
        """Nonzero Lindblad operators, relaxation first, then dephasing."""
        ops = []
        terms = [
            (self.gamma_e, G, E),
            (self.gamma_f, E, F),
            (self.gamma_h, H, F),
            (0.5 * self.gamma_2e, E, E),
            (0.5 * self.gamma_2f, F, F),
            (0.5 * self.gamma_2h, H, H),
        ]
        for rate, i, j in terms:
            if rate > 0:
                op = np.zeros((4, 4), dtype=complex)
                op[i, j] = math.sqrt(rate)
                ops.append(op)
        return ops


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3
    method: str = "rk4"

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise InvalidParameterError(f"dt must be > 0, got {self.dt!r}")
        if self.method != "rk4":
            raise InvalidParameterError(f"only the 'rk4' method is available, got {self.method!r}")


class NHResult(NamedTuple):
    psi: np.ndarray
    survival: float

    def normalized(self) -> np.ndarray:
        return self.psi / math.sqrt(self.survival)


def _n_steps(span: float, dt: float) -> int:
    # smallest step count with h <= dt, tolerant of representation error in span/dt
    return max(1, math.ceil(span / dt - 1e-9))


def _check_times(loop: ParameterLoop, times) -> np.ndarray:
    times = np.atleast_1d(np.asarray(times, dtype=float))
    slack = 1e-12 * loop.T
    if np.any(times < -slack) or np.any(times > loop.T + slack) or np.any(np.diff(times) < 0):
        raise ScheduleRangeError(f"times must be sorted within [0, {loop.T}]")
    return np.clip(times, 0.0, loop.T)


def _stage_params(loop: ParameterLoop, t0: float, h: float, n: int):
    """``(J, Delta)`` at ``t_k``, ``t_k + h/2`` and ``t_k + h`` for every step."""
    tk = t0 + h * np.arange(n)
    J0, D0 = loop_arrays(loop, tk)
    Jm, Dm = loop_arrays(loop, tk + 0.5 * h)
    J1, D1 = loop_arrays(loop, tk + h)
    return (J0, D0), (Jm, Dm), (J1, D1)


def _nh_rhs(psi: np.ndarray, J: float, Delta: float, gamma: float) -> np.ndarray:
    a, b = psi
    return np.array([-1j * ((Delta - 0.5j * gamma) * a + J * b), -1j * J * a])


def _nh_segment(psi, loop: ParameterLoop, t0: float, t1: float, dt: float, record=None):
    if t1 <= t0:
        return psi
    n = _n_steps(t1 - t0, dt)
    h = (t1 - t0) / n
    (J0, D0), (Jm, Dm), (J1, D1) = _stage_params(loop, t0, h, n)
    g = loop.gamma
    for k in range(n):
        k1 = _nh_rhs(psi, J0[k], D0[k], g)
        k2 = _nh_rhs(psi + 0.5 * h * k1, Jm[k], Dm[k], g)
        k3 = _nh_rhs(psi + 0.5 * h * k2, Jm[k], Dm[k], g)
        k4 = _nh_rhs(psi + h * k3, J1[k], D1[k], g)
        psi = psi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if record is not None:
            record(t0 + (k + 1) * h, psi)
    return psi


def _as_qubit_vector(psi0) -> np.ndarray:
    psi0 = np.asarray(psi0, dtype=complex).reshape(-1)
    if psi0.shape != (2,):
        raise InvalidParameterError("qubit state must be a 2-vector over (|e>, |f>)")
    norm = np.linalg.norm(psi0)
    if not math.isclose(norm, 1.0, rel_tol=0, abs_tol=1e-9):
        raise InvalidParameterError(f"initial state must be normalized, |psi0| = {norm}")
    return psi0


def _survival(psi: np.ndarray) -> float:
    survival = float(np.vdot(psi, psi).real)
    if not survival >= SURVIVAL_FLOOR:  # also catches NaN
        raise PostSelectionError(f"no-jump survival {survival:.3g} below {SURVIVAL_FLOOR:g}")
    return survival


def propagate_nh_at(psi0, loop: ParameterLoop, times, cfg: IntegratorConfig | None = None) -> list[NHResult]:
    """Unnormalized no-jump states at each of the sorted ``times``.

    Integrates ``i dpsi/dt = H_eff(t) psi`` segment by segment, so every
    requested time is hit exactly.
    """
    cfg = cfg or IntegratorConfig()
    psi = _as_qubit_vector(psi0)
    out = []
    t_prev = 0.0
    for t in _check_times(loop, times):
        psi = _nh_segment(psi, loop, t_prev, float(t), cfg.dt)
        t_prev = float(t)
        out.append(NHResult(psi.copy(), _survival(psi)))
    return out


def propagate_nh(psi0, loop: ParameterLoop, t_end: float, cfg: IntegratorConfig | None = None) -> NHResult:
    """Propagate a qubit state under the effective Hamiltonian from 0 to ``t_end``.

    Returns the unnormalized final vector and its squared norm, the no-jump
    post-selection probability.

    Raises
    ------
    PostSelectionError
        If the survival probability drops below 1e-12.
    """
    return propagate_nh_at(psi0, loop, [t_end], cfg)[0]


def nh_trajectory(psi0, loop: ParameterLoop, t_end: float, cfg: IntegratorConfig | None = None,
                  stride: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Every ``stride``-th integrator step from 0 to ``t_end`` (endpoints included)."""
    cfg = cfg or IntegratorConfig()
    psi = _as_qubit_vector(psi0)
    t_end = float(_check_times(loop, [t_end])[0])
    times, states = [0.0], [psi.copy()]
    counter = [0]

    def record(t, state):
        counter[0] += 1
        if counter[0] % stride == 0:
            times.append(t)
            states.append(state.copy())

    final = _nh_segment(psi, loop, 0.0, t_end, cfg.dt, record)
    if times[-1] != t_end and t_end > 0:
        times.append(t_end)
        states.append(final.copy())
    return np.array(times), np.array(states)


def write_trajectory_csv(path, times: np.ndarray, states: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRAJECTORY_CSV_HEADER)
        for t, (a, b) in zip(times, states):
            norm2 = abs(a) ** 2 + abs(b) ** 2
            writer.writerow([f"{v:.12g}" for v in (t, a.real, a.imag, b.real, b.imag, norm2)])


def _spre(a):
    return np.kron(a, np.eye(a.shape[0]))


def _spost(a):
    return np.kron(np.eye(a.shape[0]), a.T)


def lindblad_superoperator(rates: DissipationRates):
    """Split the generator as ``S0 + J(t) SJ + Delta(t) SD`` on row-major ``vec(rho)``."""
    X = np.zeros((4, 4), dtype=complex)
    X[E, F] = X[F, E] = 1.0
    Z = np.zeros((4, 4), dtype=complex)
    Z[E, E], Z[F, F] = 0.5, -0.5
    SJ = -1j * (_spre(X) - _spost(X))
    SD = -1j * (_spre(Z) - _spost(Z))
    S0 = np.zeros((16, 16), dtype=complex)
    for L in rates.jump_operators():
        LdL = L.conj().T @ L
        S0 += np.kron(L, L.conj()) - 0.5 * (_spre(LdL) + _spost(LdL))
    return S0, SJ, SD


def _as_density(rho0) -> np.ndarray:
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (4, 4):
        raise InvalidParameterError("density matrix must be 4x4 over (|g>, |e>, |f>, |h>)")
    if not np.allclose(rho0, rho0.conj().T, atol=1e-12):
        raise InvalidParameterError("density matrix must be Hermitian")
    if abs(np.trace(rho0) - 1.0) > 1e-10:
        raise InvalidParameterError("density matrix must have unit trace")
    return rho0


def _lindblad_segment(vec, ops, loop: ParameterLoop, t0: float, t1: float, dt: float):
    if t1 <= t0:
        return vec
    S0, SJ, SD = ops
    n = _n_steps(t1 - t0, dt)
    h = (t1 - t0) / n
    (J0, D0), (Jm, Dm), (J1, D1) = _stage_params(loop, t0, h, n)
    for k in range(n):
        L0 = S0 + J0[k] * SJ + D0[k] * SD
        Lm = S0 + Jm[k] * SJ + Dm[k] * SD
        L1 = S0 + J1[k] * SJ + D1[k] * SD
        k1 = L0 @ vec
        k2 = Lm @ (vec + 0.5 * h * k1)
        k3 = Lm @ (vec + 0.5 * h * k2)
        k4 = L1 @ (vec + h * k3)
        vec = vec + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return vec


def propagate_lindblad_at(rho0, loop: ParameterLoop, times, rates: DissipationRates,
                          cfg: IntegratorConfig | None = None) -> list[np.ndarray]:
    """Density matrices at each of the sorted ``times`` under the master equation."""
    cfg = cfg or IntegratorConfig()
    rho0 = _as_density(rho0)
    ops = lindblad_superoperator(rates)
    vec = rho0.reshape(-1).copy()
    out = []
    t_prev = 0.0
    for t in _check_times(loop, times):
        vec = _lindblad_segment(vec, ops, loop, t_prev, float(t), cfg.dt)
        t_prev = float(t)
        rho = vec.reshape(4, 4)
        drift = abs(np.trace(rho) - 1.0)
        if not drift <= TRACE_DRIFT_LIMIT:
            raise StepSizeError(f"trace drift {drift:.3g} at t={t}; reduce dt (now {cfg.dt})")
        out.append(0.5 * (rho + rho.conj().T))
    return out


def propagate_lindblad(rho0, loop: ParameterLoop, t_end: float, rates: DissipationRates,
                       cfg: IntegratorConfig | None = None) -> np.ndarray:
    """Integrate the four-level master equation from 0 to ``t_end``.

    The coherent part is ``J (|e><f| + |f><e|) + Delta/2 (|e><e| - |f><f|)``;
    jumps are ``sqrt(gamma_e)|g><e|``, ``sqrt(gamma_f)|e><f|``,
    ``sqrt(gamma_h)|h><f|`` and dephasing ``sqrt(gamma_2x/2)|x><x|``.

    Raises
    ------
    StepSizeError
        If the trace drifts by more than 1e-6.
    """
    return propagate_lindblad_at(rho0, loop, [t_end], rates, cfg)[0]


def postselect_ef(rho) -> tuple[np.ndarray, float]:
    """Project onto ``span(|e>, |f>)`` and renormalize; returns ``(rho_ef, prob)``."""
    rho = np.asarray(rho, dtype=complex)
    block = rho[E:F + 1, E:F + 1]
    prob = float(np.trace(block).real)
    if not prob >= SURVIVAL_FLOOR:
        raise PostSelectionError(f"post-selection probability {prob:.3g} below {SURVIVAL_FLOOR:g}")
    return block / prob, prob


def embed_qubit_state(psi_ef) -> np.ndarray:
    """Place a ``(|e>, |f>)`` 2-vector into the four-level space."""
    psi = np.zeros(4, dtype=complex)
    psi[E:F + 1] = np.asarray(psi_ef, dtype=complex)
    return psi


def rotation_matrix(kind: str, angle: float, axis_phase: float) -> np.ndarray:
    """4x4 ideal resonant pulse ``exp(-i angle/2 (cos(phi) sx + sin(phi) sy))``.

    The first-named level of ``kind`` is the spin-up component, so for ``"ef"``
    the Pauli matrices match the qubit Bloch convention (``sz = |e><e| - |f><f|``).
    """
    if kind not in _PAIRS:
        raise InvalidParameterError(f"rotation kind must be one of {sorted(_PAIRS)}, got {kind!r}")
    if not (math.isfinite(angle) and math.isfinite(axis_phase)):
        raise InvalidParameterError("rotation angle and phase must be finite")
    a, b = _PAIRS[kind]
    c, s = math.cos(0.5 * angle), math.sin(0.5 * angle)
    U = np.eye(4, dtype=complex)
    U[a, a] = U[b, b] = c
    U[a, b] = -1j * s * np.exp(-1j * axis_phase)
    U[b, a] = -1j * s * np.exp(1j * axis_phase)
    return U


def apply_rotation(state, kind: str, angle: float, axis_phase: float = 0.0) -> np.ndarray:
    """Apply an instantaneous rotation to a 4-vector or a 4x4 density matrix."""
    U = rotation_matrix(kind, angle, axis_phase)
    state = np.asarray(state, dtype=complex)
    if state.shape == (4,):
        return U @ state
    if state.shape == (4, 4):
        return U @ state @ U.conj().T
    raise InvalidParameterError(f"expected a 4-vector or 4x4 matrix, got shape {state.shape}")
