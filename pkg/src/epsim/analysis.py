"""Observables extracted from simulated states and fringe scans."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .spectra import Eigenpair, HamiltonianParams, eigensystem

__all__ = [
    "EPDegenerateError",
    "EigenDecomposition",
    "FringeResult",
    "PhaseDifference",
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "pauli_components",
    "bloch_vector",
    "dual_basis",
    "eigenstate_populations",
    "fit_fringe",
    "wrap_phase",
    "phase_difference_summary",
    "phase_spread",
    "sample_expectation",
    "CONTRAST_FLOOR",
]

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

CONTRAST_FLOOR = 1e-3


class EPDegenerateError(ValueError):
    """Eigenbasis is defective: no decomposition exists at an EP."""


def pauli_components(rho_ef) -> tuple[float, float, float]:
    """``(<sx>, <sy>, <sz>)`` of a 2x2 density matrix over ``(|e>, |f>)``."""
    rho = np.asarray(rho_ef, dtype=complex)
    return tuple(float(np.trace(rho @ s).real) for s in (SIGMA_X, SIGMA_Y, SIGMA_Z))


def bloch_vector(psi) -> tuple[float, float, float]:
    """Pauli components of the normalized pure state ``psi``."""
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return pauli_components(np.outer(psi, psi.conj()))


@dataclass(frozen=True)
class EigenDecomposition:
    c_plus: complex
    c_minus: complex
    P_plus: float
    P_minus: float


def dual_basis(pair: Eigenpair) -> np.ndarray:
    """Rows are the left duals with ``<dual_i|psi_j> = delta_ij``."""
    if pair.coalesced:
        raise EPDegenerateError("eigenvectors coalesce; the eigenbasis is defective")
    return np.linalg.inv(pair.right_matrix())


def eigenstate_populations(state, p: HamiltonianParams | Eigenpair) -> EigenDecomposition:
    """Biorthogonal populations of ``state`` in the eigenbasis at ``p``.

    ``state`` is a qubit 2-vector or a 2x2 density matrix. Coefficients are
    the dual-basis projections ``c_i = <dual_i|psi>``; for a density matrix the
    populations come from the diagonal of ``D rho D^dagger`` and the reported
    coefficients are its square roots.
    """
    pair = p if isinstance(p, Eigenpair) else eigensystem(p)
    D = dual_basis(pair)
    state = np.asarray(state, dtype=complex)
    if state.shape == (2,):
        c = D @ state
        w = np.abs(c) ** 2
        c_plus, c_minus = complex(c[0]), complex(c[1])
    elif state.shape == (2, 2):
        w = np.real(np.diag(D @ state @ D.conj().T))
        c_plus, c_minus = complex(math.sqrt(max(w[0], 0))), complex(math.sqrt(max(w[1], 0)))
    else:
        raise ValueError(f"expected a qubit 2-vector or 2x2 matrix, got shape {state.shape}")
    total = w[0] + w[1]
    return EigenDecomposition(c_plus, c_minus, float(w[0] / total), float(w[1] / total))


def wrap_phase(phi):
    """Wrap into ``(-pi, pi]``."""
    wrapped = np.pi - np.mod(np.pi - np.asarray(phi, dtype=float), 2.0 * np.pi)
    return float(wrapped) if np.ndim(wrapped) == 0 else wrapped


@dataclass(frozen=True)
class FringeResult:
    contrast: float
    chi: float
    offset: float
    reliable: bool


def fit_fringe(scan, p_f: Sequence[float] | None = None) -> FringeResult:
    """Single-harmonic fit ``p(phi) = offset + contrast * cos(phi - chi)``.

    Accepts a :class:`~epsim.protocols.FringeScan` (anything with ``phases``
    and ``p_f``) or two arrays. Uses the fundamental DFT component, which is
    exact for noiseless samples equally spaced over one full period.
    """
    if p_f is None:
        phases, p_f = scan.phases, scan.p_f
    else:
        phases = scan
    phases = np.asarray(phases, dtype=float)
    p = np.asarray(p_f, dtype=float)
    n = phases.size
    if n < 5 or p.size != n:
        raise ValueError("fit_fringe needs >= 5 phase points with matching probabilities")
    expected = phases[0] + 2.0 * np.pi * np.arange(n) / n
    if not np.allclose(phases, expected, atol=1e-9):
        raise ValueError("phases must be uniformly spaced over one full period")
    F1 = np.mean(p * np.exp(1j * phases))  # = (contrast/2) e^{i chi}
    contrast = 2.0 * abs(F1)
    chi = wrap_phase(np.angle(F1)) if contrast > 0 else 0.0
    return FringeResult(float(contrast), chi, float(p.mean()), bool(contrast >= CONTRAST_FLOOR))


class PhaseDifference(NamedTuple):
    delta_chi: float
    reliable: bool


def phase_difference_summary(ccw: FringeResult, cw: FringeResult) -> PhaseDifference:
    """``wrap(chi_ccw - chi_cw)``; unreliable if either phase is."""
    return PhaseDifference(wrap_phase(ccw.chi - cw.chi), ccw.reliable and cw.reliable)


def phase_spread(chis: Sequence[float]) -> float:
    """Largest pairwise wrapped distance among a set of phases."""
    chis = list(chis)
    if len(chis) < 2:
        return 0.0
    return max(abs(wrap_phase(a - b)) for a, b in itertools.combinations(chis, 2))


def sample_expectation(exact_p: float, shots: int, seed=None) -> float:
    """Binomial estimate of a probability from ``shots`` single-shot outcomes.

    ``seed`` is anything accepted by :func:`numpy.random.default_rng`,
    including an existing ``Generator``.
    """
    if not 0.0 <= exact_p <= 1.0:
        # tolerate rounding just outside the unit interval
        if -1e-12 <= exact_p <= 1 + 1e-12:
            exact_p = min(max(exact_p, 0.0), 1.0)
        else:
            raise ValueError(f"probability must lie in [0, 1], got {exact_p}")
    if shots < 1:
        raise ValueError("shots must be >= 1")
    rng = np.random.default_rng(seed)
    return rng.binomial(int(shots), exact_p) / shots
