"""Spectral structure of the two-level effective non-Hermitian Hamiltonian.

The qubit lives in the ordered basis ``(|e>, |f>)``. In the frame rotating with
the drive the no-jump generator is

    H = [[Delta - i*gamma/2, J],
         [J,                 0]]

with eigenvalues ``Delta/2 - i*gamma/4 +/- sqrt(J**2 + (Delta/2 - i*gamma/4)**2)``
and (non-orthogonal) right eigenvectors proportional to ``(lambda, J)``.
All rates are in rad/us (``gamma`` in 1/us).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "InvalidParameterError",
    "HamiltonianParams",
    "Eigenpair",
    "EPLocation",
    "build_hamiltonian",
    "eigensystem",
    "eigenvalues",
    "coalescence_tolerance",
    "ep_locations",
    "track_branches",
    "riemann_surface",
    "write_riemann_csv",
    "RIEMANN_CSV_HEADER",
]

RIEMANN_CSV_HEADER = (
    "J",
    "Delta",
    "re_lambda_plus",
    "im_lambda_plus",
    "re_lambda_minus",
    "im_lambda_minus",
)


class InvalidParameterError(ValueError):
    """Raised for non-finite or out-of-domain Hamiltonian parameters."""


@dataclass(frozen=True)
class HamiltonianParams:
    """Instantaneous ``(J, Delta, gamma)`` of the effective Hamiltonian."""

    J: float
    Delta: float
    gamma: float

    def __post_init__(self):
        for name in ("J", "Delta", "gamma"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidParameterError(f"{name} must be finite, got {value!r}")
        if self.gamma < 0:
            raise InvalidParameterError(f"gamma must be >= 0, got {self.gamma}")


@dataclass(frozen=True)
class Eigenpair:
    lambda_plus: complex
    lambda_minus: complex
    psi_plus: np.ndarray
    psi_minus: np.ndarray
    coalesced: bool

    def right_matrix(self) -> np.ndarray:
        """Columns ``(psi_plus, psi_minus)``."""
        return np.column_stack([self.psi_plus, self.psi_minus])


@dataclass(frozen=True)
class EPLocation:
    J_ep: float
    Delta_ep: float


def build_hamiltonian(p: HamiltonianParams) -> np.ndarray:
    """Return the 2x2 complex matrix ``[[Delta - i gamma/2, J], [J, 0]]``."""
    return np.array(
        [[p.Delta - 0.5j * p.gamma, p.J], [p.J, 0.0]],
        dtype=complex,
    )


def _principal_sqrt(z: complex) -> complex:
    # cmath/numpy principal sqrt: Re >= 0, and Im >= 0 on the negative real axis.
    # Signed zeros in z.imag can flip the result onto the other branch, so clear them.
    z = complex(z.real + 0.0, z.imag + 0.0)
    return complex(np.sqrt(z))


def eigenvalues(J: float, Delta: float, gamma: float) -> tuple[complex, complex]:
    """Closed-form ``(lambda_plus, lambda_minus)`` with the principal sqrt."""
    J, Delta, gamma = float(J), float(Delta), float(gamma)
    centre = 0.5 * Delta - 0.25j * gamma
    root = _principal_sqrt(J * J + centre * centre)
    lp, lm = centre + root, centre - root
    # the smaller root loses digits to cancellation; recover it from lp * lm = -J^2
    if abs(lp) >= abs(lm):
        if lp != 0:
            lm = -J * J / lp
    else:
        lp = -J * J / lm
    return lp, lm


def coalescence_tolerance(lambda_plus: complex, lambda_minus: complex) -> float:
    return 1e-9 * max(1.0, abs(lambda_plus) + abs(lambda_minus))


def _normalize(v: np.ndarray) -> np.ndarray:
    v = v / np.max(np.abs(v))  # rescale first so tiny entries do not underflow the norm
    return v / np.linalg.norm(v)


def eigensystem(p: HamiltonianParams) -> Eigenpair:
    """Eigenvalues and normalized right eigenvectors of the effective Hamiltonian.

    Eigenvectors are ``(lambda, J) / norm``. For ``J == 0`` that form degenerates
    for the zero eigenvalue, so the decoupled analytic limits ``|e>`` (eigenvalue
    ``Delta - i gamma/2``) and ``|f>`` (eigenvalue 0) are returned instead.
    At coalescence both eigenvectors equal the single kernel vector.
    """
    lp, lm = eigenvalues(p.J, p.Delta, p.gamma)
    coalesced = abs(lp - lm) < coalescence_tolerance(lp, lm)

    if p.J == 0.0:
        e = np.array([1.0, 0.0], dtype=complex)
        f = np.array([0.0, 1.0], dtype=complex)
        diag = complex(p.Delta, -0.5 * p.gamma)
        # assign by which decoupled level each root actually is
        if abs(lp - diag) <= abs(lp):
            psi_plus, psi_minus = e, f
        else:
            psi_plus, psi_minus = f, e
        if coalesced:
            psi_minus = psi_plus
        return Eigenpair(lp, lm, psi_plus, psi_minus, coalesced)

    if coalesced:
        lam = 0.5 * (lp + lm)
        v = _normalize(np.array([lam, p.J], dtype=complex))
        return Eigenpair(lp, lm, v, v.copy(), True)

    psi_plus = _normalize(np.array([lp, p.J], dtype=complex))
    psi_minus = _normalize(np.array([lm, p.J], dtype=complex))
    return Eigenpair(lp, lm, psi_plus, psi_minus, False)


def ep_locations(gamma: float) -> list[EPLocation]:
    """Static EPs of the two-level model: ``J = +/- gamma/4`` at ``Delta = 0``."""
    if not math.isfinite(gamma) or gamma < 0:
        raise InvalidParameterError(f"gamma must be finite and >= 0, got {gamma!r}")
    if gamma == 0:
        return [EPLocation(0.0, 0.0)]
    return [EPLocation(0.25 * gamma, 0.0), EPLocation(-0.25 * gamma, 0.0)]


def _keep_order(prev: tuple[complex, complex], pair: tuple[complex, complex]) -> bool:
    a, b = prev
    u, v = pair
    return abs(a - u) + abs(b - v) <= abs(a - v) + abs(b - u)


def track_branches(
    pairs: Iterable[tuple[complex, complex]],
    start: tuple[complex, complex] | None = None,
) -> np.ndarray:
    """Relabel a sequence of eigenvalue pairs so each column varies continuously.

    Each new pair is ordered to minimise the total displacement from the
    previously assigned pair. Returns an ``(n, 2)`` complex array.
    """
    out = []
    prev = start
    for u, v in pairs:
        if prev is not None and not _keep_order(prev, (u, v)):
            u, v = v, u
        prev = (u, v)
        out.append(prev)
    return np.array(out, dtype=complex).reshape(-1, 2)


def riemann_surface(
    J_values: Sequence[float],
    Delta_values: Sequence[float],
    gamma: float,
) -> dict[str, np.ndarray]:
    """Sample both eigenvalue sheets on a ``(Delta, J)`` grid with branch tracking.

    Rows are indexed by ``Delta`` and columns by ``J``; the flattened output is
    row-major. The first column is tracked along ``Delta`` and every row is then
    tracked along ``J`` from its first-column seed. With a grid starting outside
    ``|J| < gamma/4`` the only remaining label discontinuity is across the cut
    segment joining the two EPs.

    Returns a dict of flat arrays: ``J``, ``Delta``, ``lambda_plus``,
    ``lambda_minus`` and ``overlap`` (``|<psi_+|psi_->|`` of the principal
    labelling, used as the eigenstate opening-angle indicator).
    """
    J_values = np.asarray(J_values, dtype=float)
    Delta_values = np.asarray(Delta_values, dtype=float)
    if J_values.size == 0 or Delta_values.size == 0:
        raise InvalidParameterError("riemann_surface needs a non-empty grid")
    if not (np.all(np.isfinite(J_values)) and np.all(np.isfinite(Delta_values))):
        raise InvalidParameterError("grid values must be finite")
    if not math.isfinite(gamma) or gamma < 0:
        raise InvalidParameterError(f"gamma must be finite and >= 0, got {gamma!r}")

    n_d, n_j = Delta_values.size, J_values.size
    lam = np.empty((n_d, n_j, 2), dtype=complex)
    overlap = np.empty((n_d, n_j))

    seeds = track_branches(eigenvalues(J_values[0], d, gamma) for d in Delta_values)
    for i, d in enumerate(Delta_values):
        row = [eigenvalues(j, d, gamma) for j in J_values]
        row[0] = tuple(seeds[i])
        lam[i] = track_branches(row)
        for k, j in enumerate(J_values):
            pair = eigensystem(HamiltonianParams(float(j), float(d), float(gamma)))
            overlap[i, k] = abs(np.vdot(pair.psi_plus, pair.psi_minus))

    JJ, DD = np.meshgrid(J_values, Delta_values)
    return {
        "J": JJ.ravel(),
        "Delta": DD.ravel(),
        "lambda_plus": lam[:, :, 0].ravel(),
        "lambda_minus": lam[:, :, 1].ravel(),
        "overlap": overlap.ravel(),
    }


def write_riemann_csv(path, table: dict[str, np.ndarray], include_overlap: bool = False) -> None:
    """Write a :func:`riemann_surface` table, 12 significant digits per value."""
    header = list(RIEMANN_CSV_HEADER)
    if include_overlap:
        header.append("overlap_abs")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for idx in range(table["J"].size):
            lp = table["lambda_plus"][idx]
            lm = table["lambda_minus"][idx]
            row = [table["J"][idx], table["Delta"][idx], lp.real, lp.imag, lm.real, lm.imag]
            if include_overlap:
                row.append(table["overlap"][idx])
            writer.writerow([f"{float(v):.12g}" for v in row])
