"""Closed parameter loops ``(J(t), Delta(t))`` used to encircle the EPs.

    Delta(t) = Delta_amp * sin(2 pi t / T)
    J(t)     = (J_max - J_min) * cos^2(pi t / T) + J_min

The sign of ``Delta_amp`` sets the direction: positive is counterclockwise,
negative is clockwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .spectra import HamiltonianParams, InvalidParameterError, ep_locations

__all__ = [
    "ScheduleRangeError",
    "BoundaryAmbiguousError",
    "ParameterLoop",
    "ScheduleSample",
    "loop_params",
    "loop_arrays",
    "sample_schedule",
    "loop_polygon",
    "winding_count",
    "DIRECTIONS",
]

DIRECTIONS = {"ccw": 1.0, "cw": -1.0}


class ScheduleRangeError(ValueError):
    """Time requested outside ``[0, T]``."""


class BoundaryAmbiguousError(ValueError):
    """An EP sits on (or numerically on) the loop curve."""


@dataclass(frozen=True)
class ParameterLoop:
    """One period of the encircling schedule.

    Attributes
    ----------
    J_max, J_min : float
        Coupling at the loop start/end and at mid-loop (rad/us).
    Delta_amp : float
        Signed detuning amplitude (rad/us); the sign encodes direction.
    T : float
        Loop period (us).
    gamma : float
        |e> decay rate (1/us) used by the non-Hermitian propagator.
    """

    J_max: float
    J_min: float
    Delta_amp: float
    T: float
    gamma: float = 0.0

    def __post_init__(self):
        for name in ("J_max", "J_min", "Delta_amp", "T", "gamma"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidParameterError(f"{name} must be finite, got {value!r}")
        if self.T <= 0:
            raise InvalidParameterError(f"loop period must be > 0, got {self.T}")
        if self.gamma < 0:
            raise InvalidParameterError(f"gamma must be >= 0, got {self.gamma}")

    @classmethod
    def from_config(cls, block: dict, gamma: float = 0.0) -> "ParameterLoop":
        """Build from a run-config ``loop`` block.

        Keys: ``j_max``, ``j_min``, ``delta_amp``, ``period_us`` and optional
        ``direction`` ("ccw" or "cw"), which multiplies ``delta_amp`` by +/-1.
        """
        missing = {"j_max", "j_min", "delta_amp", "period_us"} - set(block)
        if missing:
            raise InvalidParameterError(f"loop block missing keys: {sorted(missing)}")
        direction = block.get("direction", "ccw")
        if direction not in DIRECTIONS:
            raise InvalidParameterError(f"direction must be 'ccw' or 'cw', got {direction!r}")
        return cls(
            J_max=float(block["j_max"]),
            J_min=float(block["j_min"]),
            Delta_amp=DIRECTIONS[direction] * float(block["delta_amp"]),
            T=float(block["period_us"]),
            gamma=float(gamma),
        )

    @property
    def direction(self) -> str:
        return "cw" if self.Delta_amp < 0 else "ccw"

    def reversed(self) -> "ParameterLoop":
        """Same loop traversed in the opposite direction."""
        return replace(self, Delta_amp=-self.Delta_amp)

    def with_(self, **changes) -> "ParameterLoop":
        return replace(self, **changes)


@dataclass(frozen=True)
class ScheduleSample:
    t: float
    params: HamiltonianParams


def loop_arrays(loop: ParameterLoop, t):
    """Vectorised ``(J(t), Delta(t))`` without range checking.

    The phase is reduced modulo one period so ``t = T`` reproduces ``t = 0``
    bit for bit. ``J`` is evaluated as ``J_max cos^2 + J_min sin^2`` (identical
    to the cos^2 form) so the endpoints are exact.
    """
    phase = np.mod(np.asarray(t, dtype=float) / loop.T, 1.0)
    c = np.cos(np.pi * phase)
    s = np.sin(np.pi * phase)
    J = loop.J_max * c * c + loop.J_min * s * s
    Delta = loop.Delta_amp * np.sin(2.0 * np.pi * phase)
    return J, Delta


def loop_params(loop: ParameterLoop, t: float) -> HamiltonianParams:
    if not (0.0 <= t <= loop.T):
        raise ScheduleRangeError(f"t={t} outside [0, {loop.T}]")
    J, Delta = loop_arrays(loop, t)
    return HamiltonianParams(float(J), float(Delta), loop.gamma)


def sample_schedule(loop: ParameterLoop, n: int) -> list[ScheduleSample]:
    """``n`` samples uniformly spaced over ``[0, T]`` inclusive."""
    return [ScheduleSample(float(t), loop_params(loop, float(t))) for t in np.linspace(0.0, loop.T, n)]


def loop_polygon(loop: ParameterLoop, n: int = 10_000) -> np.ndarray:
    """``(n, 2)`` array of ``(J, Delta)`` vertices; the closing edge is implicit."""
    t = np.arange(n) * (loop.T / n)
    J, Delta = loop_arrays(loop, t)
    return np.column_stack([J, Delta])


def _segment_distance(pt: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    denom = np.where(denom == 0, 1.0, denom)
    u = np.clip(np.einsum("ij,ij->i", pt - a, ab) / denom, 0.0, 1.0)
    closest = a + u[:, None] * ab
    return np.linalg.norm(pt - closest, axis=1)


def _inside(pt: np.ndarray, poly: np.ndarray) -> bool:
    # even-odd ray casting along +J
    a = poly
    b = np.roll(poly, -1, axis=0)
    x, y = pt
    straddles = (a[:, 1] > y) != (b[:, 1] > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = a[:, 0] + (y - a[:, 1]) * (b[:, 0] - a[:, 0]) / (b[:, 1] - a[:, 1])
    return bool(np.count_nonzero(straddles & (x_cross > x)) % 2)


def winding_count(loop: ParameterLoop, n_samples: int = 10_000) -> int:
    """Number of static EPs strictly enclosed by the loop curve.

    Diagnostic only; the dynamics do not use it.
    """
    poly = loop_polygon(loop, n_samples)
    edges_a = poly
    edges_b = np.roll(poly, -1, axis=0)
    count = 0
    for ep in ep_locations(loop.gamma):
        pt = np.array([ep.J_ep, ep.Delta_ep])
        dist = _segment_distance(np.broadcast_to(pt, edges_a.shape), edges_a, edges_b).min()
        if dist < 1e-9:
            raise BoundaryAmbiguousError(
                f"EP at J={ep.J_ep}, Delta={ep.Delta_ep} lies within {dist:.3g} of the loop"
            )
        count += _inside(pt, poly)
    return count
