"""Detector worldlines: kinematics of inertial and uniformly accelerated segments.

Conventions: c = 1, so positions and times share one natural unit and proper
acceleration has units of inverse time.  A uniformly accelerated segment
follows

    t(tau) = t0 + sinh(a tau) / a,      x(tau) = x0 + (cosh(a tau) - 1) / a,

which starts at rest at (t0, x0).  The sign of ``a`` picks the direction of
acceleration (cosh is even, sinh odd, so the same formulas hold verbatim).
An inertial segment is a detector at rest: x = x0, t = t0 + tau.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

C_LIGHT = 299792458.0  # m/s
G_STANDARD = 9.80665  # m/s^2, standard gravity

# Below this |a*tau| the hyperbolic forms are evaluated by series to avoid
# cancellation in cosh(a tau) - 1.
_SERIES_THRESHOLD = 1e-4


class SegmentKind(enum.Enum):
    INERTIAL = "inertial"
    UNIFORM_ACCELERATION = "uniform_acceleration"


@dataclass(frozen=True)
class TrajectorySegment:
    """One worldline piece, parametrized by proper time tau in [0, duration]."""

    kind: SegmentKind
    a: float = 0.0
    x0: float = 0.0
    t0: float = 0.0
    duration: float = 0.0

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError(f"duration must be >= 0, got {self.duration}")
        if self.kind is SegmentKind.INERTIAL and self.a != 0.0:
            raise ValueError("inertial segment must have a = 0")
        if not all(math.isfinite(v) for v in (self.a, self.x0, self.t0, self.duration)):
            raise ValueError("segment parameters must be finite")

    @staticmethod
    def inertial(x0: float, duration: float, t0: float = 0.0) -> "TrajectorySegment":
        return TrajectorySegment(SegmentKind.INERTIAL, 0.0, x0, t0, duration)

    @staticmethod
    def accelerated(a: float, duration: float, x0: float = 0.0, t0: float = 0.0) -> "TrajectorySegment":
        return TrajectorySegment(SegmentKind.UNIFORM_ACCELERATION, a, x0, t0, duration)


def _check_tau(seg: TrajectorySegment, tau) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < -1e-15) or np.any(tau > seg.duration * (1 + 1e-15) + 1e-300):
        raise ValueError(
            f"tau outside segment domain [0, {seg.duration}]: {tau}"
        )
    return tau


def position(seg: TrajectorySegment, tau):
    """Coordinate time and position (t, x) at proper time tau.

    Accepts scalar or ndarray tau; returns matching shapes.
    """
    tau = _check_tau(seg, tau)
    if seg.kind is SegmentKind.INERTIAL or seg.a == 0.0:
        return seg.t0 + tau, seg.x0 + np.zeros_like(tau)
    a = seg.a
    z = a * tau
    small = np.abs(z) < _SERIES_THRESHOLD
    z2 = z * z
    # series for (cosh z - 1)/a and sinh(z)/a, accurate to ~1e-24 relative
    x_series = seg.x0 + a * tau * tau / 2.0 * (1.0 + z2 / 12.0 * (1.0 + z2 / 30.0))
    t_series = seg.t0 + tau * (1.0 + z2 / 6.0 * (1.0 + z2 / 20.0))
    with np.errstate(over="ignore"):
        x_hyp = seg.x0 + (np.cosh(z) - 1.0) / a
        t_hyp = seg.t0 + np.sinh(z) / a
    t = np.where(small, t_series, t_hyp)
    x = np.where(small, x_series, x_hyp)
    if np.ndim(tau) == 0:
        return float(t), float(x)
    return t, x


def velocity(seg: TrajectorySegment, tau):
    """Coordinate velocity dx/dt at proper time tau; always |v| < 1."""
    tau = _check_tau(seg, tau)
    if seg.kind is SegmentKind.INERTIAL or seg.a == 0.0:
        v = np.zeros_like(tau)
    else:
        v = np.tanh(seg.a * tau)
    if np.ndim(tau) == 0:
        return float(v)
    return v


def segment_end(seg: TrajectorySegment) -> tuple[float, float]:
    """(t, x) at the segment's final proper time."""
    return position(seg, seg.duration)


def chain(segments: list[TrajectorySegment]) -> list[TrajectorySegment]:
    """Re-anchor each segment so its (t0, x0) continues the previous one.

    Only position is matched; velocity may jump (segments are modeled as
    starting at rest, e.g. on entering the next cavity of an array).
    """
    out: list[TrajectorySegment] = []
    t, x = None, None
    for seg in segments:
        if t is None:
            out.append(seg)
        else:
            out.append(replace(seg, t0=t, x0=x))
        t, x = segment_end(out[-1])
    return out


@dataclass(frozen=True)
class UnitSystem:
    """Maps natural acceleration units to SI via the detector gap.

    ``omega_si`` is the gap as an SI angular frequency (rad/s); one natural
    unit of acceleration is a_SI = omega_si * c / pi.
    """

    omega_si: float

    def __post_init__(self):
        if not (self.omega_si > 0):
            raise ValueError(f"omega_si must be > 0, got {self.omega_si}")

    @staticmethod
    def from_gap_frequency(f_hz: float) -> "UnitSystem":
        """Build from the gap quoted as an ordinary frequency (Omega / 2 pi)."""
        return UnitSystem(omega_si=2.0 * math.pi * f_hz)


def natural_to_si_acceleration(a_natural: float, units: UnitSystem) -> tuple[float, float]:
    """Convert a natural-unit proper acceleration to (m/s^2, multiples of g)."""
    a_si = a_natural * units.omega_si * C_LIGHT / math.pi
    return a_si, a_si / G_STANDARD
