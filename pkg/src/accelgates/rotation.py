"""Bloch-sphere rotations induced by one coupling segment, and their algebra.

A coherent preparation turns the first-order evolution into a rotation about
an equatorial axis:

    A   = conj(alpha) I_+ + alpha conj(I_-)
    n   = (2 Re A, -2 Im A, 0)          (unnormalized axis)
    delta = 2 lambda |n| = 4 lambda |A|

The azimuth phi = atan2(n_y, n_x) is independent of lambda and of |alpha|;
it is steered by the acceleration (and the coherent phase), which is what the
scan drivers below map out.  Note the bookkeeping convention: delta = 4
lambda |A| is twice the O(lambda) Bloch-precession angle generated by
``coherent_first_order``; extraction, composition and synthesis all use this
one convention consistently.

Exact (not small-angle) composition is done with unit quaternions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cavity import CavityConfig
from .errors import OutsideCavityError
from .oscillatory import DEFAULT_TOL, phase_integral
from .perturbation import CoherentPrep, check_perturbative, coherent_amplitude
from .worldline import TrajectorySegment

DEGENERATE_DELTA = 1e-14


@dataclass(frozen=True)
class RotationSpec:
    """Axis-angle rotation extracted from one segment (axis is equatorial)."""

    axis: np.ndarray  # unnormalized, z-component exactly 0
    angle: float  # delta >= 0
    azimuth: float  # atan2(n_y, n_x); NaN when degenerate

    @property
    def degenerate(self) -> bool:
        return not math.isfinite(self.azimuth)

    def unit_axis(self) -> np.ndarray:
        n = np.linalg.norm(self.axis)
        if n == 0.0:
            return np.array([1.0, 0.0, 0.0])
        return self.axis / n


@dataclass(frozen=True)
class NetRotation:
    """Unit quaternion (scalar w, vector xyz) for an SU(2) rotation."""

    w: float
    x: float
    y: float
    z: float

    @staticmethod
    def identity() -> "NetRotation":
        return NetRotation(1.0, 0.0, 0.0, 0.0)

    @staticmethod
    def from_axis_angle(axis, angle: float) -> "NetRotation":
        axis = np.asarray(axis, dtype=float)
        norm = np.linalg.norm(axis)
        if norm == 0.0 or abs(angle) < 1e-300:
            return NetRotation.identity()
        half = 0.5 * angle
        s = math.sin(half) / norm
        return NetRotation(math.cos(half), s * axis[0], s * axis[1], s * axis[2])

    @staticmethod
    def from_spec(spec: RotationSpec) -> "NetRotation":
        if spec.angle < DEGENERATE_DELTA:
            return NetRotation.identity()
        return NetRotation.from_axis_angle(spec.axis, spec.angle)

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))

    def normalized(self) -> "NetRotation":
        q = self.as_array()
        n = np.linalg.norm(q)
        if n == 0.0:
            raise ValueError("zero quaternion")
        return NetRotation(*(q / n))

    def __matmul__(self, other: "NetRotation") -> "NetRotation":
        """Hamilton product: (self @ other) applies ``other`` first."""
        w1, v1 = self.w, np.array([self.x, self.y, self.z])
        w2, v2 = other.w, np.array([other.x, other.y, other.z])
        w = w1 * w2 - v1 @ v2
        v = w1 * v2 + w2 * v1 + np.cross(v1, v2)
        return NetRotation(w, *v)

    def inverse(self) -> "NetRotation":
        return NetRotation(self.w, -self.x, -self.y, -self.z)

    @property
    def angle(self) -> float:
        """Rotation angle in [0, 2 pi)."""
        v = math.hypot(self.x, math.hypot(self.y, self.z))
        return 2.0 * math.atan2(v, self.w)

    @property
    def axis(self) -> np.ndarray:
        v = np.array([self.x, self.y, self.z])
        n = np.linalg.norm(v)
        if n < 1e-300:
            return np.array([1.0, 0.0, 0.0])
        return v / n

    def sqrt(self) -> "NetRotation":
        """Rotation of half the angle about the same axis."""
        return NetRotation.from_axis_angle(self.axis, 0.5 * self.angle)

    def fidelity(self, other: "NetRotation") -> float:
        """|Tr(U1^dag U2)| / 2 = |<q1, q2>|; insensitive to the SU(2) sign."""
        return float(abs(self.as_array() @ other.as_array()))

    def to_su2(self) -> np.ndarray:
        """2x2 unitary cos(t/2) I - i sin(t/2) n.sigma for this quaternion."""
        return np.array(
            [
                [self.w - 1j * self.z, -self.y - 1j * self.x],
                [self.y - 1j * self.x, self.w + 1j * self.z],
            ],
            dtype=complex,
        )

    @staticmethod
    def from_su2(u: np.ndarray) -> "NetRotation":
        """Quaternion of a 2x2 unitary, ignoring its global phase."""
        u = np.asarray(u, dtype=complex)
        det = u[0, 0] * u[1, 1] - u[0, 1] * u[1, 0]
        if abs(det) < 1e-12:
            raise ValueError("matrix is singular, not a unitary")
        u = u / np.sqrt(det)
        w = 0.5 * (u[0, 0] + u[1, 1]).real
        z = -0.5 * (u[0, 0] - u[1, 1]).imag
        x = -0.5 * (u[0, 1] + u[1, 0]).imag
        y = -0.5 * (u[0, 1] - u[1, 0]).real
        q = NetRotation(w, x, y, z)
        residual = abs(np.max(np.abs(q.to_su2() - u)))
        if residual > 1e-6:
            raise ValueError(f"matrix is not unitary up to phase (residual {residual:.2g})")
        return q.normalized()


def extract_rotation(
    I_plus: complex, I_minus: complex, prep: CoherentPrep, lam: float
) -> RotationSpec:
    """Axis and magnitude of the segment rotation from the phase integrals.

    Satisfies delta = 2 lambda |n| = 4 lambda |A| identically and n_z = 0
    exactly.  A == 0 yields delta = 0 with azimuth NaN (flagged degenerate).
    """
    if lam < 0:
        raise ValueError(f"coupling must be >= 0, got {lam}")
    check_perturbative(lam, prep.magnitude)
    A = coherent_amplitude(I_plus, I_minus, prep.alpha)
    n = np.array([2.0 * A.real, -2.0 * A.imag, 0.0])
    delta = float(4.0 * lam * abs(A))
    if delta < DEGENERATE_DELTA:
        return RotationSpec(axis=n, angle=delta, azimuth=float("nan"))
    return RotationSpec(axis=n, angle=delta, azimuth=math.atan2(n[1], n[0]))


def compose(rotations) -> NetRotation:
    """Exact group composition of rotations applied in list order.

    Empty input gives the identity.  Accepts RotationSpec or NetRotation
    entries; the result is renormalized to unit length.
    """
    net = NetRotation.identity()
    for r in rotations:
        q = NetRotation.from_spec(r) if isinstance(r, RotationSpec) else r
        net = q @ net  # later rotations act on the left
    return net.normalized()


@dataclass
class ScanPoint:
    """One row of an axis scan; ``error`` is set instead of values on failure."""

    param: float
    phi: float
    phi_unwrapped: float
    delta: float
    I_plus: complex
    I_minus: complex
    error: str | None = None


def _segment_for(a: float, T: float, x0: float) -> TrajectorySegment:
    if a == 0.0:
        return TrajectorySegment.inertial(x0=x0, duration=T)
    return TrajectorySegment.accelerated(a=a, duration=T, x0=x0)


def _scan(cfg, prep, lam, points, tol):
    rows: list[ScanPoint] = []
    for value, seg, T in points:
        try:
            rp = phase_integral(seg, cfg, prep.mode, +1, T, tol)
            rm = phase_integral(seg, cfg, prep.mode, -1, T, tol)
            spec = extract_rotation(rp.value, rm.value, prep, lam)
            rows.append(
                ScanPoint(value, spec.azimuth, spec.azimuth, spec.angle, rp.value, rm.value)
            )
        except OutsideCavityError as exc:
            rows.append(
                ScanPoint(value, float("nan"), float("nan"), float("nan"), 0j, 0j, str(exc))
            )
    unwrap_scan(rows)
    return rows


def unwrap_scan(rows: list[ScanPoint]) -> None:
    """Fill phi_unwrapped by adding 2 pi increments along the valid rows."""
    idx = [i for i, r in enumerate(rows) if r.error is None and math.isfinite(r.phi)]
    if not idx:
        return
    phis = np.unwrap([rows[i].phi for i in idx])
    for i, phi in zip(idx, phis):
        rows[i].phi_unwrapped = float(phi)


def phi_spread(rows: list[ScanPoint]) -> float:
    """Max minus min of the unwrapped azimuth over valid rows (radians)."""
    vals = [r.phi_unwrapped for r in rows if r.error is None and math.isfinite(r.phi_unwrapped)]
    if not vals:
        return 0.0
    return float(max(vals) - min(vals))


def azimuth_scan(
    cfg: CavityConfig,
    prep: CoherentPrep,
    lam: float,
    T: float,
    a_values,
    x0: float = 0.0,
    tol: float = DEFAULT_TOL,
) -> list[ScanPoint]:
    """Rotation axis/magnitude versus acceleration at fixed interaction time.

    Out-of-cavity points are reported per row (``error`` set), not fatal.
    """
    points = [(float(a), _segment_for(float(a), T, x0), T) for a in a_values]
    return _scan(cfg, prep, lam, points, tol)


def axis_vs_time(
    cfg: CavityConfig,
    prep: CoherentPrep,
    lam: float,
    T_values,
    a: float = 0.0,
    x0: float | None = None,
    tol: float = DEFAULT_TOL,
) -> list[ScanPoint]:
    """Rotation axis/magnitude versus interaction time at fixed worldline.

    ``a = 0`` scans a detector at rest (default: centered in the cavity);
    accelerated scans start from the wall (x0 = 0) unless overridden.
    """
    if x0 is None:
        x0 = cfg.length / 2.0 if a == 0.0 else 0.0
    points = [(float(T), _segment_for(a, float(T), x0), float(T)) for T in T_values]
    return _scan(cfg, prep, lam, points, tol)
