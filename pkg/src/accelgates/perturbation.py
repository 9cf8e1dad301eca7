"""Perturbative reduced dynamics of the detector qubit.

Conventions: qubit basis ordered (|e>, |g>) so that the Bloch z-component is
+1 for the excited state (north pole).  sigma_plus = |e><g| raises, and the
monopole coupling in the interaction picture is
sigma_plus e^{i Omega tau} + sigma_minus e^{-i Omega tau}.

Two regimes are assembled here:

* field prepared in a coherent state: the leading (first-order) correction is
  a pure Bloch rotation about an equatorial axis, built from the phase
  integrals I_+ and I_- of the populated mode;

* field in vacuum: the first-order reduced correction vanishes identically
  (every first-order term changes the photon number by one, so the field
  trace kills it) and the leading effect is the second-order Bloch drift
  assembled from |I|^2 products and the nested M kernels.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .cavity import CavityConfig
from .errors import PerturbativityWarning, TruncationWarning
from .oscillatory import DEFAULT_TOL, PhaseIntegralTable, compute_table
from .worldline import TrajectorySegment

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
SIGMA_MINUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)

PERTURBATIVE_LIMIT = 0.05  # warn when lambda * |alpha| exceeds this


@dataclass(frozen=True)
class QubitState:
    """2x2 density operator over (|e>, |g>) with Bloch-vector access."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError(f"density matrix must be 2x2, got {m.shape}")
        object.__setattr__(self, "matrix", m)

    @staticmethod
    def from_bloch(b) -> "QubitState":
        b = np.asarray(b, dtype=float)
        m = 0.5 * (IDENTITY_2 + b[0] * SIGMA_X + b[1] * SIGMA_Y + b[2] * SIGMA_Z)
        return QubitState(m)

    @staticmethod
    def excited() -> "QubitState":
        return QubitState.from_bloch([0.0, 0.0, 1.0])

    @staticmethod
    def ground() -> "QubitState":
        return QubitState.from_bloch([0.0, 0.0, -1.0])

    @property
    def bloch(self) -> np.ndarray:
        m = self.matrix
        return np.array(
            [
                float(np.real(np.trace(m @ SIGMA_X))),
                float(np.real(np.trace(m @ SIGMA_Y))),
                float(np.real(np.trace(m @ SIGMA_Z))),
            ]
        )

    def validate(self, herm_tol=1e-12, trace_tol=1e-12, eig_tol=1e-10, bloch_tol=1e-10):
        """Check physical-state invariants; raises ValueError on violation."""
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > herm_tol:
            raise ValueError("density matrix not Hermitian")
        if abs(np.trace(m).real - 1.0) > trace_tol or abs(np.trace(m).imag) > trace_tol:
            raise ValueError(f"trace != 1: {np.trace(m)}")
        ev = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
        if ev.min() < -eig_tol:
            raise ValueError(f"negative eigenvalue {ev.min()}")
        if np.linalg.norm(self.bloch) > 1.0 + bloch_tol:
            raise ValueError(f"Bloch vector outside sphere: |b| = {np.linalg.norm(self.bloch)}")
        return self


@dataclass(frozen=True)
class CoherentPrep:
    """Coherent state of amplitude alpha prepared in one cavity mode."""

    mode: int
    alpha: complex

    def __post_init__(self):
        if self.mode < 1:
            raise ValueError(f"mode index must be >= 1, got {self.mode}")

    @property
    def magnitude(self) -> float:
        return abs(self.alpha)

    @property
    def arg(self) -> float:
        return float(np.angle(self.alpha))


def coherent_amplitude(I_plus: complex, I_minus: complex, alpha: complex) -> complex:
    """A = conj(alpha) I_+ + alpha conj(I_-), the rotation generator amplitude."""
    return complex(np.conj(alpha) * I_plus + alpha * np.conj(I_minus))


def check_perturbative(lam: float, alpha_mag: float) -> bool:
    """True if lambda*|alpha| is inside the trusted perturbative window."""
    ok = lam * alpha_mag <= PERTURBATIVE_LIMIT
    if not ok:
        warnings.warn(
            f"lambda*|alpha| = {lam * alpha_mag:.3g} > {PERTURBATIVE_LIMIT}; "
            "first-order results are unreliable",
            PerturbativityWarning,
            stacklevel=3,
        )
    return ok


def coherent_first_order(
    I_plus: complex,
    I_minus: complex,
    prep: CoherentPrep,
    lam: float,
    rho0: QubitState,
) -> QubitState:
    """Leading-order reduced state after coupling to the coherent mode.

    The update is the O(lambda) unitary increment generated by
    X = Re(A) sigma_x - Im(A) sigma_y with A = conj(alpha) I_+ + alpha conj(I_-):

        rho_T = rho_0 - i lambda [X, rho_0],

    i.e. a Bloch precession  delta_b = 2 lambda (v x b)  about the equatorial
    vector v = (Re A, -Im A, 0).  Assembled on Pauli components, so the trace
    is preserved exactly; the purity drift is O((lambda |alpha|)^2).
    """
    if lam < 0:
        raise ValueError(f"coupling must be >= 0, got {lam}")
    check_perturbative(lam, prep.magnitude)
    A = coherent_amplitude(I_plus, I_minus, prep.alpha)
    v = np.array([A.real, -A.imag, 0.0])
    db = 2.0 * lam * np.cross(v, rho0.bloch)
    increment = 0.5 * (db[0] * SIGMA_X + db[1] * SIGMA_Y + db[2] * SIGMA_Z)
    return QubitState(rho0.matrix + increment)


def vacuum_first_order_check(table: PhaseIntegralTable | None = None, prep: str = "vacuum"):
    """Reduced first-order correction for a vacuum field: identically zero.

    Structural fact, independent of the I values: every first-order term
    carries exactly one creation or annihilation operator, whose vacuum
    expectation vanishes.  Returns the exact zero matrix; refuses non-vacuum
    preparations, where the first order does not vanish.
    """
    if prep != "vacuum":
        raise ValueError(f"first-order correction only vanishes for vacuum, got prep={prep!r}")
    return np.zeros((2, 2), dtype=complex)


@dataclass
class VacuumCoefficients:
    """Per-mode algebraic groupings entering the second-order Bloch drift.

    For each retained mode, with I+ = I_{+,j}(T), I- = I_{-,j}(T) and the
    diagonal nested kernels Mss = int_0^T I_s conj(f_s) dtau:

        B+- = I+ conj(I-) +- conj(I+) I-      (B+ real, B- pure imaginary)
        D+- = |I+|^2 +- |I-|^2                (real)
        A^x/y = D+ +- B+
        A^xy  = i (B- - D-),   A^yx = conj(A^xy)
        C_1   = -(M-- + M++)/2
        C_z   = -(M-- - M++)/2

    The C normalization is fixed by trace preservation of the full
    second-order correction: 2 Re C_1 = -D+/2 and 2 Re C_z = D-/2 at the
    final time, which the assembled Delta-b equations rely on.
    """

    modes: list[int]
    B_plus: np.ndarray
    B_minus: np.ndarray
    D_plus: np.ndarray
    D_minus: np.ndarray
    A_x: np.ndarray
    A_y: np.ndarray
    A_xy: np.ndarray
    A_yx: np.ndarray
    C_1: np.ndarray
    C_z: np.ndarray


def vacuum_coefficients(
    table: PhaseIntegralTable,
    m_values: dict | None = None,
) -> VacuumCoefficients:
    """Assemble VacuumCoefficients from a phase-integral table.

    ``m_values`` maps (j, s_outer, s_inner) -> complex; defaults to the
    table's own M entries.  Raises ValueError when the mode sets disagree.
    """
    if m_values is None:
        m_values = {k: r.value for k, r in table.m_entries.items()}
    modes = table.modes
    if not modes:
        raise ValueError("phase-integral table is empty")
    for j in modes:
        for key in ((j, +1, +1), (j, -1, -1)):
            if key not in m_values:
                raise ValueError(f"missing diagonal M kernel for mode {j}: {key}")
    Ip = np.array([table.value(j, +1) for j in modes])
    Im = np.array([table.value(j, -1) for j in modes])
    Mpp = np.array([m_values[(j, +1, +1)] for j in modes])
    Mmm = np.array([m_values[(j, -1, -1)] for j in modes])
    B_plus = (Ip * np.conj(Im) + np.conj(Ip) * Im).real
    B_minus = Ip * np.conj(Im) - np.conj(Ip) * Im
    D_plus = (np.abs(Ip) ** 2 + np.abs(Im) ** 2).real
    D_minus = (np.abs(Ip) ** 2 - np.abs(Im) ** 2).real
    A_x = D_plus + B_plus + 0.0j
    A_y = D_plus - B_plus + 0.0j
    A_xy = 1j * (B_minus - D_minus)
    A_yx = np.conj(A_xy)
    C_1 = -(Mmm + Mpp) / 2.0
    C_z = -(Mmm - Mpp) / 2.0
    return VacuumCoefficients(
        modes=modes,
        B_plus=B_plus,
        B_minus=B_minus,
        D_plus=D_plus,
        D_minus=D_minus,
        A_x=A_x,
        A_y=A_y,
        A_xy=A_xy,
        A_yx=A_yx,
        C_1=C_1,
        C_z=C_z,
    )


def vacuum_bloch_delta(coeffs: VacuumCoefficients, b0, lam: float) -> np.ndarray:
    """Second-order Bloch-vector increment for an initially-vacuum field.

        db_x = 2 l^2 sum_j [ (B+/4 + Re C_1) b_x + (i B-/4 + Im C_z) b_y ]
        db_y = 2 l^2 sum_j [ (Re C_1 - B+/4) b_y + (i B-/4 - Im C_z) b_x ]
        db_z = 2 l^2 sum_j [ (Re C_1 - D+/4) b_z + D-/4 + Re C_z ]

    Scales as lambda^2; returns zeros when lam == 0.
    """
    if lam < 0:
        raise ValueError(f"coupling must be >= 0, got {lam}")
    b0 = np.asarray(b0, dtype=float)
    iB4 = (1j * coeffs.B_minus).real / 4.0
    reC1 = coeffs.C_1.real
    imCz = coeffs.C_z.imag
    reCz = coeffs.C_z.real
    pref = 2.0 * lam * lam
    dbx = pref * np.sum((coeffs.B_plus / 4.0 + reC1) * b0[0] + (iB4 + imCz) * b0[1])
    dby = pref * np.sum((reC1 - coeffs.B_plus / 4.0) * b0[1] + (iB4 - imCz) * b0[0])
    dbz = pref * np.sum(
        (reC1 - coeffs.D_plus / 4.0) * b0[2] + coeffs.D_minus / 4.0 + reCz
    )
    return np.array([dbx, dby, dbz])


def vacuum_delta_for_modes(
    seg: TrajectorySegment,
    cfg: CavityConfig,
    b0,
    T: float | None = None,
    tol: float = DEFAULT_TOL,
    max_evals: int | None = None,
) -> np.ndarray:
    """Convenience pipeline: integrals + kernels + Delta-b for cfg's modes."""
    if T is None:
        T = seg.duration
    table = compute_table(seg, cfg, T, tol=tol, with_m=True, max_evals=max_evals)
    return vacuum_bloch_delta(vacuum_coefficients(table), b0, cfg.coupling)


def converged_vacuum_delta(
    seg: TrajectorySegment,
    cfg: CavityConfig,
    b0,
    T: float | None = None,
    rel_tol: float = 1e-6,
    max_modes: int = 512,
    tol: float = DEFAULT_TOL,
    max_evals: int | None = None,
) -> tuple[np.ndarray, int]:
    """Mode-sum Delta-b, doubling the retained modes until it settles.

    Starts from cfg.n_modes and doubles until the increment changes by less
    than rel_tol in norm, or the cap is hit (TruncationWarning).  Returns
    (delta_b, n_modes_used).
    """
    n = cfg.n_modes
    prev = vacuum_delta_for_modes(seg, replace(cfg, n_modes=n), b0, T, tol, max_evals)
    while n < max_modes:
        n2 = min(2 * n, max_modes)
        cur = vacuum_delta_for_modes(seg, replace(cfg, n_modes=n2), b0, T, tol, max_evals)
        denom = max(np.linalg.norm(cur), 1e-300)
        if np.linalg.norm(cur - prev) / denom < rel_tol:
            return cur, n2
        prev, n = cur, n2
    warnings.warn(
        f"vacuum mode sum not converged to {rel_tol} at cap {max_modes}",
        TruncationWarning,
        stacklevel=2,
    )
    return prev, n
