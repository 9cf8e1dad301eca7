"""Exact evolution of the qubit plus a truncated multimode Fock space.

Ground truth for the perturbative modules: integrates

    i d|psi>/dtau = H_I(tau) |psi>,
    H_I = lambda mu(tau) sum_j (a_j^dag e^{i omega_j t(tau)} + h.c.) sin(k_j x(tau)),

in the interaction picture with an adaptive high-order Runge-Kutta stepper,
then traces out the field.  The step size is capped by both the fastest
instantaneous phase rate (which blueshifts like cosh(a tau)) and the
Hamiltonian norm, so the oscillations are always resolved.  Desk-scale only:
a few modes and single-digit Fock cutoffs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace as dc_replace

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .cavity import CavityConfig, mode_frequency, mode_wavenumber
from .errors import AccuracyError
from .oscillatory import _check_inside_cavity
from .perturbation import SIGMA_PLUS, CoherentPrep, QubitState
from .worldline import TrajectorySegment, position

NORM_DRIFT_LIMIT = 1e-9
COHERENT_TAIL = 1e-12
COHERENT_GUARD_LEVELS = 2


def coherent_cutoff(alpha: complex, tail: float = COHERENT_TAIL, guard: int = COHERENT_GUARD_LEVELS) -> int:
    """Smallest Fock cutoff keeping >= 1 - tail coherent weight, plus guard levels."""
    p = math.exp(-abs(alpha) ** 2)
    total = p
    n = 0
    while total < 1.0 - tail:
        n += 1
        p *= abs(alpha) ** 2 / n
        total += p
        if n > 10_000:
            raise ValueError(f"coherent amplitude too large to truncate: |alpha| = {abs(alpha)}")
    return n + guard


@dataclass(frozen=True)
class TruncatedFieldSpec:
    """Mode count, per-mode Fock cutoffs, and the initial field state."""

    n_modes: int
    n_max: tuple[int, ...]
    prep: CoherentPrep | None = None  # None means vacuum in every mode

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValueError(f"n_modes must be >= 1, got {self.n_modes}")
        n_max = tuple(int(n) for n in (self.n_max if hasattr(self.n_max, "__len__") else (self.n_max,) * self.n_modes))
        if len(n_max) == 1 and self.n_modes > 1:
            n_max = n_max * self.n_modes
        if len(n_max) != self.n_modes:
            raise ValueError("n_max must have one entry per mode")
        if any(n < 1 for n in n_max):
            raise ValueError(f"every n_max must be >= 1, got {n_max}")
        object.__setattr__(self, "n_max", n_max)
        if self.prep is not None:
            if not (1 <= self.prep.mode <= self.n_modes):
                raise ValueError(f"prepared mode {self.prep.mode} outside 1..{self.n_modes}")
            weight = _coherent_weight(self.prep.alpha, self.n_max[self.prep.mode - 1])
            if weight < 1.0 - COHERENT_TAIL:
                raise ValueError(
                    f"cutoff {self.n_max[self.prep.mode - 1]} keeps only {weight:.15f} "
                    f"of the coherent state; need >= {1 - COHERENT_TAIL}"
                )

    @staticmethod
    def vacuum(n_modes: int, n_max) -> "TruncatedFieldSpec":
        return TruncatedFieldSpec(n_modes, n_max if hasattr(n_max, "__len__") else (n_max,) * n_modes)

    @staticmethod
    def coherent(n_modes: int, prep: CoherentPrep, n_max=None, vacuum_n_max: int = 2) -> "TruncatedFieldSpec":
        """Coherent prep with the cutoff rule applied to the populated mode."""
        if n_max is None:
            cut = coherent_cutoff(prep.alpha)
            cuts = tuple(cut if j == prep.mode else vacuum_n_max for j in range(1, n_modes + 1))
        else:
            cuts = n_max if hasattr(n_max, "__len__") else (n_max,) * n_modes
        return TruncatedFieldSpec(n_modes, tuple(cuts), prep)

    @property
    def field_dimension(self) -> int:
        d = 1
        for n in self.n_max:
            d *= n + 1
        return d


def _coherent_weight(alpha: complex, n_max: int) -> float:
    p = math.exp(-abs(alpha) ** 2)
    total = p
    for n in range(1, n_max + 1):
        p *= abs(alpha) ** 2 / n
        total += p
    return total


def _field_operators(field: TruncatedFieldSpec):
    """Per-mode annihilation operators on the full field tensor space."""
    dims = [n + 1 for n in field.n_max]
    singles = [sp.diags(np.sqrt(np.arange(1, d)), 1, format="csr") for d in dims]
    ops = []
    for j in range(field.n_modes):
        op = sp.identity(1, format="csr")
        for m in range(field.n_modes):
            block = singles[m] if m == j else sp.identity(dims[m], format="csr")
            op = sp.kron(op, block, format="csr")
        ops.append(op)
    return ops


def _initial_field_vector(field: TruncatedFieldSpec) -> tuple[np.ndarray, float]:
    vec = np.zeros(field.field_dimension, dtype=complex)
    if field.prep is None:
        vec[0] = 1.0
        return vec, 0.0
    dims = [n + 1 for n in field.n_max]
    parts = []
    for j in range(field.n_modes):
        if j == field.prep.mode - 1:
            alpha = field.prep.alpha
            ns = np.arange(dims[j])
            log_fact = np.cumsum(np.log(np.maximum(ns, 1)))
            amps = np.exp(-abs(alpha) ** 2 / 2.0 + ns * np.log(abs(alpha) + 1e-300) - 0.5 * log_fact)
            amps = amps.astype(complex) * np.exp(1j * ns * np.angle(alpha))
            if abs(alpha) == 0.0:
                amps = np.zeros(dims[j], dtype=complex)
                amps[0] = 1.0
            parts.append(amps)
        else:
            e0 = np.zeros(dims[j], dtype=complex)
            e0[0] = 1.0
            parts.append(e0)
    vec = parts[0]
    for p in parts[1:]:
        vec = np.kron(vec, p)
    deficit = 1.0 - float(np.linalg.norm(vec) ** 2)
    vec = vec / np.linalg.norm(vec)
    return vec, deficit


def _max_step(seg: TrajectorySegment, cfg: CavityConfig, field: TruncatedFieldSpec, T: float) -> float:
    omegas = [mode_frequency(cfg, j) for j in range(1, field.n_modes + 1)]
    ks = [mode_wavenumber(cfg, j) for j in range(1, field.n_modes + 1)]
    z = abs(seg.a) * T
    ch = math.cosh(min(z, 700.0))
    sh = math.sqrt(max(ch * ch - 1.0, 0.0))
    rate = cfg.omega_gap + max(w * ch + k * sh for w, k in zip(omegas, ks))
    h_norm = cfg.coupling * sum(2.0 * math.sqrt(n + 1.0) for n in field.n_max)
    cap = (math.pi / 4.0) / rate
    if h_norm > 0:
        cap = min(cap, 0.5 / h_norm)
    return min(cap, T)


def _evolve_pure(seg, cfg, field, qubit_vec, T, rtol, atol):
    a_ops = _field_operators(field)
    omegas = np.array([mode_frequency(cfg, j) for j in range(1, field.n_modes + 1)])
    ks = [mode_wavenumber(cfg, j) for j in range(1, field.n_modes + 1)]
    raising = [sp.kron(SIGMA_PLUS, a.conj().T.tocsr(), format="csr") for a in a_ops]  # sigma+ a_j^dag
    lowering = [sp.kron(SIGMA_PLUS, a, format="csr") for a in a_ops]  # sigma+ a_j
    raising_h = [op.conj().T.tocsr() for op in raising]
    lowering_h = [op.conj().T.tocsr() for op in lowering]
    lam = cfg.coupling
    gap = cfg.omega_gap

    field_vec, deficit = _initial_field_vector(field)
    psi0 = np.kron(np.asarray(qubit_vec, dtype=complex), field_vec)

    def rhs(tau, psi):
        t, x = position(seg, tau)
        acc = np.zeros_like(psi)
        for j in range(field.n_modes):
            amp = math.sin(ks[j] * x)
            if amp == 0.0:
                continue
            c1 = np.exp(1j * (gap * tau + omegas[j] * t))
            c2 = np.exp(1j * (gap * tau - omegas[j] * t))
            acc += amp * (
                c1 * (raising[j] @ psi)
                + np.conj(c1) * (raising_h[j] @ psi)
                + c2 * (lowering[j] @ psi)
                + np.conj(c2) * (lowering_h[j] @ psi)
            )
        return -1j * lam * acc

    if T == 0.0 or lam == 0.0:
        return psi0, {"steps": 0, "min_step": 0.0, "max_step": 0.0, "norm_drift": 0.0, "truncation_deficit": deficit}

    sol = solve_ivp(
        rhs,
        (0.0, T),
        psi0,
        method="DOP853",
        rtol=rtol,
        atol=atol,
        max_step=_max_step(seg, cfg, field, T),
        dense_output=False,
    )
    if not sol.success:
        raise AccuracyError(f"oracle integration failed: {sol.message}")
    psi = sol.y[:, -1]
    drift = abs(np.linalg.norm(psi) - 1.0)
    steps = np.diff(sol.t)
    diag = {
        "steps": int(len(sol.t) - 1),
        "min_step": float(steps.min()) if len(steps) else 0.0,
        "max_step": float(steps.max()) if len(steps) else 0.0,
        "norm_drift": float(drift),
        "truncation_deficit": float(deficit),
    }
    if drift > NORM_DRIFT_LIMIT:
        raise AccuracyError(
            f"state norm drifted by {drift:.3g} > {NORM_DRIFT_LIMIT}; tighten tolerances",
            error_estimate=drift,
        )
    return psi, diag


def _reduce_to_qubit(psi: np.ndarray) -> np.ndarray:
    mat = psi.reshape(2, -1)
    return mat @ mat.conj().T


def exact_evolve(
    seg: TrajectorySegment,
    cfg: CavityConfig,
    field: TruncatedFieldSpec,
    rho0_qubit: QubitState,
    T: float,
    tol: float = 1e-10,
) -> tuple[QubitState, dict]:
    """Reduced qubit state after exact joint evolution up to proper time T.

    Mixed initial qubit states are evolved as convex combinations of their
    (at most two) eigenvector runs.  Raises AccuracyError when the state norm
    drifts beyond 1e-9, and OutsideCavityError if the worldline exits.
    """
    if T < 0 or T > seg.duration * (1 + 1e-12) + 1e-300:
        raise ValueError(f"T must lie in [0, duration]; got {T}")
    _check_inside_cavity(seg, cfg, T)
    if field.n_modes > cfg.n_modes:
        raise ValueError(
            f"field spec has {field.n_modes} modes but cavity retains {cfg.n_modes}"
        )
    rtol = tol
    atol = tol * 1e-2
    evals, vecs = np.linalg.eigh(rho0_qubit.matrix)
    rho = np.zeros((2, 2), dtype=complex)
    runs = []
    for weight, vec in zip(evals, vecs.T):
        if weight < 1e-14:
            continue
        psi, diag = _evolve_pure(seg, cfg, field, vec, T, rtol, atol)
        rho += weight * _reduce_to_qubit(psi)
        runs.append(diag)
    diagnostics = {
        "dimension": 2 * field.field_dimension,
        "n_modes": field.n_modes,
        "n_max": list(field.n_max),
        "runs": runs,
        "norm_drift": max((r["norm_drift"] for r in runs), default=0.0),
    }
    return QubitState(rho), diagnostics


@dataclass
class ConvergenceReport:
    rungs: list
    deltas: list
    passed: bool
    monotone: bool
    threshold: float

    def to_dict(self) -> dict:
        return {
            "rungs": self.rungs,
            "deltas": self.deltas,
            "passed": self.passed,
            "monotone": self.monotone,
            "threshold": self.threshold,
        }


def convergence_check(
    seg: TrajectorySegment,
    cfg: CavityConfig,
    rho0_qubit: QubitState,
    T: float,
    ladder: list[TruncatedFieldSpec],
    tol: float = 1e-10,
    threshold: float = 1e-6,
) -> ConvergenceReport:
    """Evolve along a ladder of increasing cutoffs and report Bloch drift.

    Passes when the last rung-to-rung change is below ``threshold``; flags
    non-monotone sequences that also fail the threshold.
    """
    if len(ladder) < 2:
        raise ValueError("need at least two ladder rungs")
    rungs = []
    blochs = []
    for spec in ladder:
        cav = cfg if cfg.n_modes >= spec.n_modes else dc_replace(cfg, n_modes=spec.n_modes)
        state, diag = exact_evolve(seg, cav, spec, rho0_qubit, T, tol)
        blochs.append(state.bloch)
        rungs.append(
            {
                "n_modes": spec.n_modes,
                "n_max": list(spec.n_max),
                "bloch": [float(v) for v in state.bloch],
                "norm_drift": diag["norm_drift"],
            }
        )
    deltas = [float(np.max(np.abs(blochs[i + 1] - blochs[i]))) for i in range(len(blochs) - 1)]
    monotone = all(deltas[i + 1] <= deltas[i] * (1 + 1e-9) + 1e-15 for i in range(len(deltas) - 1))
    passed = deltas[-1] < threshold
    return ConvergenceReport(rungs=rungs, deltas=deltas, passed=passed, monotone=monotone, threshold=threshold)
