"""Phase integrals of the detector-field coupling along a worldline.

The first-order amplitudes are

    I_{s,j}(T) = int_0^T  exp(i [s Omega tau + omega_j t(tau)]) sin(k_j x(tau)) dtau,

with s = +1 or -1, and the second-order kernels are the nested integrals

    M_{j,s_out,s_in} = int_0^T  I_{s_in,j}(tau) * conj(f_{s_out,j}(tau)) dtau,

where f is the I-integrand (d/dtau of I* is the conjugated integrand).

On an accelerated worldline the instantaneous phase rate grows like
omega_j cosh(a tau) (the blueshift), so a fixed grid silently aliases.  The
integrator instead splits [0, T] into panels whose *bounded* phase advance is
at most pi/4, using the analytic envelope

    Phi(tau) = Omega tau + omega_j (t(tau) - t0) + k_j |x(tau) - x0|,

whose derivative dominates every oscillation rate present in the integrand
(explicit phase plus the sin amplitude factor).  Each panel is resolved by a
degree-15 Chebyshev interpolant; the trailing coefficients give the error
estimate, and the per-panel antiderivative gives a dense cumulative I(tau)
used by the nested M integrals in one forward sweep (no O(n^2)
re-integration).  Panels whose estimate exceeds the shared tolerance are
bisected; the total work is capped by an evaluation budget.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .cavity import CavityConfig, mode_frequency, mode_profile, mode_wavenumber
from .errors import AccuracyError, OutsideCavityError
from .worldline import SegmentKind, TrajectorySegment, position

DEFAULT_TOL = 1e-10
DEFAULT_MAX_EVALS = 10_000_000
MAX_PHASE_PER_PANEL = math.pi / 4
_N_NODES = 16  # Chebyshev points (first kind) per panel

_ENV_BUDGET = "ACCELGATES_MAX_EVALS"


def _effective_budget(max_evals: int | None) -> int:
    if max_evals is not None:
        return int(max_evals)
    env = os.environ.get(_ENV_BUDGET)
    if env:
        return int(float(env))
    return DEFAULT_MAX_EVALS


# Chebyshev nodes of the first kind on [-1, 1] (ascending) and the matrices
# that map sampled values to series coefficients.
_theta = (2.0 * np.arange(_N_NODES) + 1.0) * math.pi / (2.0 * _N_NODES)
_NODES = -np.cos(_theta)  # ascending in tau
_COEFF_MAT = np.cos(np.outer(_theta, np.arange(_N_NODES)))  # cos(k theta_i)
_COEFF_MAT = _COEFF_MAT * (2.0 / _N_NODES)
_COEFF_MAT[:, 0] *= 0.5
# values (at -cos(theta), i.e. ascending nodes) correspond to T_k(-cos th) =
# (-1)^k cos(k th); fold the sign into the matrix.
_COEFF_MAT = _COEFF_MAT * ((-1.0) ** np.arange(_N_NODES))[None, :]
# integral of T_k over [-1, 1]: 2/(1-k^2) for even k, 0 for odd k
_TK_INTEGRAL = np.array(
    [2.0 / (1.0 - k * k) if k % 2 == 0 else 0.0 for k in range(_N_NODES)]
)


def integrand(seg: TrajectorySegment, cfg: CavityConfig, j: int, s: int, tau):
    """exp(i [s Omega tau + omega_j t(tau)]) sin(k_j x(tau)); |result| <= 1."""
    if s not in (+1, -1):
        raise ValueError(f"sign must be +1 or -1, got {s}")
    omega = mode_frequency(cfg, j)
    t, x = position(seg, tau)
    phase = s * cfg.omega_gap * np.asarray(tau, dtype=float) + omega * np.asarray(t)
    out = np.exp(1j * phase) * mode_profile(cfg, j, x)
    if np.ndim(tau) == 0:
        return complex(out)
    return out


def _check_inside_cavity(seg: TrajectorySegment, cfg: CavityConfig, T: float) -> None:
    # x(tau) is monotone on a single segment, so endpoints bound the range.
    for tau in (0.0, T):
        _, x = position(seg, tau)
        tol = 1e-12 * max(1.0, cfg.length)
        if x < -tol or x > cfg.length + tol:
            raise OutsideCavityError(
                f"worldline leaves cavity [0, {cfg.length}]: x({tau}) = {x}"
            )


def _phase_envelope(seg: TrajectorySegment, cfg: CavityConfig, j: int):
    """Monotone Phi(tau) bounding total accumulated oscillation phase."""
    omega = mode_frequency(cfg, j)
    k = mode_wavenumber(cfg, j)
    gap = cfg.omega_gap

    def phi(tau):
        t, x = position(seg, tau)
        return (
            gap * np.asarray(tau, dtype=float)
            + omega * (np.asarray(t) - seg.t0)
            + k * np.abs(np.asarray(x) - seg.x0)
        )

    return phi


def _invert_envelope(phi, targets: np.ndarray, t_hi: float) -> np.ndarray:
    """Solve phi(tau) = target for each target by vectorized bisection."""
    lo = np.zeros_like(targets)
    hi = np.full_like(targets, t_hi)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        above = phi(mid) > targets
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    return 0.5 * (lo + hi)


@dataclass
class CumulativeIntegral:
    """Piecewise-Chebyshev antiderivative F(tau) = int_0^tau f, on [0, T]."""

    edges: np.ndarray  # (M+1,), ascending, edges[0] = 0
    anti_coeffs: np.ndarray  # (M, N+1) scaled antiderivative coefficients
    left_values: np.ndarray  # (M,) cumulative value at each panel's left edge
    total: complex
    error_estimate: float
    evaluations: int
    phase_advances: np.ndarray  # (M,) bounded phase advance per panel

    def __call__(self, tau):
        scalar = np.ndim(tau) == 0
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        if np.any(tau < -1e-12) or np.any(tau > self.edges[-1] * (1 + 1e-12) + 1e-300):
            raise ValueError(f"tau outside [0, {self.edges[-1]}]")
        tau = np.clip(tau, 0.0, self.edges[-1])
        idx = np.clip(np.searchsorted(self.edges, tau, side="right") - 1, 0, len(self.left_values) - 1)
        lo = self.edges[idx]
        hi = self.edges[idx + 1]
        x = np.where(hi > lo, (2.0 * tau - lo - hi) / np.where(hi > lo, hi - lo, 1.0), -1.0)
        vals = self.left_values[idx] + _clenshaw_rows(self.anti_coeffs[idx], x)
        if scalar:
            return complex(vals[0])
        return vals


def _clenshaw_rows(coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Evaluate rows of Chebyshev coefficients at matching points x."""
    b1 = np.zeros(x.shape, dtype=complex)
    b2 = np.zeros(x.shape, dtype=complex)
    for k in range(coeffs.shape[1] - 1, 0, -1):
        b1, b2 = coeffs[:, k] + 2.0 * x * b1 - b2, b1
    return coeffs[:, 0] + x * b1 - b2


def _antiderivative_coeffs(coeffs: np.ndarray, halfwidths: np.ndarray) -> np.ndarray:
    """Batched Chebyshev antiderivative with F(-1) = 0, scaled by halfwidth."""
    m, n = coeffs.shape
    b = np.zeros((m, n + 1), dtype=complex)
    b[:, 1] = coeffs[:, 0] - (coeffs[:, 2] / 2.0 if n > 2 else 0.0)
    for k in range(2, n + 1):
        upper = coeffs[:, k + 1] if k + 1 < n else 0.0
        b[:, k] = (coeffs[:, k - 1] - upper) / (2.0 * k)
    signs = (-1.0) ** np.arange(1, n + 1)
    b[:, 0] = -np.sum(b[:, 1:] * signs[None, :], axis=1)
    return b * halfwidths[:, None]


class _PanelIntegrator:
    """Shared panel machinery for the outer and nested integrals."""

    def __init__(self, f, budget: int, evals_used: int = 0):
        self.f = f
        self.budget = budget
        self.evals = evals_used

    def _evaluate(self, edges_lo: np.ndarray, edges_hi: np.ndarray):
        self.evals += edges_lo.size * _N_NODES
        if self.evals > self.budget:
            raise AccuracyError(
                f"evaluation budget {self.budget} exceeded", value=None, error_estimate=None
            )
        mid = 0.5 * (edges_lo + edges_hi)
        half = 0.5 * (edges_hi - edges_lo)
        taus = mid[:, None] + half[:, None] * _NODES[None, :]
        vals = self.f(taus)
        coeffs = vals @ _COEFF_MAT
        ints = half * (coeffs @ _TK_INTEGRAL)
        tail = np.abs(coeffs[:, -3:]).sum(axis=1)
        errs = 2.0 * half * tail + 1e-15 * half * np.abs(vals).max(axis=1)
        return coeffs, ints, errs

    def integrate(self, edges: np.ndarray, phase_advances: np.ndarray, tol: float):
        coeffs, ints, errs = self._evaluate(edges[:-1], edges[1:])
        # bisect offending panels until the summed estimate meets tol
        for _ in range(48):
            total_err = errs.sum()
            if total_err <= tol:
                break
            m = len(ints)
            bad = np.flatnonzero(errs > 0.5 * tol / m)
            if bad.size == 0:
                break
            lo, hi = edges[bad], edges[bad + 1]
            mids = 0.5 * (lo + hi)
            new_lo = np.column_stack([lo, mids]).ravel()
            new_hi = np.column_stack([mids, hi]).ravel()
            c2, i2, e2 = self._evaluate(new_lo, new_hi)
            edges = np.sort(np.concatenate([edges, mids]))
            keep = np.ones(m, dtype=bool)
            keep[bad] = False
            order_old = np.flatnonzero(keep)

            n_new = m + bad.size
            new_coeffs = np.empty((n_new, coeffs.shape[1]), dtype=complex)
            new_ints = np.empty(n_new, dtype=complex)
            new_errs = np.empty(n_new, dtype=float)
            new_phase = np.empty(n_new, dtype=float)
            # positions of surviving and split panels in the refined ordering
            offsets = np.cumsum(np.where(keep, 1, 2)) - np.where(keep, 1, 2)
            new_coeffs[offsets[order_old]] = coeffs[order_old]
            new_ints[offsets[order_old]] = ints[order_old]
            new_errs[offsets[order_old]] = errs[order_old]
            new_phase[offsets[order_old]] = phase_advances[order_old]
            pos = offsets[bad]
            for col in (0, 1):
                new_coeffs[pos + col] = c2[col::2]
                new_ints[pos + col] = i2[col::2]
                new_errs[pos + col] = e2[col::2]
                new_phase[pos + col] = 0.5 * phase_advances[bad]
            coeffs, ints, errs, phase_advances = new_coeffs, new_ints, new_errs, new_phase
        else:
            raise AccuracyError(
                "panel refinement did not converge",
                value=complex(ints.sum()),
                error_estimate=float(errs.sum()),
            )
        if errs.sum() > tol:
            raise AccuracyError(
                f"could not reach tolerance {tol} within budget",
                value=complex(ints.sum()),
                error_estimate=float(errs.sum()),
            )
        halves = 0.5 * np.diff(edges)
        anti = _antiderivative_coeffs(coeffs, halves)
        left = np.concatenate([[0.0 + 0.0j], np.cumsum(ints)[:-1]])
        return CumulativeIntegral(
            edges=edges,
            anti_coeffs=anti,
            left_values=left,
            total=complex(ints.sum()),
            error_estimate=float(errs.sum()),
            evaluations=self.evals,
            phase_advances=phase_advances,
        )


def _panel_edges(phi, T: float) -> tuple[np.ndarray, np.ndarray, float]:
    total_phase = float(phi(np.asarray(T)))
    n_panels = max(1, int(math.ceil(total_phase / MAX_PHASE_PER_PANEL)))
    if n_panels > 5_000_000:
        raise AccuracyError(
            f"phase envelope requires {n_panels} panels; parameters out of range"
        )
    if n_panels == 1:
        edges = np.array([0.0, T])
    else:
        targets = total_phase * np.arange(1, n_panels) / n_panels
        interior = _invert_envelope(phi, targets, T)
        edges = np.concatenate([[0.0], interior, [T]])
    advances = np.full(n_panels, total_phase / n_panels)
    return edges, advances, total_phase


@dataclass
class PhaseIntegralResult:
    value: complex
    error_estimate: float
    evaluations: int
    cumulative: CumulativeIntegral | None = None

    def __iter__(self):  # allow  value, err = phase_integral(...)
        yield self.value
        yield self.error_estimate


def _validate_args(seg: TrajectorySegment, T: float, tol: float) -> None:
    if tol <= 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    if T < 0:
        raise ValueError(f"T must be >= 0, got {T}")
    if T > seg.duration * (1 + 1e-12) + 1e-300:
        raise ValueError(f"T = {T} exceeds segment duration {seg.duration}")


def _empty_result() -> PhaseIntegralResult:
    cum = CumulativeIntegral(
        edges=np.array([0.0, 0.0]),
        anti_coeffs=np.zeros((1, _N_NODES + 1), dtype=complex),
        left_values=np.zeros(1, dtype=complex),
        total=0.0 + 0.0j,
        error_estimate=0.0,
        evaluations=0,
        phase_advances=np.zeros(1),
    )
    return PhaseIntegralResult(0.0 + 0.0j, 0.0, 0, cum)


def phase_integral(
    seg: TrajectorySegment,
    cfg: CavityConfig,
    j: int,
    s: int,
    T: float,
    tol: float = DEFAULT_TOL,
    max_evals: int | None = None,
) -> PhaseIntegralResult:
    """I_{s,j}(T) with |returned - true| <= error_estimate <= tol.

    Raises AccuracyError (carrying the best estimate) if the tolerance is
    unreachable within the evaluation budget, and OutsideCavityError if the
    worldline exits [0, L] before T.
    """
    _validate_args(seg, T, tol)
    if s not in (+1, -1):
        raise ValueError(f"sign must be +1 or -1, got {s}")
    if T == 0.0:
        return _empty_result()
    _check_inside_cavity(seg, cfg, T)
    phi = _phase_envelope(seg, cfg, j)
    edges, advances, _ = _panel_edges(phi, T)

    def f(tau):
        return integrand(seg, cfg, j, s, tau)

    integ = _PanelIntegrator(f, _effective_budget(max_evals))
    cum = integ.integrate(edges, advances, tol)
    return PhaseIntegralResult(cum.total, cum.error_estimate, cum.evaluations, cum)


def m_integral(
    seg: TrajectorySegment,
    cfg: CavityConfig,
    j: int,
    s_outer: int,
    s_inner: int,
    T: float,
    tol: float = DEFAULT_TOL,
    max_evals: int | None = None,
) -> PhaseIntegralResult:
    """Nested integral  int_0^T I_{s_inner,j}(tau) conj(f_{s_outer,j}(tau)) dtau.

    Computed in one forward sweep: the cumulative I from the inner pass is a
    dense piecewise polynomial, evaluated (not re-integrated) under the outer
    quadrature.
    """
    _validate_args(seg, T, tol)
    for s in (s_outer, s_inner):
        if s not in (+1, -1):
            raise ValueError(f"sign must be +1 or -1, got {s}")
    if T == 0.0:
        return PhaseIntegralResult(0.0 + 0.0j, 0.0, 0)
    _check_inside_cavity(seg, cfg, T)
    budget = _effective_budget(max_evals)
    scale = max(T, 1.0)
    inner_tol = tol / (4.0 * scale)
    inner = phase_integral(seg, cfg, j, s_inner, T, tol=inner_tol, max_evals=budget)

    phi = _phase_envelope(seg, cfg, j)

    def phi_double(tau):
        return 2.0 * phi(tau)

    edges, advances, _ = _panel_edges(phi_double, T)

    def g(tau):
        return inner.cumulative(np.ravel(tau)).reshape(np.shape(tau)) * np.conj(
            integrand(seg, cfg, j, s_outer, tau)
        )

    integ = _PanelIntegrator(g, budget, evals_used=inner.evaluations)
    cum = integ.integrate(edges, advances, tol / 2.0)
    err = cum.error_estimate + T * inner.error_estimate
    return PhaseIntegralResult(cum.total, err, cum.evaluations)


@dataclass
class PhaseIntegralTable:
    """I_{s,j}(T) for a set of modes and both signs, plus optional M kernels."""

    seg: TrajectorySegment
    cfg: CavityConfig
    T: float
    tol: float = DEFAULT_TOL
    entries: dict = field(default_factory=dict)  # (j, s) -> PhaseIntegralResult
    m_entries: dict = field(default_factory=dict)  # (j, s_out, s_in) -> result

    @property
    def modes(self) -> list[int]:
        return sorted({j for (j, _) in self.entries})

    def value(self, j: int, s: int) -> complex:
        return self.entries[(j, s)].value

    def m_value(self, j: int, s_outer: int, s_inner: int) -> complex:
        return self.m_entries[(j, s_outer, s_inner)].value


def compute_table(
    seg: TrajectorySegment,
    cfg: CavityConfig,
    T: float,
    tol: float = DEFAULT_TOL,
    modes: list[int] | None = None,
    with_m: bool = False,
    m_pairs: tuple[tuple[int, int], ...] = ((+1, +1), (-1, -1)),
    max_evals: int | None = None,
) -> PhaseIntegralTable:
    """Evaluate I (and optionally M) for every requested mode and sign."""
    table = PhaseIntegralTable(seg=seg, cfg=cfg, T=T, tol=tol)
    if modes is None:
        modes = list(range(1, cfg.n_modes + 1))
    for j in modes:
        for s in (+1, -1):
            table.entries[(j, s)] = phase_integral(seg, cfg, j, s, T, tol, max_evals)
        if with_m:
            for s_out, s_in in m_pairs:
                table.m_entries[(j, s_out, s_in)] = m_integral(
                    seg, cfg, j, s_out, s_in, T, tol, max_evals
                )
    return table


def table_to_csv(table: PhaseIntegralTable, stream=None) -> str:
    """Dump a table as CSV (columns: j, sign, T, re, im, err, evals)."""
    own = stream is None
    if own:
        stream = io.StringIO()
    stream.write("j,sign,T,re,im,err,evals\n")
    for (j, s) in sorted(table.entries):
        r = table.entries[(j, s)]
        sign = "+" if s > 0 else "-"
        stream.write(
            f"{j},{sign},{table.T!r},{r.value.real!r},{r.value.imag!r},"
            f"{r.error_estimate!r},{r.evaluations}\n"
        )
    return stream.getvalue() if own else ""
