"""Cavity mode structure for a massless field with Dirichlet walls.

Mode functions are sin(k_j x) with k_j = j pi / L and dispersion omega_j = k_j
(c = 1).  No 1/sqrt(omega_j L) normalization factor is applied; any such
factor is absorbed into the coupling constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import OutsideCavityError


@dataclass(frozen=True)
class CavityConfig:
    """Cavity geometry plus the detector parameters entering the coupling."""

    length: float = math.pi
    n_modes: int = 1
    omega_gap: float = 1.0  # detector energy gap Omega
    coupling: float = 0.01  # lambda

    def __post_init__(self):
        if not (self.length > 0):
            raise ValueError(f"cavity length must be > 0, got {self.length}")
        if self.n_modes < 1:
            raise ValueError(f"n_modes must be >= 1, got {self.n_modes}")
        if not (self.omega_gap > 0):
            raise ValueError(f"omega_gap must be > 0, got {self.omega_gap}")
        if self.coupling < 0:
            raise ValueError(f"coupling must be >= 0, got {self.coupling}")


def _check_mode(cfg: CavityConfig, j: int) -> None:
    if not (1 <= j <= cfg.n_modes):
        raise ValueError(f"mode index {j} outside 1..{cfg.n_modes}")


def mode_wavenumber(cfg: CavityConfig, j: int) -> float:
    _check_mode(cfg, j)
    return j * math.pi / cfg.length


def mode_frequency(cfg: CavityConfig, j: int) -> float:
    """omega_j = k_j = j pi / L (massless dispersion)."""
    return mode_wavenumber(cfg, j)


def mode_profile(cfg: CavityConfig, j: int, x):
    """sin(k_j x); raises OutsideCavityError for x outside [0, L]."""
    _check_mode(cfg, j)
    xa = np.asarray(x, dtype=float)
    tol = 1e-12 * max(1.0, cfg.length)
    if np.any(xa < -tol) or np.any(xa > cfg.length + tol):
        raise OutsideCavityError(
            f"detector position outside cavity [0, {cfg.length}]: "
            f"x in [{xa.min()}, {xa.max()}]"
        )
    out = np.sin(mode_wavenumber(cfg, j) * xa)
    if np.ndim(x) == 0:
        return float(out)
    return out
