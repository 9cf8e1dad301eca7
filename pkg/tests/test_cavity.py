import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from accelgates.cavity import CavityConfig, mode_frequency, mode_profile, mode_wavenumber
from accelgates.errors import OutsideCavityError


def test_mode_frequencies():
    cfg = CavityConfig(length=math.pi, n_modes=5)
    assert mode_frequency(cfg, 1) == pytest.approx(1.0)
    assert mode_frequency(cfg, 5) == pytest.approx(5.0)
    unit = CavityConfig(length=1.0, n_modes=3)
    assert mode_frequency(unit, 2) == pytest.approx(2.0 * math.pi)


def test_mode_profile_nodes_and_antinodes():
    cfg = CavityConfig(length=math.pi, n_modes=2)
    assert mode_profile(cfg, 1, 0.0) == pytest.approx(0.0, abs=1e-15)
    assert mode_profile(cfg, 1, math.pi / 2) == pytest.approx(1.0)
    assert mode_profile(cfg, 2, math.pi / 2) == pytest.approx(0.0, abs=1e-12)


def test_mode_index_domain():
    cfg = CavityConfig(length=math.pi, n_modes=2)
    with pytest.raises(ValueError):
        mode_frequency(cfg, 0)
    with pytest.raises(ValueError):
        mode_frequency(cfg, 3)


def test_out_of_cavity_guard():
    cfg = CavityConfig(length=2.0, n_modes=1)
    with pytest.raises(OutsideCavityError):
        mode_profile(cfg, 1, -0.1)
    with pytest.raises(OutsideCavityError):
        mode_profile(cfg, 1, 2.1)


def test_config_validation():
    with pytest.raises(ValueError):
        CavityConfig(length=0.0)
    with pytest.raises(ValueError):
        CavityConfig(n_modes=0)
    with pytest.raises(ValueError):
        CavityConfig(omega_gap=-1.0)
    with pytest.raises(ValueError):
        CavityConfig(coupling=-0.1)


@given(
    L=st.floats(min_value=0.5, max_value=20.0),
    j=st.integers(min_value=1, max_value=8),
    frac=st.floats(min_value=0.0, max_value=1.0),
)
@settings(max_examples=100, deadline=None)
def test_profile_bounded_and_dispersion_linear(L, j, frac):
    cfg = CavityConfig(length=L, n_modes=8)
    x = frac * L
    assert abs(mode_profile(cfg, j, x)) <= 1.0 + 1e-12
    assert mode_frequency(cfg, j) == pytest.approx(j * mode_frequency(cfg, 1), rel=1e-12)
    assert mode_wavenumber(cfg, j) == mode_frequency(cfg, j)


def test_profile_vectorized():
    cfg = CavityConfig(length=math.pi, n_modes=1)
    xs = np.linspace(0.0, math.pi, 7)
    vals = mode_profile(cfg, 1, xs)
    assert vals.shape == xs.shape
    assert np.allclose(vals, np.sin(xs))
