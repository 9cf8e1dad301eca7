import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from accelgates.cavity import CavityConfig
from accelgates.oscillatory import phase_integral
from accelgates.perturbation import CoherentPrep
from accelgates.rotation import (
    NetRotation,
    axis_vs_time,
    azimuth_scan,
    compose,
    extract_rotation,
    phi_spread,
)
from accelgates.worldline import TrajectorySegment

PREP1 = CoherentPrep(mode=1, alpha=1.0 + 0j)

complex_st = st.builds(
    complex,
    st.floats(min_value=-5.0, max_value=5.0),
    st.floats(min_value=-5.0, max_value=5.0),
)


# ------------------------------------------------------------- extraction

def test_real_amplitude_gives_x_axis():
    # alpha = 1, I_- real, I_+ = 0 -> A real positive -> axis +x
    spec = extract_rotation(0.0, 2.5 + 0.0j, PREP1, 0.01)
    assert spec.azimuth == pytest.approx(0.0, abs=1e-15)
    assert spec.axis[1] == 0.0 and spec.axis[2] == 0.0


def test_imaginary_amplitude_gives_minus_y_axis():
    # A = i|A|: n = (0, -2|A|, 0), phi = -pi/2
    spec = extract_rotation(1.5j, 0.0, PREP1, 0.01)
    assert spec.axis[0] == pytest.approx(0.0, abs=1e-15)
    assert spec.axis[1] == pytest.approx(-3.0)
    assert spec.azimuth == pytest.approx(-math.pi / 2)


def test_delta_formula():
    # |A| = 2.5, lambda = 0.01 -> delta = 0.1
    spec = extract_rotation(2.5 + 0j, 0.0, PREP1, 0.01)
    assert spec.angle == pytest.approx(0.1, abs=1e-15)


def test_degenerate_axis():
    spec = extract_rotation(0.0, 0.0, PREP1, 0.01)
    assert spec.angle == 0.0
    assert math.isnan(spec.azimuth)
    assert spec.degenerate


@given(Ip=complex_st, Im=complex_st, alpha=complex_st, lam=st.floats(min_value=1e-4, max_value=1e-2))
@settings(max_examples=200, deadline=None)
def test_extraction_identities(Ip, Im, alpha, lam):
    prep = CoherentPrep(mode=1, alpha=alpha)
    spec = extract_rotation(Ip, Im, prep, lam)
    A = np.conj(alpha) * Ip + alpha * np.conj(Im)
    assert spec.axis[2] == 0.0
    assert abs(spec.angle - 4.0 * lam * abs(A)) <= 1e-12 * max(1.0, spec.angle)
    assert abs(spec.angle - 2.0 * lam * np.linalg.norm(spec.axis)) <= 1e-12 * max(1.0, spec.angle)


@pytest.mark.filterwarnings("ignore::accelgates.errors.PerturbativityWarning")
@given(
    Ip=complex_st,
    Im=complex_st,
    scale=st.floats(min_value=0.01, max_value=50.0),
    lam1=st.floats(min_value=1e-4, max_value=5e-2),
    lam2=st.floats(min_value=1e-4, max_value=5e-2),
)
@settings(max_examples=200, deadline=None)
def test_axis_invariant_under_positive_rescaling(Ip, Im, scale, lam1, lam2):
    base = CoherentPrep(mode=1, alpha=0.8 + 0.3j)
    scaled = CoherentPrep(mode=1, alpha=(0.8 + 0.3j) * scale)
    s1 = extract_rotation(Ip, Im, base, lam1)
    s2 = extract_rotation(Ip, Im, scaled, lam2)
    if s1.degenerate or s2.degenerate:
        return
    assert s1.azimuth == pytest.approx(s2.azimuth, abs=1e-10)


def test_phase_covariance_of_delta():
    # delta depends on |e^{-i arg} I+ + e^{i arg} I-*|, phi on the arg itself
    Ip, Im = 0.7 - 0.2j, 0.3 + 0.5j
    lam, mag = 0.01, 1.3
    for theta in np.linspace(-math.pi, math.pi, 17):
        prep = CoherentPrep(mode=1, alpha=mag * np.exp(1j * theta))
        spec = extract_rotation(Ip, Im, prep, lam)
        expected = 4.0 * lam * mag * abs(
            np.exp(-1j * theta) * Ip + np.exp(1j * theta) * np.conj(Im)
        )
        assert spec.angle == pytest.approx(expected, abs=1e-13)
    # two different coherent phases generally give different azimuths
    sa = extract_rotation(Ip, Im, CoherentPrep(mode=1, alpha=mag), lam)
    sb = extract_rotation(Ip, Im, CoherentPrep(mode=1, alpha=mag * 1j), lam)
    assert abs(sa.azimuth - sb.azimuth) > 1e-3


# ------------------------------------------------------------ composition

def test_compose_empty_is_identity():
    net = compose([])
    assert net.as_array() == pytest.approx([1.0, 0.0, 0.0, 0.0])


def test_compose_inverse_pair():
    q = NetRotation.from_axis_angle([0.3, -0.8, 0.51], 1.234)
    net = q.inverse() @ q
    assert net.fidelity(NetRotation.identity()) == pytest.approx(1.0, abs=1e-12)


def test_compose_90x_then_90y():
    # reference composition: net rotation of 120 deg about (1, 1, -1)/sqrt(3)
    rx = NetRotation.from_axis_angle([1, 0, 0], math.pi / 2)
    ry = NetRotation.from_axis_angle([0, 1, 0], math.pi / 2)
    net = compose([rx, ry])
    assert net.angle == pytest.approx(2.0 * math.pi / 3.0, abs=1e-12)
    assert net.axis == pytest.approx(np.array([1.0, 1.0, -1.0]) / math.sqrt(3.0), abs=1e-12)


@given(st.lists(st.tuples(complex_st, st.floats(min_value=0.0, max_value=math.pi)), max_size=6))
@settings(max_examples=100, deadline=None)
def test_composition_round_trip(items):
    rots = [
        NetRotation.from_axis_angle([c.real, c.imag, abs(c) % 1.0], ang)
        for c, ang in items
        if abs(c) > 1e-6
    ]
    net = compose(rots)
    back = compose([r.inverse() for r in reversed(rots)])
    assert (back @ net).fidelity(NetRotation.identity()) == pytest.approx(1.0, abs=1e-10)
    assert abs(net.norm - 1.0) < 1e-12


def test_su2_round_trip():
    q = NetRotation.from_axis_angle([0.2, 0.5, -0.9], 2.2)
    u = q.to_su2()
    assert np.allclose(u @ u.conj().T, np.eye(2), atol=1e-12)
    q2 = NetRotation.from_su2(u * np.exp(0.37j))  # arbitrary global phase
    assert q2.fidelity(q) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        NetRotation.from_su2(np.array([[1.0, 1.0], [0.0, 1.0]]))


# ------------------------------------------------------------------ scans

def test_azimuth_scan_zero_matches_inertial():
    cfg = CavityConfig(length=math.pi, n_modes=1, omega_gap=1.0, coupling=0.01)
    x0 = 1.1
    T = 3.0
    rows = azimuth_scan(cfg, PREP1, 0.01, T, [0.0], x0=x0)
    seg = TrajectorySegment.inertial(x0=x0, duration=T)
    Ip = phase_integral(seg, cfg, 1, +1, T).value
    Im = phase_integral(seg, cfg, 1, -1, T).value
    direct = extract_rotation(Ip, Im, PREP1, 0.01)
    assert rows[0].phi == pytest.approx(direct.azimuth, abs=1e-12)
    assert rows[0].delta == pytest.approx(direct.angle, abs=1e-14)


def test_azimuth_scan_single_point_matches_direct():
    cfg = CavityConfig(length=math.pi, n_modes=1, omega_gap=1.0, coupling=0.01)
    rows = azimuth_scan(cfg, PREP1, 0.01, 2.0, [1.0])
    seg = TrajectorySegment.accelerated(a=1.0, duration=2.0)
    Ip = phase_integral(seg, cfg, 1, +1, 2.0).value
    Im = phase_integral(seg, cfg, 1, -1, 2.0).value
    direct = extract_rotation(Ip, Im, PREP1, 0.01)
    assert rows[0].phi == pytest.approx(direct.azimuth, abs=1e-12)


def test_scan_out_of_cavity_not_fatal():
    cfg = CavityConfig(length=math.pi, n_modes=1, omega_gap=1.0, coupling=0.01)
    rows = azimuth_scan(cfg, PREP1, 0.01, 2.0, [0.5, 5.0, 1.0])
    assert rows[1].error is not None
    assert rows[0].error is None and rows[2].error is None
    assert math.isnan(rows[1].phi)


def test_axis_vs_time_zero_time_row():
    cfg = CavityConfig(length=math.pi, n_modes=1, omega_gap=1.0, coupling=0.01)
    rows = axis_vs_time(cfg, PREP1, 0.01, [0.0, 1.0], a=0.0)
    assert rows[0].delta == 0.0


def test_unwrap_continuity():
    cfg = CavityConfig(length=math.pi, n_modes=1, omega_gap=1.0, coupling=0.01)
    rows = axis_vs_time(cfg, PREP1, 0.01, np.linspace(0.3, 2.0, 40), a=1.0)
    phis = [r.phi_unwrapped for r in rows if r.error is None]
    assert np.all(np.abs(np.diff(phis)) < math.pi)
    assert phi_spread(rows) >= 0.0
