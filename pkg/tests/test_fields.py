import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bohmarrival import (
    BackflowPair,
    DoubleSlit,
    GaussianPacket,
    NodalPoint,
    PlaneWave,
    PreconditionError,
    SpinVector,
    Spinor,
    Superposition,
    WaveguideSpinField,
    continuity_residual,
    evaluate_field,
    backflow_wavevectors,
    pauli_current,
    quantum_potential,
)
from bohmarrival.fields import _richardson_laplacian

coord = st.floats(-2.0, 2.0)
point = st.tuples(coord, coord, coord)


def unit_vectors():
    return st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)).filter(
        lambda v: np.linalg.norm(v) > 0.1
    ).map(lambda v: np.asarray(v) / np.linalg.norm(v))


# spin types


def test_spin_vector_rejects_non_unit():
    with pytest.raises(PreconditionError, match="unit length"):
        SpinVector([0.5, 0, 0])


@given(unit_vectors())
def test_spinor_reproduces_its_spin(s):
    sp = Spinor.from_spin(SpinVector(s))
    assert abs(np.linalg.norm(sp.components) - 1) < 1e-12
    assert np.allclose(sp.spin_vector(), s, atol=1e-10)


# plane waves and superpositions


def test_plane_wave_current():
    f = PlaneWave((0, 0, 3.0))
    s = evaluate_field(f, (0.3, -1.0, 2.0), 0.7)
    assert s.rho == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(s.current, (0, 0, 3.0), atol=1e-12)
    assert abs(s.quantum_potential) < 1e-12


@settings(max_examples=30)
@given(point, st.floats(0, 3))
def test_superposition_is_linear(x, t):
    a = PlaneWave((1.0, 0, 2.0))
    b = GaussianPacket((0.5, 0, 0), 0.8, (0, 1, 1))
    c1, c2 = 0.3 - 0.2j, 1.1j
    s = Superposition([(c1, a), (c2, b)])
    x = np.asarray(x)
    assert abs(s.psi(x, t) - (c1 * a.psi(x, t) + c2 * b.psi(x, t))) < 1e-12
    assert np.allclose(s.grad(x, t), c1 * a.grad(x, t) + c2 * b.grad(x, t), atol=1e-12)


def test_scalar_current_matches_definition(packet):
    x = np.array([0.2, -0.4, 0.9])
    p, g = packet.psi(x, 1.3), packet.grad(x, 1.3)
    assert np.allclose(packet.current(x, 1.3), np.imag(np.conj(p) * g), atol=1e-10)


def test_evaluation_is_pure(backflow_pair):
    a = evaluate_field(backflow_pair, (0.1, 0, 0.2), 0.0)
    b = evaluate_field(backflow_pair, (0.1, 0, 0.2), 0.0)
    assert a.psi == b.psi and np.array_equal(a.current, b.current)


def test_symmetric_double_slit_has_no_cross_current(symmetric_slit):
    for z in (-0.5, 0.0, 1.0):
        j = symmetric_slit.current(np.array([0.0, 0.1, z]), 2.0)
        assert abs(j[0]) < 1e-15


def test_node_raises_when_velocity_requested():
    f = Superposition([(1, PlaneWave((0, 0, 1.0))), (1, PlaneWave((0, 0, -1.0)))])
    x = np.array([0.0, 0.0, math.pi / 2])
    with pytest.raises(NodalPoint):
        evaluate_field(f, x, 0.0)
    assert evaluate_field(f, x, 0.0, want_velocity=False).velocity is None


# backflow pair


def test_backflow_pair_closed_forms(backflow_pair):
    k1z, k2z = backflow_pair.k1[2], backflow_pair.k2[2]
    assert backflow_pair.alpha == pytest.approx(-(1 + k1z / k2z) / 2)
    jz = backflow_pair.current(np.zeros(3), 0.0)[2]
    assert jz < 0
    assert jz == pytest.approx(-(k2z / 4) * (1 - k1z / k2z) ** 2, rel=1e-12)
    keff = backflow_pair.k_eff()
    assert keff[2] == pytest.approx(-k2z, rel=1e-12)
    assert np.linalg.norm(keff) / (2 * math.pi) == pytest.approx(1.11, abs=0.02)


def test_backflow_pair_without_second_wave():
    k1 = (1.0, 0.0, 2.0)
    k2 = (2.0, 0.0, 1.0)
    f = BackflowPair(k1, k2, 0.0)
    x = np.random.default_rng(0).normal(size=(20, 3))
    assert np.allclose(f.current(x, 0.0)[:, 2], 2.0, atol=1e-12)


def test_backflow_pair_preconditions():
    with pytest.raises(PreconditionError):
        BackflowPair((0, 0, -1.0), (0, 0, 1.0), 0.1)
    with pytest.raises(PreconditionError):
        BackflowPair((0, 0, 1.0), (0, 0, 1.1), 0.1)


def test_backflow_quantum_potential(backflow_pair):
    k1, k2 = backflow_pair.k1, backflow_pair.k2
    r = k1[2] / k2[2]
    expected = -np.sum((k1 - k2) ** 2) * (1 + r) / (1 - r) ** 2
    q = quantum_potential(backflow_pair, np.zeros(3), 0.0)
    assert q == pytest.approx(expected, rel=1e-10)
    x = np.array([0.05, 0.0, -0.02])
    amp = lambda y: np.sqrt(backflow_pair.density(y, 0.0))
    fd = _richardson_laplacian(amp, x, 1e-3)
    assert backflow_pair.amplitude_laplacian(x, 0.0) == pytest.approx(fd, rel=1e-6)


def test_plane_wave_quantum_potential_vanishes():
    assert abs(quantum_potential(PlaneWave((1, 2, 3.0)), (0.4, 0.1, -2), 0.3)) < 1e-12


def test_gaussian_quantum_potential_matches_finite_differences(packet):
    x = np.array([0.3, -0.7, 1.1])
    analytic = packet.quantum_potential(x, 0.8)
    amp = lambda y: np.abs(packet.psi(y, 0.8))
    h = 1e-3
    lap = sum(
        (amp(x + h * e) - 2 * amp(x) + amp(x - h * e)) / h**2 for e in np.eye(3)
    )
    fd = -lap / (2 * amp(x))
    assert analytic == pytest.approx(fd, rel=1e-6)


# spin current


def test_spin_along_z_leaves_only_convective_current():
    f = WaveguideSpinField(SpinVector.axis("+z"))
    x = np.array([0.3, 0.4, 1.2])
    assert abs(f.spin_current(x, 0.5)[2]) < 1e-16
    assert pauli_current(f, x, 0.5)[2] == f.convective_current(x, 0.5)[2]


def test_transverse_spin_term_zero_where_azimuthal_factor_vanishes():
    # for s = x the z spin term carries s.phi_hat = -sin(phi): zero on the x axis
    f = WaveguideSpinField(SpinVector.axis("+x"))
    assert abs(f.spin_current(np.array([0.7, 0.0, 1.0]), 0.4)[2]) < 1e-16
    g = WaveguideSpinField(SpinVector.axis("+y"))
    assert abs(g.spin_current(np.array([0.0, 0.7, 1.0]), 0.4)[2]) < 1e-16
    assert abs(f.spin_current(np.array([0.0, 0.7, 1.0]), 0.4)[2]) > 1e-3


@settings(max_examples=25)
@given(unit_vectors(), point, st.floats(0, 3))
def test_spin_term_flips_with_spin(s, x, t):
    a = WaveguideSpinField(SpinVector(s))
    b = WaveguideSpinField(-SpinVector(s))
    x = np.asarray(x) + np.array([0, 0, 2.5])
    ja, jb = a.spin_current(x, t), b.spin_current(x, t)
    scale = np.max(np.abs(ja)) + 1e-300
    assert np.max(np.abs(ja + jb)) <= 1e-14 * scale + 1e-17


def test_pauli_current_rejects_scalar_field(packet):
    with pytest.raises(PreconditionError):
        pauli_current(packet, np.zeros(3), 0.0)


# continuity and phase consistency


@pytest.mark.parametrize(
    "field",
    [
        PlaneWave((0.5, 0, 2.0)),
        GaussianPacket((0.1, 0, 0), 0.9, (0.3, 0, 1.5)),
        DoubleSlit(4.0, GaussianPacket(sigma=0.7, momentum=(0, 0, 1.0)), 0.8),
        BackflowPair(*backflow_wavevectors()),
        WaveguideSpinField(SpinVector.axis("+x")),
        WaveguideSpinField(SpinVector([0.6, 0.0, 0.8]), envelope="even"),
    ],
    ids=["plane", "gaussian", "slit", "backflow", "spin_x", "spin_even"],
)
def test_continuity_residual(field, rng):
    x = rng.uniform(-1.5, 1.5, (40, 3)) + np.array([0, 0, 1.0])
    res = continuity_residual(field, x, 0.7)
    assert np.max(np.abs(res)) < 1e-6


def test_velocity_matches_phase_gradient(symmetric_slit, rng):
    x = rng.uniform(-5, 5, (30, 3)) * np.array([1, 0.3, 0.3])
    t, h = 1.2, 1e-5
    rho = symmetric_slit.density(x, t)
    x = x[rho > 1e-6]
    v = symmetric_slit.velocity(x, t)
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        dphase = np.angle(symmetric_slit.psi(x + e, t) / symmetric_slit.psi(x - e, t)) / (2 * h)
        assert np.allclose(dphase, v[:, j], atol=1e-6, rtol=1e-6)
