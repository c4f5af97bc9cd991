import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bohmarrival import GaussianPacket, NodalPoint, PlaneWave, PreconditionError
from bohmarrival.detectors import (
    AbsorbedPlaneWave,
    Aperture,
    PMLProfile,
    SlabDetector,
    SpacetimeDetector,
    mean_incident_slope,
    pml_detection_probability,
    pml_potential,
    scattered_field,
    scattering_reflection,
    slab_absorption_budget,
    slab_scatter,
    slab_trajectory_slopes,
    spacetime_absorption,
    verify_pml_solution,
)
from bohmarrival.detectors.pml import F_xi, G_xi, potential_table, step_detection_probability
from bohmarrival.detectors.slab import in_slab_field
from bohmarrival.detectors.spacetime import vector_efficiency

K = 2 * math.pi


def random_slab(rng):
    return SlabDetector(
        N=rng.uniform(0.01, 2.0),
        f0=complex(rng.uniform(-0.3, 0.3), rng.uniform(0.01, 0.5)),
        d=rng.uniform(0.1, 3.0),
    )


# slab


def linear_solve(k, theta, slab):
    """Match psi and psi' at both faces directly."""
    k1 = k * math.cos(theta)
    k2 = np.sqrt(complex(k1 * k1 + 4 * math.pi * slab.f0 * slab.N))
    d = slab.d
    e, ei = np.exp(1j * k2 * d), np.exp(-1j * k2 * d)
    # unknowns R, C, D, T
    A = np.array(
        [
            [-1, 1, 1, 0],
            [1j * k1, 1j * k2, -1j * k2, 0],
            [0, e, ei, -np.exp(1j * k1 * d)],
            [0, 1j * k2 * e, -1j * k2 * ei, -1j * k1 * np.exp(1j * k1 * d)],
        ]
    )
    b = np.array([1, 1j * k1, 0, 0])
    return np.linalg.solve(A, b)


def test_slab_closed_forms_match_matching_conditions(rng):
    for _ in range(20):
        slab = random_slab(rng)
        k, theta = rng.uniform(1, 10), rng.uniform(0, 1.4)
        res = slab_scatter(k, theta, slab)
        R, C, D, T = linear_solve(k, theta, slab)
        assert np.allclose([res.R, res.C, res.D, res.T], [R, C, D, T], atol=1e-10)


def test_empty_slab_is_transparent():
    res = slab_scatter(K, 0.4, SlabDetector(0.0, 0.3j, 1.0))
    assert abs(res.R) < 1e-15 and abs(abs(res.T) - 1) < 1e-15 and abs(res.absorption) < 1e-15


def test_lossless_slab_conserves_flux(rng):
    for _ in range(10):
        slab = SlabDetector(rng.uniform(0.1, 2), rng.uniform(-0.5, 0.5), rng.uniform(0.1, 3))
        res = slab_scatter(rng.uniform(1, 10), rng.uniform(0, 1.4), slab)
        assert abs(abs(res.R) ** 2 + abs(res.T) ** 2 - 1) < 1e-10


def test_strong_absorption_limit():
    slab = SlabDetector(5.0, 0.5 + 5.0j, 3.0)
    res = slab_scatter(K, 0.3, slab)
    assert abs(res.T) ** 2 < 1e-8
    assert abs(res.absorption - (1 - abs(res.r) ** 2)) < 1e-6


def test_weak_coupling_absorbed_flux_is_angle_independent():
    k = K
    f0 = 1e-3j
    sigma = 4 * math.pi * f0.imag / k
    d = 1.0
    N = 1e-3 / (sigma * d)
    slab = SlabDetector(N, f0, d)
    target = N * sigma * d * k
    for theta in np.linspace(0.0, math.pi / 3, 7):
        res = slab_scatter(k, theta, slab)
        flux = k * math.cos(theta) * res.absorption
        assert abs(flux - target) / target < 1e-3


@settings(max_examples=100, deadline=None)
@given(
    st.floats(0.5, 10),
    st.floats(0, 1.45),
    st.floats(0.01, 2),
    st.floats(-0.3, 0.3),
    st.floats(0.01, 0.5),
    st.floats(0.1, 3),
)
def test_slab_budget_identity(k, theta, N, re_f, im_f, d):
    out = slab_absorption_budget(k, theta, SlabDetector(N, complex(re_f, im_f), d))
    a, b = out["flux_in_minus_out"], out["volume_absorption"]
    assert a >= 0
    assert abs(a - b) <= 1e-8 * abs(b)


def test_budget_vanishes_for_empty_slab_and_grazing_incidence():
    out = slab_absorption_budget(K, 0.3, SlabDetector(0.0, 0.1j, 1.0))
    assert out["flux_in_minus_out"] == 0 and out["volume_absorption"] == 0
    slab = SlabDetector(0.5, 0.2j, 1.0)
    vals = [slab_absorption_budget(K, math.pi / 2 - e, slab)["volume_absorption"] for e in (1e-2, 1e-4, 1e-6)]
    assert vals[0] > vals[1] > vals[2] and vals[2] < 1e-4


def test_slab_rejects_bad_angles_and_gain():
    with pytest.raises(PreconditionError):
        slab_scatter(K, math.pi / 2, SlabDetector(1, 0.1j, 1))
    with pytest.raises(PreconditionError):
        slab_scatter(K, -0.1, SlabDetector(1, 0.1j, 1))
    with pytest.raises(PreconditionError):
        SlabDetector(1, -0.1j, 1)


def test_slopes_in_each_region():
    slab = SlabDetector(0.4, 0.1 + 0.2j, 1.5)
    theta = 0.6
    cot = 1 / math.tan(theta)
    assert np.all(slab_trajectory_slopes(K, theta, slab, np.array([1.6, 3.0, 10.0])) == cot)
    # in-slab slope against the current of the in-slab field
    res = slab_scatter(K, theta, slab)
    z = np.linspace(0.01, 1.49, 30)
    h = 1e-6
    psi = in_slab_field(res, z)
    dpsi = (in_slab_field(res, z + h) - in_slab_field(res, z - h)) / (2 * h)
    jz = np.imag(np.conj(psi) * dpsi)
    jx = K * math.sin(theta) * np.abs(psi) ** 2
    assert np.allclose(slab_trajectory_slopes(K, theta, slab, z), jz / jx, rtol=1e-7)


def test_incident_slope_without_reflection():
    slab = SlabDetector(0.0, 0.1j, 1.0)
    z = np.linspace(-3, -0.1, 10)
    assert np.allclose(slab_trajectory_slopes(K, 0.5, slab, z), 1 / math.tan(0.5), rtol=1e-14)


def test_mean_incident_slope():
    slab = SlabDetector(0.8, 0.4 + 0.3j, 1.0)
    theta = 0.7
    res = slab_scatter(K, theta, slab)
    period = math.pi / res.k1
    z = np.linspace(-period, 0, 20001)[:-1] - 1.0
    # harmonic mean over one fringe: dx/dz averages to 1/mean slope
    dxdz = 1 / slab_trajectory_slopes(K, theta, slab, z)
    R2 = abs(res.R) ** 2
    assert 1 / np.mean(dxdz) == pytest.approx(mean_incident_slope(K, theta, slab), rel=1e-9)
    assert mean_incident_slope(K, theta, slab) == pytest.approx((1 - R2) / (1 + R2) / math.tan(theta))


def test_slope_node_raises():
    # a lossless total reflector at normal-like incidence creates exact nodes
    slab = SlabDetector(1.0, 0.0, 1.0)
    res = slab_scatter(K, 0.3, slab)
    fake = type(res)(-1.0 + 0j, 0j, res.C, res.D, 0.0, res.k1, res.k2, res.r, res.t)
    z = np.array([-math.pi / (2 * res.k1) * 2])
    with pytest.raises(NodalPoint):
        slab_trajectory_slopes(K, 0.3, slab, z, res=fake)


# PML


@pytest.fixture
def pml():
    return PMLProfile(1.0, 2.0, 25.0)


def test_pml_residual(pml):
    assert verify_pml_solution(pml) < 1e-6
    assert verify_pml_solution(PMLProfile(0.0, 2.0, 25.0)) < 1e-10


def test_pml_potential_vanishes_outside(pml):
    lo, hi = -3 / math.sqrt(25) - 1.0, 2.0 + 3 / math.sqrt(25) + 1.0
    assert np.max(np.abs(pml_potential(pml, np.array([lo - 1, lo, hi, hi + 2])))) < 1e-10


def test_forward_backward_asymmetry(pml):
    z = np.linspace(-1, 3, 401)
    fwd = pml.potential(z, "forward")
    bwd = pml.potential(z, "backward")
    assert np.array_equal(fwd.imag, bwd.imag)
    assert np.allclose(fwd.real - bwd.real, -pml.dchi(z) / pml.mass, atol=1e-15)
    tab = potential_table(pml, z)
    assert set(tab) == {"z", "re_v_fwd", "re_v_bwd", "im_v", "rho_fwd", "rho_bwd"}


def test_profile_is_nonnegative(pml):
    assert np.all(pml.chi(np.linspace(-2, 4, 1001)) >= 0)


def test_design_wave_is_not_reflected(pml):
    assert abs(scattering_reflection(pml, pml.kz)) < 1e-4


def test_mismatched_wave_is_reflected(pml):
    assert abs(scattering_reflection(pml, 1.2 * pml.kz)) > 1e-5


@pytest.mark.parametrize("d", [0.5, 1.0, 2.0, 4.0])
def test_backward_wave_sees_a_reflector(d):
    prof = PMLProfile(1.0 / d, d, 25.0)
    assert abs(scattering_reflection(prof, prof.kz, incoming="backward")) > 0.01


def test_step_probability_closed_form_and_quadrature(pml):
    for chi0 in (0.1, 0.5, 1.0, 3.0):
        p = PMLProfile(chi0, 2.0, 25.0)
        closed = step_detection_probability(p)
        assert closed == pytest.approx(p.kz * (1 - math.exp(-2 * chi0 * 2.0)), abs=1e-12)
        assert abs(closed - step_detection_probability(p, closed_form=False)) < 1e-12


def test_half_efficiency():
    p = PMLProfile(math.log(2) / 4, 2.0, 25.0)
    assert pml_detection_probability(p, smooth=False) / p.kz == pytest.approx(0.5, abs=1e-14)


def test_unit_efficiency_limit():
    p = PMLProfile(20.0, 2.0, 1e8)
    assert pml_detection_probability(p) == pytest.approx(p.kz, rel=1e-8)


def test_step_efficiency_is_increasing():
    vals = [pml_detection_probability(PMLProfile(c, 1.0, 25.0), smooth=False) for c in np.linspace(0.01, 5, 50)]
    assert np.all(np.diff(vals) > 0)


def test_shoulder_integrals():
    assert F_xi(0.0) == pytest.approx(1.0, abs=1e-12)
    assert G_xi(0.0) == pytest.approx(1.0, abs=1e-12)
    for xi in (0.1, 1.0, 3.0):
        assert xi * F_xi(xi) == pytest.approx(1 - math.exp(-xi), rel=1e-9)
        assert xi * G_xi(xi) == pytest.approx(math.exp(-xi) - math.exp(-2 * xi), rel=1e-9)


def test_smooth_formula_reduces_to_step():
    gaps = []
    for a in (1e8, 1e12, 1e16, 1e20):
        p = PMLProfile(1.0, 2.0, a)
        gaps.append(abs(pml_detection_probability(p) - pml_detection_probability(p, smooth=False)))
    assert np.all(np.diff(gaps) < 0)
    assert gaps[-2] < 1e-8 and gaps[-1] < 1e-10


def test_smooth_probability_matches_absorbed_flux(pml):
    # -2 Im V |psi|^2 integrated over the layer
    from scipy.integrate import quad

    lo, hi = pml.support()
    f = lambda z: -2 * pml.potential(z).imag * abs(pml.solution(z)) ** 2
    total = sum(quad(f, a, b, epsabs=1e-13, limit=200)[0] for a, b in ((lo, 0), (0, pml.d), (pml.d, hi)))
    assert pml_detection_probability(pml) == pytest.approx(total, rel=1e-9)


# space-time detector


def test_real_potential_absorbs_nothing(packet):
    det = SpacetimeDetector((-1, 1), (-1, 1), (-1, 1), (0, 1), potential=0.7 + 0j)
    assert spacetime_absorption(det, packet) == 0.0


def test_gain_potential_rejected(packet):
    det = SpacetimeDetector((-1, 1), (-1, 1), (-1, 1), (0, 1), potential=0.1j)
    with pytest.raises(PreconditionError):
        spacetime_absorption(det, packet)


def test_thin_layer_recovers_flux():
    prof = PMLProfile(2.5, 2.0, 25.0)
    wave = AbsorbedPlaneWave(prof)
    lo, hi = prof.support()
    det = SpacetimeDetector(
        (0, 1), (0, 1), (lo, hi), (0, 0.5), potential=lambda x, t: prof.potential(x[..., 2]), z_breaks=(0.0, prof.d)
    )
    val = spacetime_absorption(det, wave)
    flux = 0.5 * prof.kz / prof.mass
    assert abs(val - flux) / flux < 0.05
    # the continuity residual of the absorbed wave is 2 Im V rho
    from bohmarrival import continuity_residual

    x = np.array([[0.1, 0.2, z] for z in np.linspace(-0.3, 2.3, 27)])
    res = continuity_residual(wave, x, 0.3)
    assert np.allclose(res, 2 * wave.imag_potential(x) * wave.density(x, 0.3), atol=1e-6)


def test_spacetime_absorption_is_additive(packet):
    v = lambda x, t: -0.3j * np.exp(-np.sum(x**2, axis=-1))
    whole = SpacetimeDetector((-2, 2), (-2, 2), (-2, 2), (0, 1), potential=v)
    left = SpacetimeDetector((-2, 2), (-2, 2), (-2, 0.5), (0, 1), potential=v)
    right = SpacetimeDetector((-2, 2), (-2, 2), (0.5, 2), (0, 1), potential=v)
    assert left.disjoint_from(right)
    a, b, c = (spacetime_absorption(d, packet) for d in (whole, left, right))
    assert abs(a - (b + c)) < 1e-8


def test_vector_coupling_measures_flux():
    eps = 1e-6
    wave = PlaneWave((0.3, 0, 2.0))
    det = SpacetimeDetector((0, 1), (0, 2), (0, 0.5), (0, 0.25), im_A=(0, 0, eps / 2))
    assert vector_efficiency(det, (0, 0, 1)) == pytest.approx(eps)
    val = spacetime_absorption(det, wave, full=True)
    assert val.value == pytest.approx(eps * 0.25 * 1.0 * wave.current(np.zeros(3), 0)[2], rel=1e-10)
    assert not val.gain
    flipped = SpacetimeDetector((0, 1), (0, 2), (0, 0.5), (0, 0.25), im_A=(0, 0, -eps / 2))
    assert spacetime_absorption(flipped, wave, full=True).gain


def test_vector_coupling_includes_spin_current():
    from bohmarrival import SpinVector, WaveguideSpinField
    from bohmarrival.quadrature import tensor_quad

    eps = 1e-6
    f = WaveguideSpinField(SpinVector.axis("+x"))
    box = [(0.0, 1.0), (0.2, 1.0), (1.0, 1.5), (0.5, 0.7)]
    det = SpacetimeDetector(*box, im_A=(0, 0, eps / 2))
    val = spacetime_absorption(det, f, tol=1e-16)

    def flux(part):
        def g(x, y, z, t):
            xb, yb, zb, tb = np.broadcast_arrays(x, y, z, t)
            out = np.empty(xb.shape)
            for i in range(tb.shape[-1]):
                pts = np.stack([xb[..., i], yb[..., i], zb[..., i]], -1)
                out[..., i] = part(pts, tb[0, 0, 0, i])[..., 2]
            return out

        return tensor_quad(g, box, tol=1e-12)

    total = flux(f.current)
    convective = flux(f.convective_current)
    assert val == pytest.approx(eps * total, rel=1e-8)
    assert abs(total - convective) > 1e-3 * abs(total)


def test_detector_requires_one_coupling():
    with pytest.raises(PreconditionError):
        SpacetimeDetector((0, 1), (0, 1), (0, 1), (0, 1))
    with pytest.raises(PreconditionError):
        SpacetimeDetector((0, 1), (0, 1), (0, 1), (0, 1), potential=-1j, im_A=(0, 0, 1))


# Huygens scattered field


@pytest.mark.parametrize("half_width,L", [(10.0, 2.0), (20.0, 5.0)])
def test_large_aperture_casts_a_shadow(half_width, L):
    wave = PlaneWave((0, 0, K))
    ap = Aperture((0, 0, 0), half_width)
    x = np.array([0.0, 0.0, L])
    scat = scattered_field(ap, wave, x)
    psi0 = wave.psi(x, 0.0)
    assert abs(psi0 + scat) / abs(psi0) < 0.2


def test_tiny_aperture_scatters_nothing():
    wave = PlaneWave((0, 0, K))
    x = np.array([0.3, 0, 2.0])
    assert abs(scattered_field(Aperture((0, 0, 0), 1e-4), wave, x)) < 1e-5
    assert scattered_field(Aperture((0, 0, 0), 0.0), wave, x) == 0


def test_backflow_flag_flips_sign():
    wave = PlaneWave((0.5, 0, 3.0))
    ap = Aperture((0, 0, 0), 2.0, "disk")
    x = np.array([0.4, -0.3, 1.5])
    a = scattered_field(ap, wave, x)
    assert scattered_field(ap, wave, x, backflow=True) == -a


def test_observation_in_aperture_plane_rejected():
    with pytest.raises(PreconditionError):
        scattered_field(Aperture((0, 0, 0), 1.0), PlaneWave((0, 0, K)), (0.5, 0, 0))
    with pytest.raises(PreconditionError):
        scattered_field(Aperture((0, 0, 0), 1.0), GaussianPacket(), (0.5, 0, 1))
