"""Analytic wave-field models and the local de Broglie-Bohm quantities.

Units are hbar = 1; every field carries its own mass (default 1).  All
evaluation methods are vectorised: positions have shape ``(..., 3)`` and
times broadcast against ``x[..., 0]``.  Scalar fields return ``psi`` with
shape ``(...)`` and gradients ``(..., 3)``; spinor fields return ``(..., 2)``
and ``(..., 2, 3)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NodalPoint, PreconditionError

DENSITY_FLOOR = 1e-12
H_FD = 1e-4

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


def _as_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 3:
        raise ValueError(f"positions must have trailing dimension 3, got {x.shape}")
    return x


class SpinVector:
    """Unit spin direction."""

    def __init__(self, s):
        s = np.asarray(s, dtype=float)
        if s.shape != (3,):
            raise PreconditionError("SpinVector needs 3 components")
        norm = np.linalg.norm(s)
        if abs(norm - 1.0) > 1e-12:
            raise PreconditionError(f"SpinVector must have unit length, |s| = {norm:.6g}")
        self.s = s

    def __neg__(self):
        return SpinVector(-self.s)

    def __repr__(self):
        return f"SpinVector({self.s.tolist()})"

    @classmethod
    def axis(cls, label: str) -> "SpinVector":
        """Build from labels like ``'+z'``, ``'-x'``."""
        sign = -1.0 if label.startswith("-") else 1.0
        idx = "xyz".index(label[-1])
        s = np.zeros(3)
        s[idx] = sign
        return cls(s)


class Spinor:
    """Two-component spinor pointing along a given spin direction."""

    def __init__(self, components):
        c = np.asarray(components, dtype=complex)
        if c.shape != (2,):
            raise PreconditionError("Spinor needs two components")
        norm = np.sqrt(np.sum(np.abs(c) ** 2))
        if abs(norm - 1.0) > 1e-12:
            raise PreconditionError(f"Spinor must be normalised, norm = {norm:.6g}")
        self.components = c

    @classmethod
    def from_spin(cls, spin: SpinVector) -> "Spinor":
        sx, sy, sz = spin.s
        theta = np.arctan2(np.hypot(sx, sy), sz)
        phi = np.arctan2(sy, sx)
        return cls([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])

    def spin_vector(self) -> np.ndarray:
        c = self.components
        return np.real(np.einsum("a,kab,b->k", c.conj(), PAULI, c))


@dataclass(frozen=True)
class FieldSample:
    psi: np.ndarray
    grad_psi: np.ndarray
    rho: float
    current: np.ndarray
    phase: float
    quantum_potential: float
    velocity: Optional[np.ndarray]


class WaveField:
    """Base class for analytic wave fields.

    Subclasses implement :meth:`psi` and :meth:`grad`.  Everything else is
    derived from those two, so a new variant only has to supply the
    amplitude and its exact gradient.
    """

    mass: float = 1.0
    energy: Optional[float] = None
    is_spinor: bool = False

    def psi(self, x, t):
        raise NotImplementedError

    def grad(self, x, t):
        raise NotImplementedError

    def psi_and_grad(self, x, t):
        return self.psi(x, t), self.grad(x, t)

    # derived quantities -------------------------------------------------

    def density(self, x, t):
        p = self.psi(_as_points(x), t)
        d = np.abs(p) ** 2
        return d.sum(axis=-1) if self.is_spinor else d

    def convective_current(self, x, t):
        x = _as_points(x)
        return self._convective(*self.psi_and_grad(x, t))

    def spin_current(self, x, t):
        """Curl of the spin density divided by 2m; zero for scalar fields."""
        x = _as_points(x)
        if not self.is_spinor:
            return np.zeros(x.shape)
        return self._spin(*self.psi_and_grad(x, t))

    def current(self, x, t):
        return self.current_from(*self.psi_and_grad(_as_points(x), t))

    def density_from(self, p):
        d = np.abs(p) ** 2
        return d.sum(axis=-1) if self.is_spinor else d

    def current_from(self, p, g):
        """Full current from already evaluated psi and grad psi."""
        j = self._convective(p, g)
        if self.is_spinor:
            j = j + self._spin(p, g)
        return j

    def _convective(self, p, g):
        if self.is_spinor:
            return np.imag(p[..., 0, None].conj() * g[..., 0, :] + p[..., 1, None].conj() * g[..., 1, :]) / self.mass
        return np.imag(p.conj()[..., None] * g) / self.mass

    def _spin(self, p, g):
        # d_j s_k = 2 Re[(d_j Psi)^dagger sigma_k Psi]
        p0, p1 = p[..., 0, None], p[..., 1, None]
        g0, g1 = g[..., 0, :].conj(), g[..., 1, :].conj()
        # rows of sigma_k Psi written out: (p1, p0), (-i p1, i p0), (p0, -p1)
        ds = 2.0 * np.real(
            np.stack([g0 * p1 + g1 * p0, -1j * g0 * p1 + 1j * g1 * p0, g0 * p0 - g1 * p1], axis=-1)
        )
        curl = np.stack(
            [
                ds[..., 1, 2] - ds[..., 2, 1],
                ds[..., 2, 0] - ds[..., 0, 2],
                ds[..., 0, 1] - ds[..., 1, 0],
            ],
            axis=-1,
        )
        return curl / (2.0 * self.mass)

    def velocity(self, x, t):
        """Guidance velocity J / rho.  Raises :class:`NodalPoint` at nodes."""
        rho = self.density(x, t)
        if np.any(rho <= DENSITY_FLOOR):
            raise NodalPoint(f"density {np.min(rho):.3g} at or below floor {DENSITY_FLOOR}")
        return self.current(x, t) / rho[..., None]

    def velocity_masked(self, x, t):
        """Velocity plus a boolean mask of points at or below the density floor."""
        rho = self.density(x, t)
        bad = rho <= DENSITY_FLOOR
        j = self.current(x, t)
        v = j / np.where(bad, 1.0, rho)[..., None]
        v[bad] = 0.0
        return v, bad

    def phase(self, x, t):
        p = self.psi(_as_points(x), t)
        if self.is_spinor:
            p = np.einsum("a,...a->...", self.spinor.components.conj(), p)
        return np.angle(p)

    def amplitude_laplacian(self, x, t):
        """Analytic laplacian of |psi|, or None when the variant has no closed form."""
        return None

    def quantum_potential(self, x, t, h: float = H_FD):
        x = _as_points(x)
        rho = self.density(x, t)
        if np.any(rho <= DENSITY_FLOOR):
            raise NodalPoint("quantum potential undefined at a node")
        amp = np.sqrt(rho)
        lap = self.amplitude_laplacian(x, t)
        if lap is None:
            lap = _richardson_laplacian(lambda y: np.sqrt(self.density(y, t)), x, h)
        return -lap / (2.0 * self.mass * amp)

    # sampling hooks -----------------------------------------------------

    def axis_densities(self, t) -> Optional[Sequence[tuple[Callable, tuple[float, float]]]]:
        """Per-axis marginal densities when rho factorises as a product.

        Returns three ``(density_1d, (lo, hi))`` pairs, or None.
        """
        return None

    def sampling_box(self, t) -> Optional[tuple[np.ndarray, np.ndarray]]:
        return None


def _laplacian(f, x, h):
    f0 = f(x)
    lap = np.zeros_like(f0)
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        lap = lap + (f(x + e) - 2.0 * f0 + f(x - e)) / h**2
    return lap


def _richardson_laplacian(f, x, h):
    return (4.0 * _laplacian(f, x, h) - _laplacian(f, x, 2 * h)) / 3.0


class PlaneWave(WaveField):
    def __init__(self, k, amplitude: complex = 1.0, mass: float = 1.0):
        self.k = np.asarray(k, dtype=float)
        self.amplitude = complex(amplitude)
        self.mass = float(mass)
        self.energy = float(self.k @ self.k) / (2.0 * self.mass)

    def psi(self, x, t):
        x = _as_points(x)
        return self.amplitude * np.exp(1j * (x @ self.k) - 1j * self.energy * np.asarray(t))

    def grad(self, x, t):
        return 1j * self.psi(x, t)[..., None] * self.k

    def amplitude_laplacian(self, x, t):
        return np.zeros(np.shape(_as_points(x))[:-1])


class Superposition(WaveField):
    """Linear combination sum_i c_i psi_i of scalar fields of equal mass."""

    def __init__(self, terms: Sequence[tuple[complex, WaveField]]):
        if not terms:
            raise PreconditionError("empty superposition")
        masses = {f.mass for _, f in terms}
        if len(masses) != 1:
            raise PreconditionError("superposed fields must share one mass")
        if any(f.is_spinor for _, f in terms):
            raise PreconditionError("superposition supports scalar fields only")
        self.terms = [(complex(c), f) for c, f in terms]
        self.mass = masses.pop()
        energies = [f.energy for _, f in terms]
        if all(e is not None for e in energies) and np.ptp(energies) <= 1e-12 * max(1.0, max(energies)):
            self.energy = energies[0]
        else:
            self.energy = None

    def psi(self, x, t):
        return sum(c * f.psi(x, t) for c, f in self.terms)

    def grad(self, x, t):
        return sum(c * f.grad(x, t) for c, f in self.terms)

    def psi_and_grad(self, x, t):
        p = g = 0
        for c, f in self.terms:
            pf, gf = f.psi_and_grad(x, t)
            p = p + c * pf
            g = g + c * gf
        return p, g


class BackflowPair(Superposition):
    """Two equal-energy plane waves exp(i k1.x) + alpha exp(i k2.x).

    With both z-components positive, every component flows forward yet the
    total current can point backwards near interference minima.
    """

    def __init__(self, k1, k2, alpha: Optional[complex] = None, mass: float = 1.0):
        k1 = np.asarray(k1, dtype=float)
        k2 = np.asarray(k2, dtype=float)
        if k1[2] <= 0 or k2[2] <= 0:
            raise PreconditionError("both wavevectors need a positive z-component")
        if abs(k1 @ k1 - k2 @ k2) > 1e-10:
            raise PreconditionError("wavevectors must have equal energy (|k1| = |k2|)")
        self.k1, self.k2 = k1, k2
        self.ratio = k1[2] / k2[2]
        self.alpha = self.alpha_min(k1, k2) if alpha is None else complex(alpha)
        super().__init__([(1.0, PlaneWave(k1, mass=mass)), (self.alpha, PlaneWave(k2, mass=mass))])

    @staticmethod
    def alpha_min(k1, k2) -> float:
        return -0.5 * (1.0 + k1[2] / k2[2])

    def f(self, abs_alpha):
        """J_z / (k2z/m) at a point where the interference phase equals pi."""
        a = np.asarray(abs_alpha, dtype=float)
        return a**2 - (1.0 + self.ratio) * a + self.ratio

    def k_eff(self, x0=(0.0, 0.0, 0.0), t: float = 0.0) -> np.ndarray:
        """Local wavevector grad S = m J / rho."""
        return self.mass * self.velocity(np.asarray(x0, dtype=float), t)

    def amplitude_laplacian(self, x, t):
        x = _as_points(x)
        dk = self.k2 - self.k1
        a = abs(self.alpha)
        u = x @ dk + np.angle(self.alpha)
        f = 1.0 + a**2 + 2.0 * a * np.cos(u)
        fp = -2.0 * a * np.sin(u)
        fpp = -2.0 * a * np.cos(u)
        # |psi| = sqrt(f(u)), u linear in x
        d2 = fpp / (2.0 * np.sqrt(f)) - fp**2 / (4.0 * f**1.5)
        return d2 * (dk @ dk)


def backflow_pair(k1, k2, alpha: Optional[complex] = None, mass: float = 1.0) -> BackflowPair:
    return BackflowPair(k1, k2, alpha, mass)


def backflow_wavevectors(k: float = 2 * np.pi, angle1: float = np.pi / 3, angle2: float = 9 * np.pi / 20):
    """Wavevectors in the x-z plane at the given angles from the z axis."""
    k1 = k * np.array([np.sin(angle1), 0.0, np.cos(angle1)])
    k2 = k * np.array([np.sin(angle2), 0.0, np.cos(angle2)])
    return k1, k2


class GaussianPacket(WaveField):
    """Free isotropic Gaussian packet; ``sigma`` is the initial position std of |psi|^2."""

    def __init__(self, center=(0.0, 0.0, 0.0), sigma: float = 1.0, momentum=(0.0, 0.0, 0.0), mass: float = 1.0):
        self.center = np.asarray(center, dtype=float)
        self.sigma = float(sigma)
        self.momentum = np.asarray(momentum, dtype=float)
        self.mass = float(mass)
        if self.sigma <= 0:
            raise PreconditionError("sigma must be positive")

    def _s(self, t):
        return 1.0 + 1j * np.asarray(t, dtype=float) / (2.0 * self.mass * self.sigma**2)

    def axis_factor(self, axis: int, u, t):
        u = np.asarray(u, dtype=float)
        s = self._s(t)
        c, p = self.center[axis], self.momentum[axis]
        d = u - c - p * np.asarray(t) / self.mass
        return (
            (2 * np.pi * self.sigma**2) ** -0.25
            / np.sqrt(s)
            * np.exp(-(d**2) / (4 * self.sigma**2 * s) + 1j * p * (u - c) - 1j * p**2 * np.asarray(t) / (2 * self.mass))
        )

    def psi_and_grad(self, x, t):
        x = _as_points(x)
        t = np.asarray(t, dtype=float)
        s = self._s(t)
        d = x - self.center - self.momentum * t[..., None] / self.mass
        expo = np.sum(-(d**2) / (4 * self.sigma**2 * s[..., None]) + 1j * self.momentum * (x - self.center), axis=-1)
        expo = expo - 1j * (self.momentum @ self.momentum) * t / (2 * self.mass)
        psi = (2 * np.pi * self.sigma**2) ** -0.75 * s**-1.5 * np.exp(expo)
        logder = -d / (2 * self.sigma**2 * s[..., None]) + 1j * self.momentum
        return psi, psi[..., None] * logder

    def psi(self, x, t):
        return self.psi_and_grad(x, t)[0]

    def grad(self, x, t):
        return self.psi_and_grad(x, t)[1]

    def width(self, t):
        return self.sigma * np.abs(self._s(t))

    def mean_position(self, t):
        return self.center + self.momentum * t / self.mass

    def amplitude_laplacian(self, x, t):
        x = _as_points(x)
        t = np.asarray(t, dtype=float)
        w = self.width(t)[..., None]
        d = x - self.center - self.momentum * t[..., None] / self.mass
        amp = np.abs(self.psi(x, t))
        return amp * np.sum(d**2 / (4 * w**4) - 1 / (2 * w**2), axis=-1)

    def bohm_trajectory(self, x0, t):
        """Closed-form trajectory through x0 at t = 0 (scaling with the width)."""
        x0 = np.asarray(x0, dtype=float)
        t = np.asarray(t, dtype=float)[..., None]
        scale = np.abs(1.0 + 1j * t / (2.0 * self.mass * self.sigma**2))
        return self.center + self.momentum * t / self.mass + (x0 - self.center) * scale

    def axis_densities(self, t):
        out = []
        mu = self.mean_position(t)
        w = float(self.width(t))
        for a in range(3):
            out.append((lambda u, a=a: np.abs(self.axis_factor(a, u, t)) ** 2, (mu[a] - 6 * w, mu[a] + 6 * w)))
        return out

    def sampling_box(self, t):
        mu = self.mean_position(t)
        w = float(self.width(t))
        return mu - 6 * w, mu + 6 * w


class DoubleSlit(WaveField):
    """Two copies of a packet displaced to x = +a/2 and x = -a/2.

    ``amplitudes`` weight the upper and lower copy and are normalised so the
    squared moduli sum to one; ``chi_rel`` is the extra phase on the lower copy.
    """

    def __init__(self, separation: float, packet: GaussianPacket, chi_rel: float = 0.0, amplitudes=(1.0, 1.0)):
        self.separation = float(separation)
        self.packet = packet
        self.chi_rel = float(chi_rel)
        amps = np.asarray(amplitudes, dtype=complex)
        norm = np.sqrt(np.sum(np.abs(amps) ** 2))
        if norm == 0:
            raise PreconditionError("amplitudes cannot both vanish")
        self.c_plus = amps[0] / norm
        self.c_minus = amps[1] / norm * np.exp(1j * self.chi_rel)
        self.mass = packet.mass
        self._shift = np.array([self.separation / 2, 0.0, 0.0])

    def psi(self, x, t):
        x = _as_points(x)
        return self.c_plus * self.packet.psi(x - self._shift, t) + self.c_minus * self.packet.psi(x + self._shift, t)

    def grad(self, x, t):
        x = _as_points(x)
        return self.c_plus * self.packet.grad(x - self._shift, t) + self.c_minus * self.packet.grad(x + self._shift, t)

    def psi_and_grad(self, x, t):
        x = _as_points(x)
        pa, ga = self.packet.psi_and_grad(x - self._shift, t)
        pb, gb = self.packet.psi_and_grad(x + self._shift, t)
        return self.c_plus * pa + self.c_minus * pb, self.c_plus * ga + self.c_minus * gb

    def x_profile(self, u, t):
        """Factor of psi along x; psi = x_profile * (y and z packet factors)."""
        h = self.separation / 2
        return self.c_plus * self.packet.axis_factor(0, u - h, t) + self.c_minus * self.packet.axis_factor(0, u + h, t)

    def axis_densities(self, t):
        base = self.packet.axis_densities(t)
        w = float(self.packet.width(t))
        mu = self.packet.mean_position(t)[0]
        h = self.separation / 2
        xd = (lambda u: np.abs(self.x_profile(u, t)) ** 2, (mu - h - 6 * w, mu + h + 6 * w))
        return [xd, base[1], base[2]]

    def sampling_box(self, t):
        lo, hi = self.packet.sampling_box(t)
        lo = lo.copy()
        hi = hi.copy()
        lo[0] -= self.separation / 2
        hi[0] += self.separation / 2
        return lo, hi


class WaveguideSpinField(WaveField):
    """Spinor chi_s times a cylindrically symmetric envelope Phi(rho, z, t).

    The envelope is a stationary transverse ground-mode profile
    exp(-rho^2 / 2 w^2) times a freely spreading longitudinal factor.
    ``envelope='odd'`` uses z exp(-z^2/2) released from a wall at z = 0,
    normalised on z > 0; ``'even'`` uses the plain Gaussian on the full line.
    """

    def __init__(self, spin, waist: float = 1.0, envelope: str = "odd", mass: float = 1.0):
        if not isinstance(spin, SpinVector):
            spin = SpinVector(spin)
        if envelope not in ("odd", "even"):
            raise PreconditionError("envelope must be 'odd' or 'even'")
        self.spin = spin
        self.spinor = Spinor.from_spin(spin)
        self.waist = float(waist)
        self.envelope = envelope
        self.mass = float(mass)
        self.is_spinor = True

    def _s(self, t):
        return 1.0 + 1j * np.asarray(t, dtype=float) / self.mass

    def transverse(self, x, y):
        w = self.waist
        return np.exp(-(x**2 + y**2) / (2 * w**2)) / (np.sqrt(np.pi) * w)

    def longitudinal(self, z, t):
        s = self._s(t)
        z = np.asarray(z, dtype=float)
        if self.envelope == "odd":
            return (4 / np.sqrt(np.pi)) ** 0.5 * z * s**-1.5 * np.exp(-(z**2) / (2 * s))
        return np.pi**-0.25 * s**-0.5 * np.exp(-(z**2) / (2 * s))

    def longitudinal_dz(self, z, t):
        s = self._s(t)
        z = np.asarray(z, dtype=float)
        if self.envelope == "odd":
            return (4 / np.sqrt(np.pi)) ** 0.5 * s**-1.5 * np.exp(-(z**2) / (2 * s)) * (1 - z**2 / s)
        return -z / s * self.longitudinal(z, t)

    def envelope_value(self, x, t):
        x = _as_points(x)
        return self.transverse(x[..., 0], x[..., 1]) * self.longitudinal(x[..., 2], t)

    def envelope_grad(self, x, t):
        x = _as_points(x)
        tr = self.transverse(x[..., 0], x[..., 1])
        lo = self.longitudinal(x[..., 2], t)
        w2 = self.waist**2
        return np.stack(
            [-x[..., 0] / w2 * tr * lo, -x[..., 1] / w2 * tr * lo, tr * self.longitudinal_dz(x[..., 2], t)],
            axis=-1,
        )

    def psi(self, x, t):
        return self.envelope_value(x, t)[..., None] * self.spinor.components

    def grad(self, x, t):
        return self.spinor.components[:, None] * self.envelope_grad(x, t)[..., None, :]

    def axis_densities(self, t):
        w = self.waist
        tr = (lambda u: np.exp(-(u**2) / w**2) / (np.sqrt(np.pi) * w), (-6 * w, 6 * w))
        width = float(np.abs(self._s(t)))
        if self.envelope == "odd":
            zd = (lambda u: np.abs(self.longitudinal(u, t)) ** 2, (0.0, 7 * width))
        else:
            zd = (lambda u: np.abs(self.longitudinal(u, t)) ** 2, (-6 * width, 6 * width))
        return [tr, tr, zd]

    def sampling_box(self, t):
        dens = self.axis_densities(t)
        return np.array([d[1][0] for d in dens]), np.array([d[1][1] for d in dens])


def evaluate_field(field: WaveField, x, t: float, want_velocity: bool = True) -> FieldSample:
    """All local quantities at one space-time point."""
    x = _as_points(x)
    if x.shape != (3,):
        raise ValueError("evaluate_field takes a single point")
    psi = field.psi(x, t)
    g = field.grad(x, t)
    rho = float(field.density(x, t))
    j = field.current(x, t)
    phase = float(field.phase(x, t))
    if rho <= DENSITY_FLOOR:
        if want_velocity:
            raise NodalPoint(f"density {rho:.3g} at or below floor at {x.tolist()}")
        return FieldSample(psi, g, rho, j, phase, float("nan"), None)
    return FieldSample(psi, g, rho, j, phase, float(field.quantum_potential(x, t)), j / rho)


def pauli_current(field: WaveguideSpinField, x, t: float) -> np.ndarray:
    """Convective plus spin-magnetic current of a spinor field."""
    if not field.is_spinor:
        raise PreconditionError("pauli_current needs a spinor field")
    x = _as_points(x)
    if np.any(field.density(x, t) <= DENSITY_FLOOR):
        raise NodalPoint("Pauli current requested at a node")
    return field.current(x, t)


def quantum_potential(field: WaveField, x, t: float, h: float = H_FD) -> float:
    return field.quantum_potential(x, t, h)


def continuity_residual(field: WaveField, x, t, h: float = H_FD) -> np.ndarray:
    """d(rho)/dt + div J by Richardson-extrapolated central differences."""
    x = _as_points(x)
    t = np.asarray(t, dtype=float)

    def residual(step):
        drho = (field.density(x, t + step) - field.density(x, t - step)) / (2 * step)
        div = 0.0
        for j in range(3):
            e = np.zeros(3)
            e[j] = step
            div = div + (field.current(x + e, t)[..., j] - field.current(x - e, t)[..., j]) / (2 * step)
        return drho + div

    return (4.0 * residual(h) - residual(2 * h)) / 3.0
