"""Perfectly matched absorbing layers with a smooth Gaussian-edged profile.

chi(z) is chi0 on [0, d] with Gaussian shoulders exp(-a u^2) on either side;
a -> infinity recovers the step.  For a design wave exp(i k_z z) the complex
potential below is reflectionless by construction: the exact stationary
solution is exp(i k_z z - F(z)) with F the running integral of chi.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import erf

from ..errors import PreconditionError
from ..fields import WaveField, _as_points
from ..quadrature import quad

_SQRT_PI = np.sqrt(np.pi)
_D2_STENCIL = (1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90)


@dataclass(frozen=True)
class PMLProfile:
    chi0: float
    d: float
    a: float
    direction: str = "forward"
    design_k: tuple = field(default=(0.0, 0.0, 2 * np.pi))
    mass: float = 1.0

    def __post_init__(self):
        if not self.chi0 >= 0:
            raise PreconditionError("chi0 must be >= 0")
        if not self.d > 0:
            raise PreconditionError("layer thickness d must be positive")
        if not self.a > 0:
            raise PreconditionError("smoothness a must be positive")
        if self.direction not in ("forward", "backward"):
            raise PreconditionError("direction must be 'forward' or 'backward'")
        object.__setattr__(self, "design_k", tuple(float(c) for c in self.design_k))

    @property
    def kz(self) -> float:
        return abs(self.design_k[2])

    @property
    def xi(self) -> float:
        return self.chi0 * np.sqrt(np.pi / self.a)

    def support(self, width: float = 8.0) -> tuple[float, float]:
        """Interval outside which chi is below exp(-width^2) relative."""
        w = width / np.sqrt(self.a)
        return -w, self.d + w

    def chi(self, z):
        z = np.asarray(z, dtype=float)
        left = np.exp(-self.a * z**2)
        right = np.exp(-self.a * (z - self.d) ** 2)
        return self.chi0 * np.where(z < 0, left, np.where(z > self.d, right, 1.0))

    def dchi(self, z):
        z = np.asarray(z, dtype=float)
        left = z * np.exp(-self.a * z**2)
        right = (z - self.d) * np.exp(-self.a * (z - self.d) ** 2)
        return -2.0 * self.chi0 * self.a * np.where(z < 0, left, np.where(z > self.d, right, 0.0))

    def chi_integral(self, z):
        """F(z): integral of chi from -infinity to z."""
        z = np.asarray(z, dtype=float)
        ra = np.sqrt(self.a)
        half = 0.5 * self.xi
        left = half * (1.0 + erf(ra * z))
        mid = half + self.chi0 * z
        right = half + self.chi0 * self.d + half * erf(ra * (z - self.d))
        return np.where(z < 0, left, np.where(z > self.d, right, mid))

    def chi_total(self) -> float:
        return self.chi0 * self.d + self.xi

    def potential(self, z, direction: str | None = None):
        direction = direction or self.direction
        chi = self.chi(z)
        sign = -1.0 if direction == "forward" else 1.0
        return (chi**2 + sign * self.dchi(z)) / (2.0 * self.mass) - 1j * chi * self.kz / self.mass

    def solution(self, z, direction: str | None = None):
        """Exact absorbed design wave along z for either propagation direction."""
        direction = direction or self.direction
        z = np.asarray(z, dtype=float)
        if direction == "forward":
            return np.exp(1j * self.kz * z - self.chi_integral(z))
        return np.exp(-1j * self.kz * z - (self.chi_total() - self.chi_integral(z)))


def pml_potential(profile: PMLProfile, z):
    return profile.potential(z)


def potential_table(profile: PMLProfile, z) -> dict:
    """Columns for a potential plot: both directions share Im V."""
    vf = profile.potential(z, "forward")
    vb = profile.potential(z, "backward")
    return {
        "z": np.asarray(z, dtype=float),
        "re_v_fwd": vf.real,
        "re_v_bwd": vb.real,
        "im_v": vf.imag,
        "rho_fwd": np.abs(profile.solution(z, "forward")) ** 2,
        "rho_bwd": np.abs(profile.solution(z, "backward")) ** 2,
    }


def verify_pml_solution(profile: PMLProfile, k: float | None = None, n: int = 4001, h: float = 3e-3) -> float:
    """Max residual of the stationary equation for the analytic absorbed wave.

    Normalised by max |2 m E psi| on the grid; second derivatives use the
    seven-point sixth-order central stencil.  chi'' jumps at z = 0 and
    z = d, so stencils reaching across those two points are skipped.
    """
    if profile.direction != "forward":
        raise PreconditionError("verify_pml_solution needs a forward profile")
    kz = profile.kz if k is None else float(k)
    lo, hi = profile.support()
    z = np.linspace(lo - 1.0, hi + 1.0, n)
    reach = 3.5 * h
    z = z[(np.abs(z) > reach) & (np.abs(z - profile.d) > reach)]

    d2 = sum(c * profile.solution(z + j * h) for j, c in zip(range(-3, 4), _D2_STENCIL)) / h**2
    psi = profile.solution(z)
    v = profile.potential(z)
    two_m = 2.0 * profile.mass
    residual = d2 + (kz**2 - two_m * v) * psi
    return float(np.max(np.abs(residual)) / np.max(np.abs(kz**2 * psi)))


def scattering_reflection(profile: PMLProfile, k_in: float, incoming: str = "forward", rtol: float = 1e-11) -> complex:
    """Reflection amplitude by direct ODE integration through the potential.

    The potential is the one the profile was designed with; ``k_in`` is the
    actual incident normal wavenumber, so ``k_in != profile.kz`` or
    ``incoming != profile.direction`` probes mismatch.  Only the outgoing
    wave is imposed beyond the layer, then the solution is decomposed into
    incident and reflected parts on the near side.
    """
    lo, hi = profile.support(10.0)
    k2 = k_in**2
    two_m = 2.0 * profile.mass

    def rhs(z, y):
        psi, dpsi = y[0] + 1j * y[1], y[2] + 1j * y[3]
        dd = -(k2 - two_m * profile.potential(z)) * psi
        return [dpsi.real, dpsi.imag, dd.real, dd.imag]

    if incoming == "forward":
        z_start, z_end, sgn = hi, lo, 1.0
    else:
        z_start, z_end, sgn = lo, hi, -1.0
    psi0 = np.exp(1j * sgn * k_in * z_start)
    dpsi0 = 1j * sgn * k_in * psi0
    sol = integrate.solve_ivp(
        rhs,
        (z_start, z_end),
        [psi0.real, psi0.imag, dpsi0.real, dpsi0.imag],
        method="DOP853",
        rtol=rtol,
        atol=1e-14,
        max_step=0.05 / max(np.sqrt(profile.a), k_in),
    )
    y = sol.y[:, -1]
    psi, dpsi = y[0] + 1j * y[1], y[2] + 1j * y[3]
    # psi = A e^{i s k z} + B e^{-i s k z} at z_end
    e = np.exp(1j * sgn * k_in * z_end)
    A = 0.5 * (psi + dpsi / (1j * sgn * k_in)) / e
    B = 0.5 * (psi - dpsi / (1j * sgn * k_in)) * e
    return complex(B / A)


def F_xi(xi: float, tol: float = 1e-10) -> float:
    f = lambda u: np.exp(-u * u - xi * (1.0 + erf(u)))
    return 2.0 / _SQRT_PI * quad(f, -np.inf, 0.0, tol=tol)


def G_xi(xi: float, tol: float = 1e-10) -> float:
    f = lambda u: np.exp(-u * u - xi * (1.0 + erf(u)))
    return 2.0 / _SQRT_PI * quad(f, 0.0, np.inf, tol=tol)


def step_detection_probability(profile: PMLProfile, k: float | None = None, area: float = 1.0, closed_form: bool = True) -> float:
    """Absorbed flux for the sharp-edged layer, closed form or by quadrature."""
    kz = profile.kz if k is None else float(k)
    v = kz / profile.mass
    c, d = profile.chi0, profile.d
    if closed_form:
        return area * v * (-np.expm1(-2.0 * c * d))
    # -2 Im V |psi|^2 with Im V = -chi0 k/m and |psi|^2 = exp(-2 chi0 z)
    return area * quad(lambda z: 2.0 * c * v * np.exp(-2.0 * c * z), 0.0, d, tol=1e-13)


def pml_detection_probability(profile: PMLProfile, k: float | None = None, area: float = 1.0, smooth: bool = True, tol: float = 1e-10) -> float:
    """Detection rate for a design plane wave hitting the layer.

    ``smooth=False`` gives the step-profile value.  For the smooth profile the
    shoulders contribute xi F(xi) and exp(-2 chi0 d) xi G(xi).
    """
    if profile.direction != "forward":
        raise PreconditionError("detection probability is defined for the forward profile")
    if not smooth:
        return step_detection_probability(profile, k, area)
    kz = profile.kz if k is None else float(k)
    xi = profile.xi
    decay = np.exp(-2.0 * profile.chi0 * profile.d)
    bracket = np.exp(-xi) * (1.0 - decay) + xi * F_xi(xi, tol) + decay * xi * G_xi(xi, tol)
    return area * kz / profile.mass * bracket


class AbsorbedPlaneWave(WaveField):
    """Design plane wave inside a PML, as a 3D field with a complex potential.

    psi = exp(i k_par . x_par + i k_z z - F(z)).  The field is stationary at
    energy |k|^2 / 2m; its continuity residual is 2 Im V rho.
    """

    def __init__(self, profile: PMLProfile, k_parallel=(0.0, 0.0)):
        if profile.direction != "forward":
            raise PreconditionError("AbsorbedPlaneWave uses a forward profile")
        self.profile = profile
        self.mass = profile.mass
        self.k_par = np.asarray(k_parallel, dtype=float)
        self.k = np.array([self.k_par[0], self.k_par[1], profile.kz])
        self.energy = float(self.k @ self.k) / (2.0 * self.mass)

    def psi(self, x, t):
        x = _as_points(x)
        phase = x[..., :2] @ self.k_par - self.energy * np.asarray(t)
        return np.exp(1j * phase) * self.profile.solution(x[..., 2])

    def grad(self, x, t):
        x = _as_points(x)
        p = self.psi(x, t)
        gz = 1j * self.profile.kz - self.profile.chi(x[..., 2])
        comps = np.broadcast_arrays(1j * self.k_par[0] * np.ones_like(gz), 1j * self.k_par[1] * np.ones_like(gz), gz)
        return p[..., None] * np.stack(comps, axis=-1)

    def imag_potential(self, x):
        return self.profile.potential(_as_points(x)[..., 2]).imag
