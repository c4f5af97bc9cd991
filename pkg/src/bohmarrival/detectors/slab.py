"""Absorbing Fabry-Perot slab: a layer of absorbers with forward amplitude f0.

The slab occupies 0 <= z <= d.  A unit plane wave of wavenumber k arrives
from z < 0 at angle theta to the normal; inside, the absorbers act as an
optical potential so the normal wavenumber becomes k2 = sqrt(k1^2 + 4 pi f0 N).
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from ..errors import NodalPoint, PreconditionError
from ..fields import DENSITY_FLOOR
from ..quadrature import quad


@dataclass(frozen=True)
class SlabDetector:
    N: float
    f0: complex
    d: float
    area: float = 1.0

    def __post_init__(self):
        if self.N < 0:
            raise PreconditionError("slab density N must be >= 0")
        if complex(self.f0).imag < 0:
            raise PreconditionError("Im f0 must be >= 0 for an absorbing slab")
        if not self.d > 0:
            raise PreconditionError("slab thickness d must be positive")
        if not self.area > 0:
            raise PreconditionError("slab area must be positive")

    def sigma_ext(self, k: float) -> float:
        """Extinction cross-section 4 pi Im f0 / k."""
        return 4.0 * np.pi * complex(self.f0).imag / k

    def imag_potential(self, k: float, mass: float = 1.0) -> float:
        return -self.N * self.sigma_ext(k) * k / (2.0 * mass)


@dataclass(frozen=True)
class ScatterResult:
    R: complex
    T: complex
    C: complex
    D: complex
    absorption: float
    k1: complex
    k2: complex
    r: complex
    t: complex

    def to_json(self) -> dict:
        out = {}
        for name in ("R", "T", "C", "D", "k1", "k2", "r", "t"):
            z = complex(getattr(self, name))
            out[name] = [z.real, z.imag]
        out["absorption"] = self.absorption
        return out


def _check_angle(k: float, theta: float):
    if not k > 0:
        raise PreconditionError("k must be positive")
    if not 0.0 <= theta < np.pi / 2:
        raise PreconditionError(f"theta must lie in [0, pi/2), got {theta}")


def slab_scatter(k: float, theta: float, slab: SlabDetector) -> ScatterResult:
    """Reflection, transmission and in-slab amplitudes for a unit incident wave.

    Field convention (common factor exp(i k sin(theta) x) omitted)::

        z < 0      exp(i k1 z) + R exp(-i k1 z)
        0 < z < d  C exp(i k2 z) + D exp(-i k2 z)
        z > d      T exp(i k1 z)
    """
    _check_angle(k, theta)
    k1 = k * np.cos(theta)
    k2 = cmath.sqrt(k1 * k1 + 4.0 * np.pi * complex(slab.f0) * slab.N)
    r = (k1 - k2) / (k1 + k2)
    t = 2.0 * k1 / (k1 + k2)
    delta = 2.0 * k2 * slab.d
    phase = cmath.exp(1j * delta)
    denom = 1.0 - r * r * phase
    R = r * (1.0 - phase) / denom
    T = (k2 / k1) * t * t * cmath.exp(0.5j * delta) * cmath.exp(-1j * k1 * slab.d) / denom
    C = 0.5 * (1.0 + R + (k1 / k2) * (1.0 - R))
    D = 0.5 * (1.0 + R - (k1 / k2) * (1.0 - R))
    absorption = 1.0 - abs(R) ** 2 - abs(T) ** 2
    return ScatterResult(R, T, C, D, absorption, k1, k2, r, t)


def in_slab_field(res: ScatterResult, z):
    z = np.asarray(z, dtype=float)
    return res.C * np.exp(1j * res.k2 * z) + res.D * np.exp(-1j * res.k2 * z)


def slab_absorption_budget(k: float, theta: float, slab: SlabDetector, mass: float = 1.0, tol: float = 1e-10) -> dict:
    """Flux lost across the slab versus absorption accumulated inside it."""
    res = slab_scatter(k, theta, slab)
    v = k / mass
    flux = slab.area * v * np.cos(theta) * res.absorption
    integral = quad(lambda z: abs(in_slab_field(res, z)) ** 2, 0.0, slab.d, tol=tol)
    volume = slab.area * slab.N * slab.sigma_ext(k) * v * integral
    return {"flux_in_minus_out": flux, "volume_absorption": volume}


def slab_trajectory_slopes(k: float, theta: float, slab: SlabDetector, z, res: ScatterResult | None = None):
    """dz/dx of the stationary trajectory through height z."""
    _check_angle(k, theta)
    if theta == 0.0:
        raise PreconditionError("normal incidence has no dz/dx (trajectories are vertical)")
    if res is None:
        res = slab_scatter(k, theta, slab)
    z = np.asarray(z, dtype=float)
    kx = k * np.sin(theta)
    cot = 1.0 / np.tan(theta)
    out = np.empty_like(z)

    before = z < 0
    if np.any(before):
        zb = z[before]
        rho = 1.0 + abs(res.R) ** 2 + 2.0 * np.real(res.R * np.exp(-2j * res.k1 * zb))
        _floor(rho)
        out[before] = cot * (1.0 - abs(res.R) ** 2) / rho

    inside = (z >= 0) & (z <= slab.d)
    if np.any(inside):
        zi = z[inside]
        kr, ki = res.k2.real, res.k2.imag
        c2 = abs(res.C) ** 2 * np.exp(-2.0 * ki * zi)
        d2 = abs(res.D) ** 2 * np.exp(2.0 * ki * zi)
        xi = 2.0 * kr * zi + cmath.phase(res.C) - cmath.phase(res.D)
        cross = abs(res.C * res.D)
        rho = c2 + d2 + 2.0 * cross * np.cos(xi)
        _floor(rho)
        out[inside] = (kr * (c2 - d2) - 2.0 * ki * cross * np.sin(xi)) / (kx * rho)

    after = z > slab.d
    out[after] = cot
    return out


def _floor(rho):
    if np.any(rho <= DENSITY_FLOOR):
        raise NodalPoint("trajectory slope undefined at a node of the stationary field")


def mean_incident_slope(k: float, theta: float, slab: SlabDetector) -> float:
    """Slope of the mean incident-region trajectory, averaged over one fringe."""
    res = slab_scatter(k, theta, slab)
    R2 = abs(res.R) ** 2
    return (1.0 / np.tan(theta)) * (1.0 - R2) / (1.0 + R2)
