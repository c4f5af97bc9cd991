"""Field scattered by a finite absorbing aperture, Huygens-Fresnel style.

A perfectly absorbing patch of the plane z = z0 removes the incident plane
wave there; the scattered wave is the Kirchhoff integral of the removed part
with the free outgoing Green function.  Behind a large aperture it cancels
the incident wave (the shadow).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import PreconditionError, QuadratureError
from ..fields import WaveField
from ..quadrature import nodes


@dataclass(frozen=True)
class Aperture:
    """Square (half-width) or disk (radius) patch of the plane z = center[2]."""

    center: tuple
    size: float
    shape: str = "square"

    def __post_init__(self):
        if self.shape not in ("square", "disk"):
            raise PreconditionError("aperture shape must be 'square' or 'disk'")
        if not self.size >= 0:
            raise PreconditionError("aperture size must be >= 0")


def green(k: float, r, mass: float = 1.0):
    """Outgoing energy-domain kernel -2m exp(ikr) / (4 pi r)."""
    return -2.0 * mass * np.exp(1j * k * r) / (4.0 * np.pi * r)


def _patch_rule(ap: Aperture, n: int):
    cx, cy = ap.center[0], ap.center[1]
    if ap.shape == "square":
        u, wu = nodes(-ap.size, ap.size, n)
        X, Y = np.meshgrid(cx + u, cy + u, indexing="ij")
        return X.ravel(), Y.ravel(), np.outer(wu, wu).ravel()
    r, wr = nodes(0.0, ap.size, n)
    p, wp = nodes(0.0, 2 * np.pi, n)
    R, P = np.meshgrid(r, p, indexing="ij")
    w = np.outer(wr * r, wp).ravel()
    return (cx + R * np.cos(P)).ravel(), (cy + R * np.sin(P)).ravel(), w


def scattered_field(ap: Aperture, field: WaveField, x, backflow: bool = False, tol: float = 1e-8, n: int = 64, max_n: int = 4096) -> complex:
    """Scattered wave at ``x`` from an aperture on an incident plane wave.

    ``field`` must be stationary and expose its wavevector as ``field.k``.
    The Gauss-Legendre order doubles until successive estimates agree to
    ``tol`` relative to |psi0|.  ``backflow`` multiplies the result by -1.
    """
    if field.energy is None or not hasattr(field, "k"):
        raise PreconditionError("scattered_field needs a stationary plane-wave field with attribute k")
    x = np.asarray(x, dtype=float)
    z0 = float(ap.center[2])
    if abs(x[2] - z0) < 1e-12:
        raise PreconditionError("observation point lies in the aperture plane")
    kvec = np.asarray(field.k, dtype=float)
    k = np.sqrt(2.0 * field.mass * field.energy)
    x0 = np.asarray(ap.center, dtype=float)
    psi0 = complex(field.psi(x0, 0.0))
    if ap.size == 0 or psi0 == 0:
        return 0j
    sign = -1.0 if backflow else 1.0
    prev = None
    while n <= max_n:
        x1, y1, w = _patch_rule(ap, n)
        dx, dy, dz = x[0] - x1, x[1] - y1, x[2] - z0
        r = np.sqrt(dx * dx + dy * dy + dz * dz)
        cos_t = dz / r
        kern = np.exp(1j * k * r) / (4.0 * np.pi * r) * (1j * k * cos_t + 1j * kvec[2])
        carrier = np.exp(1j * (kvec[0] * (x1 - x0[0]) + kvec[1] * (y1 - x0[1])))
        val = sign * psi0 * np.sum(w * kern * carrier)
        if prev is not None and abs(val - prev) <= tol * abs(psi0):
            return complex(val)
        prev = val
        n *= 2
    raise QuadratureError(f"aperture quadrature not converged to {tol:.1e} at order {max_n}")
