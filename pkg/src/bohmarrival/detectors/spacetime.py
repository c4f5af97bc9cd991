"""Detectors active on a box in space-time.

A scalar detector is an absorbing potential V_eff with Im V_eff <= 0; the
detected probability is -2 int Im V_eff |psi|^2 d^4x.  A vector detector
couples an imaginary vector potential to the full current, giving
2 e int Im A . J d^4x, which may be negative (a gain rather than a loss).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import PreconditionError, QuadratureError
from ..fields import WaveField
from ..quadrature import nodes


@dataclass(frozen=True)
class SpacetimeDetector:
    """Box ``x_range x y_range x z_range x t_range`` with one of two couplings.

    ``potential`` is a vectorised callable ``V(x, t)`` (x of shape (..., 3))
    or a complex constant.  For the vector variant set ``im_A`` (a constant
    3-vector) and ``charge``.  ``z_breaks`` lists heights where the
    integrand is not smooth; the z rule is split there.
    """

    x_range: tuple
    y_range: tuple
    z_range: tuple
    t_range: tuple
    potential: Optional[object] = None
    im_A: Optional[Sequence[float]] = None
    charge: float = 1.0
    z_breaks: tuple = ()

    def __post_init__(self):
        for name in ("x_range", "y_range", "z_range", "t_range"):
            lo, hi = getattr(self, name)
            if not hi > lo:
                raise PreconditionError(f"{name} must have hi > lo")
        if (self.potential is None) == (self.im_A is None):
            raise PreconditionError("give exactly one of potential or im_A")

    @property
    def is_vector(self) -> bool:
        return self.im_A is not None

    @property
    def bounds(self):
        return (self.x_range, self.y_range, self.z_range)

    def volume(self) -> float:
        return float(np.prod([hi - lo for lo, hi in (*self.bounds, self.t_range)]))

    def disjoint_from(self, other: "SpacetimeDetector") -> bool:
        ranges = zip((*self.bounds, self.t_range), (*other.bounds, other.t_range))
        return any(a[1] <= b[0] or b[1] <= a[0] for a, b in ranges)

    def v_eff(self, x, t):
        if callable(self.potential):
            return np.asarray(self.potential(x, t), dtype=complex)
        return np.full(x.shape[:-1], complex(self.potential))


@dataclass(frozen=True)
class AbsorptionResult:
    value: float
    gain: bool
    order: int


def _integrand(det: SpacetimeDetector, field: WaveField) -> Callable:
    if det.is_vector:
        a = np.asarray(det.im_A, dtype=float)

        def f(x, t):
            return 2.0 * det.charge * (field.current(x, t) @ a)

        return f

    def g(x, t):
        v = det.v_eff(x, t)
        if np.any(v.imag > 0):
            raise PreconditionError("scalar detector needs Im V_eff <= 0 everywhere in its box")
        return -2.0 * v.imag * field.density(x, t)

    return g


def _composite(lo, hi, breaks, n):
    cuts = [lo, *sorted(b for b in breaks if lo < b < hi), hi]
    parts = [nodes(a, b, n) for a, b in zip(cuts[:-1], cuts[1:])]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def _estimate(det, f, orders):
    nx, ny, nz, nt = orders
    (xs, wx), (ys, wy) = nodes(*det.x_range, nx), nodes(*det.y_range, ny)
    zs, wz = _composite(*det.z_range, det.z_breaks, nz)
    ts, wt = nodes(*det.t_range, nt)
    grid = np.stack(np.meshgrid(xs, ys, zs, indexing="ij"), axis=-1)
    w3 = wx[:, None, None] * wy[None, :, None] * wz[None, None, :]
    total = 0.0
    for t, w in zip(ts, wt):
        total += w * np.sum(w3 * f(grid, t))
    return float(total)


def spacetime_absorption(
    det: SpacetimeDetector, field: WaveField, tol: float = 1e-8, n: int = 8, max_n: int = 256, full: bool = False
):
    """Detection probability collected in the box.

    Tensor Gauss-Legendre in (x, y, z, t).  Each axis order is doubled
    separately until doubling any single axis moves the estimate by less
    than ``tol`` (absolute, or relative when the value exceeds one).
    ``full=True`` returns an :class:`AbsorptionResult`.
    """
    f = _integrand(det, field)
    orders = [n] * 4
    val = _estimate(det, f, orders)
    while True:
        scale = tol * max(1.0, abs(val))
        moved = []
        for axis in range(4):
            trial = list(orders)
            trial[axis] *= 2
            if abs(_estimate(det, f, trial) - val) > scale:
                moved.append(axis)
        if not moved:
            break
        for axis in moved:
            orders[axis] *= 2
        if max(orders) > max_n:
            raise QuadratureError(f"space-time quadrature not converged to {tol:.1e} at order {max_n}")
        val = _estimate(det, f, orders)
    if full:
        return AbsorptionResult(val, det.is_vector and val < 0, max(orders))
    return val


def vector_efficiency(det: SpacetimeDetector, direction) -> float:
    """epsilon = 2 e |Im A| for a coupling aligned with ``direction``."""
    if not det.is_vector:
        raise PreconditionError("efficiency is defined for the vector coupling")
    n = np.asarray(direction, dtype=float)
    n = n / np.linalg.norm(n)
    return 2.0 * det.charge * float(np.asarray(det.im_A, dtype=float) @ n)
