"""Quadrature helpers: adaptive Gauss-Kronrod in 1D, Gauss-Legendre tensor grids beyond."""
from __future__ import annotations

import warnings
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import QuadratureError


def quad(f, a, b, tol: float = 1e-10, limit: int = 200, complex_valued: bool = False):
    """scipy's QUADPACK with failures turned into :class:`QuadratureError`."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, a, b, epsabs=tol, epsrel=tol, limit=limit, complex_func=complex_valued)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(str(exc)) from exc
    if not err <= max(tol, tol * abs(val)) * 10:
        raise QuadratureError(f"quadrature error estimate {err:.3g} above tolerance {tol:.3g}")
    return val


@lru_cache(maxsize=64)
def gauss_legendre(n: int):
    return np.polynomial.legendre.leggauss(n)


def nodes(a: float, b: float, n: int):
    x, w = gauss_legendre(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def tensor_quad(f, bounds, n: int = 16, tol: float = 1e-8, max_n: int = 256, rel: bool = True):
    """Integrate ``f(*grids)`` over a box with a Gauss-Legendre tensor rule.

    The order doubles until two successive estimates agree within ``tol``
    (relative to the value when ``rel``); ``f`` receives broadcastable
    coordinate arrays, one per dimension.
    """
    prev = None
    while n <= max_n:
        pts, wts = zip(*(nodes(a, b, n) for a, b in bounds))
        grids = np.meshgrid(*pts, indexing="ij", sparse=True)
        weight = wts[0]
        for w in wts[1:]:
            weight = np.multiply.outer(weight, w)
        val = np.sum(f(*grids) * weight)
        if prev is not None:
            scale = max(abs(val), 1e-300) if rel else 1.0
            if abs(val - prev) <= tol * scale or abs(val - prev) <= 1e-15:
                return val
        prev = val
        n *= 2
    raise QuadratureError(f"tensor quadrature not converged to {tol:.1e} at order {max_n}")


def adaptive_2d(f, box, tol: float = 1e-8, order: int = 6, max_cells: int = 400_000):
    """Adaptive cubature on a rectangle for integrands with kinks.

    Each leaf cell carries its tensor Gauss-Legendre value (``order`` points
    per side) and an error estimate from comparing it with its parent.
    While the summed error exceeds ``tol * |I|``, the cells holding the
    larger half of the error are split into four.  ``f`` takes two
    coordinate arrays and returns values of the same shape.
    """
    gx, gw = gauss_legendre(order)
    (ax, bx), (ay, by) = box

    def rule(c):
        x0, x1, y0, y1 = c.T
        hx, hy = 0.5 * (x1 - x0), 0.5 * (y1 - y0)
        X = x0[:, None, None] + hx[:, None, None] * (gx[None, :, None] + 1.0)
        Y = y0[:, None, None] + hy[:, None, None] * (gx[None, None, :] + 1.0)
        X, Y = np.broadcast_arrays(X, Y)
        return hx * hy * np.einsum("cij,i,j->c", f(X, Y), gw, gw)

    def split(c):
        x0, x1, y0, y1 = c.T
        xm, ym = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        return np.concatenate(
            [
                np.stack([x0, xm, y0, ym], axis=1),
                np.stack([xm, x1, y0, ym], axis=1),
                np.stack([x0, xm, ym, y1], axis=1),
                np.stack([xm, x1, ym, y1], axis=1),
            ]
        )

    def refine(c, parent_vals):
        kids = split(c)
        kv = rule(kids)
        n = len(c)
        summed = kv[:n] + kv[n : 2 * n] + kv[2 * n : 3 * n] + kv[3 * n :]
        # spread each parent's discrepancy over its four children
        err = np.tile(np.abs(summed - parent_vals) / 4.0, 4)
        return kids, kv, err

    cells = np.array([[ax, bx, ay, by]], dtype=float)
    cells, vals, errs = refine(cells, rule(cells))
    while True:
        total = vals.sum()
        if errs.sum() <= tol * abs(total) or errs.sum() <= 1e-300:
            return float(total)
        if len(cells) > max_cells:
            raise QuadratureError(f"adaptive cubature did not reach {tol:.1e} within {max_cells} cells")
        order_idx = np.argsort(errs)[::-1]
        cum = np.cumsum(errs[order_idx])
        n_split = int(np.searchsorted(cum, 0.5 * cum[-1])) + 1
        pick = order_idx[:n_split]
        keep = np.ones(len(cells), bool)
        keep[pick] = False
        kids, kv, ke = refine(cells[pick], vals[pick])
        cells = np.concatenate([cells[keep], kids])
        vals = np.concatenate([vals[keep], kv])
        errs = np.concatenate([errs[keep], ke])
