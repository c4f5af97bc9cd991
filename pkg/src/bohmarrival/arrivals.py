"""Arrival-time distributions: ideal flux, Monte Carlo histograms, closed forms."""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np
from scipy.special import erfc

from .errors import GridMismatch, OverlapError, PreconditionError, QuadratureError
from .fields import DoubleSlit, WaveField, WaveguideSpinField
from .guidance import Disk, EventTable, PlaneX, PlaneZ, Surface, integrate_ensemble, sample_initial
from .io import write_csv
from .quadrature import adaptive_2d, nodes, quad

CLASS_NAMES = ("first", "second", "third", "fourth", "fifth")


def class_name(k: int) -> str:
    return CLASS_NAMES[k - 1] if k <= len(CLASS_NAMES) else f"crossing{k}"


# histograms -----------------------------------------------------------------


@dataclass
class ArrivalHistogram:
    """Binned crossing times with post-selection classes.

    ``counts['first']`` bins first arrivals, ``counts['second']`` second
    crossings and so on up to ``k_max``; ``counts['all']`` bins every
    crossing.  ``sign_counts`` splits all crossings by the sign of J.n.
    Node-trapped trajectories are excluded entirely and counted in ``n_lost``.
    """

    bin_edges: np.ndarray
    counts: dict
    sign_counts: dict
    n_total: int
    n_lost: int
    n_noarrival: int
    meta: dict = dc_field(default_factory=dict)

    @classmethod
    def empty(cls, bin_edges, k_max: int = 3):
        edges = np.asarray(bin_edges, dtype=float)
        if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0):
            raise PreconditionError("bin edges must be strictly increasing")
        nb = len(edges) - 1
        counts = {class_name(k): np.zeros(nb, np.int64) for k in range(1, k_max + 1)}
        counts["all"] = np.zeros(nb, np.int64)
        return cls(edges, counts, {+1: np.zeros(nb, np.int64), -1: np.zeros(nb, np.int64)}, 0, 0, 0)

    @classmethod
    def from_events(cls, events: EventTable, n_total: int, lost, bin_edges, k_max: int = 3):
        h = cls.empty(bin_edges, k_max)
        lost = np.asarray(lost, dtype=bool)
        keep = ~lost[events.ids] if len(events.ids) else np.zeros(0, bool)
        ids, t, sign, order = events.ids[keep], events.t[keep], events.sign[keep], events.order[keep]
        edges = h.bin_edges
        nb = len(edges) - 1

        def binned(sel):
            c, _ = np.histogram(t[sel], bins=edges)
            return c.astype(np.int64)

        for k in range(1, k_max + 1):
            h.counts[class_name(k)] = binned(order == k)
        h.counts["all"] = binned(np.ones(len(t), bool))
        h.sign_counts = {+1: binned(sign > 0), -1: binned(sign < 0)}
        arrived = np.zeros(n_total, bool)
        arrived[ids[order == 1]] = True
        h.n_total = int(n_total)
        h.n_lost = int(lost.sum())
        # first arrivals outside the binned window count as no arrival
        outside = int(np.sum(arrived)) - int(h.counts["first"].sum())
        h.n_noarrival = int(n_total - h.n_lost - arrived.sum()) + outside
        assert nb == len(h.counts["first"])
        return h

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    def density(self, cls: str = "first") -> np.ndarray:
        """Counts per unit time per particle."""
        if self.n_total == 0:
            return np.zeros(len(self.widths))
        return self.counts[cls] / (self.n_total * self.widths)

    def mass(self, cls: str = "first") -> float:
        return float(self.counts[cls].sum()) / max(self.n_total, 1)

    def merge(self, other: "ArrivalHistogram") -> "ArrivalHistogram":
        if not np.array_equal(self.bin_edges, other.bin_edges) or self.counts.keys() != other.counts.keys():
            raise GridMismatch("histograms have different bins or classes")
        return ArrivalHistogram(
            self.bin_edges.copy(),
            {k: self.counts[k] + other.counts[k] for k in self.counts},
            {s: self.sign_counts[s] + other.sign_counts[s] for s in self.sign_counts},
            self.n_total + other.n_total,
            self.n_lost + other.n_lost,
            self.n_noarrival + other.n_noarrival,
            dict(self.meta),
        )

    def last_nonempty(self, cls: str = "first") -> Optional[float]:
        """Upper edge of the last bin with a count; an empirical cutoff time."""
        idx = np.flatnonzero(self.counts[cls])
        return None if idx.size == 0 else float(self.bin_edges[idx[-1] + 1])

    def rows(self):
        for cls in self.counts:
            dens = self.density(cls)
            for tau, v in zip(self.centers, dens):
                yield tau, v, cls
        for s, name in ((+1, "positive"), (-1, "negative")):
            dens = self.sign_counts[s] / (max(self.n_total, 1) * self.widths)
            for tau, v in zip(self.centers, dens):
                yield tau, v, name

    def to_csv(self, path) -> None:
        write_csv(path, ["tau", "value", "class"], self.rows())

    def summary(self) -> dict:
        return {
            "n_total": self.n_total,
            "n_lost": self.n_lost,
            "n_noarrival": self.n_noarrival,
            "mass": {k: self.mass(k) for k in self.counts},
        }


def mc_first_arrival(
    field: WaveField,
    surface: Surface,
    n: int,
    seed: int,
    t_max: float,
    tol: float = 1e-8,
    *,
    t0: float = 0.0,
    bins: int = 200,
    k_max: int = 3,
    threads: int = 1,
    max_step: Optional[float] = None,
    x0=None,
) -> ArrivalHistogram:
    """Sample Born positions at ``t0``, integrate to ``t_max``, bin the crossings."""
    if n < 1:
        raise PreconditionError("n must be >= 1")
    if not np.isfinite(t_max) or not t_max > t0:
        raise PreconditionError("t_max must be finite and exceed t0")
    if x0 is None:
        x0 = sample_initial(field, t0, n, seed)
    res = integrate_ensemble(field, x0, t0, t_max, tol, surface=surface, threads=threads, max_step=max_step)
    edges = np.linspace(t0, t_max, bins + 1)
    h = ArrivalHistogram.from_events(res.events, len(x0), res.lost, edges, k_max)
    h.meta = {"seed": seed, "n": len(x0), "tol": tol, "t0": t0, "t_max": t_max}
    return h


# ideal flux -----------------------------------------------------------------


def _surface_chart(field: WaveField, surface: Surface, t: float):
    """Map a parameter rectangle onto the surface: (box, to_points, jacobian)."""
    if isinstance(surface, Disk):
        z = surface.z

        def to_points(r, phi):
            return np.stack([r * np.cos(phi), r * np.sin(phi), np.full_like(r, z)], axis=-1)

        return ((0.0, surface.radius), (0.0, 2 * np.pi)), to_points, lambda r, phi: r
    if isinstance(surface, PlaneZ):
        axes, fixed, value, centre = (0, 1), 2, surface.z, (0.0, 0.0)
    elif isinstance(surface, PlaneX):
        axes, fixed, value, centre = (1, 2), 0, surface.x, (0.0, surface.z_center)
    else:
        raise PreconditionError(f"unsupported surface {surface!r}")
    hw = surface.half_width
    if np.isfinite(hw):
        ranges = tuple((c - hw, c + hw) for c in centre)
    else:
        box = field.sampling_box(t)
        if box is None:
            raise PreconditionError("infinite surface needs a field with finite transverse support; give half_width")
        ranges = tuple((float(box[0][a]), float(box[1][a])) for a in axes)

    def to_points(u, v):
        pts = np.empty(np.shape(u) + (3,))
        pts[..., axes[0]] = u
        pts[..., axes[1]] = v
        pts[..., fixed] = value
        return pts

    return ranges, to_points, lambda u, v: 1.0


def _surface_rule(field: WaveField, surface: Surface, t: float, n: int):
    """Tensor rule on the surface: Gauss-Legendre, periodic trapezoid in angle."""
    box, to_points, jac = _surface_chart(field, surface, t)
    u, wu = nodes(*box[0], n)
    if isinstance(surface, Disk):
        m = 2 * n
        v = 2 * np.pi * np.arange(m) / m
        wv = np.full(m, 2 * np.pi / m)
    else:
        v, wv = nodes(*box[1], n)
    U, V = np.meshgrid(u, v, indexing="ij")
    return to_points(U, V), np.outer(wu, wv) * jac(U, V)


def surface_flux(field: WaveField, surface: Surface, t: float, absolute: bool = True, tol: float = 1e-8) -> float:
    """Integral of |J.n| (or J.n) over the surface by adaptive cubature."""
    box, to_points, jac = _surface_chart(field, surface, t)
    normal = surface.normal

    def integrand(u, v):
        jn = field.current(to_points(u, v), t) @ normal
        return (np.abs(jn) if absolute else jn) * jac(u, v)

    return adaptive_2d(integrand, box, tol)


def ideal_flux_distribution(field: WaveField, surface: Surface, times, tol: float = 1e-8, absolute: bool = True) -> np.ndarray:
    """Flux of probability through ``surface`` at each time."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    return np.array([surface_flux(field, surface, t, absolute, tol) for t in times])


def expected_bin_mass(field: WaveField, surface: Surface, edges, per_bin: int = 8, tol: float = 1e-8) -> np.ndarray:
    """Ideal flux integrated over each time bin with a Gauss-Legendre rule."""
    edges = np.asarray(edges, dtype=float)
    out = np.empty(len(edges) - 1)
    for i, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        ts, ws = nodes(a, b, per_bin)
        out[i] = float(ws @ ideal_flux_distribution(field, surface, ts, tol))
    return out


def default_t_max(field: WaveField, surface: Surface, t0: float = 0.0, tail: float = 1e-3, t_cap: float = 1e4, tol: float = 1e-6) -> float:
    """Smallest horizon t0 + 2^j whose ideal-flux mass beyond it is below ``tail``.

    The mass beyond T = t0 + 2^j is estimated by the flux over the next three
    doubling windows; for tails falling like tau^-4 or faster that holds
    nearly all of it.
    """
    windows: list[float] = []

    def window(j):
        while len(windows) <= j:
            a, b = t0 + 2.0 ** len(windows), t0 + 2.0 ** (len(windows) + 1)
            windows.append(float(np.sum(expected_bin_mass(field, surface, np.linspace(a, b, 5), per_bin=6, tol=tol))))
        return windows[j]

    j = 0
    while t0 + 2.0**j <= t_cap:
        if window(j) + window(j + 1) + window(j + 2) < tail:
            return t0 + 2.0**j
        j += 1
    raise PreconditionError(f"flux tail beyond {t_cap:g} still exceeds {tail:g}; set t_max explicitly")


# closed-form waveguide distribution ---------------------------------------------


@dataclass(frozen=True)
class DDParams:
    L: float
    lambda0: float = 1.0
    tau_grid: tuple = ()

    def __post_init__(self):
        if not self.L > 0 or not self.lambda0 > 0:
            raise PreconditionError("L and lambda0 must be positive")
        g = np.asarray(self.tau_grid, dtype=float)
        if g.size and (np.any(g < 0) or np.any(np.diff(g) <= 0)):
            raise PreconditionError("tau grid must be nonnegative and strictly increasing")


def dd_curve(tau, L: float, lambda0: float = 1.0):
    tau = np.asarray(tau, dtype=float)
    q = 1.0 + tau**2
    return 4.0 * L**3 / (lambda0 * np.sqrt(np.pi)) * tau * np.exp(-(L**2) / q) / q**2.5


def dd_analytic(params: DDParams) -> np.ndarray:
    """P(tau, L) = 4 L^3 / (lambda0 sqrt(pi)) tau exp(-L^2/(1+tau^2)) / (1+tau^2)^(5/2)."""
    return dd_curve(np.asarray(params.tau_grid, dtype=float), params.L, params.lambda0)


def dd_total_mass(L: float, lambda0: float = 1.0) -> float:
    return quad(lambda tau: float(dd_curve(tau, L, lambda0)), 0.0, np.inf, tol=1e-10)


# full detector signal ------------------------------------------------------------


@dataclass
class FullSignal:
    value: np.ndarray
    convective: np.ndarray
    spin_residual: np.ndarray


def full_signal_distribution(
    field: WaveguideSpinField, disk: Disk, eta: float, times, tol: float = 1e-10, n: int = 16, max_n: int = 512
) -> FullSignal:
    """eta times the signed flux of the full Pauli current through a disk.

    The angular rule is the periodic trapezoid, so the spin-term loop
    integral is resolved to round-off; it is returned separately so callers
    can check that it vanishes.
    """
    if not isinstance(disk, Disk):
        raise PreconditionError("the full signal is defined on a complete disk cross-section")
    times = np.atleast_1d(np.asarray(times, dtype=float))
    conv = np.empty(len(times))
    spin = np.empty(len(times))
    for i, t in enumerate(times):
        prev = None
        m = n
        while True:
            pts, w = _surface_rule(field, disk, t, m)
            c = float(np.sum(w * field.convective_current(pts, t)[..., 2]))
            s = float(np.sum(w * field.spin_current(pts, t)[..., 2]))
            if prev is not None and abs(c - prev) <= tol * max(abs(c), 1e-300) + 1e-300:
                break
            prev = c
            m *= 2
            if m > max_n:
                raise QuadratureError(f"full-signal quadrature not converged at order {max_n}")
        conv[i], spin[i] = c, s
    return FullSignal(eta * (conv + spin), eta * conv, eta * spin)


# which path -----------------------------------------------------------------


@dataclass(frozen=True)
class WhichPath:
    P_plus: float
    P_minus: float
    retrodictive: bool


def overlap_mass(field: DoubleSlit) -> float:
    """Mass of each initial packet lying on the other packet's side of x = 0."""
    return 0.5 * float(erfc(field.separation / (2.0 * np.sqrt(2.0) * field.packet.sigma)))


def is_retrodictive(field: DoubleSlit, atol: float = 1e-12) -> bool:
    """Side of x = 0 at time t identifies the source packet.

    True for a single packet, or equal weights with relative phase 0 or pi
    (the symmetry plane is then never crossed).
    """
    cp, cm = abs(field.c_plus), abs(field.c_minus)
    if cp < atol or cm < atol:
        return True
    chi = np.angle(field.c_minus / field.c_plus)
    on_axis = min(abs(chi), abs(abs(chi) - np.pi)) < 1e-9
    return abs(cp - cm) < atol and on_axis


def which_path(field: DoubleSlit, t: float, method: str = "quadrature", n: int = 10_000, seed: int = 0, tol: float = 1e-8) -> WhichPath:
    """Probability of being found at x >= 0 (attributed to the +a/2 packet)."""
    if not isinstance(field, DoubleSlit):
        raise PreconditionError("which_path needs a DoubleSlit field")
    ov = overlap_mass(field)
    if ov >= 1e-6:
        raise OverlapError(f"initial packets overlap: mass {ov:.3g} across x = 0 (needs < 1e-6)")
    retro = is_retrodictive(field)
    if method == "quadrature":
        dens = lambda u: float(np.abs(field.x_profile(u, t)) ** 2)
        plus = quad(dens, 0.0, np.inf, tol=1e-12, limit=400)
        minus = quad(dens, -np.inf, 0.0, tol=1e-12, limit=400)
        total = plus + minus
        return WhichPath(plus / total, minus / total, retro)
    if method == "samples":
        x0 = sample_initial(field, 0.0, n, seed)
        if t == 0.0:
            xt = x0
        else:
            res = integrate_ensemble(field, x0, 0.0, t, tol)
            xt = res.x_final[~res.lost]
        plus = float(np.mean(xt[:, 0] >= 0.0))
        return WhichPath(plus, 1.0 - plus, retro)
    raise PreconditionError(f"unknown which_path method {method!r}")


def retrodiction_rate(field: DoubleSlit, t: float, n: int, seed: int, tol: float = 1e-8) -> float:
    """Fraction of trajectories whose side of x = 0 at t matches their start."""
    x0 = sample_initial(field, 0.0, n, seed)
    res = integrate_ensemble(field, x0, 0.0, t, tol)
    ok = ~res.lost
    return float(np.mean(np.sign(x0[ok, 0]) == np.sign(res.x_final[ok, 0])))
