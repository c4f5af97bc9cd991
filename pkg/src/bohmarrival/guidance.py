"""Guidance-law trajectories, surface crossings and Born sampling.

The integrator is an embedded Dormand-Prince 5(4) pair with error-per-unit-step
control (the local error of a step of length h <= 1 stays below tol * h), run over a whole
ensemble at once: every particle keeps its own time and step size, so the
step sequence of one particle never depends on which other particles share
its batch.  Dense output between accepted steps is the cubic Hermite
interpolant built from the endpoint positions and velocities.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np

from .errors import NodalPoint, PreconditionError, SamplingBoxError, StepFailure
from .fields import DENSITY_FLOOR, WaveField

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

ACTIVE, DONE, NODE, STEP_FAILURE = 0, 1, 2, 3
STATUS_NAMES = {ACTIVE: "active", DONE: "ok", NODE: "node", STEP_FAILURE: "step_failure"}

MIN_ACCEPTANCE = 1e-4
BISECTION_TOL = 1e-10


# surfaces -------------------------------------------------------------------


@dataclass(frozen=True)
class PlaneZ:
    """Plane z = L, optionally restricted to the square |x|, |y| <= half_width."""

    z: float
    half_width: float = math.inf

    @property
    def normal(self):
        return np.array([0.0, 0.0, 1.0])

    def signed_distance(self, x):
        return np.asarray(x)[..., 2] - self.z

    def contains(self, x):
        x = np.asarray(x)
        return (np.abs(x[..., 0]) <= self.half_width) & (np.abs(x[..., 1]) <= self.half_width)


@dataclass(frozen=True)
class PlaneX:
    """Plane x = c, optionally restricted to |y|, |z - z_center| <= half_width."""

    x: float
    half_width: float = math.inf
    z_center: float = 0.0

    @property
    def normal(self):
        return np.array([1.0, 0.0, 0.0])

    def signed_distance(self, x):
        return np.asarray(x)[..., 0] - self.x

    def contains(self, x):
        x = np.asarray(x)
        return (np.abs(x[..., 1]) <= self.half_width) & (np.abs(x[..., 2] - self.z_center) <= self.half_width)


@dataclass(frozen=True)
class Disk:
    """Disk of given radius in the plane z = L, centred on the z axis."""

    z: float
    radius: float

    @property
    def normal(self):
        return np.array([0.0, 0.0, 1.0])

    def signed_distance(self, x):
        return np.asarray(x)[..., 2] - self.z

    def contains(self, x):
        x = np.asarray(x)
        return x[..., 0] ** 2 + x[..., 1] ** 2 <= self.radius**2


Surface = PlaneZ | PlaneX | Disk


# trajectories ----------------------------------------------------------------


@dataclass(frozen=True)
class CrossingEvent:
    time: float
    position: np.ndarray
    direction_sign: int
    order_index: int


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    steps: int = 0
    rejected: int = 0
    min_density: float = math.inf
    status: str = "ok"

    @property
    def halted(self) -> bool:
        return self.status != "ok"

    def position(self, tq):
        """Dense output at time(s) tq inside the integrated interval."""
        tq = np.atleast_1d(np.asarray(tq, dtype=float))
        i = np.clip(np.searchsorted(self.t, tq, side="right") - 1, 0, len(self.t) - 2)
        out = _hermite(self.t[i], self.t[i + 1], self.x[i], self.x[i + 1], self.v[i], self.v[i + 1], tq)
        return out


def _hermite(ta, tb, xa, xb, va, vb, tq):
    h = np.asarray(tb - ta, dtype=float)
    th = ((tq - ta) / h)[..., None]
    h = h[..., None]
    h00 = 2 * th**3 - 3 * th**2 + 1
    h10 = th**3 - 2 * th**2 + th
    h01 = -2 * th**3 + 3 * th**2
    h11 = th**3 - th**2
    return h00 * xa + h10 * h * va + h01 * xb + h11 * h * vb


def _positive(s):
    # zero counts as the positive side
    return s >= 0


def _sides(s):
    """Sign of each sample with zeros carrying the last nonzero side.

    Touching the surface and returning is therefore not a crossing.
    """
    sg = np.sign(s).astype(np.int8)
    idx = np.where(sg != 0, np.arange(len(sg)), 0)
    np.maximum.accumulate(idx, out=idx)
    out = sg[idx]
    nz = np.flatnonzero(sg)
    if nz.size:
        out[: nz[0]] = sg[nz[0]]
    return out


@dataclass
class EventTable:
    """All surface crossings of an ensemble, one row per crossing."""

    ids: np.ndarray
    t: np.ndarray
    x: np.ndarray
    sign: np.ndarray
    order: np.ndarray

    @classmethod
    def empty(cls):
        return cls(np.zeros(0, int), np.zeros(0), np.zeros((0, 3)), np.zeros(0, int), np.zeros(0, int))

    @classmethod
    def build(cls, ids, t, x, sign):
        if len(ids) == 0:
            return cls.empty()
        ids = np.asarray(ids)
        t = np.asarray(t)
        order_idx = np.lexsort((t, ids))
        ids, t, x, sign = ids[order_idx], t[order_idx], np.asarray(x)[order_idx], np.asarray(sign)[order_idx]
        first_of_group = np.r_[True, ids[1:] != ids[:-1]]
        group_start = np.maximum.accumulate(np.where(first_of_group, np.arange(len(ids)), 0))
        order = np.arange(len(ids)) - group_start + 1
        return cls(ids, t, x, sign.astype(int), order)

    def for_particle(self, i: int) -> list[CrossingEvent]:
        sel = np.flatnonzero(self.ids == i)
        return [CrossingEvent(float(self.t[j]), self.x[j].copy(), int(self.sign[j]), int(self.order[j])) for j in sel]

    def first_times(self, n: int) -> np.ndarray:
        out = np.full(n, np.nan)
        first = self.order == 1
        out[self.ids[first]] = self.t[first]
        return out

    def shifted(self, offset: int) -> "EventTable":
        return EventTable(self.ids + offset, self.t, self.x, self.sign, self.order)

    @staticmethod
    def concatenate(tables: Sequence["EventTable"]) -> "EventTable":
        if not tables:
            return EventTable.empty()
        return EventTable(
            np.concatenate([tb.ids for tb in tables]),
            np.concatenate([tb.t for tb in tables]),
            np.concatenate([tb.x for tb in tables]),
            np.concatenate([tb.sign for tb in tables]),
            np.concatenate([tb.order for tb in tables]),
        )


@dataclass
class EnsembleResult:
    x_final: np.ndarray
    t_final: np.ndarray
    status: np.ndarray
    steps: np.ndarray
    rejected: np.ndarray
    min_density: np.ndarray
    samples: Optional[np.ndarray] = None
    events: EventTable = dc_field(default_factory=EventTable.empty)
    trajectories: Optional[list[Trajectory]] = None

    @property
    def lost(self) -> np.ndarray:
        return (self.status == NODE) | (self.status == STEP_FAILURE)


def _velocity(field: WaveField, x, t):
    """Velocity, density and node mask in one pass over psi."""
    p, g = field.psi_and_grad(x, t)
    rho = field.density_from(p)
    j = field.current_from(p, g)
    bad = ~(rho > DENSITY_FLOOR)
    v = j / np.where(bad, 1.0, rho)[..., None]
    v[bad] = 0.0
    return v, rho, bad


def _integrate_batch(field, x0, t0, t1, tol, max_step, t_eval, surface, record, max_steps):
    n = len(x0)
    x = np.array(x0, dtype=float)
    t = np.full(n, float(t0))
    span = t1 - t0
    v, rho, bad = _velocity(field, x, t)
    status = np.where(bad, NODE, ACTIVE)
    min_density = rho.copy()
    h = np.full(n, min(max_step, span / 100.0))
    h_min = 1e-13 * max(1.0, abs(t1))
    steps = np.zeros(n, int)
    rejected = np.zeros(n, int)

    samples = None
    if t_eval is not None:
        samples = np.full((n, len(t_eval), 3), np.nan)
        at_start = np.isclose(t_eval, t0, rtol=0, atol=1e-15)
        samples[:, at_start] = x[:, None, :]
    if surface is not None:
        # 0 means the side is not known yet (started on the surface)
        side = np.sign(surface.signed_distance(x)).astype(np.int8)
    ev_ids, ev_t, ev_x, ev_sign = [], [], [], []
    rec = [(np.arange(n), t.copy(), x.copy(), v.copy())] if record else None

    while True:
        act = np.flatnonzero(status == ACTIVE)
        if act.size == 0:
            break
        xi, ti, vi = x[act], t[act], v[act]
        hi = np.minimum(np.minimum(h[act], t1 - ti), max_step)
        k = [vi]
        stage_bad = np.zeros(act.size, bool)
        for s in range(1, 7):
            xs = xi + hi[:, None] * sum(a * kj for a, kj in zip(_A[s], k) if a != 0.0)
            ks, rs, bs = _velocity(field, xs, ti + _C[s] * hi)
            k.append(ks)
            stage_bad |= bs
            if s == 6:
                rho_new = rs
        x_new = xi + hi[:, None] * sum(b * kj for b, kj in zip(_B5, k) if b != 0.0)
        err = hi[:, None] * sum(e * kj for e, kj in zip(_E, k) if e != 0.0)
        # error per unit step: the allowance shrinks with h below one time
        # unit, so global error falls faster than tol
        scale = tol * np.maximum(1.0, np.max(np.abs(x_new), axis=-1)) * np.minimum(1.0, hi)
        errn = np.max(np.abs(err), axis=-1) / scale
        errn = np.where(np.isfinite(errn), errn, np.inf)
        accept = (errn <= 1.0) & ~stage_bad

        fac = 0.9 * np.maximum(errn, 1e-10) ** -0.25
        fac = np.clip(fac, 0.2, 5.0)
        fac = np.where(accept, fac, np.minimum(fac, 1.0))
        fac = np.where(stage_bad, 0.25, fac)
        h_next = hi * fac

        acc = act[accept]
        rej = act[~accept]
        rejected[rej] += 1
        if acc.size:
            ta = t[acc]
            tb = ta + hi[accept]
            xa, xb = x[acc], x_new[accept]
            va, vb = v[acc], k[6][accept]
            finished = tb >= t1 - 1e-14 * max(1.0, abs(t1))
            tb = np.where(finished, t1, tb)
            if samples is not None:
                for j, te in enumerate(t_eval):
                    sel = (ta < te) & (te <= tb)
                    if np.any(sel):
                        samples[acc[sel], j] = _hermite(ta[sel], tb[sel], xa[sel], xb[sel], va[sel], vb[sel], np.full(sel.sum(), te))
            if surface is not None:
                sg_new = np.sign(surface.signed_distance(xb)).astype(np.int8)
                sa = side[acc]
                cross = (sa != 0) & (sg_new != 0) & (sg_new != sa)
                if np.any(cross):
                    ci = np.flatnonzero(cross)
                    tc, xc = _bisect(surface, ta[ci], tb[ci], xa[ci], xb[ci], va[ci], vb[ci], sa[ci] > 0)
                    inside = surface.contains(xc)
                    ev_ids.append(acc[ci][inside])
                    ev_t.append(tc[inside])
                    ev_x.append(xc[inside])
                    ev_sign.append(sg_new[ci][inside].astype(int))
                side[acc] = np.where(sg_new != 0, sg_new, sa)
            x[acc] = xb
            t[acc] = tb
            v[acc] = vb
            steps[acc] += 1
            min_density[acc] = np.minimum(min_density[acc], rho_new[accept])
            if record:
                rec.append((acc.copy(), tb.copy(), xb.copy(), vb.copy()))
            status[acc[finished]] = DONE
        h[act] = h_next
        tiny = act[(h_next < h_min) & (status[act] == ACTIVE)]
        if tiny.size:
            node_like = stage_bad[np.searchsorted(act, tiny)]
            status[tiny] = np.where(node_like, NODE, STEP_FAILURE)
        over = act[(steps[act] >= max_steps) & (status[act] == ACTIVE)]
        status[over] = STEP_FAILURE

    if ev_ids:
        events = EventTable.build(np.concatenate(ev_ids), np.concatenate(ev_t), np.concatenate(ev_x), np.concatenate(ev_sign))
    else:
        events = EventTable.empty()
    trajectories = None
    if record:
        ids = np.concatenate([r[0] for r in rec])
        ts = np.concatenate([r[1] for r in rec])
        xs = np.concatenate([r[2] for r in rec])
        vs = np.concatenate([r[3] for r in rec])
        order = np.argsort(ids, kind="stable")
        ids, ts, xs, vs = ids[order], ts[order], xs[order], vs[order]
        bounds = np.searchsorted(ids, np.arange(n + 1))
        trajectories = []
        for i in range(n):
            sl = slice(bounds[i], bounds[i + 1])
            trajectories.append(
                Trajectory(ts[sl], xs[sl], vs[sl], int(steps[i]), int(rejected[i]), float(min_density[i]), STATUS_NAMES[int(status[i])])
            )
    return EnsembleResult(x, t, status, steps, rejected, min_density, samples, events, trajectories)


def _bisect(surface, ta, tb, xa, xb, va, vb, start_positive):
    lo = np.zeros(len(ta))
    hi = np.ones(len(ta))
    span = np.max(tb - ta) if len(ta) else 0.0
    iters = max(1, int(math.ceil(math.log2(max(span, 1e-300) / BISECTION_TOL))) + 1)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        xm = _hermite(ta, tb, xa, xb, va, vb, ta + mid * (tb - ta))
        same = _positive(surface.signed_distance(xm)) == start_positive
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    tc = ta + hi * (tb - ta)
    return tc, _hermite(ta, tb, xa, xb, va, vb, tc)


def integrate_ensemble(
    field: WaveField,
    x0,
    t0: float,
    t1: float,
    tol: float = 1e-8,
    *,
    max_step: Optional[float] = None,
    t_eval=None,
    surface: Optional[Surface] = None,
    record: bool = False,
    max_steps: int = 100_000,
    threads: int = 1,
    chunk: int = 8192,
) -> EnsembleResult:
    """Integrate dx/dt = J/rho for every row of ``x0``.

    Particles that hit a node are halted and flagged rather than raising, so
    one bad trajectory never aborts an ensemble.  ``chunk`` fixes the batch
    layout; results do not depend on ``threads``.
    """
    if not t1 > t0:
        raise PreconditionError("t1 must exceed t0")
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    if max_step is None:
        max_step = (t1 - t0) / 20.0
    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
    starts = list(range(0, len(x0), chunk))

    def run(s):
        return _integrate_batch(field, x0[s : s + chunk], t0, t1, tol, max_step, t_eval, surface, record, max_steps)

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    if len(parts) == 1:
        return parts[0]
    return EnsembleResult(
        np.concatenate([p.x_final for p in parts]),
        np.concatenate([p.t_final for p in parts]),
        np.concatenate([p.status for p in parts]),
        np.concatenate([p.steps for p in parts]),
        np.concatenate([p.rejected for p in parts]),
        np.concatenate([p.min_density for p in parts]),
        None if t_eval is None else np.concatenate([p.samples for p in parts]),
        EventTable.concatenate([p.events.shifted(s) for p, s in zip(parts, starts)]),
        None if not record else [tr for p in parts for tr in p.trajectories],
    )


def integrate_trajectory(
    field: WaveField, x0, t0: float, t1: float, tol: float = 1e-8, max_step: Optional[float] = None
) -> Trajectory:
    """Single trajectory with every accepted step recorded for dense output.

    A trajectory that runs into a node comes back with ``status == 'node'``
    and the samples integrated so far.
    """
    x0 = np.asarray(x0, dtype=float)
    if field.density(x0, t0) <= DENSITY_FLOOR:
        raise NodalPoint("initial point sits on a node")
    res = integrate_ensemble(field, x0[None, :], t0, t1, tol, max_step=max_step, record=True)
    traj = res.trajectories[0]
    if traj.status == "step_failure":
        err = StepFailure(f"step size underflow near t = {traj.t[-1]:.6g}")
        err.trajectory = traj
        raise err
    return traj


def detect_crossings(traj: Trajectory, surface: Surface) -> list[CrossingEvent]:
    raw = np.sign(surface.signed_distance(traj.x))
    sides = _sides(raw)
    idx = np.flatnonzero((raw[1:] != 0) & (sides[:-1] != sides[1:]))
    if idx.size == 0:
        return []
    start = sides[idx] > 0
    tc, xc = _bisect(surface, traj.t[idx], traj.t[idx + 1], traj.x[idx], traj.x[idx + 1], traj.v[idx], traj.v[idx + 1], start)
    keep = surface.contains(xc)
    signs = sides[idx + 1].astype(int)
    events = []
    for tcj, xcj, sj in zip(tc[keep], xc[keep], signs[keep]):
        events.append(CrossingEvent(float(tcj), xcj, int(sj), len(events) + 1))
    return events


def first_arrival(traj: Trajectory, surface: Surface) -> Optional[float]:
    events = detect_crossings(traj, surface)
    return events[0].time if events else None


# sampling -------------------------------------------------------------------


def _reject_1d(density, lo, hi, n, rng, batch=65536):
    grid = np.linspace(lo, hi, 4001)
    bound = 1.05 * float(np.max(density(grid)))
    if bound <= 0:
        raise SamplingBoxError("density vanishes on the sampling interval")
    out = []
    got = tried = 0
    while got < n:
        u = rng.uniform(lo, hi, batch)
        y = rng.uniform(0.0, bound, batch)
        keep = u[y < density(u)]
        tried += batch
        out.append(keep)
        got += keep.size
        if tried >= 10 * batch and got / tried < MIN_ACCEPTANCE:
            raise SamplingBoxError(f"acceptance rate {got / tried:.2e} below {MIN_ACCEPTANCE}")
    return np.concatenate(out)[:n]


def sample_initial(field: WaveField, t0: float, n: int, seed: int, box=None, batch: int = 65536) -> np.ndarray:
    """Draw ``n`` positions from |psi(., t0)|^2 by rejection from a uniform box.

    Fields whose density factorises are sampled one axis at a time, which
    keeps the acceptance rate high in three dimensions.  ``box`` is an
    optional ``(lo, hi)`` pair of 3-vectors overriding the default box.
    """
    rng = np.random.default_rng(seed)
    axes = field.axis_densities(t0)
    if axes is not None:
        cols = []
        for a, (dens, (lo, hi)) in enumerate(axes):
            if box is not None:
                lo, hi = float(box[0][a]), float(box[1][a])
            cols.append(_reject_1d(dens, lo, hi, n, rng, batch))
        return np.stack(cols, axis=-1)

    if box is None:
        box = field.sampling_box(t0)
        if box is None:
            raise SamplingBoxError("field has no default sampling box; pass one explicitly")
    lo, hi = np.asarray(box[0], float), np.asarray(box[1], float)
    probe = rng.uniform(lo, hi, (32768, 3))
    bound = 1.5 * float(np.max(field.density(probe, t0)))
    out = []
    got = tried = 0
    while got < n:
        u = rng.uniform(lo, hi, (batch, 3))
        d = field.density(u, t0)
        if np.any(d > bound):
            bound = 1.5 * float(np.max(d))
            out, got, tried = [], 0, 0
            continue
        keep = u[rng.uniform(0.0, bound, batch) < d]
        out.append(keep)
        got += len(keep)
        tried += batch
        if tried >= 10 * batch and got / tried < MIN_ACCEPTANCE:
            raise SamplingBoxError(f"acceptance rate {got / tried:.2e} below {MIN_ACCEPTANCE}")
    return np.concatenate(out)[:n]
