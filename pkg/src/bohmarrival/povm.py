"""Finite-dimensional POVMs from a system-pointer unitary, and axiom checks.

Joint states live in C^dS (x) C^dM with index ``s * dM + j``.  A pointer
partition {Delta_n} of the pointer indices induces operators
O_n = V^dagger (I (x) P_n) V on the system, where V = U (I (x) |Phi0>).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.stats import unitary_group

from .errors import GridMismatch, PreconditionError
from .fields import Superposition, WaveField

HERMITIAN_TOL = 1e-10
POSITIVITY_TOL = 1e-10
COMPLETENESS_TOL = 1e-10


@dataclass
class OperatorFamily:
    members: list
    labels: Optional[list] = None

    def __post_init__(self):
        self.members = [np.asarray(m, dtype=complex) for m in self.members]
        if not self.members:
            raise PreconditionError("operator family is empty")
        d = self.members[0].shape
        if len(d) != 2 or d[0] != d[1] or any(m.shape != d for m in self.members):
            raise PreconditionError("members must be square matrices of one size")
        if self.labels is None:
            self.labels = [str(i) for i in range(len(self.members))]
        elif len(self.labels) != len(self.members):
            raise PreconditionError("one label per member")

    @property
    def dim(self) -> int:
        return self.members[0].shape[0]

    def probabilities(self, psi) -> np.ndarray:
        psi = np.asarray(psi, dtype=complex)
        return np.array([np.real(psi.conj() @ m @ psi) for m in self.members])

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "labels": list(self.labels),
            "members": [[[float(z.real), float(z.imag)] for z in m.ravel()] for m in self.members],
        }

    @classmethod
    def from_json(cls, data) -> "OperatorFamily":
        if isinstance(data, str):
            data = json.loads(data)
        d = int(data["dim"])
        members = []
        for flat in data["members"]:
            arr = np.asarray(flat, dtype=float)
            if arr.shape != (d * d, 2):
                raise PreconditionError(f"member must hold {d * d} [re, im] pairs")
            members.append((arr[:, 0] + 1j * arr[:, 1]).reshape(d, d))
        return cls(members, data.get("labels"))


@dataclass
class PointerModel:
    dS: int
    dM: int
    U: np.ndarray
    phi0: np.ndarray
    partition: Sequence[Sequence[int]]

    def __post_init__(self):
        self.U = np.asarray(self.U, dtype=complex)
        self.phi0 = np.asarray(self.phi0, dtype=complex)
        n = self.dS * self.dM
        if self.U.shape != (n, n):
            raise PreconditionError(f"U must be {n}x{n}")
        if np.max(np.abs(self.U.conj().T @ self.U - np.eye(n))) > 1e-10:
            raise PreconditionError("U is not unitary within 1e-10")
        if self.phi0.shape != (self.dM,):
            raise PreconditionError(f"pointer state must have {self.dM} components")
        if abs(np.linalg.norm(self.phi0) - 1.0) > 1e-12:
            raise PreconditionError("pointer state must be normalised")
        cells = [sorted(int(j) for j in cell) for cell in self.partition]
        flat = [j for cell in cells for j in cell]
        if any(len(c) == 0 for c in cells) or sorted(flat) != list(range(self.dM)):
            raise PreconditionError("partition must be an exact cover of the pointer indices by nonempty cells")
        self.partition = cells

    def isometry(self) -> np.ndarray:
        """V = U (I (x) |Phi0>), shape (dS*dM, dS)."""
        embed = np.kron(np.eye(self.dS), self.phi0[:, None])
        return self.U @ embed

    def cell_projector(self, cell) -> np.ndarray:
        mask = np.zeros(self.dM)
        mask[list(cell)] = 1.0
        return np.kron(np.ones(self.dS), mask)

    def direct_probabilities(self, psi) -> np.ndarray:
        """Pointer-cell probabilities by evolving psi (x) Phi0 with U."""
        psi = np.asarray(psi, dtype=complex)
        joint = (self.U @ np.kron(psi, self.phi0)).reshape(self.dS, self.dM)
        weights = np.sum(np.abs(joint) ** 2, axis=0)
        return np.array([weights[cell].sum() for cell in self.partition])


def construct_pointer_povm(model: PointerModel) -> OperatorFamily:
    V = model.isometry()
    members = []
    for cell in model.partition:
        mask = model.cell_projector(cell)
        members.append(V.conj().T @ (mask[:, None] * V))
    return OperatorFamily(members, [f"cell{i}" for i in range(len(members))])


def random_pointer_model(dS: int, dM: int, seed: int, n_cells: Optional[int] = None) -> PointerModel:
    """Haar-random joint unitary, random pointer state and random partition."""
    rng = np.random.default_rng(seed)
    n = dS * dM
    U = unitary_group.rvs(n, random_state=rng) if n > 1 else np.array([[np.exp(2j * np.pi * rng.random())]])
    phi = rng.normal(size=dM) + 1j * rng.normal(size=dM)
    phi /= np.linalg.norm(phi)
    if n_cells is None:
        n_cells = int(rng.integers(1, dM + 1))
    perm = rng.permutation(dM)
    cuts = np.sort(rng.choice(np.arange(1, dM), size=n_cells - 1, replace=False)) if n_cells > 1 else []
    partition = [list(map(int, c)) for c in np.split(perm, cuts)]
    return PointerModel(dS, dM, U, phi, partition)


@dataclass
class PovmReport:
    hermiticity: float
    min_eigenvalue: float
    completeness: float

    @property
    def passed(self) -> bool:
        return self.hermiticity < HERMITIAN_TOL and self.min_eigenvalue > -POSITIVITY_TOL and self.completeness < COMPLETENESS_TOL

    @property
    def failures(self) -> list[str]:
        out = []
        if not self.hermiticity < HERMITIAN_TOL:
            out.append("hermiticity")
        if not self.min_eigenvalue > -POSITIVITY_TOL:
            out.append("positivity")
        if not self.completeness < COMPLETENESS_TOL:
            out.append("completeness")
        return out

    def to_json(self) -> dict:
        return {
            "hermiticity": self.hermiticity,
            "min_eigenvalue": self.min_eigenvalue,
            "completeness": self.completeness,
            "passed": self.passed,
            "failures": self.failures,
        }


def check_povm(family: OperatorFamily) -> PovmReport:
    herm = max(float(np.max(np.abs(m - m.conj().T))) for m in family.members)
    mins = [float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]) for m in family.members]
    total = sum(family.members)
    comp = float(np.max(np.abs(total - np.eye(family.dim))))
    return PovmReport(herm, min(mins), comp)


# current-based "POVM" counterexample ----------------------------------------


@dataclass
class CurrentReport:
    j1: float
    j2: float
    j_plus: float
    j_minus: float
    signed_defect: float
    absolute_defect: float

    @property
    def backflow(self) -> bool:
        return self.j_minus < 0 or self.j_plus < 0

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in ("j1", "j2", "j_plus", "j_minus", "signed_defect", "absolute_defect")} | {
            "backflow": self.backflow
        }


def current_povm_counterexample(field1: WaveField, field2: WaveField, x, t: float, normal=(0.0, 0.0, 1.0)) -> CurrentReport:
    """Compare signed and absolute normal currents of psi1, psi2 and (psi1 +- psi2)/sqrt 2.

    The signed currents add up exactly (the cross terms cancel); their
    absolute values do not once one superposition flows backwards.
    """
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    x = np.asarray(x, dtype=float)
    j1 = float(field1.current(x, t) @ n)
    j2 = float(field2.current(x, t) @ n)
    if not (j1 > 0 and j2 > 0):
        raise PreconditionError(f"both components need positive normal current, got {j1:.3g} and {j2:.3g}")
    r = 1.0 / np.sqrt(2.0)
    jp = float(Superposition([(r, field1), (r, field2)]).current(x, t) @ n)
    jm = float(Superposition([(r, field1), (-r, field2)]).current(x, t) @ n)
    signed = abs(j1 + j2 - jp - jm)
    absolute = abs(abs(j1) + abs(j2) - abs(jp) - abs(jm))
    return CurrentReport(j1, j2, jp, jm, signed, absolute)


# spin-basis sum identity --------------------------------------------------------


@dataclass
class GTZReport:
    max_deviation: float
    tau_at_max: Optional[float]
    lhs: np.ndarray
    rhs: np.ndarray

    def to_json(self) -> dict:
        return {"max_deviation": self.max_deviation, "tau_at_max": self.tau_at_max}


GTZ_LABELS = ("+z", "-z", "+x", "-x")


def gtz_sum_test(dist: Mapping[str, Sequence[float]], tau=None, basis_a=("+z", "-z"), basis_b=("+x", "-x")) -> GTZReport:
    """max over tau of |P_a1 + P_a2 - P_b1 - P_b2|."""
    labels = (*basis_a, *basis_b)
    missing = [k for k in labels if k not in dist]
    if missing:
        raise PreconditionError(f"missing spin labels {missing}")
    arrays = [np.asarray(dist[k], dtype=float) for k in labels]
    shape = arrays[0].shape
    if any(a.shape != shape for a in arrays) or (tau is not None and np.shape(tau) != shape):
        raise GridMismatch("all distributions must share one tau grid")
    lhs = arrays[0] + arrays[1]
    rhs = arrays[2] + arrays[3]
    dev = np.abs(lhs - rhs)
    i = int(np.argmax(dev)) if dev.size else 0
    tau_max = None if tau is None or dev.size == 0 else float(np.asarray(tau)[i])
    return GTZReport(float(dev.max()) if dev.size else 0.0, tau_max, lhs, rhs)
