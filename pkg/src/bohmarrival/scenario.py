"""Scenario files: schema validation and construction of fields, detectors, surfaces."""
from __future__ import annotations

import hashlib
import json
import math
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .detectors.huygens import Aperture
from .detectors.pml import AbsorbedPlaneWave, PMLProfile
from .detectors.slab import SlabDetector
from .detectors.spacetime import SpacetimeDetector
from .errors import BohmError, PreconditionError
from .fields import (
    BackflowPair,
    DoubleSlit,
    GaussianPacket,
    PlaneWave,
    Superposition,
    WaveguideSpinField,
    backflow_wavevectors,
)
from .guidance import Disk, PlaneX, PlaneZ

SCHEMA_VERSION = "1.0"
STEPS_PER_TRAJECTORY = 200
COST_WARNING = 1e9


class ScenarioError(BohmError):
    """Scenario file missing, unparsable or not matching the schema."""


def load_schema() -> dict:
    return json.loads(resources.files("bohmarrival").joinpath("scenario_schema.json").read_text())


def _path(err) -> str:
    parts = [str(p) for p in err.absolute_path]
    return ".".join(parts) if parts else "<root>"


def schema_errors(data) -> list[str]:
    validator = jsonschema.Draft202012Validator(load_schema())
    out = []
    for err in sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path))):
        best = jsonschema.exceptions.best_match([err])
        out.append(f"{_path(best)}: {best.message}")
    return out


def read_scenario(path) -> tuple[dict, bytes]:
    """Parse and schema-check a scenario; returns (data, raw bytes)."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    if not raw.strip():
        raise ScenarioError(f"{path}: scenario file is empty (expected a JSON object with schema_version and command)")
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    errs = schema_errors(data)
    if errs:
        raise ScenarioError("schema violations:\n  " + "\n  ".join(errs))
    return data, raw


def scenario_hash(raw: bytes) -> str:
    return hashlib.sha256(raw).hexdigest()


def _complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


def _named(where: str, fn, *args, **kw):
    """Call a constructor, prefixing precondition messages with the scenario key."""
    try:
        return fn(*args, **kw)
    except PreconditionError as exc:
        raise PreconditionError(f"{where}: {exc}") from exc


def build_field(spec: dict, where: str = "field"):
    kind = spec["type"]
    mass = float(spec.get("mass", 1.0))
    if kind == "plane_wave":
        return PlaneWave(spec["k"], _complex(spec.get("amplitude", 1.0)), mass)
    if kind == "gaussian":
        return _named(
            where,
            GaussianPacket,
            spec.get("center", (0.0, 0.0, 0.0)),
            float(spec.get("sigma", 1.0)),
            spec.get("momentum", (0.0, 0.0, 0.0)),
            mass,
        )
    if kind == "double_slit":
        packet = build_field(spec["packet"], where + ".packet")
        amps = [_complex(a) for a in spec.get("amplitudes", (1.0, 1.0))]
        return _named(where, DoubleSlit, float(spec["separation"]), packet, float(spec.get("chi_rel", 0.0)), amps)
    if kind == "backflow_pair":
        if "k1" in spec:
            k1, k2 = spec["k1"], spec.get("k2")
            if k2 is None:
                raise PreconditionError(f"{where}.k2: required with k1")
        else:
            angles = spec.get("angles", (math.pi / 3, 9 * math.pi / 20))
            k1, k2 = backflow_wavevectors(float(spec.get("k", 2 * math.pi)), *angles)
        alpha = spec.get("alpha", "min")
        alpha = None if alpha == "min" else _complex(alpha)
        return _named(where, BackflowPair, k1, k2, alpha, mass)
    if kind == "waveguide_spin":
        return _named(
            where + ".spin",
            WaveguideSpinField,
            spec["spin"],
            float(spec.get("waist", 1.0)),
            spec.get("envelope", "odd"),
            mass,
        )
    if kind == "superposition":
        terms = [(_complex(t["coefficient"]), build_field(t["field"], f"{where}.terms.{i}.field")) for i, t in enumerate(spec["terms"])]
        return _named(where, Superposition, terms)
    if kind == "absorbed_plane_wave":
        profile = build_pml(spec["profile"], where + ".profile")
        return _named(where, AbsorbedPlaneWave, profile, spec.get("k_parallel", (0.0, 0.0)))
    raise PreconditionError(f"{where}.type: unknown field type {kind!r}")


def build_pml(spec: dict, where: str = "detector") -> PMLProfile:
    return _named(
        where,
        PMLProfile,
        float(spec["chi0"]),
        float(spec["d"]),
        float(spec["a"]),
        spec.get("direction", "forward"),
        tuple(spec.get("design_k", (0.0, 0.0, 2 * math.pi))),
        float(spec.get("mass", 1.0)),
    )


def build_detector(spec: dict, where: str = "detector"):
    kind = spec["type"]
    if kind == "slab":
        return _named(where, SlabDetector, float(spec["N"]), _complex(spec["f0"]), float(spec["d"]), float(spec.get("area", 1.0)))
    if kind == "pml":
        return build_pml(spec, where)
    if kind == "aperture":
        return _named(where, Aperture, tuple(spec["center"]), float(spec["size"]), spec.get("shape", "square"))
    if kind == "spacetime":
        kw = {}
        pot = spec.get("potential")
        if pot is not None:
            if pot["kind"] == "constant":
                kw["potential"] = _complex(pot.get("value", 0.0))
            else:
                prof = build_pml(pot["profile"], where + ".potential.profile")
                kw["potential"] = lambda x, t, p=prof: p.potential(x[..., 2])
                kw["z_breaks"] = (0.0, prof.d)
        if "im_A" in spec:
            kw["im_A"] = tuple(spec["im_A"])
            kw["charge"] = float(spec.get("charge", 1.0))
        if "z_breaks" in spec:
            kw["z_breaks"] = tuple(spec["z_breaks"])
        det = _named(where, SpacetimeDetector, tuple(spec["x_range"]), tuple(spec["y_range"]), tuple(spec["z_range"]), tuple(spec["t_range"]), **kw)
        if pot is not None and pot["kind"] == "constant" and _complex(pot.get("value", 0.0)).imag > 0:
            raise PreconditionError(f"{where}.potential.value: Im V_eff must be <= 0")
        return det
    raise PreconditionError(f"{where}.type: unknown detector type {kind!r}")


def build_surface(spec: dict, where: str = "surface"):
    kind = spec["type"]
    hw = float(spec.get("half_width", math.inf))
    if kind == "plane_z":
        return PlaneZ(float(spec["z"]), hw)
    if kind == "plane_x":
        return PlaneX(float(spec["x"]), hw, float(spec.get("z_center", 0.0)))
    if kind == "disk":
        return Disk(float(spec["z"]), float(spec["radius"]))
    raise PreconditionError(f"{where}.type: unknown surface type {kind!r}")


def cost_estimate(data: dict) -> int:
    """Upper estimate of field-evaluation steps for trajectory commands."""
    params = data.get("params", {})
    cmd = data["command"]
    if cmd in ("trajectories", "arrival-hist"):
        n = params.get("n", len(params.get("starts", [])) or 1)
        return int(n) * STEPS_PER_TRAJECTORY
    if cmd == "gtz-test" and params.get("mode") == "first_arrival":
        return 4 * int(params.get("n", 1)) * STEPS_PER_TRAJECTORY
    if cmd == "which-path" and params.get("method") == "samples":
        return int(params.get("n", 10_000)) * STEPS_PER_TRAJECTORY
    return 0


def physics_violations(data: dict) -> list[str]:
    """Construct every object the scenario names and collect precondition failures."""
    out = []
    for key, builder in (("field", build_field), ("detector", build_detector), ("surface", build_surface)):
        if key in data:
            try:
                builder(data[key], key)
            except (PreconditionError, ValueError) as exc:
                out.append(str(exc))
    params = data.get("params", {})
    for key in ("t1", "t_max"):
        if key in params and params[key] <= params.get("t0", 0.0):
            out.append(f"params.{key}: must exceed params.t0")
    return out


def validate_scenario(path) -> dict:
    """Schema and physics checks without running anything."""
    report = {"violations": [], "warnings": [], "cost_estimate": 0}
    try:
        data, _ = read_scenario(path)
    except ScenarioError as exc:
        report["violations"].append(str(exc))
        report["schema_ok"] = False
        return report
    report["schema_ok"] = True
    report["violations"].extend(physics_violations(data))
    cost = cost_estimate(data)
    report["cost_estimate"] = cost
    if cost > COST_WARNING:
        report["warnings"].append(
            f"params.n: about {cost:.2e} integrator steps ({STEPS_PER_TRAJECTORY} per trajectory); expect a very long run"
        )
    return report


def as_points(seq) -> np.ndarray:
    return np.atleast_2d(np.asarray(seq, dtype=float))
