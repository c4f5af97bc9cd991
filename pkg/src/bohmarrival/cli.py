"""Command-line front end: ``bohmarrival run`` and ``bohmarrival validate``.

Exit codes: 0 success, 2 scenario/schema error, 3 numeric failure
(quadrature, integration, sampling), 4 precondition violation.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .arrivals import (
    default_t_max,
    expected_bin_mass,
    full_signal_distribution,
    ideal_flux_distribution,
    mc_first_arrival,
    which_path,
)
from .detectors.huygens import scattered_field
from .detectors.pml import (
    pml_detection_probability,
    potential_table,
    scattering_reflection,
    verify_pml_solution,
)
from .detectors.slab import slab_absorption_budget, slab_scatter, slab_trajectory_slopes
from .detectors.spacetime import spacetime_absorption
from .errors import BohmError, NodalPoint, PreconditionError, QuadratureError, SamplingBoxError, StepFailure
from .fields import BackflowPair, SpinVector, WaveguideSpinField
from .guidance import STATUS_NAMES, Disk, PlaneZ, integrate_ensemble, sample_initial
from .io import sha256_file, write_columns, write_csv, write_json
from .povm import (
    OperatorFamily,
    PointerModel,
    check_povm,
    construct_pointer_povm,
    gtz_sum_test,
    random_pointer_model,
)
from .scenario import (
    SCHEMA_VERSION,
    ScenarioError,
    as_points,
    build_detector,
    build_field,
    build_surface,
    read_scenario,
    scenario_hash,
    physics_violations,
    validate_scenario,
)

EXIT_OK, EXIT_SCHEMA, EXIT_NUMERIC, EXIT_PRECONDITION = 0, 2, 3, 4


def _grid(spec, default):
    lo, hi, n = spec if spec is not None else default
    return np.linspace(float(lo), float(hi), int(n))


# runners ----------------------------------------------------------------------
# each returns (outputs, summary, tolerances)


def run_backflow_map(data, out, threads):
    field = build_field(data["field"])
    if not isinstance(field, BackflowPair):
        raise PreconditionError("field.type: backflow-map needs a backflow_pair field")
    p = data.get("params", {})
    xs = _grid(p.get("x_grid"), (-1.0, 1.0, 81))
    zs = _grid(p.get("z_grid"), (-1.0, 1.0, 81))
    t = float(p.get("t", 0.0))
    X, Z = np.meshgrid(xs, zs, indexing="ij")
    pts = np.stack([X, np.zeros_like(X), Z], axis=-1)
    psi = field.psi(pts, t)
    j = field.current(pts, t)
    grid_path = write_columns(out / "backflow_map.csv", {"x": X, "z": Z, "re_psi": psi.real, "j_x": j[..., 0], "j_z": j[..., 2]})
    starts = as_points(p.get("starts", [[x0, 0.0, 0.0] for x0 in np.linspace(-0.4, 0.4, 5)]))
    tol = float(p.get("tol", 1e-8))
    t1 = t + float(p.get("duration", p.get("t1", 0.5)))
    ts = np.linspace(t, t1, int(p.get("n_samples", 101)))
    res = integrate_ensemble(field, starts, t, t1, tol, t_eval=ts, threads=threads)
    traj_path = _write_trajectories(out / "trajectories.csv", ts, res.samples)
    j0 = field.current(np.zeros(3), t)
    keff = field.k_eff(np.zeros(3), t)
    summary = {
        "J_z0": float(j0[2]),
        "k_eff": keff.tolist(),
        "k_eff_ratio": float(np.linalg.norm(keff) / np.linalg.norm(field.k1)),
        "k2z": float(field.k2[2]),
        "Q0": float(field.quantum_potential(np.zeros(3), t)),
        "alpha": [field.alpha.real, field.alpha.imag],
    }
    summ = write_json(out / "backflow_summary.json", summary)
    return [grid_path, traj_path, summ], summary, {"trajectory_tol": tol}


def _write_trajectories(path, ts, samples):
    def rows():
        for i in range(samples.shape[0]):
            for k, t in enumerate(ts):
                x = samples[i, k]
                yield (i, t, x[0], x[1], x[2])

    return write_csv(path, ["id", "t", "x", "y", "z"], rows())


def _write_events(path, events):
    rows = ((int(i), int(o), t, x[0], x[1], x[2], int(s)) for i, o, t, x, s in zip(events.ids, events.order, events.t, events.x, events.sign))
    return write_csv(path, ["id", "order_index", "t", "x", "y", "z", "sign"], rows)


def run_trajectories(data, out, threads):
    field = build_field(data["field"])
    p = data.get("params", {})
    t0 = float(p.get("t0", 0.0))
    t1 = float(p.get("t1", 1.0))
    tol = float(p.get("tol", 1e-8))
    seed = int(p.get("seed", 0))
    if "starts" in p:
        x0 = as_points(p["starts"])
    else:
        x0 = sample_initial(field, t0, int(p.get("n", 100)), seed)
    surface = build_surface(data["surface"]) if "surface" in data else None
    ts = np.linspace(t0, t1, int(p.get("n_samples", 101)))
    res = integrate_ensemble(field, x0, t0, t1, tol, t_eval=ts, surface=surface, threads=threads)
    outputs = [_write_trajectories(out / "trajectories.csv", ts, res.samples)]
    if surface is not None:
        outputs.append(_write_events(out / "events.csv", res.events))
    status = [STATUS_NAMES[s] for s in res.status]
    summary = {
        "n": len(x0),
        "seed": seed,
        "lost": int(res.lost.sum()),
        "steps_mean": float(np.mean(res.steps)),
        "rejected_total": int(np.sum(res.rejected)),
        "status_counts": {k: status.count(k) for k in sorted(set(status))},
        "events": int(len(res.events.t)),
    }
    outputs.append(write_json(out / "trajectories_summary.json", summary))
    return outputs, summary, {"trajectory_tol": tol, "bisection_tol": 1e-10}


def run_arrival_hist(data, out, threads):
    field = build_field(data["field"])
    surface = build_surface(data["surface"])
    p = data.get("params", {})
    seed = int(p.get("seed", 0))
    tol = float(p.get("tol", 1e-8))
    t0 = float(p.get("t0", 0.0))
    t_max = float(p["t_max"]) if "t_max" in p else default_t_max(field, surface, t0)
    h = mc_first_arrival(
        field,
        surface,
        int(p.get("n", 10_000)),
        seed,
        t_max,
        tol,
        t0=t0,
        bins=int(p.get("bins", 200)),
        k_max=int(p.get("k_max", 3)),
        threads=threads,
    )
    outputs = []
    hist_path = out / "arrival_hist.csv"
    h.to_csv(hist_path)
    outputs.append(hist_path)
    summary = h.summary()
    if p.get("ideal_flux", False):
        flux = ideal_flux_distribution(field, surface, h.centers, tol=1e-6)
        mass = expected_bin_mass(field, surface, h.bin_edges, tol=1e-6) / h.widths
        outputs.append(write_columns(out / "ideal_flux.csv", {"tau": h.centers, "flux": flux, "bin_average": mass}))
    summary["seed"] = seed
    outputs.append(write_json(out / "arrival_meta.json", {**summary, **h.meta}))
    return outputs, summary, {"trajectory_tol": tol, "flux_quadrature_tol": 1e-6}


def run_slab(data, out, threads):
    slab = build_detector(data["detector"])
    p = data.get("params", {})
    k = float(p.get("k", 2 * np.pi))
    thetas = p.get("theta", 0.3)
    thetas = thetas if isinstance(thetas, list) else [thetas]
    mass = float(data["detector"].get("mass", 1.0))
    records = []
    for th in thetas:
        res = slab_scatter(k, float(th), slab)
        budget = slab_absorption_budget(k, float(th), slab, mass)
        records.append({"k": k, "theta": float(th), **res.to_json(), **budget})
    outputs = [write_json(out / "slab.json", {"records": records})]
    th = float(thetas[0])
    if th > 0:
        z = np.linspace(-slab.d, 2 * slab.d, int(p.get("n_samples", 301)))
        outputs.append(write_columns(out / "slab_slopes.csv", {"z": z, "dzdx": slab_trajectory_slopes(k, th, slab, z)}))
    return outputs, {"records": len(records)}, {"budget_quadrature_tol": 1e-10}


def run_pml(data, out, threads):
    prof = build_detector(data["detector"])
    p = data.get("params", {})
    lo, hi = prof.support(4.0)
    z = _grid(p.get("z_grid"), (lo - 1.0, hi + 1.0, 601))
    table = potential_table(prof, z)
    outputs = [write_columns(out / "pml_potential.csv", table)]
    area = float(data["detector"].get("area", 1.0))
    summary = {"R_design": abs(scattering_reflection(prof, prof.kz, prof.direction))}
    if prof.direction == "forward":
        summary.update(
            {
                "residual": verify_pml_solution(prof),
                "detection_step": pml_detection_probability(prof, area=area, smooth=False),
                "detection_smooth": pml_detection_probability(prof, area=area),
                "R_backward_wave": abs(scattering_reflection(prof, prof.kz, "backward")),
            }
        )
    outputs.append(write_json(out / "pml.json", summary))
    return outputs, summary, {"F_G_quadrature_tol": 1e-10, "ode_rtol": 1e-11}


def run_spacetime(data, out, threads):
    det = build_detector(data["detector"])
    field = build_field(data["field"])
    tol = float(data.get("params", {}).get("tol", 1e-8))
    res = spacetime_absorption(det, field, tol=tol, full=True)
    summary = {"value": res.value, "gain": res.gain, "order": res.order, "vector": det.is_vector}
    return [write_json(out / "spacetime.json", summary)], summary, {"quadrature_tol": tol}


def run_povm_check(data, out, threads):
    p = data.get("params", {})
    seed = int(p.get("seed", 0))
    reports = []
    families = []
    if "family" in p:
        families.append(("family", OperatorFamily.from_json(p["family"]), None))
    if "model" in p:
        m = p["model"]
        U = np.asarray(m["U_re"]) + 1j * np.asarray(m.get("U_im", np.zeros_like(m["U_re"])))
        phi = np.asarray(m["phi0_re"]) + 1j * np.asarray(m.get("phi0_im", np.zeros_like(m["phi0_re"])))
        model = PointerModel(int(m["dS"]), int(m["dM"]), U, phi, m["partition"])
        families.append(("model", construct_pointer_povm(model), model))
    if "random" in p:
        r = p["random"]
        for i in range(int(r.get("count", 1))):
            model = random_pointer_model(int(r["dS"]), int(r["dM"]), seed + i)
            families.append((f"random{i}", construct_pointer_povm(model), model))
    if not families:
        raise PreconditionError("params: povm-check needs one of family, model or random")
    rng = np.random.default_rng(seed)
    for name, fam, model in families:
        rep = check_povm(fam).to_json()
        rep["name"] = name
        if model is not None:
            worst = 0.0
            for _ in range(100):
                psi = rng.normal(size=model.dS) + 1j * rng.normal(size=model.dS)
                psi /= np.linalg.norm(psi)
                worst = max(worst, float(np.max(np.abs(fam.probabilities(psi) - model.direct_probabilities(psi)))))
            rep["max_probability_mismatch"] = worst
        reports.append(rep)
    outputs = [write_json(out / "povm_report.json", {"reports": reports})]
    outputs.append(write_json(out / "povm_families.json", {"families": [f.to_json() for _, f, _ in families]}))
    summary = {"checked": len(reports), "passed": sum(r["passed"] for r in reports)}
    return outputs, summary, {"hermiticity": 1e-10, "positivity": 1e-10, "completeness": 1e-10}


def run_gtz(data, out, threads):
    p = data.get("params", {})
    mode = p.get("mode", "full_signal")
    L = float(p.get("L", 2.0))
    waist = float(p.get("waist", 1.0))
    envelope = p.get("envelope", "odd")
    dist = {}
    if mode == "full_signal":
        tau = np.asarray(p.get("times", np.linspace(0.0, 10.0, 101)), dtype=float)
        disk = Disk(L, float(p.get("radius", 8.0 * waist)))
        residual = 0.0
        for label in ("+z", "-z", "+x", "-x"):
            f = WaveguideSpinField(SpinVector.axis(label), waist, envelope)
            sig = full_signal_distribution(f, disk, float(p.get("eta", 1.0)), tau)
            dist[label] = sig.value
            scale = max(float(np.max(np.abs(sig.convective))), 1e-300)
            residual = max(residual, float(np.max(np.abs(sig.spin_residual))) / scale)
        tols = {"full_signal_quadrature_tol": 1e-10}
    else:
        n = int(p.get("n", 5000))
        seed = int(p.get("seed", 0))
        t_max = float(p.get("t_max", 12.0))
        bins = int(p.get("bins", 24))
        tol = float(p.get("tol", 1e-8))
        residual = None
        for i, label in enumerate(("+z", "-z", "+x", "-x")):
            f = WaveguideSpinField(SpinVector.axis(label), waist, envelope)
            h = mc_first_arrival(f, PlaneZ(L), n, seed + i, t_max, tol, bins=bins, threads=threads)
            dist[label] = h.density("first")
            tau = h.centers
        tols = {"trajectory_tol": tol}
    rep = gtz_sum_test(dist, tau)
    extra = {}
    if mode != "full_signal":
        width = float(tau[1] - tau[0]) if len(tau) > 1 else 1.0
        x_hits = np.nonzero(dist["+x"] + dist["-x"] > 0)[0]
        cut = float(tau[x_hits[-1]] + width / 2) if x_hits.size else float(tau[0] - width / 2)
        extra = {"x_cutoff": cut, "z_mass_beyond_x_cutoff": float(np.sum(rep.lhs[tau > cut]) * width)}
    cols = {"tau": tau, **{k: dist[k] for k in ("+z", "-z", "+x", "-x")}, "lhs": rep.lhs, "rhs": rep.rhs}
    outputs = [write_columns(out / "gtz.csv", cols)]
    summary = {"mode": mode, **rep.to_json(), **extra, "spin_residual_relative": residual}
    outputs.append(write_json(out / "gtz.json", summary))
    return outputs, summary, tols


def run_which_path(data, out, threads):
    field = build_field(data["field"])
    p = data.get("params", {})
    res = which_path(field, float(p.get("t", 1.0)), p.get("method", "quadrature"), int(p.get("n", 10_000)), int(p.get("seed", 0)))
    summary = {"P_plus": res.P_plus, "P_minus": res.P_minus, "retrodictive": bool(res.retrodictive)}
    return [write_json(out / "which_path.json", summary)], summary, {"quadrature_tol": 1e-12}


def run_scattered_field(data, out, threads):
    field = build_field(data["field"])
    ap = build_detector(data["detector"])
    p = data.get("params", {})
    pts = as_points(p.get("points", [[0.0, 0.0, 2.0]]))
    backflow = bool(p.get("backflow", False))
    tol = float(p.get("tol", 1e-8))
    vals = np.array([scattered_field(ap, field, x, backflow, tol) for x in pts])
    inc = field.psi(pts, 0.0)
    total = inc + vals
    cols = {
        "x": pts[:, 0],
        "y": pts[:, 1],
        "z": pts[:, 2],
        "re_scat": vals.real,
        "im_scat": vals.imag,
        "re_total": total.real,
        "im_total": total.imag,
        "ratio": np.abs(total) / np.abs(inc),
    }
    summary = {"points": len(pts), "max_ratio": float(np.max(cols["ratio"]))}
    return [write_columns(out / "scattered_field.csv", cols)], summary, {"aperture_quadrature_tol": tol}


RUNNERS = {
    "backflow-map": run_backflow_map,
    "trajectories": run_trajectories,
    "arrival-hist": run_arrival_hist,
    "slab": run_slab,
    "pml": run_pml,
    "spacetime": run_spacetime,
    "povm-check": run_povm_check,
    "gtz-test": run_gtz,
    "which-path": run_which_path,
    "scattered-field": run_scattered_field,
}


def run_scenario(path, out_dir, seed_override=None, threads=None) -> int:
    start = time.time()
    try:
        data, raw = read_scenario(path)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    if seed_override is not None:
        data.setdefault("params", {})["seed"] = int(seed_override)
    problems = physics_violations(data)
    if problems:
        print("precondition violated: " + "; ".join(problems), file=sys.stderr)
        return EXIT_PRECONDITION
    threads = threads or os.cpu_count() or 1
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        outputs, summary, tols = RUNNERS[data["command"]](data, out, threads)
    except (QuadratureError, StepFailure, SamplingBoxError, NodalPoint) as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except PreconditionError as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except BohmError as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "command": data["command"],
        "scenario": str(path),
        "scenario_sha256": scenario_hash(raw),
        "seed": data.get("params", {}).get("seed"),
        "seed_override": seed_override,
        "threads": threads,
        "tolerances": tols,
        "summary": summary,
        "outputs": [{"path": Path(o).name, "sha256": sha256_file(o)} for o in outputs],
        "started_utc": datetime.fromtimestamp(start, timezone.utc).isoformat(),
        "wall_time_s": time.time() - start,
    }
    write_json(out / "run_manifest.json", manifest)
    print(json.dumps({"command": data["command"], "out_dir": str(out), "summary": summary}, default=str))
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="bohmarrival", description="Arrival-time experiments from JSON scenarios.")
    sub = parser.add_subparsers(dest="cmd", required=True)
    run = sub.add_parser("run", help="run a scenario and write CSV/JSON outputs")
    run.add_argument("--scenario", required=True)
    run.add_argument("--out-dir", required=True)
    run.add_argument("--seed-override", type=int)
    run.add_argument("--threads", type=int)
    run.add_argument("--validate", action="store_true", help="validate first and stop on violations")
    val = sub.add_parser("validate", help="check a scenario without running it")
    val.add_argument("--scenario", required=True)
    args = parser.parse_args(argv)

    if args.cmd == "validate" or getattr(args, "validate", False):
        report = validate_scenario(args.scenario)
        if args.cmd == "validate" or report["violations"]:
            print(json.dumps(report, indent=2))
        if report["violations"]:
            return EXIT_SCHEMA if not report.get("schema_ok", False) else EXIT_PRECONDITION
        if args.cmd == "validate":
            return EXIT_OK
    return run_scenario(args.scenario, args.out_dir, args.seed_override, args.threads)


if __name__ == "__main__":
    sys.exit(main())
