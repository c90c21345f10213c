"""Command-line entry point: validate | simulate | probe | harmonic | fit."""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time

import numpy as np
import scipy
from threadpoolctl import threadpool_limits

from .. import __version__
from .. import diagnostics as dg
from ..errors import ColdPlasmaError, ValidationError
from ..fdtd_core import cavity_mode, random_state, read_snapshot, run, smooth_slab_state, write_snapshot
from ..fdtd_core.boundary import BoundaryOperator
from ..fdtd_core.state import StateVector
from ..fdtd_core.stepper import apply_generator
from .. import harmonic as hm
from .. import spectral_probe as spp
from .scenario import Scenario, config_hash, parse_scenario, serialize


def _dump(obj, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


def initial_state(s: Scenario, grid, medium, bc) -> StateVector:
    ini = s.doc["initial"]
    ns = medium.n_species
    kind = ini["kind"]
    amp = float(ini.get("amplitude", 1.0))
    if kind == "zero":
        U = StateVector.zeros(grid, ns, track_rho=s.doc["track_rho"])
    elif kind == "cavity":
        U = cavity_mode(grid, amp, ns, int(ini.get("mx", 1)), int(ini.get("my", 1)))
    elif kind == "random":
        U = random_state(grid, np.random.default_rng(s.seed), ns, bc, track_rho=s.doc["track_rho"],
                         eps0=medium.eps0)
        U = U.scaled(amp)
    elif kind == "smooth_slab":
        U = smooth_slab_state(grid, ns, tuple(ini.get("modes", (1, 2, 3))), amp,
                              pec=not bc.absorbing_faces(grid))
    elif kind == "snapshot":
        U, g2 = read_snapshot(ini["path"])
        if g2.to_dict() != grid.to_dict():
            raise ValidationError("snapshot grid differs from the scenario grid", "/initial/path")
    else:
        raise ValidationError(f"initial kind {kind!r} is not available here", "/initial/kind")
    if s.doc["track_rho"] and U.rho is None:
        rho0 = medium.eps0 * grid.div_e(U.E)
        U.rho = (rho0,) + tuple(np.zeros(grid.n_nodes) for _ in range(ns - 1))
    return U


def _versions() -> dict:
    return {"coldplasma": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _simulate(s: Scenario, out: str) -> list[str]:
    grid = s.grid()
    medium = s.medium(grid)
    bc = s.boundary(grid)
    dt = s.dt(grid)
    n = s.n_steps(grid)
    U0 = initial_state(s, grid, medium, bc)
    snaps = int(s.doc["outputs"]["snapshots"])
    trace = run(medium, bc, U0, dt, n, cadence=int(s.doc["outputs"]["cadence"]),
                snapshot_dir=os.path.join(out, "snapshots") if snaps else None, snapshot_every=snaps)
    files = [os.path.join(out, "diagnostics.csv")]
    dg.write_trace_csv(trace, files[0])
    files.append(write_snapshot(trace.final, grid, os.path.join(out, "snapshots"), n, stem="final"))
    files += trace.snapshots
    bal = dg.dissipation_balance(trace)
    summary = {"steps": n, "dt": dt, "energy_initial": float(trace.energy[0]),
               "energy_final": float(trace.energy[-1]), "balance_max_abs": bal.max_abs,
               "balance_l2": bal.l2, "max_scheme_energy_increase": bal.max_scheme_increase,
               "divB_max": float(np.max(trace.columns["divB_max"])),
               "gauss_max": float(np.nanmax(trace.columns["gauss_max"])) if s.doc["track_rho"] else None}
    if s.mode == "decay-study":
        model = s.doc["fit"]["model"] or "poly"
        fit = dg.fit_decay(trace.t, trace.norm_x(), model,
                           tuple(s.doc["fit"]["window"]) if s.doc["fit"]["window"] else None)
        bops = BoundaryOperator(grid, bc, medium.c)
        summary["fit"] = {"model": fit.model, "rate": fit.rate, "prefactor": fit.prefactor,
                          "window": list(fit.window), "residual": fit.residual, "n_points": fit.n_points}
        summary["norm_U0"] = dg.norm_x(U0, medium)
        summary["norm_AU0"] = dg.norm_x(apply_generator(U0, medium, bops), medium)
    files.append(os.path.join(out, "summary.json"))
    _dump(summary, files[-1])
    return files


def _probe(s: Scenario, out: str) -> list[str]:
    grid = s.grid()
    medium = s.medium(grid)
    bc = s.boundary(grid)
    p = s.doc["probe"]
    op = spp.assemble_slab(medium, bc) if grid.kind == "slab" else spp.assemble_operator(medium, bc)
    K = spp.kernel_basis(op) if p["tilde"] else None
    spec = None
    summary: dict = {"dim": op.dim, "norm": op.norm(), "kernel_dim": 0 if K is None else int(K.shape[1])}
    if p["spectrum"]:
        Q = spp.tilde_basis(op) if (K is not None and K.shape[1]) else None
        spec = spp.spectrum_near_axis(op, restrict=Q)
        summary["spectrum"] = spec.to_dict()
        summary["imaginary_pairs"] = spp.imaginary_pairs(spec.eigenvalues)
        summary["spectral_abscissa"] = spp.spectral_abscissa(spec.eigenvalues, p["band"])
    betas = spp.probe_betas(spec, float(p["beta_min"]), float(p["beta_max"]), int(p["n_betas"]))
    win = tuple(p["envelope_window"]) if p["envelope_window"] else None
    curve = spp.resolvent_curve(op, betas, K, envelope_window=win,
                                eig_freqs=None if spec is None else -spec.eigenvalues.imag)
    files = [os.path.join(out, "resolvent.csv"), os.path.join(out, "probe_summary.json")]
    curve.write_csv(files[0])
    summary.update(curve.summary(spec))
    summary["median"] = float(np.median(curve.norms))
    if p["quasimodes"] and grid.kind == "slab":
        summary["quasimodes"] = [{"k": q.k, "frequency": q.frequency, "residual": q.residual}
                                 for q in spp.cavity_quasimodes(op, int(p["quasimodes"]))]
    _dump(summary, files[1])
    return files


def _harmonic(s: Scenario, out: str) -> list[str]:
    grid = s.grid()
    medium = s.medium(grid)
    bc = s.boundary(grid)
    forcing = bc.forcing
    omega = forcing.omega
    U_hat = hm.harmonic_solution(omega, forcing.g_hat, medium, bc)
    U0 = hm.rotate(U_hat, omega, 0.0)
    ini = s.doc["initial"]
    if ini["kind"] == "harmonic":
        U0 = U0.combine(1.0, hm.interior_perturbation(grid, medium.n_species), float(ini.get("perturbation", 0.0)))
    else:
        U0 = StateVector.zeros(grid, medium.n_species)
    model = s.doc["fit"]["model"] or "exp"
    win = tuple(s.doc["fit"]["window"]) if s.doc["fit"]["window"] else None
    res = hm.convergence_test(omega, forcing.g_hat, medium, bc, U0, float(s.doc["time"]["T"]), s.dt(grid),
                              model=model, window=win, every=int(s.doc["outputs"]["cadence"]),
                              U_hat=U_hat, fit=False)
    files = [os.path.join(out, "harmonic_error.csv"), os.path.join(out, "harmonic_fit.json")]
    res.write_csv(files[0])
    summary = res.summary()
    try:
        f = dg.fit_decay(res.t, res.err_x, model, win)
        summary["fit"] = {"model": f.model, "rate": f.rate, "prefactor": f.prefactor,
                          "window": list(f.window), "residual": f.residual, "n_points": f.n_points}
    except ColdPlasmaError as exc:
        summary["fit"] = None
        summary["fit_error"] = str(exc)
    w = np.sqrt(2.0 * dg.energy(U_hat, medium).total)
    summary["norm_U_hat"] = float(w)
    _dump(summary, files[1])
    return files


def execute(s: Scenario, out: str, threads: int = 1, command: str | None = None) -> dict:
    """Run a scenario and write its artifacts plus ``manifest.json`` to ``out``."""
    os.makedirs(out, exist_ok=True)
    t0 = time.perf_counter()
    with threadpool_limits(limits=int(threads)):
        if s.mode in ("simulate", "decay-study"):
            files = _simulate(s, out)
        elif s.mode == "probe":
            files = _probe(s, out)
        else:
            files = _harmonic(s, out)
    manifest = {
        "manifest_version": 1,
        "command": command or s.mode,
        "mode": s.mode,
        "scenario": s.doc,
        "config_sha256": config_hash(s),
        "seed": s.seed,
        "threads": int(threads),
        "versions": _versions(),
        "wall_time_s": time.perf_counter() - t0,
        "artifacts": sorted(os.path.relpath(f, out) for f in files),
    }
    _dump(manifest, os.path.join(out, "manifest.json"))
    return manifest


def _fit(args) -> int:
    data = dg.read_csv(args.csv)
    col = args.column
    if col is None:
        col = "err_X" if "err_X" in data else "E_total"
    if col not in data:
        raise ValidationError(f"column {col!r} not in {sorted(data)}")
    y = data[col]
    if col == "E_total":
        y = np.sqrt(2.0 * np.maximum(y, 0.0))  # energy -> X-norm
    f = dg.fit_decay(data["t"], y, args.model, tuple(args.window) if args.window else None)
    res = {"column": col, "model": f.model, "rate": f.rate, "prefactor": f.prefactor,
           "window": list(f.window), "residual": f.residual, "n_points": f.n_points}
    text = json.dumps(res, indent=2, sort_keys=True)
    print(text)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _dump(res, os.path.join(args.out, "fit.json"))
    return 0


def _load(args) -> Scenario:
    with open(args.scenario) as fh:
        s = parse_scenario(fh.read())
    if args.seed is not None:
        s = s.with_seed(args.seed)
    return s


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="coldplasma", description="Magnetized cold-plasma wave toolkit")
    sub = ap.add_subparsers(dest="verb", required=True)

    def common(p, need_out=True):
        p.add_argument("--scenario", required=True, help="scenario (or run manifest) JSON")
        if need_out:
            p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed", type=int, default=None)

    common(sub.add_parser("validate", help="parse and check a scenario"), need_out=False)
    for verb in ("simulate", "probe", "harmonic"):
        common(sub.add_parser(verb, help=f"{verb} a scenario"))
    f = sub.add_parser("fit", help="decay fit of an existing CSV")
    f.add_argument("--csv", required=True)
    f.add_argument("--model", choices=("poly", "exp"), default="poly")
    f.add_argument("--window", type=float, nargs=2, default=None)
    f.add_argument("--column", default=None)
    f.add_argument("--out", default=None)
    return ap


_VERB_MODES = {"simulate": ("simulate", "decay-study"), "probe": ("probe",), "harmonic": ("harmonic",)}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "fit":
            return _fit(args)
        s = _load(args)
        if args.verb == "validate":
            print(serialize(s))
            print(f"ok {config_hash(s)}", file=sys.stderr)
            return 0
        if s.mode not in _VERB_MODES[args.verb]:
            raise ValidationError(f"scenario mode {s.mode!r} does not match verb {args.verb!r}", "/mode")
        if args.threads < 1:
            raise ValidationError("--threads must be >= 1")
        m = execute(s, args.out, args.threads, args.verb)
        print(json.dumps({"artifacts": m["artifacts"], "wall_time_s": m["wall_time_s"]}))
        return 0
    except ColdPlasmaError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
