"""Command line entry point: ``maxsurf <group> <action> [options]``.

Exit codes: 0 success, 2 invalid input, 3 numerical non-convergence (the
report is still written), 4 internal error.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .errors import (
    AccuracyError,
    CalibrationError,
    InputError,
    MaxsurfError,
    RelatorError,
    SignatureError,
    SolverStallError,
    StencilError,
    WindowError,
)

__all__ = ["main", "run", "build_parser", "EXIT_OK", "EXIT_INPUT", "EXIT_NUMERIC", "EXIT_INTERNAL"]

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_INTERNAL = 0, 2, 3, 4

_NUMERIC = (SolverStallError, AccuracyError, CalibrationError, WindowError, StencilError)


class NotConverged(Exception):
    """Raised by a command whose numerics did not reach tolerance; carries the report."""

    def __init__(self, report):
        super().__init__(report.status)
        self.report = report


# ------------------------------------------------------------- commands


def _geo_classify(cfg, rpt):
    from .pseudohyp import classify_pair

    x, y = np.array(cfg.get("x")), np.array(cfg.get("y"))
    rpt.results["class"] = classify_pair(x, y, cfg.get("tol")).value
    rpt.results["inner"] = float(x[:2] @ y[:2] - x[2:] @ y[2:])


def _geo_segment(cfg, rpt):
    from .pseudohyp import check_point, geodesic

    p, v = np.array(cfg.get("p")), np.array(cfg.get("v"))
    check_point(p)
    ts = np.linspace(cfg.get("t0"), cfg.get("t1"), cfg.get("samples"))
    pts = np.array([geodesic(p, v, t) for t in ts])
    q = np.sum(pts[:, :2] ** 2, axis=1) - np.sum(pts[:, 2:] ** 2, axis=1)
    rpt.results["points"] = pts
    rpt.results["t"] = ts
    rpt.defects["quadric"] = float(np.abs(q + 1.0).max())


def _rep_fuchsian(cfg, rpt):
    from .surface_rep import embed_block, fuchsian_rep, relator_residual

    rep = fuchsian_rep(cfg.get("genus"))
    if cfg.get("n"):
        rep = embed_block(rep, cfg.get("n"))
    rpt.defects["relator"] = relator_residual(rep)
    if cfg.get("out"):
        io.save_rep(rep, cfg.get("out"))
        rpt.files.append(cfg.get("out"))
    else:
        rpt.results["rep"] = rep.to_json()


def _rep_check(cfg, rpt):
    from .surface_rep import relator_residual, relator_tolerance, validate_rep

    rep = io.load_rep(cfg.get("rep"))
    validate_rep(rep, cfg.get("tol"))
    rpt.results.update(genus=rep.genus, n=rep.n, valid=True)
    rpt.defects["relator"] = relator_residual(rep)
    rpt.results["relator_tolerance"] = relator_tolerance(rep)


def _rep_twist(cfg, rpt):
    from .surface_rep import relator_residual, twist_rep

    rep = io.load_rep(cfg.get("rep"))
    twist = [np.diag(s) for s in cfg.get("signs")]
    out = twist_rep(rep, twist)
    rpt.defects["relator"] = relator_residual(out)
    if cfg.get("out"):
        io.save_rep(out, cfg.get("out"))
        rpt.files.append(cfg.get("out"))
    else:
        rpt.results["rep"] = out.to_json()


def _inv_euler(cfg, rpt):
    from .surface_rep import euler_class

    e, defect = euler_class(io.load_rep(cfg.get("rep")), return_defect=True)
    rpt.results["euler"] = e
    rpt.defects["lift"] = defect


def _inv_toledo(cfg, rpt):
    from ._config import context
    from .surface_rep import calibrate_toledo, embed_block, fuchsian_rep, toledo

    rep = io.load_rep(cfg.get("rep"))
    ref = fuchsian_rep(rep.genus)
    ref = embed_block(ref, rep.n) if rep.n else ref
    with context():
        kappa = calibrate_toledo([ref], refinement=cfg.get("refinement"))
        out = toledo(rep, refinement=cfg.get("refinement"))
    rpt.results.update(raw=out["raw"], normalized=out["normalized"], kappa_tau=kappa, refinement_trace=out["refinement_trace"])
    rpt.defects["integrality"] = out["defect"]


def _inv_components(cfg, rpt):
    from .surface_rep import component_count

    rpt.results["components"] = component_count(cfg.get("n"), cfg.get("genus"))
    rpt.defects["none"] = 0.0


def _inv_normal(cfg, rpt):
    from .eqmesh import build_mesh, normal_bundle_invariants

    mesh = build_mesh(io.load_rep(cfg.get("rep")), refinement=cfg.get("refinement"))
    out = normal_bundle_invariants(mesh)
    rpt.results.update({k: v for k, v in out.items() if k != "defect"})
    rpt.defects["holonomy"] = out.get("defect", 0.0)


def _surface_solve(cfg, rpt):
    from .eqmesh import area, build_mesh
    from .maxsolver import SolveParams, solve_maximal

    rep = io.load_rep(cfg.get("rep"))
    seed_kind = cfg.get("seed")
    eps = cfg.get("eps") if seed_kind == "perturbed" else 0.0
    seed = build_mesh(rep, refinement=cfg.get("refinement"), seed=seed_kind, eps=eps, rng_seed=cfg.get("rng_seed"))
    params = SolveParams(max_iters=cfg.get("max_iters"), residual_tol=cfg.get("tol"), rng_seed=cfg.get("rng_seed"))
    mesh, conv = solve_maximal(rep, seed, params)
    out = Path(cfg.get("out"))
    out.mkdir(parents=True, exist_ok=True)
    name = cfg.get("name")
    files = [out / f"{name}.ply", out / f"{name}_convergence.csv", out / f"{name}_mesh.json"]
    io.write_ply(mesh, files[0])
    io.write_convergence_csv(conv.rows(), files[1])
    io.save_mesh(mesh, files[2])
    rpt.files += [str(f) for f in files]
    rpt.results.update(iterations=conv.iterations, converged=conv.converged, reason=conv.reason, area=area(mesh), spacelike=mesh.spacelike)
    rpt.defects.update(residual=conv.final_residual, initial_residual=conv.initial_residual)
    rpt.traces.update(residual=conv.residual_trace, area=conv.area_trace)
    if not conv.converged:
        rpt.status = "not converged"
        raise NotConverged(rpt)


def _surface_verify(cfg, rpt):
    from .eqmesh import area
    from .maxsolver import residual

    mesh = io.load_mesh(cfg.get("mesh"))
    rpt.results.update(spacelike=mesh.spacelike)
    if mesh.spacelike:
        rpt.results["area"] = area(mesh)
    res = residual(mesh)
    rpt.defects["residual"] = res
    rpt.results["maximal"] = bool(mesh.spacelike and res <= cfg.get("tol"))
    if not rpt.results["maximal"]:
        rpt.status = "not maximal"
        raise NotConverged(rpt)


def _surface_gaussmap(cfg, rpt):
    from .gaussmap import conformality_defect, frame_roundtrip_defect, gauss_map, minimality_residual

    mesh = io.load_mesh(cfg.get("mesh"))
    img = gauss_map(mesh)
    rpt.defects.update(
        conformality=conformality_defect(mesh, img),
        minimality=minimality_residual(img),
        roundtrip=frame_roundtrip_defect(mesh, img),
    )


def _uniqueness(cfg, rpt):
    from .maxsolver import SolveParams, uniqueness_probe

    rep = io.load_rep(cfg.get("rep"))
    params = SolveParams(residual_tol=cfg.get("tol"), rng_seed=cfg.get("rng_seed"))
    dist = uniqueness_probe(rep, cfg.get("k"), params, eps=cfg.get("eps"), refinement=cfg.get("refinement"))
    rpt.results["distances"] = dist
    rpt.defects["max_distance"] = float(np.nanmax(dist)) if np.isfinite(dist).any() else None
    if np.isnan(dist).any():
        rpt.status = "some runs did not converge"
        raise NotConverged(rpt)


def _record_json(rec):
    return {
        "B": rec.B,
        "u": rec.u,
        "v": rec.v,
        "u_row": rec.u_row,
        "v_word": list(rec.v_word),
        "v_triangle": rec.v_triangle,
        "v_bary": rec.v_bary,
        "chord": rec.chord.value,
    }


def _causal_gap(cfg, rpt):
    from .maxsolver import causal_gap

    s1, s2 = io.load_mesh(cfg.get("s1")), io.load_mesh(cfg.get("s2"))
    rpt.results.update(_record_json(causal_gap(s1, s2, window=cfg.get("window"))))


def _causal_second(cfg, rpt):
    from .maxsolver import causal_gap, optimal_directions, record_at, second_derivative_check

    s1, s2 = io.load_mesh(cfg.get("s1")), io.load_mesh(cfg.get("s2"))
    v = cfg.get("vertex")
    rec = causal_gap(s1, s2, window=cfg.get("window")) if v is None else record_at(s1, s2, v, window=cfg.get("window"))
    f_al, n_al = second_derivative_check(s1, s2, rec, h=cfg.get("h"))
    f_op, n_op = second_derivative_check(s1, s2, rec, optimal_directions(s1, s2, rec), h=cfg.get("h"))
    rpt.results.update(_record_json(rec))
    rpt.results.update(formula=f_al, numeric=n_al, formula_optimal=f_op, numeric_optimal=n_op, bound=2 + 2 * rec.B)
    rpt.defects.update(formula_vs_numeric=abs(f_al - n_al), formula_vs_numeric_optimal=abs(f_op - n_op))


def _higgs_verify(cfg, rpt):
    from . import higgs

    g, n = cfg.get("g"), cfg.get("n")
    chain = higgs.verify_maximal_chain(g)
    rpt.results["chain"] = chain
    fib = higgs.cyclic_fiber(n, q2=0.0, beta=np.ones(n))
    rpt.results["cyclic"] = higgs.cyclic_check(fib)
    rpt.results["fourth_root_gauge"] = higgs.fourth_root_gauge(fib) is not None
    rpt.results["q2_slot_factor"] = higgs.derive_q2_factor(n)
    rpt.results["split_model_stability"] = higgs.slope_stability(higgs.maximal_split_model(g, n))
    rpt.defects["adjoint"] = fib.adjoint_defect()
    rpt.defects["q2_factor"] = abs(rpt.results["q2_slot_factor"] - higgs.Q2_SLOT_FACTOR)
    if not chain["ok"]:
        rpt.status = "chain does not close"
        raise NotConverged(rpt)


def _export(cfg, rpt):
    kind, out = cfg.get("kind"), cfg.get("out")
    if kind == "mesh":
        files = io.export_plot_data(io.load_mesh(cfg.get("input")), "mesh", out)
    elif kind == "convergence":
        data = io._read_json(cfg.get("input"))
        try:
            tr = data["traces"]
            rows = list(zip(range(1, len(tr["residual"]) + 1), tr["residual"], tr["area"]))
        except (KeyError, TypeError) as exc:
            raise InputError(f"report has no convergence traces: {exc}") from exc
        with open(out, "w") as fh:
            fh.write("iter,residual,area\n")
            for r in rows:
                fh.write(f"{r[0]},{r[1]!r},{r[2]!r}\n")
        files = [out]
    else:
        if cfg.get("input2") is None:
            raise InputError("landscape export needs input2")
        s1, s2 = io.load_mesh(cfg.get("input")), io.load_mesh(cfg.get("input2"))
        files = io.export_plot_data((s1, s2), "landscape", out, res=cfg.get("res"), window=cfg.get("window"))
        grid, _ = io.b_landscape(s1, s2, res=cfg.get("res"), window=cfg.get("window"))
        rpt.results["grid_max"] = float(grid.max())
    rpt.files += files


COMMANDS = {
    "geo classify": _geo_classify,
    "geo segment": _geo_segment,
    "rep fuchsian": _rep_fuchsian,
    "rep check": _rep_check,
    "rep twist": _rep_twist,
    "invariants euler": _inv_euler,
    "invariants toledo": _inv_toledo,
    "invariants components": _inv_components,
    "invariants normal-bundle": _inv_normal,
    "surface solve": _surface_solve,
    "surface verify": _surface_verify,
    "surface gaussmap": _surface_gaussmap,
    "uniqueness probe": _uniqueness,
    "causal gap": _causal_gap,
    "causal second-derivative": _causal_second,
    "higgs verify": _higgs_verify,
    "export": _export,
}


def run(cfg: io.RunConfig):
    """Dispatch a validated config.  Returns (exit code, Report)."""
    rpt = io.Report(cfg.command, io.Report.digest(cfg))
    t0 = time.perf_counter()
    code = EXIT_OK
    try:
        COMMANDS[cfg.command](cfg, rpt)
    except NotConverged:
        code = EXIT_NUMERIC
    except _NUMERIC as exc:
        rpt.status = f"{type(exc).__name__}: {exc}"
        code = EXIT_NUMERIC
    except (InputError, RelatorError, SignatureError) as exc:
        rpt.status = f"{type(exc).__name__}: {exc}"
        code = EXIT_INPUT
    except MaxsurfError as exc:
        rpt.status = f"{type(exc).__name__}: {exc}"
        code = EXIT_NUMERIC
    rpt.wall_clock = time.perf_counter() - t0
    return code, rpt


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="maxsurf", description="Maximal surfaces in pseudo-hyperbolic space.")
    ap.add_argument("--config", help="JSON config {command, params}; replaces the subcommand")
    ap.add_argument("--report", help="write the JSON report here (default: stdout)")
    # --report is also accepted after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--report", default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    sub = ap.add_subparsers(dest="group")
    groups = {}
    for command, schema in io.SCHEMAS.items():
        parts = command.split(" ")
        if len(parts) == 1:
            p = sub.add_parser(parts[0], parents=[common])
        else:
            if parts[0] not in groups:
                groups[parts[0]] = sub.add_parser(parts[0]).add_subparsers(dest="action")
            p = groups[parts[0]].add_parser(parts[1], parents=[common])
        p.set_defaults(command=command)
        positional = {"surface solve": "rep", "surface verify": "mesh", "surface gaussmap": "mesh", "rep check": "rep"}.get(command)
        for key, f in schema.items():
            if key == positional:
                p.add_argument(key)
                continue
            p.add_argument("--" + key.replace("_", "-"), dest=key, default=None)
    return ap


def _flags_to_config(ns) -> io.RunConfig:
    schema = io.SCHEMAS[ns.command]
    params = {k: getattr(ns, k) for k in schema if getattr(ns, k, None) is not None}
    for k, v in list(params.items()):
        kind = schema[k].kind
        if kind in ("vector", "matrix") and isinstance(v, str) and v.strip().startswith("["):
            try:
                params[k] = json.loads(v)
            except json.JSONDecodeError as exc:
                raise io.ConfigError(f"params.{k}: {exc}") from exc
    return io.parse_config({"command": ns.command, "params": params})


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        if ns.config:
            cfg = io.parse_config(ns.config)
        elif getattr(ns, "command", None):
            cfg = _flags_to_config(ns)
        else:
            parser.print_help(sys.stderr)
            return EXIT_INPUT
    except InputError as exc:
        print(f"maxsurf: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        code, rpt = run(cfg)
    except Exception as exc:  # noqa: BLE001 - internal errors map to exit 4
        print(f"maxsurf: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    if ns.report:
        rpt.write(ns.report)
    else:
        json.dump(rpt.to_json(), sys.stdout, indent=1, sort_keys=True)
        sys.stdout.write("\n")
    if code != EXIT_OK:
        print(f"maxsurf: {rpt.status}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
