"""Command-line entry point: solve, study, vortex, and check-mesh commands.

Configuration files are INI-style (configparser) with per-module sections;
every value has a matching command-line flag that takes precedence.
"""

import argparse
import configparser
import os
import sys
from pathlib import Path

import numpy as np

from .cases import available_cases, make_case
from .discretisation import RunSettings
from .mesh import MeshError, load_mesh
from .solver import SolverConfig, SolverError
from .verification import (ConvergenceTable, error_report, find_vortex_center,
                           run_convergence_study, solve_case)

EXIT_OK = 0
EXIT_SOLVER = 1
EXIT_USAGE = 2

_CASE_PARAM_TYPES = dict(
    r_e=float, u_e=float, mu=float, rho=float, r_i=float, u_i=float,
    alpha_i=int, alpha_e=int, beta_i=float, beta_e=float, u=float, a=float,
    b=float, reynolds=float, regularized=lambda s: s.lower() in ("1", "true", "yes"),
    include_convection=lambda s: s.lower() in ("1", "true", "yes"),
)


def _read_config(path):
    cfg = configparser.ConfigParser()
    if path:
        if not Path(path).exists():
            raise FileNotFoundError(path)
        cfg.read(path)
    return cfg


def _settings_from(cfg, args):
    sect = cfg["discretisation"] if cfg.has_section("discretisation") else {}

    def pick(name, flag_value, conv, default):
        if flag_value is not None:
            return flag_value
        if name in sect:
            return conv(sect[name])
        return default

    bump = pick("boundary_psi_degree", args.boundary_psi_degree, int, None)
    return RunSettings(
        d_omega=pick("d_omega", args.d, int, 1),
        d_psi=pick("d_psi", args.psi_degree, int, None) or
        pick("d_omega", args.d, int, 1),
        boundary_method=pick("boundary_method", args.method, str, "rod"),
        collocation_count=pick("collocation_count", args.colloc, int, 1),
        exact_boundary_vorticity=bool(pick("exact_boundary_vorticity",
                                           args.exact_bv or None, bool, False)),
        sigma=pick("sigma", args.sigma, float, 2.0),
        delta=pick("delta", args.delta, float, 4.0),
        growth_factor=pick("growth_factor", args.growth, float, 2.0),
        boundary_psi_degree=bump,
    )


def _solver_from(cfg, args):
    sect = cfg["solver"] if cfg.has_section("solver") else {}

    def pick(name, flag_value, conv, default):
        if flag_value is not None:
            return flag_value
        if name in sect:
            return conv(sect[name])
        return default

    return SolverConfig(
        gmres_rel_tol=pick("gmres_rel_tol", args.gmres_tol, float, 1e-12),
        gmres_restart=pick("gmres_restart", args.restart, int, 200),
        gmres_max_iters=pick("gmres_max_iters", None, int, 50000),
        preconditioner=pick("preconditioner", args.preconditioner, str, "ilut"),
        picard_tol=pick("picard_tol", args.picard_tol, float, 1e-11),
        picard_max_iters=pick("picard_max_iters", None, int, 60),
    )


def _case_from(cfg, args):
    params = {}
    if cfg.has_section("case"):
        for key, val in cfg["case"].items():
            if key == "name":
                continue
            conv = _CASE_PARAM_TYPES.get(key, float)
            params[key] = conv(val)
    for item in args.param or []:
        key, _, val = item.partition("=")
        if not val:
            raise ValueError(f"malformed --param {item!r}; expected key=value")
        conv = _CASE_PARAM_TYPES.get(key, float)
        params[key] = conv(val)
    name = args.case or (cfg["case"].get("name") if cfg.has_section("case") else None)
    if not name:
        raise ValueError("no case given (use --case or a [case] section)")
    return make_case(name, **params)


def _dump_fields(path, mesh, solution):
    """Legacy ASCII VTK with cell-data scalars and vertex-sampled velocity."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# vtk DataFile Version 3.0\nvortiflow fields\nASCII\n")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {len(mesh.xy)} double\n")
        for p in mesh.xy:
            fh.write(f"{p[0]:.12g} {p[1]:.12g} 0\n")
        ncell = mesh.n_cells
        total = sum(len(c) + 1 for c in mesh.cells)
        fh.write(f"CELLS {ncell} {total}\n")
        for c in mesh.cells:
            fh.write(f"{len(c)} " + " ".join(map(str, c)) + "\n")
        fh.write(f"CELL_TYPES {ncell}\n")
        for c in mesh.cells:
            fh.write("5\n" if len(c) == 3 else "7\n")
        fh.write(f"CELL_DATA {ncell}\n")
        for name, vals in (("vorticity", solution.omega), ("streamfunction", solution.psi)):
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            for v in vals:
                fh.write(f"{v:.12g}\n")


def _dump_matrix(path, system):
    mat = system.matrix.tocoo()
    with open(path, "w", encoding="utf-8") as fh:
        for r, c, v in zip(mat.row, mat.col, mat.data):
            fh.write(f"{r} {c} {v:.17g}\n")


def _add_common(p):
    p.add_argument("--config", help="INI configuration file")
    p.add_argument("--case", help="benchmark case name")
    p.add_argument("--param", action="append", help="case parameter key=value")
    p.add_argument("--d", type=int, help="vorticity reconstruction degree")
    p.add_argument("--psi-degree", type=int, help="streamfunction degree (default d)")
    p.add_argument("--method", choices=("rod", "exact", "naive"))
    p.add_argument("--colloc", type=int, choices=(1, 2))
    p.add_argument("--exact-bv", action="store_true", default=False,
                   help="impose the exact boundary vorticity (verification)")
    p.add_argument("--sigma", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--growth", type=float)
    p.add_argument("--boundary-psi-degree", type=int)
    p.add_argument("--gmres-tol", type=float)
    p.add_argument("--picard-tol", type=float)
    p.add_argument("--restart", type=int)
    p.add_argument("--preconditioner", choices=("none", "jacobi", "ilu0", "ilut"))
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads for studies (default VORTIFLOW_THREADS or 1)")
    p.add_argument("--out", default=".", help="output directory")


def build_parser():
    ap = argparse.ArgumentParser(prog="vortiflow",
                                 description="streamfunction-vorticity finite volume solver")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one case on one mesh")
    _add_common(p)
    p.add_argument("--mesh", required=True)
    p.add_argument("--emit-fields", action="store_true")
    p.add_argument("--dump-matrix", action="store_true")

    p = sub.add_parser("study", help="convergence study over a mesh family")
    _add_common(p)
    p.add_argument("--meshes", nargs="+", required=True)
    p.add_argument("--csv", default=None, help="output CSV path")

    p = sub.add_parser("vortex", help="solve and locate the primary vortex")
    _add_common(p)
    p.add_argument("--mesh", required=True)
    p.add_argument("--seed-point", nargs=2, type=float, default=None)

    p = sub.add_parser("check-mesh", help="validate a mesh file")
    p.add_argument("mesh")
    return ap


def _threads(args):
    if args.threads is not None:
        return max(1, args.threads)
    return max(1, int(os.environ.get("VORTIFLOW_THREADS", "1")))


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "check-mesh":
            mesh = load_mesh(args.mesh)
            print(mesh.summary())
            return EXIT_OK
        cfg = _read_config(args.config)
        case = _case_from(cfg, args)
        settings = _settings_from(cfg, args)
        solver_cfg = _solver_from(cfg, args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
    except (ValueError, FileNotFoundError, MeshError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, ValueError) and "unknown case" in str(exc):
            print("available cases: " + ", ".join(available_cases()), file=sys.stderr)
        return EXIT_USAGE

    try:
        if args.command == "solve":
            mesh = load_mesh(args.mesh)
            sol = solve_case(case, mesh, settings, solver_cfg)
            table = ConvergenceTable(case.name, settings)
            if case.has_exact:
                rep = error_report(case, mesh, sol, settings)
                table.add_mesh(rep, sol.report)
                table.write_csv(out / f"{case.name}_solve.csv")
                for name, (e1, einf) in rep.fields.items():
                    print(f"{name}: E1={e1:.6e} Einf={einf:.6e}")
            print(f"picard={sol.report.picard_iterations} "
                  f"gmres={sol.report.gmres_iterations} "
                  f"wall={sol.report.wall_time:.2f}s")
            if args.emit_fields:
                _dump_fields(out / f"{case.name}_fields.vtk", mesh, sol)
            if args.dump_matrix:
                _dump_matrix(out / f"{case.name}_matrix.txt",
                             sol.disc.assemble(sol.psi))
            return EXIT_OK

        if args.command == "study":
            meshes = [load_mesh(p) for p in args.meshes]
            table = run_convergence_study(case, meshes, settings, solver_cfg,
                                          threads=_threads(args))
            csv_path = args.csv or out / f"{case.name}_study.csv"
            table.write_csv(csv_path)
            print(f"wrote {csv_path}")
            for rec in table.records():
                if rec["field"] == "omega":
                    print(f"N_C={rec['N_C']}: E1(omega)={rec['E1']} O1={rec['O1'] or '-'}")
            return EXIT_OK

        if args.command == "vortex":
            mesh = load_mesh(args.mesh)
            sol = solve_case(case, mesh, settings, solver_cfg)
            seed = np.asarray(args.seed_point, float) if args.seed_point is not None \
                else case.seed_hint
            if seed is None:
                ts, pts = case.segments[0].sample(64)
                seed = pts.mean(axis=0)
            vtx = find_vortex_center(sol, mesh, seed)
            print(f"center=({vtx.center[0]:.10f}, {vtx.center[1]:.10f}) "
                  f"psi={vtx.psi:.10f} omega={vtx.omega:.10f} "
                  f"iterations={vtx.iterations}")
            return EXIT_OK
    except MeshError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
