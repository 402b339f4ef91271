"""Error norms, observed convergence orders, study orchestration, and the
cavity vortex-centre locator."""

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .discretisation import Discretisation
from .quadrature import _gauss01
from .reconstruction import build_constrained, mean_value_constraint, PolyBasis
from .solver import SolverConfig, picard_loop
from .stencils import cell_stencil


@dataclass
class Solution:
    omega: np.ndarray
    psi: np.ndarray
    constants: np.ndarray
    report: object
    disc: Discretisation

    def boundary_vorticity(self):
        """A-posteriori point values from the streamfunction reconstructions."""
        disc = self.disc
        vals, edges = [], []
        for bd in disc.boundary_data:
            for prow, pck, pconst in disc.condensed_boundary_vorticity(bd):
                members = disc.op_psi_b[bd.edge].stencil.members
                v = prow @ self.psi[members] + pconst
                if bd.loop > 0:
                    v += pck * self.constants[bd.loop - 1]
                vals.append(v)
                edges.append(bd.edge)
        return np.asarray(vals), np.asarray(edges, np.int64)

    def edge_mean_velocity(self):
        """Velocity means on every edge from the converged streamfunction."""
        disc = self.disc
        out = np.empty((disc.mesh.n_edges, 2))
        _, zeta = _gauss01(disc.n_edge_pts)
        for e, (vx_rows, vy_rows, members) in disc._vel_rows.items():
            phi = self.psi[members]
            out[e, 0] = zeta @ (vx_rows @ phi)
            out[e, 1] = zeta @ (vy_rows @ phi)
        return out


def solve_case(case, mesh, settings, config=None):
    config = config or SolverConfig()
    disc = Discretisation(mesh, case.problem(), settings,
                          exact_fields=case.fields)
    omega, psi, constants, report = picard_loop(disc, config)
    return Solution(omega, psi, constants, report, disc)


# -- error norms -------------------------------------------------------------

@dataclass
class ErrorReport:
    n_cells: int
    n_edges: int
    n_boundary: int
    fields: dict   # name -> (E1, Einf)


def weighted_errors(approx, exact, weights):
    """Measure-weighted L1 and max-norm errors."""
    diff = np.abs(np.asarray(approx, float) - np.asarray(exact, float))
    w = np.asarray(weights, float)
    return float(np.sum(diff * w) / np.sum(w)), float(diff.max())


def convergence_order(err_a, err_b, n_a, n_b):
    """2 |ln(Ea/Eb)| / |ln(Na/Nb)| between two meshes."""
    if n_a == n_b:
        raise ValueError("equal cell counts leave the order undefined")
    if err_a <= 0.0 or err_b <= 0.0:
        return float("inf")
    if err_a == err_b:
        return 0.0
    return 2.0 * abs(np.log(err_a / err_b)) / abs(np.log(n_a / n_b))


def exact_cell_means(fields_fn, mesh, order):
    return mesh.cell_means(fields_fn, order)


def exact_edge_mean_velocity(case, mesh, npts):
    out = np.empty((mesh.n_edges, 2))
    for e in range(mesh.n_edges):
        rule = mesh.edge_quadrature(e, npts)
        out[e] = rule.weights @ case.fields.velocity(rule.points)
    return out


def error_report(case, mesh, solution, settings):
    """Errors of cell means, edge velocity means, and boundary vorticity."""
    if not case.has_exact:
        raise ValueError(f"case {case.name} has no exact solution")
    order = max(settings.d_omega, settings.d_psi) + 2
    mean_order = order + 1
    exact_omega = exact_cell_means(case.fields.omega, mesh, mean_order)
    exact_psi = exact_cell_means(case.fields.psi, mesh, mean_order)
    npts_edge = (mean_order + 3) // 2
    exact_u = exact_edge_mean_velocity(case, mesh, npts_edge)

    fields = {}
    fields["omega"] = weighted_errors(solution.omega, exact_omega, mesh.area)
    fields["psi"] = weighted_errors(solution.psi, exact_psi, mesh.area)

    approx_u = solution.edge_mean_velocity()
    w = mesh.edge_length
    e1x, einfx = weighted_errors(approx_u[:, 0], exact_u[:, 0], w)
    e1y, einfy = weighted_errors(approx_u[:, 1], exact_u[:, 1], w)
    fields["velocity"] = (e1x + e1y, max(einfx, einfy))

    bv_vals, bv_edges = solution.boundary_vorticity()
    exact_bv = []
    weights_bv = []
    k = 0
    for bd in solution.disc.boundary_data:
        for col in bd.collocations:
            exact_bv.append(case.fields.omega(col.position[None, :])[0])
            weights_bv.append(mesh.edge_length[bd.edge] / len(bd.collocations))
            k += 1
    fields["omega_b"] = weighted_errors(bv_vals, np.asarray(exact_bv),
                                        np.asarray(weights_bv))
    return ErrorReport(mesh.n_cells, mesh.n_edges, mesh.n_boundary, fields)


# -- convergence studies ------------------------------------------------------

STUDY_COLUMNS = ["case", "method", "d_omega", "d_psi", "colloc", "N_C", "N_E",
                 "N_B", "field", "E1", "O1", "Einf", "Oinf", "N_FP", "N_GMRES",
                 "wall_s"]


@dataclass
class ConvergenceTable:
    case: str
    settings: object
    rows: list = field(default_factory=list)

    def add_mesh(self, report, solve_report):
        self.rows.append((report, solve_report))

    def records(self):
        recs = []
        st = self.settings
        for k, (rep, srep) in enumerate(self.rows):
            prev = self.rows[k - 1][0] if k else None
            for name, (e1, einf) in rep.fields.items():
                o1 = oinf = ""
                if prev is not None:
                    o1 = f"{convergence_order(prev.fields[name][0], e1, prev.n_cells, rep.n_cells):.3f}"
                    oinf = f"{convergence_order(prev.fields[name][1], einf, prev.n_cells, rep.n_cells):.3f}"
                recs.append({
                    "case": self.case, "method": st.boundary_method,
                    "d_omega": st.d_omega, "d_psi": st.d_psi,
                    "colloc": st.collocation_count,
                    "N_C": rep.n_cells, "N_E": rep.n_edges, "N_B": rep.n_boundary,
                    "field": name, "E1": f"{e1:.6e}", "O1": o1,
                    "Einf": f"{einf:.6e}", "Oinf": oinf,
                    "N_FP": srep.picard_iterations,
                    "N_GMRES": srep.gmres_iterations,
                    "wall_s": f"{srep.wall_time:.3f}"})
        return recs

    def write_csv(self, path_or_file):
        close = False
        fh = path_or_file
        if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
            fh = open(path_or_file, "w", newline="", encoding="utf-8")
            close = True
        try:
            writer = csv.DictWriter(fh, fieldnames=STUDY_COLUMNS)
            writer.writeheader()
            for rec in self.records():
                writer.writerow(rec)
        finally:
            if close:
                fh.close()

    def orders(self, name, norm="E1"):
        idx = 0 if norm == "E1" else 1
        out = []
        for k in range(1, len(self.rows)):
            a, b = self.rows[k - 1][0], self.rows[k][0]
            out.append(convergence_order(a.fields[name][idx], b.fields[name][idx],
                                         a.n_cells, b.n_cells))
        return out

    def errors(self, name, norm="E1"):
        idx = 0 if norm == "E1" else 1
        return [rep.fields[name][idx] for rep, _ in self.rows]


def run_convergence_study(case, meshes, settings, config=None, progress=None,
                          threads=1):
    """Solve the case on each mesh (coarse to fine) and tabulate errors.

    With threads > 1 whole-mesh solves run concurrently; the table rows stay
    in mesh order either way.
    """
    if len(meshes) < 2:
        raise ValueError("a convergence study needs at least two meshes")

    def one(mesh):
        t0 = time.perf_counter()
        sol = solve_case(case, mesh, settings, config)
        rep = error_report(case, mesh, sol, settings)
        sol.report.wall_time = time.perf_counter() - t0
        return rep, sol

    table = ConvergenceTable(case.name, settings)
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, meshes))
    else:
        results = [one(m) for m in meshes]
    for mesh, (rep, sol) in zip(meshes, results):
        table.add_mesh(rep, sol.report)
        if progress is not None:
            progress(mesh, rep, sol)
    return table


# -- vortex centre -------------------------------------------------------------

@dataclass
class VortexResult:
    center: np.ndarray
    psi: float
    omega: float
    iterations: int
    grad_norm: float


class _CellLocator:
    def __init__(self, mesh):
        self.mesh = mesh
        self.tree = cKDTree(mesh.centroid)

    def locate(self, p):
        _, idx = self.tree.query(p, k=min(12, self.mesh.n_cells))
        for i in np.atleast_1d(idx):
            if self._contains(int(i), p):
                return int(i)
        return -1

    def _contains(self, i, p):
        verts = self.mesh.xy[self.mesh.cells[i]]
        a = verts
        b = np.roll(verts, -1, axis=0)
        cross = (b[:, 0] - a[:, 0]) * (p[1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (p[0] - a[:, 0])
        return np.all(cross >= -1e-12 * self.mesh.char_size[i] ** 2)


def find_vortex_center(solution, mesh, seed, max_iter=500, grad_tol_factor=1e-12):
    """Walk the streamfunction gradient to the stationary point of the
    primary vortex, re-selecting the cell-local reconstruction as the iterate
    moves: damped Newton steps on grad(psi) = 0 with the squared gradient
    norm as the line-search merit."""
    disc = solution.disc
    st = disc.settings
    if st.d_psi < 2:
        raise ValueError("vortex search needs a streamfunction degree >= 2")
    locator = _CellLocator(mesh)
    recon_cache = {}

    def recon(i):
        op = recon_cache.get(i)
        if op is None:
            sten = cell_stencil(mesh, i, st.d_psi, st.growth_factor)
            basis = PolyBasis(st.d_psi, mesh.centroid[i], mesh.char_size[i])
            cons = [mean_value_constraint(mesh, i, basis, disc.cell_order)]
            op = build_constrained(mesh, sten, basis, disc.cell_order, cons,
                                   st.sigma, st.delta)
            recon_cache[i] = op
        return op, op.coefficients(solution.psi)

    span = float(solution.psi.max() - solution.psi.min())
    scale = max(span / np.sqrt(mesh.area.sum()), 1e-30)
    grad_tol = grad_tol_factor * scale

    def state(pt):
        c = locator.locate(pt)
        if c < 0:
            return None
        o, cf = recon(c)
        g = np.array([float(o.evaluate(cf, pt[None, :], (1, 0))[0]),
                      float(o.evaluate(cf, pt[None, :], (0, 1))[0])])
        h = o.basis.hessian_rows(pt) @ cf
        H = np.array([[h[0], h[1]], [h[1], h[2]]])
        return c, g, H

    x = np.asarray(seed, float).copy()
    cur = state(x)
    if cur is None:
        raise ValueError("vortex seed lies outside the mesh")
    it = 0
    for it in range(1, max_iter + 1):
        cell, g, H = cur
        gn = np.linalg.norm(g)
        if gn <= grad_tol:
            break
        try:
            step = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            step = -(H @ g)
            step *= mesh.char_size[cell] / max(np.linalg.norm(step), 1e-300)
        cap = 2.0 * mesh.char_size[cell]
        if np.linalg.norm(step) > cap:
            step *= cap / np.linalg.norm(step)
        alpha = 1.0
        accepted = False
        for _ in range(40):
            trial = x + alpha * step
            nxt = state(trial)
            if nxt is not None and np.linalg.norm(nxt[1]) < gn:
                x, cur = trial, nxt
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
    else:
        raise RuntimeError("vortex search exceeded the iteration budget")

    cell, g, _ = cur
    o, cf = recon(cell)
    psi_val = float(o.evaluate(cf, x[None, :])[0])
    omega_op = disc.op_omega_cell[cell]
    omega_val = float(omega_op.evaluate(
        omega_op.coefficients(solution.omega), x[None, :])[0])
    return VortexResult(x, psi_val, omega_val, it, float(np.linalg.norm(g)))


# -- reference cache -----------------------------------------------------------

CACHE_VERSION = 1


def case_cache_key(case, mesh_summary, settings):
    payload = json.dumps({
        "case": case.name, "params": {k: repr(v) for k, v in sorted(case.params.items())},
        "mesh": mesh_summary, "d": [settings.d_omega, settings.d_psi],
        "method": settings.boundary_method, "colloc": settings.collocation_count,
        "version": CACHE_VERSION}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def save_reference(path, key, vortex):
    np.savez(path, version=np.int64(CACHE_VERSION), key=np.bytes_(key.encode()),
             center=vortex.center, psi=np.float64(vortex.psi),
             omega=np.float64(vortex.omega))


def load_reference(path, key):
    try:
        data = np.load(path)
    except (OSError, ValueError):
        return None
    if int(data["version"]) != CACHE_VERSION or data["key"].item().decode() != key:
        return None
    return VortexResult(np.asarray(data["center"]), float(data["psi"]),
                        float(data["omega"]), 0, 0.0)
