"""Assembly of the condensed affine system over (vorticity means,
streamfunction means, hole loop constants).

Boundary vorticity point-values are eliminated symbolically: each one is the
affine expression  -n.H[psi_hat].n + closure  of the Cauchy-constrained
streamfunction reconstruction at its collocation point, so its couplings land
directly on the streamfunction columns and the loop constants.  Velocity
point-values come from previous-iterate streamfunction reconstructions, which
makes the system affine with the convective part rebuilt once per Picard
iteration while all diffusive blocks stay cached.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .formulation import build_boundary_data
from .reconstruction import (PolyBasis, build_constrained, build_unconstrained,
                             dirichlet_constraint, make_cauchy_constraint,
                             mean_value_constraint)
from .stencils import cell_stencil, edge_stencil


@dataclass(frozen=True)
class RunSettings:
    d_omega: int = 1
    d_psi: int = 1
    boundary_method: str = "rod"     # rod | exact | naive
    collocation_count: int = 1
    exact_boundary_vorticity: bool = False
    sigma: float = 2.0
    delta: float = 4.0
    growth_factor: float = 2.0
    boundary_psi_degree: int = None  # degree of the Cauchy boundary
                                     # reconstructions; defaults to d_psi

    @property
    def d_psi_boundary(self):
        return self.d_psi if self.boundary_psi_degree is None \
            else self.boundary_psi_degree

    def validate(self):
        if self.d_omega < 1 or self.d_omega > 6:
            raise ValueError("vorticity degree out of range")
        if self.d_psi - self.d_omega not in (0, 1, 2):
            raise ValueError("streamfunction degree must be d, d+1, or d+2")
        if self.collocation_count not in (1, 2):
            raise ValueError("collocation count must be 1 or 2")
        if self.d_psi_boundary < self.d_psi or self.d_psi_boundary > self.d_psi + 1:
            raise ValueError("boundary Cauchy degree must be d_psi or d_psi + 1")


@dataclass(frozen=True)
class UnknownLayout:
    n_cells: int
    n_holes: int

    @property
    def size(self):
        return 2 * self.n_cells + self.n_holes

    def omega_col(self, i):
        return i

    def psi_col(self, i):
        return self.n_cells + i

    def constant_col(self, loop):
        if loop < 1 or loop > self.n_holes:
            raise IndexError(f"loop {loop} carries no constant column")
        return 2 * self.n_cells + loop - 1

    def split(self, x):
        n = self.n_cells
        return x[:n], x[n:2 * n], x[2 * n:]


@dataclass
class AffineResidualSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    layout: UnknownLayout
    row_kind: np.ndarray   # 0 vorticity cell, 1 streamfunction cell, 2 compatibility

    def residual(self, x):
        return self.matrix @ x - self.rhs


class _Coo:
    def __init__(self):
        self.rows, self.cols, self.vals = [], [], []

    def add(self, row, cols, vals):
        vals = np.asarray(vals, float)
        self.rows.append(np.full(vals.size, row, np.int64))
        self.cols.append(np.asarray(cols, np.int64))
        self.vals.append(vals)

    def arrays(self):
        if not self.rows:
            return (np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0))
        return (np.concatenate(self.rows), np.concatenate(self.cols),
                np.concatenate(self.vals))


class Discretisation:
    def __init__(self, mesh, problem, settings, exact_fields=None):
        settings.validate()
        self.mesh = mesh
        self.problem = problem
        self.settings = settings
        self.layout = UnknownLayout(mesh.n_cells, problem.n_holes)

        d_max = max(settings.d_omega, settings.d_psi, settings.d_psi_boundary)
        self.n_edge_pts = (d_max + 3) // 2          # ceil((d_max + 2) / 2)
        self.cell_order = d_max + 1

        need_exact = settings.exact_boundary_vorticity or settings.boundary_method == "exact"
        if need_exact and exact_fields is None:
            raise ValueError("exact boundary data requested but no exact fields given")
        self.boundary_data = build_boundary_data(
            mesh, problem, method=settings.boundary_method,
            collocation_count=settings.collocation_count,
            exact_fields=exact_fields)

        self._build_operators()
        self._build_static()

    # -- operator construction --------------------------------------------

    def _basis(self, degree, center, scale):
        return PolyBasis(degree, center, scale)

    def _build_operators(self):
        m = self.mesh
        st = self.settings
        sig, del_, gf = st.sigma, st.delta, st.growth_factor
        order = self.cell_order

        self.op_omega_cell = []
        for i in range(m.n_cells):
            sten = cell_stencil(m, i, st.d_omega, gf)
            basis = self._basis(st.d_omega, m.centroid[i], m.char_size[i])
            cons = [mean_value_constraint(m, i, basis, order)]
            self.op_omega_cell.append(
                build_constrained(m, sten, basis, order, cons, sig, del_))

        self.op_omega_edge = {}
        self.op_psi_edge = {}
        for e in range(m.n_edges):
            if m.edge_right[e] < 0:
                continue
            i, j = m.edge_left[e], m.edge_right[e]
            scale = 0.5 * (m.char_size[i] + m.char_size[j])
            sten_o = edge_stencil(m, e, st.d_omega, gf)
            self.op_omega_edge[e] = build_unconstrained(
                m, sten_o, self._basis(st.d_omega, m.edge_midpoint[e], scale),
                order, sig, del_)
            sten_p = edge_stencil(m, e, st.d_psi, gf) if st.d_psi != st.d_omega else sten_o
            self.op_psi_edge[e] = build_unconstrained(
                m, sten_p, self._basis(st.d_psi, m.edge_midpoint[e], scale),
                order, sig, del_)

        self.op_omega_b = {}
        self.op_psi_b = {}
        self.op_phi_b = {}
        for bd in self.boundary_data:
            e = bd.edge
            i = m.edge_left[e]
            scale = m.char_size[i]
            mid = m.edge_midpoint[e]
            sten_o = edge_stencil(m, e, st.d_omega, gf)
            basis_o = self._basis(st.d_omega, mid, scale)
            cons_o = [dirichlet_constraint(c, basis_o, ("omega", k))
                      for k, c in enumerate(bd.collocations)]
            self.op_omega_b[e] = build_constrained(m, sten_o, basis_o, order,
                                                   cons_o, sig, del_)
            d_pb = st.d_psi_boundary
            sten_p = edge_stencil(m, e, d_pb, gf) if d_pb != st.d_omega else sten_o
            basis_p = self._basis(d_pb, mid, scale)
            cons_p = [make_cauchy_constraint(c, basis_p, ("psi", k), ("dpsi", k))
                      for k, c in enumerate(bd.collocations)]
            self.op_psi_b[e] = build_constrained(m, sten_p, basis_p, order,
                                                 cons_p, sig, del_)
            sten_f = edge_stencil(m, e, st.d_psi, gf) if st.d_psi != d_pb else sten_p
            basis_f = self._basis(st.d_psi, mid, scale)
            self.op_phi_b[e] = build_unconstrained(m, sten_f, basis_f, order, sig, del_)

    # -- static blocks -----------------------------------------------------

    def _edge_geometry(self, e):
        m = self.mesh
        rule = m.edge_quadrature(e, self.n_edge_pts)
        return rule.points, rule.weights, m.edge_normal[e], m.edge_length[e]

    def _psi_hat_affine(self, bd):
        """Cauchy reconstruction coefficients as (stencil map, C_k vector, const)."""
        op = self.op_psi_b[bd.edge]
        n_sten = op.n_stencil
        cmap = op.coefficient_map
        sten_part = cmap[:, :n_sten]
        ck = np.zeros(cmap.shape[0])
        const = np.zeros(cmap.shape[0])
        for col, slot in enumerate(op.external_slots):
            kind, c = slot
            vec = cmap[:, n_sten + col]
            if kind == "psi":
                const += vec * bd.psi_const[c]
                ck += vec * bd.psi_ck[c]
            else:
                const += vec * bd.dpsi_dn[c]
        return sten_part, ck, const

    def condensed_boundary_vorticity(self, bd):
        """Affine expressions of the boundary vorticity point-values from the
        streamfunction Hessian: per collocation point a tuple of
        (psi-stencil row, C_k coefficient, constant)."""
        op_psi = self.op_psi_b[bd.edge]
        sten_part, ck_vec, const_vec = self._psi_hat_affine(bd)
        rows = []
        for c, col in enumerate(bd.collocations):
            h = op_psi.basis.hessian_rows(col.position)
            n = col.normal
            quad = n[0] * n[0] * h[0] + 2.0 * n[0] * n[1] * h[1] + n[1] * n[1] * h[2]
            rows.append((-(quad @ sten_part), -float(quad @ ck_vec),
                         -float(quad @ const_vec) + bd.closure_const[c]))
        return rows

    def _condensed_omega_b(self, bd):
        """Condensation used at assembly: exact point values short-circuit the
        coupling when the run imposes the exact boundary vorticity."""
        if self.settings.exact_boundary_vorticity:
            n_psi = self.op_psi_b[bd.edge].n_stencil
            return [(np.zeros(n_psi), 0.0, float(bd.omega_exact[c]))
                    for c in range(len(bd.collocations))]
        return self.condensed_boundary_vorticity(bd)

    def _omega_hat_b_functional(self, bd, func_rows):
        """Apply coefficient functionals to the condensed omega reconstruction.

        func_rows: (m, n) rows over the omega-basis coefficients.  Returns the
        affine pieces (omega-stencil block, psi-stencil block, C_k column,
        constant column), each with leading dimension m.
        """
        op = self.op_omega_b[bd.edge]
        cmap = op.coefficient_map
        n_sten = op.n_stencil
        omega_block = func_rows @ cmap[:, :n_sten]
        cond = self._cond_cache[bd.edge]
        n_psi = cond[0][0].shape[0] if cond else 0
        psi_block = np.zeros((func_rows.shape[0], n_psi))
        ck = np.zeros(func_rows.shape[0])
        const = np.zeros(func_rows.shape[0])
        for col, slot in enumerate(op.external_slots):
            _, c = slot
            coupling = func_rows @ cmap[:, n_sten + col]
            prow, pck, pconst = cond[c]
            psi_block += np.outer(coupling, prow)
            ck += coupling * pck
            const += coupling * pconst
        return omega_block, psi_block, ck, const

    def _build_static(self):
        m = self.mesh
        st = self.settings
        lay = self.layout
        nu = self.problem.nu
        coo = _Coo()
        rhs = np.zeros(lay.size)

        # cached per-edge data for the convective rebuild
        self._conv_inner = []   # (e, i, j, |e|, zeta, VL, VR, SL, SR)
        self._vel_rows = {}     # e -> (R, |S|) pair for v = grad-perp(phi)
        self._cond_cache = {}

        for e in range(m.n_edges):
            if m.edge_right[e] < 0:
                continue
            i, j = int(m.edge_left[e]), int(m.edge_right[e])
            pts, zeta, n_e, elen = self._edge_geometry(e)

            op_om = self.op_omega_edge[e]
            gradn = n_e[0] * op_om.basis.eval(pts, (1, 0)) + \
                n_e[1] * op_om.basis.eval(pts, (0, 1))
            drow = -nu * elen * (zeta @ gradn) @ op_om.coefficient_map
            cols = op_om.stencil.members
            coo.add(i, cols, drow)
            coo.add(j, cols, -drow)

            op_ps = self.op_psi_edge[e]
            gradn_p = n_e[0] * op_ps.basis.eval(pts, (1, 0)) + \
                n_e[1] * op_ps.basis.eval(pts, (0, 1))
            srow = elen * (zeta @ gradn_p) @ op_ps.coefficient_map
            pcols = lay.n_cells + op_ps.stencil.members
            coo.add(lay.psi_col(i), pcols, srow)
            coo.add(lay.psi_col(j), pcols, -srow)

            self._vel_rows[e] = (op_ps.basis.eval(pts, (0, 1)) @ op_ps.coefficient_map,
                                 -(op_ps.basis.eval(pts, (1, 0)) @ op_ps.coefficient_map),
                                 op_ps.stencil.members)
            op_ci, op_cj = self.op_omega_cell[i], self.op_omega_cell[j]
            VL = op_ci.basis.eval(pts) @ op_ci.coefficient_map
            VR = op_cj.basis.eval(pts) @ op_cj.coefficient_map
            self._conv_inner.append((e, i, j, elen, zeta, VL, VR,
                                     op_ci.stencil.members, op_cj.stencil.members))

        self._conv_boundary = []  # per boundary edge: upwind/downwind blocks
        for bd in self.boundary_data:
            e = bd.edge
            i = int(m.edge_left[e])
            pts, zeta, n_e, elen = self._edge_geometry(e)
            self._cond_cache[e] = self._condensed_omega_b(bd)
            op_ob = self.op_omega_b[e]
            op_pb = self.op_psi_b[e]
            psi_members = op_pb.stencil.members

            # diffusive flux of the constrained vorticity reconstruction
            gradn = n_e[0] * op_ob.basis.eval(pts, (1, 0)) + \
                n_e[1] * op_ob.basis.eval(pts, (0, 1))
            func = -nu * elen * (zeta @ gradn)[None, :]
            om_b, ps_b, ck, const = self._omega_hat_b_functional(bd, func)
            self._add_affine(coo, rhs, i, bd, om_b[0], ps_b[0], ck[0], const[0],
                             op_ob.stencil.members, psi_members)

            # streamfunction flux of the Cauchy reconstruction
            gradn_p = n_e[0] * op_pb.basis.eval(pts, (1, 0)) + \
                n_e[1] * op_pb.basis.eval(pts, (0, 1))
            sten_part, ck_vec, const_vec = self._psi_hat_affine(bd)
            wrow = elen * (zeta @ gradn_p)
            coo.add(lay.psi_col(i), lay.n_cells + psi_members, wrow @ sten_part)
            if bd.loop > 0:
                coo.add(lay.psi_col(i), [lay.constant_col(bd.loop)],
                        [float(wrow @ ck_vec)])
            rhs[lay.psi_col(i)] -= float(wrow @ const_vec)

            op_ph = self.op_phi_b[e]
            self._vel_rows[e] = (op_ph.basis.eval(pts, (0, 1)) @ op_ph.coefficient_map,
                                 -(op_ph.basis.eval(pts, (1, 0)) @ op_ph.coefficient_map),
                                 op_ph.stencil.members)
            op_ci = self.op_omega_cell[i]
            Vcell = op_ci.basis.eval(pts) @ op_ci.coefficient_map
            Vb = op_ob.basis.eval(pts)  # rows over coefficients, applied per iteration
            self._conv_boundary.append((bd, i, elen, zeta, Vcell,
                                        op_ci.stencil.members, Vb))

            # compatibility row: diffusive part and body-force rhs.  With the
            # exact boundary vorticity imposed the condensation coupling to
            # C_k disappears, so the row is replaced by the loop's value
            # consistency condition below instead.
            if bd.loop > 0 and not st.exact_boundary_vorticity:
                row = 2 * lay.n_cells + bd.loop - 1
                om_b, ps_b, ck, const = self._omega_hat_b_functional(bd, func)
                self._add_affine(coo, rhs, None, bd, om_b[0], ps_b[0], ck[0], const[0],
                                 op_ob.stencil.members, psi_members, row=row)
                if self.problem.body_force is not None:
                    fvec = self.problem.body_force(pts)
                    rhs[row] += elen * float(zeta @ (fvec @ m.edge_tangent[e]))
        if st.exact_boundary_vorticity and lay.n_holes > 0:
            self._hole_consistency_rows(coo, rhs)

        # streamfunction rows: |c_i| omega_i coupling; vorticity rows: source
        for i in range(m.n_cells):
            coo.add(lay.psi_col(i), [i], [m.area[i]])
        if self.problem.source_curl is not None:
            order = self.cell_order
            for i in range(m.n_cells):
                rule = m.cell_quadrature(i, order)
                rhs[i] += m.area[i] * float(rule.weights @ self.problem.source_curl(rule.points))

        rows_s, cols_s, vals_s = coo.arrays()
        if self._needs_gauge_pin():
            rows_s, cols_s, vals_s, rhs = self._pin_gauge_rows(rows_s, cols_s,
                                                               vals_s, rhs)
        self._static = (rows_s, cols_s, vals_s)
        self._static_rhs = rhs
        kinds = np.concatenate([np.zeros(lay.n_cells, np.int8),
                                np.ones(lay.n_cells, np.int8),
                                np.full(lay.n_holes, 2, np.int8)])
        self._row_kind = kinds

    def _hole_consistency_rows(self, coo, rhs):
        """Close the hole constants when the boundary vorticity is exact.

        The standard compatibility rows reach C_k through the condensed
        boundary vorticity; with exact point values imposed that coupling is
        empty, so each hole row instead requires the loop's boundary cells to
        match the mean values implied by their anchored reconstructions."""
        m = self.mesh
        lay = self.layout
        by_loop = {}
        for bd in self.boundary_data:
            if bd.loop > 0:
                by_loop.setdefault(bd.loop, []).append(bd)
        for loop, group in sorted(by_loop.items()):
            row = 2 * lay.n_cells + loop - 1
            total = sum(m.edge_length[bd.edge] for bd in group)
            rhs_val = 0.0
            for bd in group:
                w = m.edge_length[bd.edge] / total
                i = int(m.edge_left[bd.edge])
                op = self.op_psi_b[bd.edge]
                mean_row = mean_value_constraint(m, i, op.basis, self.cell_order).rows[0]
                sten_part, ck_vec, const_vec = self._psi_hat_affine(bd)
                coo.add(row, [lay.psi_col(i)], [w])
                coo.add(row, lay.n_cells + op.stencil.members, -w * (mean_row @ sten_part))
                coo.add(row, [lay.constant_col(loop)], [-w * float(mean_row @ ck_vec)])
                rhs_val += w * float(mean_row @ const_vec)
            rhs[row] = rhs_val

    def _needs_gauge_pin(self):
        """The streamfunction level drifts in a null mode whenever no flux
        functional can feel the prescribed-value constraint: linear boundary
        reconstructions have a constant gradient, and midpoint collocation on
        the straight edge (naive/exact placements) makes the quadratic case
        cancel under the symmetric Gauss pairs as well."""
        d_b = self.settings.d_psi_boundary
        on_edge = self.settings.boundary_method in ("naive", "exact")
        return d_b == 1 or (d_b == 2 and on_edge)

    def _pin_gauge_rows(self, rows, cols, vals, rhs):
        """Gauge fixing for the weakly pinned streamfunction level.

        For each loop, the flux balance row of the cell owning the loop's
        longest boundary edge is replaced by the requirement that the loop's
        cells match the mean values implied by their anchored Cauchy
        reconstructions, which re-injects the value datum and keeps the
        system square.
        """
        m = self.mesh
        lay = self.layout
        picked = {}
        by_loop = {}
        for bd in self.boundary_data:
            by_loop.setdefault(bd.loop, []).append(bd)
            L = m.edge_length[bd.edge]
            cur = picked.get(bd.loop)
            if cur is None or L > cur[0] or (L == cur[0] and bd.edge < cur[1].edge):
                picked[bd.loop] = (L, bd)

        drop_rows = set()
        coo = _Coo()
        for loop, (_, bd0) in sorted(picked.items()):
            row = lay.psi_col(int(m.edge_left[bd0.edge]))
            drop_rows.add(row)
            # length-weighted mean of the consistency defects over the loop
            total = sum(m.edge_length[bd.edge] for bd in by_loop[loop])
            rhs_val = 0.0
            for bd in by_loop[loop]:
                w = m.edge_length[bd.edge] / total
                i = int(m.edge_left[bd.edge])
                op = self.op_psi_b[bd.edge]
                mean_row = mean_value_constraint(m, i, op.basis, self.cell_order).rows[0]
                sten_part, ck_vec, const_vec = self._psi_hat_affine(bd)
                coo.add(row, [lay.psi_col(i)], [w])
                coo.add(row, lay.n_cells + op.stencil.members, -w * (mean_row @ sten_part))
                if bd.loop > 0:
                    coo.add(row, [lay.constant_col(bd.loop)],
                            [-w * float(mean_row @ ck_vec)])
                rhs_val += w * float(mean_row @ const_vec)
            rhs[row] = rhs_val

        keep = ~np.isin(rows, np.fromiter(drop_rows, np.int64))
        r2, c2, v2 = coo.arrays()
        return (np.concatenate([rows[keep], r2]), np.concatenate([cols[keep], c2]),
                np.concatenate([vals[keep], v2]), rhs)

    def _add_affine(self, coo, rhs, cell, bd, om_row, ps_row, ck, const,
                    om_members, psi_members, row=None):
        lay = self.layout
        r = row if row is not None else cell
        coo.add(r, om_members, om_row)
        if np.any(ps_row):
            coo.add(r, lay.n_cells + psi_members, ps_row)
        if bd.loop > 0 and ck != 0.0:
            coo.add(r, [lay.constant_col(bd.loop)], [ck])
        rhs[r] -= const

    # -- per-iteration assembly --------------------------------------------

    def velocity_normal_values(self, theta_phi):
        """v . s at every edge quadrature point from the previous iterate."""
        out = {}
        m = self.mesh
        for e, (vx_rows, vy_rows, members) in self._vel_rows.items():
            phi = theta_phi[members]
            n_e = m.edge_normal[e]
            out[e] = n_e[0] * (vx_rows @ phi) + n_e[1] * (vy_rows @ phi)
        return out

    def velocity_point_values(self, theta_phi):
        """Full velocity vectors at edge quadrature points (diagnostics)."""
        out = {}
        for e, (vx_rows, vy_rows, members) in self._vel_rows.items():
            phi = theta_phi[members]
            out[e] = np.column_stack([vx_rows @ phi, vy_rows @ phi])
        return out

    def assemble(self, theta_phi=None):
        lay = self.layout
        rows0, cols0, vals0 = self._static
        rhs = self._static_rhs.copy()

        if self.problem.include_convection:
            if theta_phi is None:
                theta_phi = np.zeros(lay.n_cells)
            vn = self.velocity_normal_values(theta_phi)
            coo = _Coo()
            for e, i, j, elen, zeta, VL, VR, SL, SR in self._conv_inner:
                a = vn[e]
                up = zeta * np.maximum(a, 0.0)
                dn = zeta * np.minimum(a, 0.0)
                rl = elen * (up @ VL)
                rr = elen * (dn @ VR)
                coo.add(i, SL, rl)
                coo.add(i, SR, rr)
                coo.add(j, SL, -rl)
                coo.add(j, SR, -rr)
            for bd, i, elen, zeta, Vcell, Scell, Vb in self._conv_boundary:
                a = vn[bd.edge]
                up = zeta * np.maximum(a, 0.0)
                dn = zeta * np.minimum(a, 0.0)
                coo.add(i, Scell, elen * (up @ Vcell))
                func = elen * (dn @ Vb)[None, :]
                om_b, ps_b, ck, const = self._omega_hat_b_functional(bd, func)
                self._add_affine(coo, rhs, i, bd, om_b[0], ps_b[0], ck[0], const[0],
                                 self.op_omega_b[bd.edge].stencil.members,
                                 self.op_psi_b[bd.edge].stencil.members)
                if bd.loop > 0 and not self.settings.exact_boundary_vorticity:
                    row = 2 * lay.n_cells + bd.loop - 1
                    func = elen * (zeta * a @ Vb)[None, :]
                    om_b, ps_b, ck, const = self._omega_hat_b_functional(bd, func)
                    self._add_affine(coo, rhs, None, bd, om_b[0], ps_b[0], ck[0],
                                     const[0], self.op_omega_b[bd.edge].stencil.members,
                                     self.op_psi_b[bd.edge].stencil.members, row=row)
            rows1, cols1, vals1 = coo.arrays()
            rows = np.concatenate([rows0, rows1])
            cols = np.concatenate([cols0, cols1])
            vals = np.concatenate([vals0, vals1])
        else:
            rows, cols, vals = rows0, cols0, vals0

        mat = sp.coo_matrix((vals, (rows, cols)), shape=(lay.size, lay.size)).tocsr()
        mat.sum_duplicates()
        mat.sort_indices()
        return AffineResidualSystem(mat, rhs, lay, self._row_kind)

    def source_means(self):
        if self.problem.source_curl is None:
            return np.zeros(self.mesh.n_cells)
        return self.mesh.cell_means(self.problem.source_curl, self.cell_order)
