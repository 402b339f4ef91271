"""Boundary data derived from the prescribed wall velocity.

For every boundary edge this module precomputes, per collocation point:

* the streamfunction value as the flux integral along the loop from its
  anchor, split into a constant part and the coefficient of the loop constant
  C_k (an unknown for hole loops, zero for the outer loop);
* the streamfunction normal derivative  -u_wall . t;
* the constant part of the boundary-vorticity closure
  kappa u_t - d(u.n)/dt, to be combined with the streamfunction Hessian.

Three collocation placements are supported: "rod" projects onto the physical
boundary, "exact" and "naive" collocate on the straight edge, the former
sampling the exact solution there and the latter pulling wall data back from
the projected physical point.
"""

from dataclasses import dataclass

import numpy as np

from .quadrature import _gauss01
from .segments import CollocationPoint


class FormulationError(RuntimeError):
    pass


@dataclass
class FluidProblem:
    nu: float
    rho: float
    segments: list
    wall_velocity: dict           # segment id -> callable (m,2) pts -> (m,2)
    source_curl: object = None    # scalar curl of the body force, f(pts) -> (m,)
    body_force: object = None     # vector body force for compatibility rhs
    include_convection: bool = True

    def loops(self):
        out = {}
        for seg in self.segments:
            out.setdefault(seg.loop, []).append(seg)
        return dict(sorted(out.items()))

    @property
    def n_holes(self):
        return max(self.loops()) if self.segments else 0


class LoopFlux:
    """Cumulative wall mass flux along one loop, piece by piece."""

    def __init__(self, pieces, wall_velocity, panels=256, check_tol=1e-10):
        self.pieces = pieces
        gx, gw = _gauss01(8)
        self._piece_data = []
        total_len = 0.0
        for seg in pieces:
            uw = wall_velocity[seg.id]
            edges = np.linspace(seg.t0, seg.t1, panels + 1)
            integrals = np.empty(panels)
            for p in range(panels):
                integrals[p] = self._panel(seg, uw, edges[p], edges[p + 1], gx, gw)
            cumul = np.concatenate([[0.0], np.cumsum(integrals)])
            self._piece_data.append((seg, uw, edges, cumul, gx, gw))
            ts = np.linspace(seg.t0, seg.t1, 513)
            total_len += np.sum(np.hypot(*np.diff(seg.point(ts), axis=0).T))
        self.piece_totals = [pd[3][-1] for pd in self._piece_data]
        self.net_flux = float(np.sum(self.piece_totals))
        self.length = total_len
        if abs(self.net_flux) > check_tol * max(total_len, 1.0):
            raise FormulationError(
                f"net wall mass flux {self.net_flux:.3e} on loop {pieces[0].loop} "
                "violates the streamfunction existence condition")

    @staticmethod
    def _panel(seg, uw, a, b, gx, gw):
        ts = a + gx * (b - a)
        pts = seg.point(ts)
        un = np.sum(uw(pts) * seg.normal(ts), axis=1)
        speed = np.linalg.norm(seg.velocity(ts), axis=1)
        return (b - a) * np.dot(gw, un * speed)

    def value(self, seg_id, t):
        """Integral of u.n ds from the loop anchor to parameter t on piece seg_id."""
        acc = 0.0
        for k, (seg, uw, edges, cumul, gx, gw) in enumerate(self._piece_data):
            if seg.id != seg_id:
                acc += self.piece_totals[k]
                continue
            idx = int(np.searchsorted(edges, t, side="right") - 1)
            idx = min(max(idx, 0), len(edges) - 2)
            acc += cumul[idx] + self._panel(seg, uw, edges[idx], t, gx, gw)
            return acc
        raise FormulationError(f"segment {seg_id} not on this loop")


@dataclass
class EdgeBoundaryData:
    edge: int
    loop: int
    collocations: list            # CollocationPoint per constraint site
    psi_const: np.ndarray         # constant part of psi^B per collocation
    psi_ck: np.ndarray            # coefficient of C_k per collocation
    dpsi_dn: np.ndarray           # normal-derivative data per collocation
    closure_const: np.ndarray     # kappa u_t - d(u.n)/dt per collocation
    omega_exact: np.ndarray = None


_BARY_TWO = (1.0 / 3.0, 2.0 / 3.0)


def build_boundary_data(mesh, problem, method="rod", collocation_count=1,
                        exact_fields=None, capture_factor=4.0):
    """Per-boundary-edge collocation geometry and constraint data.

    exact_fields, when given, must expose psi(pts), grad_psi(pts), omega(pts)
    and velocity(pts); it is required by the "exact" method and by runs that
    impose the exact boundary vorticity.
    """
    segs = {s.id: s for s in problem.segments}
    loops = problem.loops()
    fluxes = {k: LoopFlux(pieces, problem.wall_velocity) for k, pieces in loops.items()}

    out = []
    for bi, e in enumerate(mesh.boundary_edges):
        sid = int(mesh.boundary_segment[bi])
        seg = segs[sid]
        va, vb = mesh.edge_verts[e]
        pa, pb = mesh.xy[va], mesh.xy[vb]
        capture = capture_factor * mesh.edge_length[e]

        if collocation_count == 1:
            base_pts = [mesh.edge_midpoint[e]]
        elif collocation_count == 2:
            base_pts = [pa + f * (pb - pa) for f in _BARY_TWO]
        else:
            raise FormulationError("collocation_count must be 1 or 2")

        projected = [seg.project(p, capture=capture) for p in base_pts]
        if method == "rod":
            collocs = projected
        elif method in ("exact", "naive"):
            s_ib = mesh.edge_normal[e]
            r_ib = mesh.edge_tangent[e]
            collocs = [CollocationPoint(np.asarray(p, float), s_ib, r_ib, 0.0, pr.t, sid)
                       for p, pr in zip(base_pts, projected)]
        else:
            raise FormulationError(f"unknown boundary method {method!r}")

        n_col = len(collocs)
        psi_const = np.zeros(n_col)
        psi_ck = np.zeros(n_col)
        dpsi_dn = np.zeros(n_col)
        closure = np.zeros(n_col)
        omega_ex = np.zeros(n_col) if exact_fields is not None else None

        uw = problem.wall_velocity[sid]
        flux = fluxes[seg.loop]
        for c, (col, pr) in enumerate(zip(collocs, projected)):
            if method == "exact":
                if exact_fields is None:
                    raise FormulationError("exact method needs exact fields")
                pos = col.position[None, :]
                psi_const[c] = exact_fields.psi(pos)[0]
                dpsi_dn[c] = exact_fields.grad_psi(pos)[0] @ col.normal
                closure[c] = _straight_edge_closure(exact_fields, col, mesh.edge_length[e])
            else:
                # rod evaluates at its own (projected) point; naive pulls the
                # physical-boundary data back onto the edge midpoint
                phys = pr
                psi_const[c] = flux.value(sid, phys.t)
                if seg.loop > 0:
                    psi_ck[c] = 1.0
                u_here = uw(phys.position[None, :])[0]
                dpsi_dn[c] = -u_here @ phys.tangent
                closure[c] = _wall_closure(seg, uw, phys)
            if exact_fields is not None:
                # naive pulls every boundary datum back from the physical
                # boundary; rod and exact sample at their own collocation
                src = pr.position if method == "naive" else col.position
                omega_ex[c] = exact_fields.omega(src[None, :])[0]

        out.append(EdgeBoundaryData(int(e), seg.loop, collocs, psi_const, psi_ck,
                                    dpsi_dn, closure, omega_ex))
    return out


def _wall_closure(seg, uw, colloc):
    """kappa u_t - d(u.n)/dt at a physical-boundary collocation point."""
    u_here = uw(colloc.position[None, :])[0]
    kappa_term = colloc.curvature * (u_here @ colloc.tangent)

    def normal_flux(ts):
        pts = seg.point(ts)
        return np.sum(uw(pts) * seg.normal(ts), axis=1)

    return kappa_term - seg.arc_derivative(normal_flux, colloc.t)


def _straight_edge_closure(fields, colloc, edge_len, rel_step=1e-5):
    """Closure on the surrogate edge: zero curvature, exact-velocity trace."""
    h = rel_step * edge_len
    shifts = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    coeffs = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
    pts = colloc.position[None, :] + (shifts * h)[:, None] * colloc.tangent[None, :]
    g = fields.velocity(pts) @ colloc.normal
    return -np.dot(coeffs, g) / h


def boundary_streamfunction_normal_derivative(u_wall, tangent):
    """Eq. for the Neumann datum: grad(psi^B) . n = -u_wall . t."""
    return -np.asarray(u_wall, float) @ np.asarray(tangent, float)
