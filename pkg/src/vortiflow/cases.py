"""Benchmark flow cases: circular, annular (Wannier), rose-shaped, and the
semielliptical lid-driven cavity.

Exact fields are defined through a sympy streamfunction and differentiated
symbolically, so vorticity, velocity, and sources are consistent with each
other by construction; a finite-difference consistency check still guards the
transcriptions.  The streamfunction gauge is shifted so the outer-wall value
is zero, matching the solver convention that fixes the outer loop constant.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from .formulation import FluidProblem
from .segments import circle_segment, line_segment, polar_segment, segment_from_sympy

_X, _Y = sp.symbols("x y", real=True)


def _lam(expr):
    f = sp.lambdify((_X, _Y), expr, "numpy", cse=True)

    def call(pts):
        pts = np.atleast_2d(np.asarray(pts, float))
        return np.broadcast_to(np.asarray(f(pts[:, 0], pts[:, 1]), float),
                               pts.shape[:1]).copy()
    return call


def _lam_vec(ex, ey):
    fx, fy = _lam(ex), _lam(ey)

    def call(pts):
        return np.column_stack([fx(pts), fy(pts)])
    return call


@dataclass
class ExactFields:
    psi: object
    omega: object
    velocity: object
    grad_psi: object
    source_curl: object
    body_force: object


@dataclass
class ManufacturedCase:
    name: str
    segments: list
    wall_velocity: dict
    nu: float
    rho: float = 1.0
    include_convection: bool = True
    fields: ExactFields = None
    params: dict = field(default_factory=dict)
    seed_hint: np.ndarray = None   # vortex-search seed for reference runs

    @property
    def has_exact(self):
        return self.fields is not None

    def problem(self):
        return FluidProblem(
            nu=self.nu, rho=self.rho, segments=self.segments,
            wall_velocity=self.wall_velocity,
            source_curl=self.fields.source_curl if self.fields else None,
            body_force=self.fields.body_force if self.fields else None,
            include_convection=self.include_convection)

    def interior_points(self, n, rng):
        """Random points inside the domain (rejection over loop polylines)."""
        outer = self.segments[0]
        ts = np.linspace(outer.t0, outer.t1, 720)
        shell = outer.point(ts)
        lo, hi = shell.min(axis=0), shell.max(axis=0)
        holes = [s for s in self.segments if s.loop > 0]
        pts = []
        while len(pts) < n:
            cand = rng.uniform(lo, hi, size=(4 * n, 2))
            keep = _inside_polyline(cand, shell)
            for hseg in holes:
                hs = hseg.point(np.linspace(hseg.t0, hseg.t1, 720))
                keep &= ~_inside_polyline(cand, hs)
            pts.extend(cand[keep][: n - len(pts)])
        return np.asarray(pts)


def _inside_polyline(pts, poly):
    x, y = pts[:, 0], pts[:, 1]
    px, py = poly[:, 0], poly[:, 1]
    qx, qy = np.roll(px, -1), np.roll(py, -1)
    inside = np.zeros(len(pts), bool)
    for k in range(len(poly)):
        cond = (py[k] > y) != (qy[k] > y)
        xs = (qx[k] - px[k]) * (y - py[k]) / (qy[k] - py[k] + 1e-300) + px[k]
        inside ^= cond & (x < xs)
    return inside


def _fields_from_psi(psi, nu, include_convection, gauge_point=None):
    """Symbolic pipeline psi -> (omega, u, f, body force), optionally regauged."""
    if gauge_point is not None:
        psi = psi - psi.subs({_X: gauge_point[0], _Y: gauge_point[1]})
    ux = sp.diff(psi, _Y)
    uy = -sp.diff(psi, _X)
    omega = -(sp.diff(psi, _X, 2) + sp.diff(psi, _Y, 2))
    lap_omega = sp.diff(omega, _X, 2) + sp.diff(omega, _Y, 2)
    if include_convection:
        f = ux * sp.diff(omega, _X) + uy * sp.diff(omega, _Y) - nu * lap_omega
        fbx = ux * sp.diff(ux, _X) + uy * sp.diff(ux, _Y) \
            - nu * (sp.diff(ux, _X, 2) + sp.diff(ux, _Y, 2))
        fby = ux * sp.diff(uy, _X) + uy * sp.diff(uy, _Y) \
            - nu * (sp.diff(uy, _X, 2) + sp.diff(uy, _Y, 2))
    else:
        f = -nu * lap_omega
        fbx = -nu * (sp.diff(ux, _X, 2) + sp.diff(ux, _Y, 2))
        fby = -nu * (sp.diff(uy, _X, 2) + sp.diff(uy, _Y, 2))
    return ExactFields(
        psi=_lam(psi), omega=_lam(omega), velocity=_lam_vec(ux, uy),
        grad_psi=_lam_vec(-uy, ux), source_curl=_lam(f),
        body_force=_lam_vec(fbx, fby))


def _wall_from_exact(fields):
    return lambda pts: fields.velocity(pts)


# -- circular domain -------------------------------------------------------

def make_circle_case(r_e=1.0, u_e=1.0, mu=1.0, rho=1.0, include_convection=False):
    """Swirling manufactured flow in a disk of radius r_e."""
    nu = mu / rho
    r2 = _X**2 + _Y**2
    psi = u_e / (2 * r_e * sp.exp(r_e**2)) * (sp.exp(r_e**2) - sp.exp(r2))
    fields = _fields_from_psi(psi, nu, include_convection, gauge_point=(r_e, 0.0))
    segs = [circle_segment(0, 0, r_e)]
    case = ManufacturedCase(
        name="circle", segments=segs,
        wall_velocity={0: _wall_from_exact(fields)},
        nu=nu, rho=rho, include_convection=include_convection, fields=fields,
        params=dict(r_e=r_e, u_e=u_e))
    return case


# -- annular domain (eccentric rotating cylinders) --------------------------

def wannier_constants(r_i, r_e, u_i, u_e, ecc):
    """Geometry and streamfunction constants for the eccentric-annulus flow.

    The bipolar geometry parameters follow the closed forms; the six
    streamfunction coefficients are recovered from the wall conditions
    (no penetration plus prescribed tangential speed, positive clockwise)
    by a least-squares collocation solve that is exact for this ansatz.
    """
    s = math.sqrt((r_e - r_i - ecc) * (r_e - r_i + ecc)
                  * (r_e + r_i - ecc) * (r_e + r_i + ecc)) / (2 * ecc)
    d_i = (r_e**2 - r_i**2) / (2 * ecc) - ecc / 2
    d_e = (r_e**2 - r_i**2) / (2 * ecc) + ecc / 2

    a = _X**2 + (s + _Y) ** 2
    b = _X**2 + (s - _Y) ** 2
    basis = [sp.log(a / b), _Y * (s + _Y) / a, _Y * (s - _Y) / b, _Y,
             _X**2 + _Y**2 + s**2, _Y * sp.log(a / b)]
    fu = [_lam(sp.diff(p, _Y)) for p in basis]
    fv = [_lam(-sp.diff(p, _X)) for p in basis]

    th = np.linspace(0.0, 2 * np.pi, 24, endpoint=False) + 0.05
    rows, rhs = [], []
    for cy, r, speed in [(d_e, r_e, u_e), (d_i, r_i, u_i)]:
        pts = np.column_stack([r * np.cos(th), cy + r * np.sin(th)])
        nx, ny = np.cos(th), np.sin(th)
        U = np.array([f(pts) for f in fu])
        V = np.array([f(pts) for f in fv])
        rows.append((U * nx + V * ny).T)
        rhs.append(np.zeros(len(th)))
        # positive prescribed speed means clockwise rotation
        rows.append((-U * ny + V * nx).T)
        rhs.append(np.full(len(th), -speed))
    coeffs, *_ = np.linalg.lstsq(np.vstack(rows), np.concatenate(rhs), rcond=None)
    resid = np.linalg.norm(np.vstack(rows) @ coeffs - np.concatenate(rhs))
    if resid > 1e-9:
        raise RuntimeError(f"annulus constants inconsistent (residual {resid:.2e})")
    names = dict(zip("ABCDEF", coeffs))
    names.update(s=s, d_i=d_i, d_e=d_e, basis=basis)
    return names


def make_wannier_case(r_i=0.5, r_e=1.0, u_i=-1.0, u_e=1.0, center=(0.0, -0.25),
                      mu=1.0, rho=1.0, include_convection=False):
    """Stokes flow between eccentric rotating cylinders (exact solution)."""
    nu = mu / rho
    ecc = math.hypot(*center)
    P = wannier_constants(r_i, r_e, u_i, u_e, ecc)
    psi_w = sum(c * e for c, e in zip((P[k] for k in "ABCDEF"), P["basis"]))
    # shift from the solution frame (outer circle centred at (0, d_e)) to the
    # benchmark frame (outer circle at the origin, inner at `center`)
    psi = psi_w.subs({_X: _X, _Y: _Y + P["d_e"]}, simultaneous=True)
    fields = _fields_from_psi(psi, nu, include_convection, gauge_point=(r_e, 0.0))
    segs = [circle_segment(0, 0, r_e), circle_segment(1, 1, r_i, center=center)]
    wall = _wall_from_exact(fields)
    case = ManufacturedCase(
        name="wannier", segments=segs, wall_velocity={0: wall, 1: wall},
        nu=nu, rho=rho, include_convection=include_convection, fields=fields,
        params=dict(r_i=r_i, r_e=r_e, u_i=u_i, u_e=u_e, ecc=ecc, **{
            k: P[k] for k in ("s", "d_i", "d_e", "A", "B", "C", "D", "E", "F")}))
    return case


# -- rose-shaped domain ------------------------------------------------------

def make_rose_case(r_i=0.5, r_e=1.0, alpha_i=8, alpha_e=8, beta_i=None, beta_e=None,
                   u=1.0, a=0.6021, mu=1.0, rho=1.0, include_convection=True):
    """Manufactured flow between two rose-shaped walls (multiply connected)."""
    nu = mu / rho
    beta_i = r_i / 10.0 if beta_i is None else beta_i
    beta_e = r_e / 10.0 if beta_e is None else beta_e
    r = sp.sqrt(_X**2 + _Y**2)
    theta = sp.atan2(_Y, _X)
    R_i = r_i - beta_i + beta_i * sp.cos(alpha_i * theta)
    R_e = r_e - beta_e + beta_e * sp.cos(alpha_e * theta)
    psi = (u / a) * (r - R_i) * (r - R_e)
    fields = _fields_from_psi(psi, nu, include_convection, gauge_point=(r_e, 0.0))

    th = sp.Symbol("theta", real=True)
    segs = [polar_segment(0, 0, r_e - beta_e + beta_e * sp.cos(alpha_e * th), th),
            polar_segment(1, 1, r_i - beta_i + beta_i * sp.cos(alpha_i * th), th)]
    wall = _wall_from_exact(fields)
    case = ManufacturedCase(
        name="rose", segments=segs, wall_velocity={0: wall, 1: wall},
        nu=nu, rho=rho, include_convection=include_convection, fields=fields,
        params=dict(r_i=r_i, r_e=r_e, alpha_i=alpha_i, alpha_e=alpha_e,
                    beta_i=beta_i, beta_e=beta_e, u=u, a=a))
    return case


# -- semielliptical lid-driven cavity ---------------------------------------

def make_cavity_case(a=0.5, b=0.25, u=1.0, reynolds=1.0, rho=1.0, regularized=True):
    """Lid-driven semielliptical cavity; no exact solution (reference mode)."""
    mu = rho * u * (2 * a) / reynolds
    nu = mu / rho
    t = sp.Symbol("t")
    lid = line_segment(0, 0, (a, 0.0), (-a, 0.0))
    arc = segment_from_sympy(1, 0, t, a * sp.cos(sp.pi * (1 + t)),
                             b * sp.sin(sp.pi * (1 + t)), closed=False)

    if regularized:
        def lid_velocity(pts):
            pts = np.atleast_2d(pts)
            prof = u * ((pts[:, 0] - a) ** 4 * (pts[:, 0] + a) ** 4) / a**8
            return np.column_stack([prof, np.zeros(len(pts))])
    else:
        def lid_velocity(pts):
            pts = np.atleast_2d(pts)
            return np.column_stack([np.full(len(pts), u), np.zeros(len(pts))])

    def no_slip(pts):
        pts = np.atleast_2d(pts)
        return np.zeros((len(pts), 2))

    case = ManufacturedCase(
        name="cavity", segments=[lid, arc],
        wall_velocity={0: lid_velocity, 1: no_slip},
        nu=nu, rho=rho, include_convection=True, fields=None,
        params=dict(a=a, b=b, u=u, reynolds=reynolds, regularized=regularized),
        seed_hint=np.array([0.0, -b / 2.0]))
    return case


_FACTORIES = {
    "circle": make_circle_case,
    "wannier": make_wannier_case,
    "annulus": make_wannier_case,
    "rose": make_rose_case,
    "cavity": make_cavity_case,
}


def make_case(name, **params):
    try:
        factory = _FACTORIES[name]
    except KeyError:
        raise ValueError(
            f"unknown case {name!r}; available: {sorted(_FACTORIES)}") from None
    return factory(**params)


def available_cases():
    return sorted(set(_FACTORIES) - {"annulus"})


def check_pde_consistency(case, n_points=1000, step=2e-3, seed=1234):
    """Finite-difference audit of the exact fields; returns the worst defect.

    Verifies grad-perp(psi) = u, laplace(psi) = -omega, and the vorticity
    transport balance against the stored source, all with 4th-order stencils.
    """
    if not case.has_exact:
        return 0.0
    rng = np.random.default_rng(seed)
    pts = case.interior_points(n_points, rng)
    F = case.fields

    def d1_at(f, axis, h):
        acc = 0.0
        for s, w in zip((-2.0, -1.0, 1.0, 2.0), (1.0, -8.0, 8.0, -1.0)):
            q = pts.copy()
            q[:, axis] += s * h
            acc = acc + (w / (12.0 * h)) * f(q)
        return acc

    def d2_at(f, axis, h):
        acc = (-30.0 / (12.0 * h * h)) * f(pts)
        for s, w in zip((-2.0, -1.0, 1.0, 2.0), (-1.0, 16.0, 16.0, -1.0)):
            q = pts.copy()
            q[:, axis] += s * h
            acc = acc + (w / (12.0 * h * h)) * f(q)
        return acc

    def richardson(fd, f, axis):
        coarse = fd(f, axis, step)
        fine = fd(f, axis, 0.5 * step)
        return fine + (fine - coarse) / 15.0

    def d1(f, axis):
        return richardson(d1_at, f, axis)

    def d2(f, axis):
        return richardson(d2_at, f, axis)

    u = F.velocity(pts)
    scale = max(np.abs(u).max(), 1.0)
    worst = np.abs(d1(F.psi, 1) - u[:, 0]).max() / scale
    worst = max(worst, np.abs(-d1(F.psi, 0) - u[:, 1]).max() / scale)

    om = F.omega(pts)
    om_scale = max(np.abs(om).max(), 1.0)
    worst = max(worst, np.abs(d2(F.psi, 0) + d2(F.psi, 1) + om).max() / om_scale)

    f_vals = F.source_curl(pts)
    om_mag = max(np.abs(om).max(), 1.0)
    if case.include_convection or np.abs(f_vals).max() > 1e-6 * case.nu * om_mag:
        lap_om = d2(F.omega, 0) + d2(F.omega, 1)
        if case.include_convection:
            conv = u[:, 0] * d1(F.omega, 0) + u[:, 1] * d1(F.omega, 1)
        else:
            conv = 0.0
        res = conv - case.nu * lap_om - f_vals
        f_scale = max(np.abs(f_vals).max(), 1.0)
        worst = max(worst, np.abs(res).max() / f_scale)
    return float(worst)
