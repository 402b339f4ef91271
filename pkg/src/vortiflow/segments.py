"""Analytic boundary pieces: parametrisation, frames, curvature, projection.

A physical boundary is a union of closed loops; loop 0 encloses the fluid and
loops 1..K bound holes.  Each loop is one or more parametrised pieces listed
head-to-tail, every piece travelled counter-clockwise with respect to the
enclosed region.  With that orientation the fluid-outward normal is
``n = sigma * (y', -x') / |gamma'|`` with ``sigma = +1`` on loop 0 and ``-1``
on hole loops, the tangent is ``t = (-n_y, n_x)``, and the signed curvature
``kappa = sigma * (x'y'' - y'x'') / |gamma'|^3`` is positive when the centre
of curvature lies inside the fluid.
"""

from dataclasses import dataclass

import numpy as np
import sympy as sp


class ProjectionError(RuntimeError):
    """Raised when Newton projection fails; carries the best candidate found."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class CollocationPoint:
    position: np.ndarray
    normal: np.ndarray
    tangent: np.ndarray
    curvature: float
    t: float
    segment_id: int


class BoundarySegment:
    """One parametrised piece of a boundary loop.

    gamma, d1, d2 are vectorised callables t -> (..., 2) giving the curve and
    its first two parameter derivatives on [t0, t1].
    """

    def __init__(self, seg_id, loop, gamma, d1, d2, t0=0.0, t1=1.0, closed=True):
        self.id = seg_id
        self.loop = loop
        self.is_exterior = loop == 0
        self._gamma = gamma
        self._d1 = d1
        self._d2 = d2
        self.t0 = float(t0)
        self.t1 = float(t1)
        self.closed = bool(closed)
        self.orientation = 1.0 if self.is_exterior else -1.0

    @property
    def period(self):
        return self.t1 - self.t0

    def _wrap(self, t):
        if self.closed:
            return self.t0 + np.mod(t - self.t0, self.period)
        return np.clip(t, self.t0, self.t1)

    def point(self, t):
        return np.asarray(self._gamma(self._wrap(t)), float)

    def velocity(self, t):
        return np.asarray(self._d1(self._wrap(t)), float)

    def acceleration(self, t):
        return np.asarray(self._d2(self._wrap(t)), float)

    def normal(self, t):
        d = self.velocity(t)
        n = np.stack([d[..., 1], -d[..., 0]], axis=-1)
        n /= np.linalg.norm(n, axis=-1, keepdims=True)
        return self.orientation * n

    def tangent(self, t):
        n = self.normal(t)
        return np.stack([-n[..., 1], n[..., 0]], axis=-1)

    def curvature(self, t):
        d1 = self.velocity(t)
        d2 = self.acceleration(t)
        speed = np.linalg.norm(d1, axis=-1)
        return self.orientation * (d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]) / speed**3

    def arc_derivative(self, fn, t, rel_step=1e-4):
        """Derivative of fn along the unit tangent at gamma(t).

        fn maps parameter values (m,) to scalar samples (m,); differentiated
        with a 5-point stencil in the curve parameter (shifted inward near
        the ends of open pieces) and chain-ruled onto arclength.
        """
        h = rel_step * self.period
        t = float(t)
        if self.closed:
            shifts = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
            coeffs = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
        else:
            lo, hi = self.t0 + 2 * h, self.t1 - 2 * h
            tc = min(max(t, lo), hi)
            shifts = (tc - t) / h + np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
            coeffs = _fd_weights(shifts, 0.0)
        dfdt = np.dot(coeffs, fn(t + shifts * h)) / h
        speed = np.linalg.norm(self.velocity(t))
        sense = self.orientation  # gamma' is parallel to orientation * tangent
        return sense * dfdt / speed

    def collocation(self, t):
        t = float(self._wrap(t))
        return CollocationPoint(
            position=self.point(t),
            normal=self.normal(t),
            tangent=self.tangent(t),
            curvature=float(self.curvature(t)),
            t=t,
            segment_id=self.id,
        )

    def sample(self, n):
        ts = np.linspace(self.t0, self.t1, n, endpoint=not self.closed)
        return ts, self.point(ts)

    def project(self, p, capture=None, samples=64, max_iter=50, tol=1e-12):
        """Nearest-point projection of p onto the curve (damped Newton).

        Newton runs on the stationarity g(t) = (gamma - p) . gamma' = 0 seeded
        by coarse sampling; falls back to bisection of the squared distance on
        the bracketing coarse interval when damping stalls.
        """
        p = np.asarray(p, float)
        ts = np.linspace(self.t0, self.t1, samples, endpoint=False) if self.closed \
            else np.linspace(self.t0, self.t1, samples)
        pts = self.point(ts)
        d2s = np.sum((pts - p) ** 2, axis=1)
        k = int(np.argmin(d2s))
        t = float(ts[k])
        if capture is not None and np.sqrt(d2s[k]) > capture:
            raise ProjectionError(f"point {p} beyond capture distance", best=self.collocation(t))

        ptol = tol * max(self.period, 1.0)

        def g_and_dg(tv):
            gam = self.point(tv)
            d1 = self.velocity(tv)
            d2 = self.acceleration(tv)
            r = gam - p
            return float(np.dot(r, d1)), float(np.dot(d1, d1) + np.dot(r, d2))

        def dist2(tv):
            r = self.point(tv) - p
            return float(np.dot(r, r))

        for _ in range(max_iter):
            g, dg = g_and_dg(t)
            if dg == 0.0:
                break
            step = -g / dg
            cur = dist2(t)
            damp = 1.0
            for _ in range(30):
                tn = t + damp * step
                if not self.closed:
                    tn = min(max(tn, self.t0), self.t1)
                if dist2(tn) <= cur + 1e-30 or abs(damp * step) < ptol:
                    break
                damp *= 0.5
            moved = abs(tn - t)
            t = tn
            if moved < ptol:
                return self.collocation(t)
            if not self.closed and (t == self.t0 or t == self.t1):
                gb, _ = g_and_dg(t)
                boundary_ok = (t == self.t0 and gb >= 0.0) or (t == self.t1 and gb <= 0.0)
                if boundary_ok:
                    return self.collocation(t)
        # bisection fallback on the coarse bracket around the best sample
        dt = (self.period / samples) if self.closed else (self.period / (samples - 1))
        lo, hi = ts[k] - dt, ts[k] + dt
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if dist2(mid - 0.25 * (hi - lo)) < dist2(mid + 0.25 * (hi - lo)):
                hi = mid + 0.25 * (hi - lo)
            else:
                lo = mid - 0.25 * (hi - lo)
            if hi - lo < ptol:
                return self.collocation(0.5 * (lo + hi))
        raise ProjectionError(f"projection of {p} did not converge", best=self.collocation(t))


def _fd_weights(shifts, at):
    """Finite-difference weights for the first derivative at `at` (Fornberg)."""
    shifts = np.asarray(shifts, float)
    n = len(shifts)
    V = np.vander(shifts - at, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[1] = 1.0
    return np.linalg.solve(V, rhs)


def curvature_polar(R, dR, d2R):
    """Unsigned curvature magnitude of r = R(theta); caller applies the sign."""
    return np.abs(R**2 + 2.0 * dR**2 - R * d2R) / (R**2 + dR**2) ** 1.5


def segment_from_sympy(seg_id, loop, t, x_expr, y_expr, t0=0.0, t1=1.0, closed=True):
    """Build a segment from sympy expressions x(t), y(t) (CCW orientation)."""
    exprs = []
    for e in (x_expr, y_expr, sp.diff(x_expr, t), sp.diff(y_expr, t),
              sp.diff(x_expr, t, 2), sp.diff(y_expr, t, 2)):
        exprs.append(sp.lambdify(t, e, "numpy"))

    def vec(fx, fy):
        def call(tv):
            tv = np.asarray(tv, float)
            x = np.broadcast_to(np.asarray(fx(tv), float), tv.shape)
            y = np.broadcast_to(np.asarray(fy(tv), float), tv.shape)
            return np.stack([x, y], axis=-1)
        return call

    return BoundarySegment(seg_id, loop, vec(exprs[0], exprs[1]),
                           vec(exprs[2], exprs[3]), vec(exprs[4], exprs[5]),
                           t0=t0, t1=t1, closed=closed)


def circle_segment(seg_id, loop, radius, center=(0.0, 0.0)):
    t = sp.Symbol("t")
    cx, cy = center
    return segment_from_sympy(seg_id, loop, t,
                              cx + radius * sp.cos(2 * sp.pi * t),
                              cy + radius * sp.sin(2 * sp.pi * t))


def polar_segment(seg_id, loop, R_expr, theta, center=(0.0, 0.0)):
    """Closed curve r = R(theta) about `center`, parametrised by t in [0,1]."""
    t = sp.Symbol("t")
    R = R_expr.subs(theta, 2 * sp.pi * t)
    cx, cy = center
    return segment_from_sympy(seg_id, loop, t,
                              cx + R * sp.cos(2 * sp.pi * t),
                              cy + R * sp.sin(2 * sp.pi * t))


def line_segment(seg_id, loop, a, b):
    """Open straight piece from a to b."""
    t = sp.Symbol("t")
    ax, ay = a
    bx, by = b
    return segment_from_sympy(seg_id, loop, t, ax + t * (bx - ax), ay + t * (by - ay),
                              closed=False)
