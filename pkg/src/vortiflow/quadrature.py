"""Gauss-Legendre quadrature on straight edges and convex polygonal cells."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class QuadratureRule:
    """Points and weights; weights sum to one, measure scaling applied by caller."""

    points: np.ndarray   # (m, 2)
    weights: np.ndarray  # (m,)
    formal_order: int

    def integrate(self, values, measure):
        return measure * np.dot(self.weights, values)


@lru_cache(maxsize=64)
def _gauss01(npts):
    """Gauss-Legendre nodes/weights on [0, 1], weights summing to 1."""
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=64)
def _triangle_ref_rule(order):
    """Rule on the reference triangle (0,0),(1,0),(0,1), exact to total degree `order`.

    Built as a Duffy-collapsed tensor Gauss rule; all weights positive and
    sum to 1 (the reference area 1/2 is applied by the caller).
    """
    m = max(1, (order + 3) // 2)  # 2m - 2 >= order+1 margin for the collapsed direction
    xu, wu = _gauss01(m)
    xv, wv = _gauss01(m)
    U, V = np.meshgrid(xu, xv, indexing="ij")
    # x = u, y = u*v maps the unit square onto triangle (0,0),(1,0),(1,1);
    # shear to (0,0),(1,0),(0,1): x = u(1-v), y = u*v, Jacobian u.
    X = U * (1.0 - V)
    Y = U * V
    W = np.outer(wu * xu, wv)
    W = W / W.sum()
    pts = np.column_stack([X.ravel(), Y.ravel()])
    return pts, W.ravel()


def edge_rule(npts):
    """Rule on a reference edge parametrised by [0, 1]."""
    if npts < 1:
        raise ValueError("edge quadrature needs at least one point")
    x, w = _gauss01(npts)
    pts = np.column_stack([x, np.zeros_like(x)])
    return QuadratureRule(pts, w.copy(), formal_order=2 * npts)


def edge_quadrature(a, b, npts):
    """Map a Gauss-Legendre rule onto the straight edge from a to b.

    |e| * sum(w_r f(q_r)) approximates the line integral of f over the edge.
    """
    x, w = _gauss01(npts)
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    pts = a[None, :] + x[:, None] * (b - a)[None, :]
    return QuadratureRule(pts, w.copy(), formal_order=2 * npts)


def triangle_quadrature(v0, v1, v2, order):
    """Rule over a physical triangle, exact for polynomials of total degree <= order."""
    ref_pts, ref_w = _triangle_ref_rule(order)
    v0 = np.asarray(v0, float)
    v1 = np.asarray(v1, float)
    v2 = np.asarray(v2, float)
    pts = v0 + ref_pts[:, :1] * (v1 - v0) + ref_pts[:, 1:] * (v2 - v0)
    return QuadratureRule(pts, ref_w.copy(), formal_order=order + 1)


def _polygon_is_convex(verts):
    n = len(verts)
    cross = []
    for k in range(n):
        a, b, c = verts[k], verts[(k + 1) % n], verts[(k + 2) % n]
        u, v = b - a, c - b
        cross.append(u[0] * v[1] - u[1] * v[0])
    cross = np.asarray(cross)
    scale = np.abs(cross).max() + 1e-300
    return np.all(cross >= -1e-12 * scale)


def polygon_quadrature(verts, order, centroid=None):
    """Fan a convex polygon into triangles about its centroid and compose rules.

    Returns a rule whose weights sum to 1; integrals are weights-dot-values
    times the polygon area.
    """
    verts = np.asarray(verts, float)
    n = len(verts)
    if n < 3:
        raise ValueError("polygon needs at least 3 vertices")
    if n > 3 and not _polygon_is_convex(verts):
        raise ValueError("cell quadrature requires a convex polygon")
    if n == 3:
        rule = triangle_quadrature(verts[0], verts[1], verts[2], order)
        return rule
    if centroid is None:
        centroid = polygon_centroid(verts)
    pts, wts = [], []
    total = 0.0
    for k in range(n):
        v1, v2 = verts[k], verts[(k + 1) % n]
        u, v = v1 - centroid, v2 - centroid
        area = 0.5 * abs(u[0] * v[1] - u[1] * v[0])
        sub = triangle_quadrature(centroid, v1, v2, order)
        pts.append(sub.points)
        wts.append(sub.weights * area)
        total += area
    return QuadratureRule(np.vstack(pts), np.concatenate(wts) / total, order + 1)


def polygon_area(verts):
    verts = np.asarray(verts, float)
    x, y = verts[:, 0], verts[:, 1]
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


def polygon_centroid(verts):
    verts = np.asarray(verts, float)
    x, y = verts[:, 0], verts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    cx = np.sum((x + xn) * cross) / (6.0 * area)
    cy = np.sum((y + yn) * cross) / (6.0 * area)
    return np.array([cx, cy])
