"""Polygonal mesh: loader, geometry, adjacency, and per-entity accessors.

Mesh file format (UTF-8 text)::

    NV NC NBSEG
    x y                      (NV vertex lines)
    nv v1 ... vnv            (NC cell lines, 0-based vertex ids, CCW)
    segment_id count         (NBSEG blocks)
    v_a v_b                  (count boundary-edge lines per block)

Every boundary edge must appear in exactly one block; cells keep at most one
boundary edge.  The mesh is immutable once loaded.
"""

from dataclasses import dataclass

import numpy as np

from .quadrature import (edge_quadrature, polygon_area, polygon_centroid,
                         polygon_quadrature)


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class Cell:
    id: int
    vertex_ids: np.ndarray
    area: float
    centroid: np.ndarray
    char_size: float
    edge_ids: np.ndarray
    neighbor_index_set: np.ndarray


@dataclass(frozen=True)
class InnerEdge:
    id: int
    cell_left: int
    cell_right: int
    length: float
    midpoint: np.ndarray
    unit_normal: np.ndarray   # from left cell to right cell
    unit_tangent: np.ndarray  # (-n_y, n_x)


@dataclass(frozen=True)
class BoundaryEdge:
    id: int
    owner_cell: int
    segment_id: int
    length: float
    midpoint: np.ndarray
    unit_normal: np.ndarray   # outward
    unit_tangent: np.ndarray
    vertex_ids: np.ndarray


class Mesh:
    def __init__(self, xy, cells, boundary_marks):
        """boundary_marks: dict mapping frozenset({va, vb}) -> segment id."""
        self.xy = np.asarray(xy, float)
        if not np.all(np.isfinite(self.xy)):
            raise MeshError("non-finite vertex coordinates")
        self.cells = [np.asarray(c, np.int64) for c in cells]
        self.n_cells = len(self.cells)
        self._build_cells()
        self._build_edges(boundary_marks)
        self._quad_cache = {}

    # -- construction -----------------------------------------------------

    def _build_cells(self):
        areas = np.empty(self.n_cells)
        cents = np.empty((self.n_cells, 2))
        for i, c in enumerate(self.cells):
            verts = self.xy[c]
            a = polygon_area(verts)
            if a < 0.0:  # normalise to CCW
                self.cells[i] = c = c[::-1]
                verts = self.xy[c]
                a = -a
            if a <= 0.0 or not np.isfinite(a):
                raise MeshError(f"cell {i} has non-positive area")
            areas[i] = a
            cents[i] = polygon_centroid(verts)
        self.area = areas
        self.centroid = cents
        self.char_size = np.sqrt(areas)

    def _build_edges(self, boundary_marks):
        edge_map = {}
        for i, c in enumerate(self.cells):
            for k in range(len(c)):
                a, b = int(c[k]), int(c[(k + 1) % len(c)])
                key = (a, b) if a < b else (b, a)
                edge_map.setdefault(key, []).append((i, a, b))
        ev, left, right = [], [], []
        for key, owners in edge_map.items():
            if len(owners) > 2:
                raise MeshError(f"non-manifold edge {key} shared by {len(owners)} cells")
            i, a, b = owners[0]  # oriented as traversed by the first (left) cell
            ev.append((a, b))
            left.append(i)
            right.append(owners[1][0] if len(owners) == 2 else -1)
        self.edge_verts = np.asarray(ev, np.int64)
        self.edge_left = np.asarray(left, np.int64)
        self.edge_right = np.asarray(right, np.int64)
        self.n_edges = len(ev)

        pa = self.xy[self.edge_verts[:, 0]]
        pb = self.xy[self.edge_verts[:, 1]]
        d = pb - pa
        self.edge_length = np.hypot(d[:, 0], d[:, 1])
        if np.any(self.edge_length <= 0):
            raise MeshError("degenerate zero-length edge")
        self.edge_midpoint = 0.5 * (pa + pb)
        # left cell traverses a->b CCW, so the outward normal of the left cell
        # is the clockwise rotation of the edge direction
        tdir = d / self.edge_length[:, None]
        self.edge_normal = np.column_stack([tdir[:, 1], -tdir[:, 0]])
        self.edge_tangent = np.column_stack([-self.edge_normal[:, 1], self.edge_normal[:, 0]])

        self.boundary_edges = np.flatnonzero(self.edge_right < 0)
        self.n_boundary = len(self.boundary_edges)
        self.boundary_index = np.full(self.n_edges, -1, np.int64)
        self.boundary_index[self.boundary_edges] = np.arange(self.n_boundary)

        marks = {frozenset(k): v for k, v in boundary_marks.items()}
        seg = np.empty(self.n_boundary, np.int64)
        for bi, e in enumerate(self.boundary_edges):
            key = frozenset(map(int, self.edge_verts[e]))
            if key not in marks:
                raise MeshError(f"boundary edge {tuple(sorted(key))} carries no segment id")
            seg[bi] = marks[key]
        extra = len(marks) - self.n_boundary
        if extra:
            raise MeshError(f"{extra} marked edges are not boundary edges of the mesh")
        self.boundary_segment = seg

        owners = self.edge_left[self.boundary_edges]
        counts = np.bincount(owners, minlength=self.n_cells)
        if np.any(counts > 1):
            bad = int(np.flatnonzero(counts > 1)[0])
            raise MeshError(f"cell {bad} has more than one boundary edge")

        cell_edges = [[] for _ in range(self.n_cells)]
        for e in range(self.n_edges):
            cell_edges[self.edge_left[e]].append(e)
            if self.edge_right[e] >= 0:
                cell_edges[self.edge_right[e]].append(e)
        self.cell_edges = [np.asarray(v, np.int64) for v in cell_edges]
        neigh = [[] for _ in range(self.n_cells)]
        for e in range(self.n_edges):
            i, j = self.edge_left[e], self.edge_right[e]
            if j >= 0:
                neigh[i].append(j)
                neigh[j].append(i)
        self.cell_neighbors = [np.asarray(sorted(v), np.int64) for v in neigh]

    # -- accessors ---------------------------------------------------------

    def cell(self, i):
        return Cell(i, self.cells[i], float(self.area[i]), self.centroid[i],
                    float(self.char_size[i]), self.cell_edges[i], self.cell_neighbors[i])

    def inner_edge(self, e):
        if self.edge_right[e] < 0:
            raise MeshError(f"edge {e} is a boundary edge")
        return InnerEdge(e, int(self.edge_left[e]), int(self.edge_right[e]),
                         float(self.edge_length[e]), self.edge_midpoint[e],
                         self.edge_normal[e], self.edge_tangent[e])

    def boundary_edge(self, e):
        bi = self.boundary_index[e]
        if bi < 0:
            raise MeshError(f"edge {e} is not a boundary edge")
        return BoundaryEdge(e, int(self.edge_left[e]), int(self.boundary_segment[bi]),
                            float(self.edge_length[e]), self.edge_midpoint[e],
                            self.edge_normal[e], self.edge_tangent[e], self.edge_verts[e])

    def normal_for_cell(self, e, i):
        """Outward unit normal of edge e as seen from cell i (s_ij = -s_ji)."""
        sgn = 1.0 if self.edge_left[e] == i else -1.0
        return sgn * self.edge_normal[e]

    def edge_quadrature(self, e, npts):
        pa = self.xy[self.edge_verts[e, 0]]
        pb = self.xy[self.edge_verts[e, 1]]
        return edge_quadrature(pa, pb, npts)

    def cell_quadrature(self, i, order):
        key = (int(i), int(order))
        rule = self._quad_cache.get(key)
        if rule is None:
            rule = polygon_quadrature(self.xy[self.cells[i]], order, centroid=self.centroid[i])
            self._quad_cache[key] = rule
        return rule

    def cell_means(self, fn, order):
        """Quadrature cell means of a callable fn((m,2) pts) -> (m,) values."""
        out = np.empty(self.n_cells)
        for i in range(self.n_cells):
            rule = self.cell_quadrature(i, order)
            out[i] = np.dot(rule.weights, fn(rule.points))
        return out

    def summary(self):
        return (f"{self.n_cells} cells, {self.n_edges} edges, "
                f"{self.n_boundary} boundary edges, "
                f"{len(np.unique(self.boundary_segment))} boundary segment(s)")


def load_mesh(path):
    with open(path, encoding="utf-8") as fh:
        tokens = fh.read().split()
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(tokens):
            raise MeshError("truncated mesh file")
        out = tokens[pos:pos + n]
        pos += n
        return out

    try:
        nv, nc, nbseg = (int(v) for v in take(3))
        xy = np.array([float(v) for v in take(2 * nv)]).reshape(nv, 2)
        cells = []
        for _ in range(nc):
            k = int(take(1)[0])
            if k < 3:
                raise MeshError("cell with fewer than 3 vertices")
            cells.append(np.array([int(v) for v in take(k)], np.int64))
        marks = {}
        for _ in range(nbseg):
            seg_id, count = (int(v) for v in take(2))
            for _ in range(count):
                va, vb = (int(v) for v in take(2))
                marks[frozenset((va, vb))] = seg_id
    except ValueError as exc:
        raise MeshError(f"malformed mesh file: {exc}") from exc
    if pos != len(tokens):
        raise MeshError("trailing tokens in mesh file")
    if any(c.max() >= nv or c.min() < 0 for c in cells):
        raise MeshError("cell references vertex out of range")
    return Mesh(xy, cells, marks)


def save_mesh(path, xy, cells, marks):
    """Write the text format; marks maps (va, vb) -> segment id."""
    by_seg = {}
    for (va, vb), sid in marks.items():
        by_seg.setdefault(int(sid), []).append((int(va), int(vb)))
    lines = [f"{len(xy)} {len(cells)} {len(by_seg)}"]
    lines += [f"{p[0]:.17g} {p[1]:.17g}" for p in np.asarray(xy, float)]
    lines += [f"{len(c)} " + " ".join(str(int(v)) for v in c) for c in cells]
    for sid in sorted(by_seg):
        pairs = by_seg[sid]
        lines.append(f"{sid} {len(pairs)}")
        lines += [f"{a} {b}" for a, b in pairs]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
