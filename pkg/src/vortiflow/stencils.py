"""Contiguous stencils grown breadth-first over shared-edge adjacency."""

from dataclasses import dataclass
import heapq
import math

import numpy as np


class StencilError(RuntimeError):
    pass


@dataclass(frozen=True)
class Stencil:
    reference_point: np.ndarray
    members: np.ndarray   # cell ids, sorted by distance from the reference point
    distances: np.ndarray


def basis_size(degree):
    return (degree + 1) * (degree + 2) // 2


def build_stencil(mesh, seeds, ref_point, degree, growth_factor=2.0, extra=0):
    """Grow a stencil of at least ceil(growth_factor * n) + extra cells.

    Expansion is a best-first flood over cell adjacency keyed on centroid
    distance to the reference point (ties broken by cell id), so the member
    set is contiguous by construction while staying distance-sorted.
    """
    n = basis_size(degree)
    target = int(math.ceil(growth_factor * n)) + extra
    ref = np.asarray(ref_point, float)

    heap = []
    seen = set()
    for s in seeds:
        d = float(np.hypot(*(mesh.centroid[s] - ref)))
        heapq.heappush(heap, (d, int(s)))
        seen.add(int(s))
    members, dists = [], []
    while heap and len(members) < target:
        d, i = heapq.heappop(heap)
        members.append(i)
        dists.append(d)
        for j in mesh.cell_neighbors[i]:
            j = int(j)
            if j not in seen:
                seen.add(j)
                heapq.heappush(heap, (float(np.hypot(*(mesh.centroid[j] - ref))), j))
    if len(members) < target:
        raise StencilError(
            f"mesh too small: needed {target} cells for degree {degree}, got {len(members)}")
    members = np.asarray(members, np.int64)
    dists = np.asarray(dists)
    order = np.lexsort((members, dists))
    return Stencil(ref, members[order], dists[order])


def cell_stencil(mesh, i, degree, growth_factor=2.0):
    return build_stencil(mesh, [i], mesh.centroid[i], degree, growth_factor)


def edge_stencil(mesh, e, degree, growth_factor=2.0):
    seeds = [mesh.edge_left[e]]
    if mesh.edge_right[e] >= 0:
        seeds.append(mesh.edge_right[e])
    return build_stencil(mesh, seeds, mesh.edge_midpoint[e], degree, growth_factor)


def stencil_is_connected(mesh, stencil):
    """Graph check: members form one component under shared-edge adjacency."""
    members = set(int(m) for m in stencil.members)
    start = next(iter(members))
    stack, seen = [start], {start}
    while stack:
        i = stack.pop()
        for j in mesh.cell_neighbors[i]:
            j = int(j)
            if j in members and j not in seen:
                seen.add(j)
                stack.append(j)
    return seen == members
