import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from meshgen import generate_mesh, generate_mesh_file  # noqa: E402

from vortiflow.cases import make_case  # noqa: E402
from vortiflow.mesh import load_mesh  # noqa: E402

_CACHE = Path(__file__).parent / "_cache"
_CACHE.mkdir(exist_ok=True)


def cached_mesh(name, loops, target_cells, seed):
    """Generate-or-load a mesh file by name; cached across test runs."""
    path = _CACHE / f"{name}.msh"
    if path.exists():
        try:
            return load_mesh(path)
        except Exception:
            path.unlink()
    return generate_mesh_file(path, loops, target_cells, seed=seed)


@pytest.fixture(scope="session")
def circle_case():
    return make_case("circle")


@pytest.fixture(scope="session")
def wannier_case():
    return make_case("wannier")


@pytest.fixture(scope="session")
def rose_case():
    return make_case("rose")


@pytest.fixture(scope="session")
def disk_mesh_small(circle_case):
    """~500-cell disk mesh (reconstruction exactness scale)."""
    return cached_mesh("disk500", [[circle_case.segments[0]]], 500, seed=3)


@pytest.fixture(scope="session")
def disk_mesh_coarse(circle_case):
    return cached_mesh("disk250", [[circle_case.segments[0]]], 250, seed=4)


@pytest.fixture(scope="session")
def circle_family(circle_case):
    """Paper-scale circle meshes: about 1.1k / 2.5k / 5.4k cells."""
    loops = [[circle_case.segments[0]]]
    return [cached_mesh(f"circle{n}", loops, n, seed=3)
            for n in (1100, 2500, 5400)]


@pytest.fixture(scope="session")
def annulus_family(wannier_case):
    loops = [[wannier_case.segments[0]], [wannier_case.segments[1]]]
    return [cached_mesh(f"annulus{n}", loops, n, seed=11)
            for n in (1000, 2000, 4300)]


@pytest.fixture(scope="session")
def annulus_coarse(wannier_case):
    loops = [[wannier_case.segments[0]], [wannier_case.segments[1]]]
    return cached_mesh("annulus300", loops, 300, seed=12)


@pytest.fixture(scope="session")
def rose_family(rose_case):
    loops = [[rose_case.segments[0]], [rose_case.segments[1]]]
    return [cached_mesh(f"rose{n}", loops, n, seed=21)
            for n in (2200, 4500, 9000)]


@pytest.fixture(scope="session")
def cavity_family():
    case = make_case("cavity")
    loops = [case.segments]
    return [cached_mesh(f"cavity{n}", loops, n, seed=31)
            for n in (1050, 2100, 4200)]


@pytest.fixture(scope="session")
def cavity_fine():
    case = make_case("cavity")
    loops = [case.segments]
    return cached_mesh("cavity8400", loops, 8400, seed=31)


@pytest.fixture(scope="session")
def unit_square_mesh():
    """Unit square triangulation, all four sides marked as segment 0."""
    return _square_mesh_single_bedge(8)


def _square_mesh_single_bedge(n):
    """Unit-square triangulation whose corner cells are split so that every
    cell keeps at most one boundary edge."""
    from vortiflow.mesh import Mesh
    xs = np.linspace(0.0, 1.0, n + 1)
    pts = [(x, y) for y in xs for x in xs]
    idx = lambda i, j: j * (n + 1) + i  # noqa: E731
    cells = []
    extra = {}

    def centroid_point(i, j):
        key = (i, j)
        if key not in extra:
            extra[key] = len(pts)
            pts.append(((xs[i] + xs[i + 1]) / 2.0, (xs[j] + xs[j + 1]) / 2.0))
        return extra[key]

    corner_squares = {(0, 0), (n - 1, 0), (0, n - 1), (n - 1, n - 1)}
    for j in range(n):
        for i in range(n):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            if (i, j) in corner_squares:
                m = centroid_point(i, j)
                cells += [[a, b, m], [b, c, m], [c, d, m], [d, a, m]]
            else:
                cells += [[a, b, c], [a, c, d]]
    marks = {}
    for i in range(n):
        marks[frozenset((idx(i, 0), idx(i + 1, 0)))] = 0
        marks[frozenset((idx(i, n), idx(i + 1, n)))] = 0
        marks[frozenset((idx(0, i), idx(0, i + 1)))] = 0
        marks[frozenset((idx(n, i), idx(n, i + 1)))] = 0
    return Mesh(np.asarray(pts, float), cells, marks)
