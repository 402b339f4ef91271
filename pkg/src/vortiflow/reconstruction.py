"""Weighted least-squares polynomial reconstruction operators.

Each operator is a literal matrix mapping a data vector (stencil cell means
first, then any external constraint right-hand sides) to the coefficients of
a polynomial in the scaled monomial basis centred at the stencil reference
point.  Constrained variants solve the KKT system of the linearly constrained
least-squares problem, so constraints hold exactly for admissible data.
"""

from dataclasses import dataclass, field

import numpy as np

from .stencils import basis_size


class ReconstructionError(RuntimeError):
    pass


class PolyBasis:
    """Monomials ((x-m_x)/h)^a ((y-m_y)/h)^b, a+b <= d, ordered per the
    double sum a ascending then b ascending; h guards conditioning."""

    def __init__(self, degree, center, scale):
        self.degree = int(degree)
        self.center = np.asarray(center, float)
        self.scale = float(scale)
        self.exponents = np.array([(a, b) for a in range(degree + 1)
                                   for b in range(degree + 1 - a)], np.int64)
        self.n = len(self.exponents)
        assert self.n == basis_size(degree)

    def eval(self, points, derivative=(0, 0)):
        """Rows of basis (or basis derivative) values at points: (m, n)."""
        pts = np.atleast_2d(np.asarray(points, float))
        u = (pts[:, 0] - self.center[0]) / self.scale
        v = (pts[:, 1] - self.center[1]) / self.scale
        dx, dy = derivative
        a = self.exponents[:, 0][None, :]
        b = self.exponents[:, 1][None, :]
        fa = _falling(a, dx)
        fb = _falling(b, dy)
        pa = np.where(a - dx >= 0, u[:, None] ** np.maximum(a - dx, 0), 0.0)
        pb = np.where(b - dy >= 0, v[:, None] ** np.maximum(b - dy, 0), 0.0)
        out = fa * fb * pa * pb / self.scale ** (dx + dy)
        out[:, (self.exponents[:, 0] < dx) | (self.exponents[:, 1] < dy)] = 0.0
        return out

    def value_row(self, point):
        return self.eval(point)[0]

    def gradient_rows(self, point):
        return np.vstack([self.eval(point, (1, 0))[0], self.eval(point, (0, 1))[0]])

    def hessian_rows(self, point):
        """Rows for (d2/dx2, d2/dxdy, d2/dy2)."""
        return np.vstack([self.eval(point, (2, 0))[0],
                          self.eval(point, (1, 1))[0],
                          self.eval(point, (0, 2))[0]])


def _falling(k, d):
    out = np.ones_like(k, float)
    for j in range(d):
        out = out * np.maximum(k - j, 0)
    return out


def weight(distance, sigma=1.0, delta=2.0):
    """Data weight 1 / ((sigma d)^delta + 1); distances pre-normalised by h."""
    return 1.0 / ((sigma * np.asarray(distance, float)) ** delta + 1.0)


@dataclass(frozen=True)
class ConstraintSpec:
    """Linear constraint rows B a = g with symbolic right-hand-side slots.

    rows: (m, n) against the basis coefficients.  rhs_slots: one tag per row,
    either ("stencil_cell", cell_id) folding into that cell's data column, or
    ("external", label) appending a new data column.
    """

    rows: np.ndarray
    rhs_slots: tuple
    kind: str = "generic"


def mean_value_constraint(mesh, cell_id, basis, order):
    rule = mesh.cell_quadrature(cell_id, order)
    row = rule.weights @ basis.eval(rule.points)
    return ConstraintSpec(row[None, :], (("stencil_cell", int(cell_id)),), "mean-value")


def robin_constraint(collocation, basis, alpha, beta, label):
    row = alpha * basis.value_row(collocation.position)
    if beta != 0.0:
        row = row + beta * (collocation.normal @ basis.gradient_rows(collocation.position))
    return ConstraintSpec(row[None, :], (("external", label),), "robin")


def dirichlet_constraint(collocation, basis, label):
    return robin_constraint(collocation, basis, 1.0, 0.0, label)


def make_cauchy_constraint(collocation, basis, value_label, normal_label):
    """Value and normal-derivative rows at one collocation point."""
    vrow = basis.value_row(collocation.position)
    nrow = collocation.normal @ basis.gradient_rows(collocation.position)
    return ConstraintSpec(np.vstack([vrow, nrow]),
                          (("external", value_label), ("external", normal_label)),
                          "cauchy")


class ReconstructionOperator:
    """Affine (here linear) map from data slots to polynomial coefficients."""

    def __init__(self, basis, stencil, coefficient_map, external_slots=()):
        self.basis = basis
        self.stencil = stencil
        self.coefficient_map = coefficient_map  # (n, n_data)
        self.external_slots = tuple(external_slots)
        self.n_stencil = len(stencil.members)

    def data_vector(self, cell_values, external=()):
        data = np.concatenate([np.asarray(cell_values, float)[self.stencil.members],
                               np.asarray(external, float)]) if self.external_slots else \
            np.asarray(cell_values, float)[self.stencil.members]
        return data

    def coefficients(self, cell_values, external=()):
        return self.coefficient_map @ self.data_vector(cell_values, external)

    def evaluate(self, coeffs, points, derivative=(0, 0)):
        return self.basis.eval(points, derivative) @ coeffs

    def functional_rows(self, basis_rows):
        """Compose point functionals (rows over coefficients) with the map."""
        return np.atleast_2d(basis_rows) @ self.coefficient_map


def _design_matrix(mesh, stencil, basis, order):
    rows = np.empty((len(stencil.members), basis.n))
    for k, c in enumerate(stencil.members):
        rule = mesh.cell_quadrature(int(c), order)
        rows[k] = rule.weights @ basis.eval(rule.points)
    return rows


def _weights_for(stencil, basis, sigma, delta):
    return weight(stencil.distances / basis.scale, sigma, delta)


def build_unconstrained(mesh, stencil, basis, quad_order, sigma=1.0, delta=2.0):
    """Normal-equations solve of the weighted mean-value fit."""
    A = _design_matrix(mesh, stencil, basis, quad_order)
    w = _weights_for(stencil, basis, sigma, delta)
    AtW = A.T * w[None, :]
    N = AtW @ A
    try:
        cmap = np.linalg.solve(N, AtW)
    except np.linalg.LinAlgError as exc:
        raise ReconstructionError(
            f"rank-deficient stencil (|S|={len(stencil.members)}, n={basis.n}, "
            f"cond~{np.linalg.cond(N):.2e})") from exc
    return ReconstructionOperator(basis, stencil, cmap)


def build_constrained(mesh, stencil, basis, quad_order, constraints,
                      sigma=1.0, delta=2.0):
    """Lagrange-multiplier KKT solve; returns map over stencil + external slots."""
    A = _design_matrix(mesh, stencil, basis, quad_order)
    w = _weights_for(stencil, basis, sigma, delta)
    B = np.vstack([c.rows for c in constraints])
    slots = [s for c in constraints for s in c.rhs_slots]
    m, n = B.shape
    if len(stencil.members) + m < basis.n:
        raise ReconstructionError("stencil plus constraints underdetermine the basis")

    AtW = A.T * w[None, :]
    K = np.zeros((n + m, n + m))
    K[:n, :n] = 2.0 * (AtW @ A)
    K[:n, n:] = B.T
    K[n:, :n] = B

    members = list(map(int, stencil.members))
    external = [s for s in slots if s[0] == "external"]
    rhs = np.zeros((n + m, len(members) + len(external)))
    rhs[:n, :len(members)] = 2.0 * AtW
    ext_col = len(members)
    for r, slot in enumerate(slots):
        if slot[0] == "stencil_cell":
            try:
                col = members.index(int(slot[1]))
            except ValueError as exc:
                raise ReconstructionError(
                    f"constraint references cell {slot[1]} outside the stencil") from exc
            rhs[n + r, col] = 1.0
        else:
            rhs[n + r, ext_col] = 1.0
            ext_col += 1
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError as exc:
        raise ReconstructionError(
            f"singular KKT system ({m} constraints, cond~{np.linalg.cond(K):.2e})") from exc
    cmap = sol[:n]
    return ReconstructionOperator(basis, stencil, cmap,
                                  external_slots=tuple(s[1] for s in external))
