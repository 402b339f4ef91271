import numpy as np
import pytest

from vortiflow.cases import make_case
from vortiflow.formulation import (FluidProblem, FormulationError,
                                   build_boundary_data,
                                   boundary_streamfunction_normal_derivative)
from vortiflow.segments import circle_segment


def test_impermeable_wall_gives_constant_psi(disk_mesh_small, circle_case):
    bdata = build_boundary_data(disk_mesh_small, circle_case.problem(), "rod", 1,
                                exact_fields=circle_case.fields)
    vals = np.array([bd.psi_const[0] for bd in bdata])
    # u.n = 0 on the rotating wall: psi^B is the loop constant (zero here)
    assert np.abs(vals).max() < 1e-12
    # normal derivative is -u.t = -u_E on the circle
    d = np.array([bd.dpsi_dn[0] for bd in bdata])
    assert d == pytest.approx(np.full(len(d), -1.0), abs=1e-10)


def test_cavity_boundary_data(cavity_family):
    case = make_case("cavity")
    bdata = build_boundary_data(cavity_family[0], case.problem(), "rod", 1)
    for bd in bdata:
        assert abs(bd.psi_const[0]) < 1e-12  # homogeneous psi^B everywhere
        col = bd.collocations[0]
        if col.position[1] > -1e-9:  # lid: dpsi/dn = +u(x)
            x = col.position[0]
            expect = ((x - 0.5) ** 4 * (x + 0.5) ** 4) / 0.5**8
            assert bd.dpsi_dn[0] == pytest.approx(expect, abs=1e-12)
            assert bd.closure_const[0] == pytest.approx(0.0, abs=1e-9)
        else:
            assert bd.dpsi_dn[0] == pytest.approx(0.0, abs=1e-12)


def test_mass_flux_violation_detected(disk_mesh_small):
    seg = circle_segment(0, 0, 1.0)

    def leaky(pts):
        pts = np.atleast_2d(pts)
        return pts / np.linalg.norm(pts, axis=1, keepdims=True)  # radial outflow

    prob = FluidProblem(nu=1.0, rho=1.0, segments=[seg], wall_velocity={0: leaky})
    with pytest.raises(FormulationError, match="mass flux"):
        build_boundary_data(disk_mesh_small, prob, "rod", 1)


def test_normal_derivative_sign_rule():
    # lid at y=0 moving with u=(1,0); outward normal (0,1), tangent (-1,0)
    assert boundary_streamfunction_normal_derivative([1.0, 0.0], [-1.0, 0.0]) == 1.0


def test_loop_flux_single_valued(rose_case, rose_family):
    # permeable-in-places rose wall: psi^B from the flux integral must agree
    # with the exact streamfunction trace (both zero on these walls)
    bdata = build_boundary_data(rose_family[0], rose_case.problem(), "rod", 1,
                                exact_fields=rose_case.fields)
    worst = 0.0
    for bd in bdata:
        pos = bd.collocations[0].position
        exact = rose_case.fields.psi(pos[None, :])[0]
        worst = max(worst, abs(bd.psi_const[0] - exact))
    assert worst < 1e-10


def test_closure_constants_reproduce_exact_boundary_vorticity(wannier_case,
                                                              annulus_coarse):
    """Eq. for the wall vorticity with the exact streamfunction Hessian must
    reproduce the exact vorticity at every collocation point; validates the
    local frames, the curvature sign, and the tangential-derivative term."""
    import sympy as sp
    from vortiflow.cases import _X, _Y

    case = wannier_case
    bdata = build_boundary_data(annulus_coarse, case.problem(), "rod", 1,
                                exact_fields=case.fields)
    # analytic second derivatives via finite differences of the exact
    # gradient (grad psi = (-u_y, u_x)), accurate to ~1e-11
    h = 1e-6
    worst = 0.0
    for bd in bdata:
        for c, col in enumerate(bd.collocations):
            p, n = col.position, col.normal
            def dgrad(ax):
                dp = np.zeros(2)
                dp[ax] = h
                return (case.fields.grad_psi((p + dp)[None, :])[0]
                        - case.fields.grad_psi((p - dp)[None, :])[0]) / (2 * h)
            H = np.column_stack([dgrad(0), dgrad(1)])
            omb = -n @ H @ n + bd.closure_const[c]
            exact = case.fields.omega(p[None, :])[0]
            worst = max(worst, abs(omb - exact) / max(abs(exact), 1.0))
    assert worst < 1e-8


def test_rotating_wall_closure_is_curvature_term(disk_mesh_small, circle_case):
    # u_theta = 1 on the unit circle: closure = kappa * u_t = 1
    bdata = build_boundary_data(disk_mesh_small, circle_case.problem(), "rod", 1)
    for bd in bdata[:10]:
        assert bd.closure_const[0] == pytest.approx(1.0, abs=1e-9)


def test_naive_and_exact_collocations(disk_mesh_small, circle_case):
    for method in ("naive", "exact"):
        bdata = build_boundary_data(disk_mesh_small, circle_case.problem(), method, 1,
                                    exact_fields=circle_case.fields)
        bd = bdata[0]
        col = bd.collocations[0]
        e = bd.edge
        assert col.position == pytest.approx(disk_mesh_small.edge_midpoint[e])
        assert col.curvature == 0.0
    with pytest.raises(FormulationError, match="exact"):
        build_boundary_data(disk_mesh_small, circle_case.problem(), "exact", 1)
