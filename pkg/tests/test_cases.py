import numpy as np
import pytest

from vortiflow.cases import available_cases, check_pde_consistency, make_case


def test_unknown_case_lists_available():
    with pytest.raises(ValueError, match="unknown case"):
        make_case("nonsense")
    assert set(available_cases()) == {"circle", "wannier", "rose", "cavity"}


def test_circle_defaults_and_values(circle_case):
    c = circle_case
    assert c.params["r_e"] == 1.0 and c.params["u_e"] == 1.0
    assert c.nu == 1.0 and c.rho == 1.0
    pts = np.array([[0.0, 0.0], [1.0, 0.0]])
    om = c.fields.omega(pts)
    # omega = (2 u_E / r_E)(r^2 + 1) exp(r^2 - r_E^2)
    assert om[0] == pytest.approx(2.0 * np.exp(-1.0), rel=1e-12)
    assert om[1] == pytest.approx(4.0, rel=1e-12)
    # tangential speed at the wall equals u_E
    u = c.fields.velocity(np.array([[1.0, 0.0]]))[0]
    assert u == pytest.approx([0.0, 1.0], abs=1e-12)


def test_circle_printed_source_is_tangential_body_force(circle_case):
    """The published closed-form source for the circular benchmark is the
    tangential body-force component -nu d(omega)/dr, not the scalar curl;
    the scalar curl entering the transport equation is -nu*laplace(omega)."""
    c = circle_case
    r = np.array([0.3, 0.65, 0.9])
    printed = -4.0 * c.nu * r * (r**2 + 2.0) * np.exp(r**2 - 1.0)
    pts = np.column_stack([r, np.zeros_like(r)])
    # -nu domega/dr via the exact body-force field dotted with theta-hat
    fb = c.fields.body_force(pts)
    theta_hat = np.column_stack([-np.zeros_like(r), np.ones_like(r)])
    assert np.sum(fb * theta_hat, axis=1) == pytest.approx(printed, rel=1e-10)
    # and the scalar curl is NOT the printed formula
    f_scalar = c.fields.source_curl(pts)
    assert not np.allclose(f_scalar, printed, rtol=1e-3)


@pytest.mark.parametrize("name", ["circle", "wannier", "rose"])
def test_pde_consistency(name, circle_case, wannier_case, rose_case):
    case = {"circle": circle_case, "wannier": wannier_case, "rose": rose_case}[name]
    assert check_pde_consistency(case, n_points=1000) < 1e-8


def test_wannier_wall_speeds(wannier_case):
    """Recomputing the constants and sampling the walls reproduces the
    prescribed speeds (positive clockwise) at 50 boundary points."""
    c = wannier_case
    th = np.linspace(0.0, 2 * np.pi, 50, endpoint=False)
    for cy, r, speed in [(0.0, 1.0, c.params["u_e"]), (-0.25, 0.5, c.params["u_i"])]:
        pts = np.column_stack([r * np.cos(th), cy + r * np.sin(th)])
        u = c.fields.velocity(pts)
        rad = u[:, 0] * np.cos(th) + u[:, 1] * np.sin(th)
        cw = -(-u[:, 0] * np.sin(th) + u[:, 1] * np.cos(th))
        assert np.abs(rad).max() < 1e-8
        assert cw == pytest.approx(np.full(50, speed), abs=1e-8)


def test_wannier_derived_geometry(wannier_case):
    p = wannier_case.params
    assert p["ecc"] == pytest.approx(0.25)
    assert p["d_i"] == pytest.approx(1.375)
    assert p["d_e"] == pytest.approx(1.625)
    assert p["s"] == pytest.approx(np.sqrt(1.640625))


def test_wannier_harmonic_vorticity(wannier_case):
    # Stokes solution: laplace(omega) = 0, so the source vanishes
    rng = np.random.default_rng(0)
    pts = wannier_case.interior_points(200, rng)
    assert np.abs(wannier_case.fields.source_curl(pts)).max() < 1e-7
    assert wannier_case.include_convection is False


def test_rose_wall_streamfunction_zero(rose_case):
    for seg in rose_case.segments:
        ts = np.linspace(0.0, 1.0, 64, endpoint=False)
        psi = rose_case.fields.psi(seg.point(ts))
        assert np.abs(psi).max() < 1e-12


def test_rose_tangential_speeds(rose_case):
    # u_theta = (u/a)(R_I + R_E - 2 r): ccw inside wall, cw outside wall
    p = rose_case.params
    th = 0.37
    for seg, sign in ((rose_case.segments[1], 1.0), (rose_case.segments[0], -1.0)):
        pos = seg.point(np.array([th / (2 * np.pi)]))[0]
        r = np.hypot(*pos)
        u = rose_case.fields.velocity(pos[None, :])[0]
        that = np.array([-pos[1], pos[0]]) / r
        u_theta = u @ that
        assert np.sign(u_theta) == sign


def test_rose_gauge_anchor(rose_case):
    anchor = rose_case.segments[0].point(np.array([0.0]))[0]
    assert abs(rose_case.fields.psi(anchor[None, :])[0]) < 1e-14


def test_cavity_no_exact_solution():
    c = make_case("cavity", reynolds=1.0)
    assert not c.has_exact
    assert c.nu == pytest.approx(1.0)
    c100 = make_case("cavity", reynolds=100.0)
    assert c100.nu == pytest.approx(0.01)
    # regularised lid profile vanishes at the corners
    lid = c100.wall_velocity[0]
    u = lid(np.array([[0.5, 0.0], [-0.5, 0.0], [0.0, 0.0]]))
    assert u[0] == pytest.approx([0.0, 0.0], abs=1e-14)
    assert u[1] == pytest.approx([0.0, 0.0], abs=1e-14)
    assert u[2] == pytest.approx([1.0, 0.0], rel=1e-14)


def test_cavity_conventional_lid():
    c = make_case("cavity", regularized=False)
    lid = c.wall_velocity[0]
    u = lid(np.array([[0.3, 0.0]]))
    assert u[0] == pytest.approx([1.0, 0.0])
