import math

import numpy as np
import pytest

from legquant.legendrian import (
    LegendrianImmersion,
    adapted_frame,
    builtin_knot,
    builtin_orbit,
    builtin_torus_product,
    find_return_elements,
    is_immersive,
    legendrian_defect,
    riemannian_density,
    torus_grid,
    transversality_check,
)
from legquant.model_geometry import BundlePoint, TorusAction, moment_map
from legquant.symplectic_core import omega0, to_real

CIRCLE = TorusAction(np.array([[1, -1]]), np.array([0]))


def test_knot_values_and_legendrian():
    L = builtin_knot(0.0)
    assert np.allclose(L.map(np.array([0.0])), [1, 0])
    for a in (0.0, 0.7, -2.0):
        assert legendrian_defect(builtin_knot(a), 1024) < 1e-10
        assert is_immersive(builtin_knot(a))
    with pytest.raises(ValueError):
        builtin_knot(4.0)


@pytest.mark.parametrize("a", [0.0, 0.7, -1.2])
def test_knot_projects_to_line_of_given_slope(a):
    pts = builtin_knot(a).map(torus_grid(1, 32))
    ok = np.abs(pts[:, 0]) > 1e-3
    slope = pts[ok, 1] / pts[ok, 0]
    slope = slope[np.abs(slope) > 1e-3]
    # the ratio z2/z1 stays on the real line through e^{ia}
    assert np.allclose(np.imag(slope * np.exp(-1j * a)), 0.0, atol=1e-12)


def test_knot_density_and_reparametrization():
    L = builtin_knot(0.3)
    t = torus_grid(1, 16)
    assert np.allclose(riemannian_density(L, t), 1.0)
    assert np.allclose(riemannian_density(L.reparametrized(2), t), 2.0)


def test_torus_product_value_and_legendrian():
    L = builtin_torus_product(2, [0.0, 0.0])
    assert np.allclose(L.map(np.zeros(2)), np.array([1, 0, 1]) / math.sqrt(2))
    assert legendrian_defect(L, 64) < 1e-8
    assert is_immersive(L)
    assert np.all(riemannian_density(L, torus_grid(2, 16)) > 0)
    L3 = builtin_torus_product(3, [0.1, 0.2, 0.3])
    assert legendrian_defect(L3, 12) < 1e-8


def test_torus_product_projection_is_lagrangian():
    L = builtin_torus_product(2, [0.4, -0.2])
    for t in torus_grid(2, 5):
        J = L.jacobian(t)
        assert abs(omega0(to_real(J[:, 0]), to_real(J[:, 1]))) < 1e-12


def test_finite_difference_jacobian_matches_analytic():
    K = builtin_knot(0.5)
    fd = LegendrianImmersion("fd", 1, K.map)
    t = np.array([0.3])
    assert np.allclose(fd.jacobian(t), K.jacobian(t), atol=1e-7)


# ---------------------------------------------------------------- return elements


def test_return_elements_on_curve():
    els = find_return_elements(BundlePoint.normalized([1, 0]), builtin_knot(0.0))
    assert len(els) == 2
    assert np.allclose(sorted(np.mod([e.t_params[0] for e in els], 2 * np.pi)), [0, np.pi])
    hs = {round(e.h.real) for e in els}
    assert hs == {1, -1}
    for e in els:
        assert e.residual < 1e-9


def test_return_elements_off_curve():
    assert find_return_elements(BundlePoint.normalized([1, 1j]), builtin_knot(0.0)) == []


def test_return_elements_with_action():
    x = BundlePoint.normalized([1, np.exp(0.4j)])
    L = builtin_knot(0.0)
    els = find_return_elements(x, L, CIRCLE)
    assert els
    for e in els:
        assert abs(moment_map(CIRCLE, e.target)[0]) < 1e-9
        y = e.h * CIRCLE.act(e.g_params, x.coords)
        assert np.linalg.norm(y - L.map(e.t_params)) < 1e-9
    # finer seeding finds the same set
    fine = find_return_elements(x, L, CIRCLE, grid=128)
    assert len(fine) == len(els)


# ---------------------------------------------------------------- transversality


def test_transversality_knot_circle():
    rep = transversality_check(builtin_knot(0.0), CIRCLE)
    assert rep.ok and rep.dimension == 0
    ts = sorted(float(p.t[0]) for p in rep.points)
    assert np.allclose(ts, [np.pi / 4, 3 * np.pi / 4, 5 * np.pi / 4, 7 * np.pi / 4])
    for p in rep.points:
        assert abs(p.moment[0]) < 1e-9 and p.principal_angle > 1e-3


def test_transversality_fails_for_orbit():
    orbit = builtin_orbit(CIRCLE, BundlePoint.normalized([1, 1]))
    rep = transversality_check(orbit, CIRCLE)
    assert not rep.ok and rep.failures


def test_transversality_torus_product():
    act = TorusAction(np.array([[1, -1, 0]]), np.array([0]))
    rep = transversality_check(builtin_torus_product(2, [0.0, 0.0]), act, with_frames=False)
    assert rep.ok and rep.dimension == 1
    assert len(rep.points) > 4
    for p in rep.points:
        assert abs(p.moment[0]) < 1e-9


def test_adapted_frame_circle_example():
    chart, frame, orbit = adapted_frame(builtin_knot(0.0), [np.pi / 4], CIRCLE)
    gram = frame.rt.complex_gram()
    assert np.allclose(gram, [[1.0]])
    assert frame.xi == pytest.approx(1 / np.pi)
    assert orbit.stabilizer_order == 2 and orbit.v_eff == pytest.approx(np.pi)
