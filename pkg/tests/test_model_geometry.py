import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from legquant.errors import ChartDomainError, NotInZeroLocusError, NotLagrangianError, NotLocallyFreeError
from legquant.model_geometry import (
    BundlePoint,
    ProjectivePoint,
    TorusAction,
    connection_form,
    displace,
    effective_potential,
    heisenberg_chart,
    hopf_project,
    horizontal_part,
    moment_map,
    orbit_gram,
    random_unitary,
    stabilizer_order,
)
from legquant.symplectic_core import RealSubspace, omega0, to_real

CIRCLE = TorusAction(np.array([[1, -1]]), np.array([0]))


def test_hopf_projection_forgets_the_circle():
    x = BundlePoint.normalized([1, 0])
    assert hopf_project(x).equals(ProjectivePoint(np.array([1, 0])))
    for th in np.linspace(0, 6, 7):
        assert hopf_project(x.rotate(th)).equals(hopf_project(x))
    t = 0.7
    y = hopf_project(BundlePoint.normalized([np.cos(t), np.sin(t)]))
    assert abs(y.coords[1] / y.coords[0] - np.tan(t)) < 1e-12


def test_bundle_point_requires_unit_norm():
    with pytest.raises(ValueError):
        BundlePoint(np.array([1.0, 1.0]))


# ---------------------------------------------------------------- charts


def test_chart_center_and_inverse(rng):
    x0 = BundlePoint.normalized(rng.standard_normal(3) + 1j * rng.standard_normal(3))
    ch = heisenberg_chart(x0)
    assert np.allclose(ch.point(0.0, np.zeros(2)).coords, x0.coords)
    z = 0.1 * (rng.standard_normal(2) + 1j * rng.standard_normal(2))
    th, z2 = ch.inverse(ch.point(0.3, z))
    assert th == pytest.approx(0.3) and np.allclose(z2, z)


def test_connection_form_at_center_is_standard(rng):
    x0 = BundlePoint.normalized(rng.standard_normal(3) + 1j * rng.standard_normal(3))
    a = connection_form(heisenberg_chart(x0), 0.0, np.zeros(2))
    assert a[0] == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(a[1:], 0.0, atol=1e-9)
    # linear part p dq - q dp: a_p = -q, a_q = p
    z = np.array([0.001 + 0.002j, -0.003 + 0.0005j])
    a = connection_form(heisenberg_chart(x0), 0.0, z)
    assert np.allclose(a[1:3], -z.imag, atol=1e-7) and np.allclose(a[3:], z.real, atol=1e-7)


def test_adapted_chart_maps_p_zero_onto_subspace(rng):
    x0 = BundlePoint.normalized([1, 1j, 0.5])
    base = heisenberg_chart(x0)
    U = random_unitary(2, rng)
    lam = RealSubspace.spanned_by(to_real(U))
    ch = heisenberg_chart(x0, lam, base)
    q = rng.standard_normal(2)
    v = ch.tangent_vector(1j * q)
    assert lam.contains(to_real(base.coordinates(v)))


def test_adapted_chart_rejects_non_lagrangian():
    x0 = BundlePoint.normalized([1, 0, 0])
    bad = RealSubspace(4, np.array([[1.0, 0], [0, 0], [0, 1], [0, 0]]))
    with pytest.raises(NotLagrangianError):
        heisenberg_chart(x0, bad)


def test_horizontal_lift_vanishes_to_third_order(rng):
    """theta along the horizontal lift of a curve through the center is O(t^3)."""
    x0 = BundlePoint.normalized(rng.standard_normal(3) + 1j * rng.standard_normal(3))
    ch = heisenberg_chart(x0)
    v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    u = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    ts = np.geomspace(1e-3, 1e-1, 8)
    thetas = []
    for T in ts:
        s, w = np.polynomial.legendre.leggauss(20)
        s, w = 0.5 * T * (s + 1), 0.5 * T * w
        total = 0.0
        for si, wi in zip(s, w):
            z = si * v + si**2 * u
            dz = v + 2 * si * u
            a = connection_form(ch, 0.0, z, h=1e-7)
            total -= wi * (a[1:3] @ dz.real + a[3:] @ dz.imag)
        thetas.append(abs(total))
    slope = np.polyfit(np.log(ts), np.log(thetas), 1)[0]
    assert slope >= 2.9


def test_displace_closed_form():
    ch = heisenberg_chart(BundlePoint.normalized([1, 0]))
    k, w = 40, 0.7
    y = displace(ch, [w], k).coords
    expected = np.array([1, w / math.sqrt(k)]) / math.sqrt(1 + w * w / k)
    assert np.allclose(y / (y[0] / abs(y[0])), expected)
    assert np.allclose(displace(ch, [0.0], k).coords, [1, 0])
    with pytest.raises(ChartDomainError):
        displace(ch, [100.0], 1)


def test_displace_has_preferred_coordinates(rng):
    x0 = BundlePoint.normalized(rng.standard_normal(3) + 1j * rng.standard_normal(3))
    ch = heisenberg_chart(x0)
    w = np.array([0.3 - 0.2j, 0.5j])
    errs = []
    for k in (100, 400, 1600):
        _, z = ch.inverse(displace(ch, w, k))
        errs.append(np.linalg.norm(z - w / math.sqrt(k)))
    assert max(errs) < 1e-12


# ---------------------------------------------------------------- torus actions


def test_moment_map_examples():
    assert moment_map(CIRCLE, BundlePoint.normalized([1, 0]))[0] == pytest.approx(1.0)
    assert moment_map(CIRCLE, BundlePoint.normalized([1, 1j]))[0] == pytest.approx(0.0, abs=1e-15)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=100)
def test_moment_map_invariance(seed):
    rng = np.random.default_rng(seed)
    act = TorusAction(rng.integers(-3, 4, (2, 3)), rng.integers(-2, 3, 2))
    x = BundlePoint.normalized(rng.standard_normal(3) + 1j * rng.standard_normal(3))
    y = np.exp(1j * rng.uniform(0, 7)) * act.act(rng.uniform(0, 7, 2), x.coords)
    assert np.allclose(moment_map(act, y), moment_map(act, x), atol=1e-13)


def test_action_requires_integral_lift():
    with pytest.raises(ValueError):
        TorusAction(np.array([[1, -1]]), np.array([0.5]))


def test_circle_example_orbit_data():
    for s in (0.0, 0.4, 2.0):
        x = BundlePoint.normalized([1, np.exp(1j * s)])
        od = effective_potential(CIRCLE, x)
        assert od.v_eff == pytest.approx(np.pi, rel=1e-12)
        assert od.stabilizer_order == 2
        assert od.haar_base_change_det() * od.v_eff * od.stabilizer_order == pytest.approx(1.0)


def test_fixed_point_errors():
    x = BundlePoint.normalized([1, 0])
    with pytest.raises(NotInZeroLocusError):
        effective_potential(CIRCLE, x)
    with pytest.raises(NotLocallyFreeError):
        stabilizer_order(CIRCLE, x.coords)


def test_stabilizer_against_brute_force(rng):
    for _ in range(30):
        act = TorusAction(rng.integers(-3, 4, (1, 3)))
        x = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        try:
            order = stabilizer_order(act, x)
        except NotLocallyFreeError:
            continue
        grid = 2 * np.pi * np.arange(720) / 720
        y = act.act(grid[:, None], x[None, :])
        fixed = np.abs(np.abs(y @ np.conj(x)) - np.linalg.norm(x) ** 2) < 1e-9
        assert order == int(np.sum(fixed))


def test_orbit_isotropic_on_zero_level(rng):
    act = TorusAction(np.array([[1, 0, -1, 0], [0, 1, 0, -1]]))
    for _ in range(10):
        ph = np.exp(1j * rng.uniform(0, 7, 4))
        x = np.array([1, 1, 1, 1]) / 2 * ph
        assert np.allclose(moment_map(act, x), 0)
        T = act.orbit_tangents(x)
        V = np.stack([horizontal_part(x, T[:, j]) for j in range(2)], axis=1)
        assert abs(np.imag(np.vdot(V[:, 0], V[:, 1]))) < 1e-10


def test_zero_level_is_coisotropic_for_circle_example():
    # the zero level near [1:1] is the curve s -> [1 : e^{is}]; its tangent is
    # symplectically orthogonal to the orbit direction
    x = np.array([1, np.exp(0.3j)]) / math.sqrt(2)
    tangent = horizontal_part(x, np.array([0, 1j * np.exp(0.3j)]) / math.sqrt(2))
    orbit = horizontal_part(x, CIRCLE.orbit_tangents(x)[:, 0])
    assert abs(omega0(to_real(orbit), to_real(tangent))) < 1e-12
    assert np.linalg.norm(orbit) > 0.1


def test_orbit_gram_batched(rng):
    x = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    act = TorusAction(np.array([[1, 0, -1], [0, 2, -1]]))
    G = orbit_gram(act, x)
    assert G.shape == (4, 2, 2)
    assert np.allclose(G[1], orbit_gram(act, x[1]))
