"""Parametrised Legendrian immersions of tori into the sphere model."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import least_squares

from . import settings
from .errors import (
    DegenerateConfigurationError,
    DegenerateReturnSetError,
    DimensionMismatchError,
    SolverError,
)
from .model_geometry import (
    BundlePoint,
    HeisenbergChart,
    OrbitData,
    TorusAction,
    alpha,
    effective_potential,
    heisenberg_chart,
    moment_map,
)
from .symplectic_core import (
    FrameData,
    RealSubspace,
    compute_rt,
    quadratic_forms_sp,
    to_real,
    xi_lambda,
)

log = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


def _fd_jacobian(fn: Callable, t: np.ndarray, h: float) -> np.ndarray:
    d = t.shape[-1]
    cols = []
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        cols.append((fn(t + e) - fn(t - e)) / (2 * h))
    return np.stack(cols, axis=-1)


class LegendrianImmersion:
    """Map from the d-torus (angles in [0, 2 pi)) into the unit sphere.

    Parameters
    ----------
    name : str
    dim : int
        Number of torus parameters.
    map_fn : callable
        ``t`` of shape ``(..., d)`` to points of shape ``(..., n+1)``.
    jac_fn : callable, optional
        ``t`` to derivatives of shape ``(..., n+1, d)``.  Central differences
        are used when omitted.
    f_lambda : callable, optional
        Half-density weight as a function of the parameters; defaults to 1.
    """

    def __init__(
        self,
        name: str,
        dim: int,
        map_fn: Callable[[np.ndarray], np.ndarray],
        jac_fn: Callable[[np.ndarray], np.ndarray] | None = None,
        f_lambda: Callable[[np.ndarray], np.ndarray] | None = None,
        params: dict | None = None,
    ):
        self.name = name
        self.dim = int(dim)
        self._map = map_fn
        self._jac = jac_fn
        self._f = f_lambda
        self.params = dict(params or {})
        probe = np.asarray(map_fn(np.zeros(self.dim)))
        self.n = probe.shape[-1] - 1

    def map(self, t) -> np.ndarray:
        return np.asarray(self._map(np.asarray(t, dtype=float)), dtype=complex)

    def jacobian(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self._jac is not None:
            return np.asarray(self._jac(t), dtype=complex)
        return _fd_jacobian(self.map, t, settings.FD_STEP)

    def second_derivatives(self, t) -> np.ndarray:
        """Array (..., n+1, d, d) by central differences of the Jacobian."""
        t = np.asarray(t, dtype=float)
        return _fd_jacobian(self.jacobian, t, 1e-5)

    def f_lambda(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self._f is None:
            return np.ones(t.shape[:-1], dtype=complex)
        return np.asarray(self._f(t), dtype=complex)

    def point(self, t) -> BundlePoint:
        return BundlePoint(self.map(np.atleast_1d(t)))

    def with_weight(self, f_lambda: Callable | None) -> "LegendrianImmersion":
        return LegendrianImmersion(self.name, self.dim, self._map, self._jac, f_lambda, self.params)

    def reparametrized(self, factor: int) -> "LegendrianImmersion":
        """Precompose with t -> factor * t (a covering when factor is an integer)."""
        f = self._f
        return LegendrianImmersion(
            f"{self.name}*{factor}",
            self.dim,
            lambda t: self._map(factor * t),
            lambda t: factor * self.jacobian(factor * t),
            (lambda t: f(factor * t)) if f is not None else None,
            self.params,
        )

    def __repr__(self) -> str:
        return f"LegendrianImmersion({self.name!r}, dim={self.dim}, n={self.n})"


def builtin_knot(a: float = 0.0) -> LegendrianImmersion:
    """t -> (cos t, e^{ia} sin t) in S^3."""
    if not -np.pi <= a <= np.pi:
        raise ValueError("a must lie in [-pi, pi]")
    ph = np.exp(1j * a)

    def fmap(t):
        t = t[..., 0]
        return np.stack([np.cos(t) + 0j, ph * np.sin(t)], axis=-1)

    def fjac(t):
        t = t[..., 0]
        return np.stack([-np.sin(t) + 0j, ph * np.cos(t)], axis=-1)[..., None]

    return LegendrianImmersion(f"knot(a={a:g})", 1, fmap, fjac, params={"a": float(a)})


def builtin_torus_product(n: int, a) -> LegendrianImmersion:
    """Legendrian n-torus in S^{2n+1} built by iterated joins with the knot.

    L_1(t_1) is the knot with phase a_1, and

        L_m(t_1..t_m) = ( sqrt((m-1)/m) e^{i t_m} L_{m-1},  e^{i a_m} e^{-i (m-1) t_m} / sqrt(m) ).

    Each step keeps the contact form zero: the new angle contributes
    (m-1)/m - (m-1)/m = 0, and the last coordinate makes the map immersive.
    """
    if n < 2:
        raise ValueError("torus products need n >= 2")
    a = np.asarray(a, dtype=float).ravel()
    if a.shape != (n,):
        raise DimensionMismatchError("a must have n entries")
    knot = builtin_knot(float(np.clip(a[0], -np.pi, np.pi)))

    def both(t):
        t = np.asarray(t, dtype=float)
        x = knot.map(t[..., :1])
        J = knot.jacobian(t[..., :1])
        for m in range(2, n + 1):
            tm = t[..., m - 1]
            s = math.sqrt((m - 1) / m)
            c = 1.0 / math.sqrt(m)
            e = np.exp(1j * tm)[..., None]
            last = (np.exp(1j * a[m - 1]) * c * np.exp(-1j * (m - 1) * tm))[..., None]
            newx = np.concatenate([s * e * x, last], axis=-1)
            Jold = np.concatenate([s * e[..., None] * J, np.zeros(J.shape[:-2] + (1, J.shape[-1]))], axis=-2)
            dnew = np.concatenate([1j * s * e * x, -1j * (m - 1) * last], axis=-1)[..., None]
            J = np.concatenate([Jold, dnew], axis=-1)
            x = newx
        return x, J

    return LegendrianImmersion(
        f"torus_product(n={n})",
        n,
        lambda t: both(t)[0],
        lambda t: both(t)[1],
        params={"a": a.tolist()},
    )


def riemannian_density(L: LegendrianImmersion, t) -> np.ndarray:
    """sqrt(det Gram) of the parameter derivatives in the round metric; vectorised."""
    J = L.jacobian(t)
    G = np.real(np.einsum("...ki,...kj->...ij", np.conj(J), J))
    det = np.linalg.det(G)
    if np.any(det <= settings.RANK_TOL**2):
        raise DegenerateConfigurationError("immersion drops rank")
    return np.sqrt(det)


def alpha_pullback(L: LegendrianImmersion, t) -> np.ndarray:
    """alpha(d iota / d t_j) with shape (..., d)."""
    x = L.map(t)
    J = L.jacobian(t)
    return alpha(x[..., None, :], np.swapaxes(J, -1, -2))


def torus_grid(d: int, nodes: int) -> np.ndarray:
    ax = TWO_PI * np.arange(nodes) / nodes
    if d == 0:
        return np.zeros((1, 0))
    return np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)


def legendrian_defect(L: LegendrianImmersion, nodes: int = 64) -> float:
    """Max |alpha pullback| over a uniform grid."""
    return float(np.max(np.abs(alpha_pullback(L, torus_grid(L.dim, nodes)))))


def is_immersive(L: LegendrianImmersion, nodes: int = 64) -> bool:
    J = L.jacobian(torus_grid(L.dim, nodes))
    R = np.concatenate([J.real, J.imag], axis=-2)
    s = np.linalg.svd(R, compute_uv=False)
    return bool(np.min(s[..., -1]) > 1e-8)


# ---------------------------------------------------------------- return elements


@dataclass(frozen=True)
class ReturnElement:
    """(h, g) with h = e^{i theta} and e^{i theta} g.x = iota(t)."""

    theta: float
    g_params: np.ndarray
    t_params: np.ndarray
    target: BundlePoint
    residual: float = 0.0

    @property
    def h(self) -> complex:
        return complex(np.exp(1j * self.theta))


def _periodic_dist(a: np.ndarray, b: np.ndarray) -> float:
    d = np.mod(a - b + np.pi, TWO_PI) - np.pi
    return float(np.max(np.abs(d), initial=0.0))


def _local_maxima(values: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    grid = values.reshape(shape)
    mask = np.ones(shape, dtype=bool)
    for axis in range(len(shape)):
        for shift in (1, -1):
            mask &= grid >= np.roll(grid, shift, axis=axis)
    return np.flatnonzero(mask.ravel())


def _dedup(sols: list[np.ndarray], radius: float) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    for s in sols:
        if all(_periodic_dist(s, o) > radius for o in out):
            out.append(s)
    return out


def _solve_return_problem(
    merit: Callable[[np.ndarray], np.ndarray],
    residual: Callable[[np.ndarray], np.ndarray],
    jac: Callable[[np.ndarray], np.ndarray],
    seed_vars: Callable[[np.ndarray], np.ndarray],
    grid_dim: int,
    grid: int,
    threshold: float = 0.8,
) -> list[np.ndarray]:
    """Seed on a grid via the merit function, then polish with damped least squares.

    ``merit`` maps grid points (N, grid_dim) to values in [0, 1] that equal 1
    exactly at solutions; ``seed_vars`` turns a grid point into the initial
    full variable vector for ``residual``.
    """
    pts = torus_grid(grid_dim, grid)
    vals = np.concatenate([merit(c) for c in np.array_split(pts, max(1, len(pts) // 65536))])
    idx = _local_maxima(vals, (grid,) * grid_dim) if grid_dim else np.array([0])
    idx = idx[vals[idx] > threshold]
    sols = []
    for i in idx:
        v0 = seed_vars(pts[i])
        res = least_squares(residual, v0, jac=jac, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
        r = float(np.max(np.abs(residual(res.x))))
        if r < settings.SOLVER_RESIDUAL_TOL:
            sols.append(np.mod(res.x, TWO_PI))
        else:
            log.debug("seed %s did not converge (residual %.2e)", pts[i], r)
    sols = _dedup(sols, settings.DEDUP_RADIUS)
    for s in sols:
        sv = np.linalg.svd(jac(s), compute_uv=False)
        if sv[-1] < settings.DEGENERACY_TOL:
            raise DegenerateReturnSetError(
                f"solution set is not isolated near {s} (smallest singular value {sv[-1]:.2e})"
            )
    return sols


def find_return_elements(
    x: BundlePoint,
    L: LegendrianImmersion,
    action: TorusAction | None = None,
    grid: int = settings.SEEDS_PER_CIRCLE,
) -> list[ReturnElement]:
    """All (h, g, t) with h g.x = iota(t), sorted by (t, g, theta)."""
    if action is None:
        action = TorusAction.trivial(L.n)
    if action.n != L.n or x.n != L.n:
        raise DimensionMismatchError("point, immersion and action dimensions differ")
    g, d = action.g, L.dim
    xc = x.coords
    W = action.lifted_weights

    def merit(pts):
        gx = action.act(pts[:, :g], xc[None, :])
        y = L.map(pts[:, g:])
        return np.abs(np.sum(gx * np.conj(y), axis=-1)) ** 2

    def unpack(v):
        return v[0], v[1: 1 + g], v[1 + g:]

    def residual(v):
        th, phi, t = unpack(v)
        r = np.exp(1j * th) * action.act(phi, xc) - L.map(t)
        return np.concatenate([r.real, r.imag])

    def jac(v):
        th, phi, t = unpack(v)
        y = np.exp(1j * th) * action.act(phi, xc)
        cols = [1j * y]
        cols += [1j * W[j] * y for j in range(g)]
        Jt = L.jacobian(t)
        cols += [-Jt[:, j] for j in range(d)]
        M = np.stack(cols, axis=1)
        return np.concatenate([M.real, M.imag], axis=0)

    def seed(p):
        gx = action.act(p[:g], xc)
        th = np.angle(np.vdot(gx, L.map(p[g:])))
        return np.concatenate([[th], p])

    sols = _solve_return_problem(merit, residual, jac, seed, g + d, grid)
    out = []
    for s in sols:
        th, phi, t = unpack(s)
        out.append(
            ReturnElement(float(th), phi.copy(), t.copy(), L.point(t), float(np.max(np.abs(residual(s)))))
        )
    out.sort(key=lambda e: (tuple(np.round(e.t_params, 9)), tuple(np.round(e.g_params, 9)), e.theta))
    return out


# ---------------------------------------------------------------- frames and transversality


def tangent_vectors(L: LegendrianImmersion, t) -> np.ndarray:
    """Ambient tangent vectors d iota / d t_j as columns."""
    return L.jacobian(np.atleast_1d(np.asarray(t, float)))


def adapted_frame(
    L: LegendrianImmersion, t, action: TorusAction | None = None
) -> tuple[HeisenbergChart, FrameData, OrbitData | None]:
    """Adapted chart at iota(t) and the frame package there.

    With an action, iota(t) must lie on the zero level; the orbit tangent,
    R/T data, Xi and the quadratic forms S, P are filled in.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = L.point(t)
    J = tangent_vectors(L, t)
    base = heisenberg_chart(x)
    lam_base = RealSubspace.spanned_by(to_real(base.coordinates(J)))
    if lam_base.dim != L.n:
        raise DegenerateConfigurationError("tangent space is not n-dimensional")
    chart = heisenberg_chart(x, lam_base, base)
    n = L.n
    lam = RealSubspace(2 * n, np.vstack([np.zeros((n, n)), np.eye(n)]))
    if action is None or action.g == 0:
        frame = FrameData(lam, lam, RealSubspace(2 * n, np.zeros((2 * n, 0))))
        rt = compute_rt(frame.orbit_tangent, lam)
        forms = quadratic_forms_sp(rt, frame)
        return chart, FrameData(lam, lam, frame.orbit_tangent, rt, 1.0 + 0j, forms), None

    orbit = effective_potential(action, x)
    orb_vecs = to_real(chart.coordinates(action.orbit_tangents(x.coords)))
    orb = RealSubspace.spanned_by(orb_vecs)
    if orb.dim != action.g:
        raise DegenerateConfigurationError("orbit is not locally free at this point")
    _check_transverse(lam, orb, t)
    # T Lambda' = vectors of T Lambda that are Omega-orthogonal to the orbit
    qs = np.eye(n)
    pairing = orb.orthonormal()[:n].T @ qs  # Omega((p_o, q_o), (0, q)) = p_o . q
    _, s, vt = np.linalg.svd(pairing)
    rank = int(np.sum(s > settings.RANK_TOL))
    if rank < action.g:
        raise DegenerateConfigurationError(f"Lambda not transverse to the zero level at t={t}")
    kernel = vt[rank:].T
    lamp = RealSubspace(2 * n, np.vstack([np.zeros((n, kernel.shape[1])), kernel]))
    rt = compute_rt(orb, lam)
    frame = FrameData(lam, lamp, orb)
    forms = quadratic_forms_sp(rt, frame)
    xi = xi_lambda(rt, orbit.v_eff)
    return chart, FrameData(lam, lamp, orb, rt, xi, forms), orbit


def _check_transverse(lam: RealSubspace, orb: RealSubspace, t) -> float:
    s = np.linalg.svd(lam.orthonormal().T @ orb.orthonormal(), compute_uv=False)
    angle = float(np.arccos(np.clip(np.max(s, initial=0.0), -1.0, 1.0)))
    if angle <= settings.PRINCIPAL_ANGLE_MIN:
        raise DegenerateConfigurationError(
            f"T Lambda meets the orbit tangent at t={np.asarray(t).tolist()} (angle {angle:.2e})"
        )
    return angle


@dataclass
class LambdaPrimePoint:
    t: np.ndarray
    x: BundlePoint
    moment: np.ndarray
    principal_angle: float
    chart: HeisenbergChart | None = None
    frame: FrameData | None = None


@dataclass
class TransversalityReport:
    ok: bool
    points: list[LambdaPrimePoint] = field(default_factory=list)
    failures: list[tuple[np.ndarray, str]] = field(default_factory=list)
    dimension: int | None = None

    def raise_if_failed(self) -> None:
        if not self.ok:
            t, why = self.failures[0]
            raise DegenerateConfigurationError(f"transversality fails at t={np.asarray(t).tolist()}: {why}")


def transversality_check(
    L: LegendrianImmersion,
    action: TorusAction,
    grid: int = settings.SEEDS_PER_CIRCLE,
    with_frames: bool = True,
) -> TransversalityReport:
    """Locate Lambda' = Lambda cap (zero level) and test transversality there."""
    d, g = L.dim, action.g
    pts = torus_grid(d, grid)
    phi = np.stack([moment_map(action, x) for x in L.map(pts)])
    if np.max(np.abs(phi)) <= settings.ZERO_LEVEL_TOL:
        return TransversalityReport(
            False, failures=[(pts[0], "Lambda lies inside the zero level (tangential)")], dimension=d
        )

    def dphi(t):
        x = L.map(t)
        J = L.jacobian(t)
        # d|x_i|^2 = 2 Re(conj(x_i) dx_i)
        return action.weights @ (2.0 * np.real(np.conj(x)[:, None] * J))

    # seeds: grid points where the level changes sign within a neighbour cell
    sign_change = np.zeros(len(pts), dtype=bool)
    shaped = phi.reshape((grid,) * d + (g,))
    for j in range(g):
        comp = shaped[..., j]
        near = np.zeros_like(comp, dtype=bool)
        for axis in range(d):
            near |= np.sign(comp) != np.sign(np.roll(comp, -1, axis=axis))
        sign_change = sign_change | near.ravel() if j == 0 else sign_change & near.ravel()
    seeds = pts[sign_change]

    found: list[np.ndarray] = []
    failures: list[tuple[np.ndarray, str]] = []
    for t0 in seeds:
        t = t0.copy()
        for _ in range(60):
            val = moment_map(action, L.map(t))
            if np.max(np.abs(val)) < 1e-14:
                break
            D = dphi(t)
            step = np.linalg.pinv(D) @ val
            t = t - np.clip(step, -0.5, 0.5)
        t = np.mod(t, TWO_PI)
        if np.max(np.abs(moment_map(action, L.map(t)))) < settings.ZERO_LEVEL_TOL:
            found.append(t)
        else:
            log.debug("zero-level projection from %s did not converge", t0)
    found = _dedup(found, settings.DEDUP_RADIUS)
    found.sort(key=lambda v: tuple(v))

    points = []
    for t in found:
        x = L.point(t)
        mom = moment_map(action, x)
        sv = np.linalg.svd(dphi(t), compute_uv=False)
        if sv[-1] <= 1e-8:
            failures.append((t, "moment map restricted to Lambda is not submersive"))
            continue
        J = tangent_vectors(L, t)
        lam = RealSubspace.spanned_by(to_real(J))
        orb = RealSubspace.spanned_by(to_real(action.orbit_tangents(x.coords)))
        try:
            angle = _check_transverse(lam, orb, t)
        except DegenerateConfigurationError as exc:
            failures.append((t, str(exc)))
            continue
        chart = frame = None
        if with_frames:
            chart, frame, _ = adapted_frame(L, t, action)
        points.append(LambdaPrimePoint(t, x, mom, angle, chart, frame))
    return TransversalityReport(not failures and bool(points), points, failures, d - g)


def builtin_orbit(action: TorusAction, x: BundlePoint) -> LegendrianImmersion:
    """The circle orbit phi -> phi.x of a one-parameter action, as a map from S^1."""
    if action.g != 1:
        raise ValueError("orbit immersions need a circle action")
    xc = x.coords
    W = action.lifted_weights[0]

    def fmap(t):
        return np.exp(1j * t[..., :1] * W) * xc

    def fjac(t):
        return (1j * W * np.exp(1j * t[..., :1] * W) * xc)[..., None]

    return LegendrianImmersion("orbit", 1, fmap, fjac)


BUILTINS = {
    "knot": builtin_knot,
    "torus_product": builtin_torus_product,
}
