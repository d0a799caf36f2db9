"""The sphere model X = S^{2n+1} in C^{n+1} over CP^n.

Conventions
-----------
* Hermitian product ``<x, y> = sum x_i conj(y_i)``.
* Contact form ``alpha = Im(conj(u) . du)``; on a tangent vector ``v`` at ``y``
  it evaluates to ``Im(y^H v)``.
* The metric on CP^n is the one induced from horizontal vectors, so a tangent
  vector ``v`` at ``y`` has length ``|v - <v, y> y|``.
* Heisenberg chart at ``x0``: ``rho(theta, z) = e^{i theta} U^H (1, Rz) / sqrt(1 + |z|^2)``
  with ``U x0 = e_0``.  In these coordinates the pulled back contact form is
  ``d theta + (p dq - q dp) / (1 + |z|^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from itertools import combinations

import numpy as np

from . import settings
from .errors import (
    ChartDomainError,
    DimensionMismatchError,
    NotInZeroLocusError,
    NotLagrangianError,
    NotLocallyFreeError,
)
from .symplectic_core import RealSubspace, is_lagrangian, to_complex, to_real


@dataclass(frozen=True)
class BundlePoint:
    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=complex).ravel()
        if abs(np.linalg.norm(c) - 1.0) > 1e-9:
            raise ValueError(f"bundle point must have unit norm, got {np.linalg.norm(c)}")
        object.__setattr__(self, "coords", c)

    @classmethod
    def normalized(cls, v) -> "BundlePoint":
        v = np.asarray(v, dtype=complex).ravel()
        nrm = np.linalg.norm(v)
        if nrm == 0:
            raise ValueError("cannot normalise the zero vector")
        return cls(v / nrm)

    @property
    def n(self) -> int:
        return len(self.coords) - 1

    def rotate(self, theta: float) -> "BundlePoint":
        return BundlePoint(np.exp(1j * theta) * self.coords)


@dataclass(frozen=True)
class ProjectivePoint:
    """Point of CP^n stored as a unit representative with a fixed phase."""

    coords: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.coords, dtype=complex).ravel()
        v = v / np.linalg.norm(v)
        idx = int(np.argmax(np.abs(v) > 1e-8))
        v = v * np.exp(-1j * np.angle(v[idx]))
        object.__setattr__(self, "coords", v)

    def equals(self, other: "ProjectivePoint", tol: float = 1e-10) -> bool:
        return bool(abs(1.0 - abs(np.vdot(other.coords, self.coords))) <= tol)

    def lift(self) -> BundlePoint:
        return BundlePoint(self.coords)


def hopf_project(x: BundlePoint) -> ProjectivePoint:
    return ProjectivePoint(x.coords)


def alpha(y: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Contact form at y applied to v; broadcasts over leading axes."""
    return np.imag(np.sum(np.conj(y) * v, axis=-1))


def horizontal_part(y: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Component of v orthogonal (over C) to the unit vector y."""
    return v - np.vdot(y, v) * y


def _unitary_sending_to_e0(x0: np.ndarray) -> np.ndarray:
    m = len(x0)
    q, _ = np.linalg.qr(np.column_stack([x0, np.eye(m, dtype=complex)]))
    q = q[:, :m]
    # qr fixes the first column only up to a phase
    q[:, 0] = x0
    return q.conj().T


@dataclass(frozen=True)
class HeisenbergChart:
    center: BundlePoint
    unitary_frame: np.ndarray
    rotation: np.ndarray

    @property
    def n(self) -> int:
        return self.center.n

    def frame_vectors(self) -> np.ndarray:
        """(n+1) x n matrix F; the horizontal vector with coordinates z is F z."""
        return self.unitary_frame.conj().T[:, 1:] @ self.rotation

    def point(self, theta: float, z) -> BundlePoint:
        return BundlePoint(self.ambient(theta, z))

    def ambient(self, theta, z) -> np.ndarray:
        """Vectorised chart map: theta (...), z (..., n) -> (..., n+1)."""
        z = np.asarray(z, dtype=complex)
        theta = np.asarray(theta, dtype=float)
        zz = z @ self.rotation.T
        lead = np.ones(zz.shape[:-1] + (1,), dtype=complex)
        v = np.concatenate([lead, zz], axis=-1) @ self.unitary_frame.conj()
        nrm = np.sqrt(1.0 + np.sum(np.abs(z) ** 2, axis=-1))
        return (np.exp(1j * theta) / nrm)[..., None] * v

    def coordinates(self, v: np.ndarray) -> np.ndarray:
        """z-coordinates of a horizontal tangent vector at the center."""
        return self.frame_vectors().conj().T @ np.asarray(v, dtype=complex)

    def real_coordinates(self, v: np.ndarray) -> np.ndarray:
        return to_real(self.coordinates(v))

    def tangent_vector(self, z: np.ndarray) -> np.ndarray:
        return self.frame_vectors() @ np.asarray(z, dtype=complex)

    def inverse(self, y: BundlePoint) -> tuple[float, np.ndarray]:
        """(theta, z) with point(theta, z) = y."""
        u = self.unitary_frame @ y.coords
        if abs(u[0]) < 1e-12:
            raise ChartDomainError("point at infinity of the chart")
        theta = float(np.angle(u[0]))
        z = self.rotation.conj().T @ (u[1:] / u[0])
        return theta, z

    def __call__(self, theta: float, z) -> BundlePoint:
        return self.point(theta, z)


def heisenberg_chart(
    x0: BundlePoint,
    adapt_to: RealSubspace | None = None,
    base: HeisenbergChart | None = None,
) -> HeisenbergChart:
    """Chart centred at x0.

    ``adapt_to`` is a Lagrangian subspace written in the real coordinates of
    ``base`` (default: the unrotated chart).  The returned chart maps ``{p = 0}``
    at the origin onto it.
    """
    if base is None:
        base = HeisenbergChart(x0, _unitary_sending_to_e0(x0.coords), np.eye(x0.n, dtype=complex))
    if adapt_to is None:
        return base
    if adapt_to.ambient_dim != 2 * x0.n:
        raise DimensionMismatchError("adapt_to must live in R^{2n}")
    if not is_lagrangian(adapt_to):
        raise NotLagrangianError("adapt_to is not Lagrangian")
    E = adapt_to.complex_basis()
    # new coordinate i e_k must land on E_k, so the rotation sends e_k to -i E_k
    rot = base.rotation @ (-1j * E)
    return HeisenbergChart(x0, base.unitary_frame, rot)


def adapted_chart(x0: BundlePoint, tangent_vectors: np.ndarray) -> HeisenbergChart:
    """Chart at x0 adapted to the real span of ambient horizontal vectors (columns)."""
    base = heisenberg_chart(x0)
    coords = base.coordinates(np.asarray(tangent_vectors, dtype=complex))
    return heisenberg_chart(x0, RealSubspace.spanned_by(to_real(coords)), base)


def displace(chart: HeisenbergChart, w, k: int) -> BundlePoint:
    """The point rho(0, w / sqrt(k))."""
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    if w.shape != (chart.n,):
        raise DimensionMismatchError("w must be a complex n-vector")
    z = w / math.sqrt(k)
    if np.linalg.norm(z) > settings.CHART_RADIUS:
        raise ChartDomainError("displacement leaves the chart domain")
    return chart.point(0.0, z)


def connection_form(chart: HeisenbergChart, theta: float, z, h: float = 1e-6) -> np.ndarray:
    """Coefficients (a_theta, a_p, a_q) of the pulled back contact form at (theta, z).

    Central differences of the chart map; the contact form itself is exact.
    """
    z = np.asarray(z, dtype=complex)
    n = len(z)
    y = chart.ambient(theta, z)
    coeffs = np.empty(2 * n + 1)
    d = (chart.ambient(theta + h, z) - chart.ambient(theta - h, z)) / (2 * h)
    coeffs[0] = alpha(y, d)
    for j in range(n):
        e = np.zeros(n, dtype=complex)
        e[j] = h
        dp = (chart.ambient(theta, z + e) - chart.ambient(theta, z - e)) / (2 * h)
        dq = (chart.ambient(theta, z + 1j * e) - chart.ambient(theta, z - 1j * e)) / (2 * h)
        coeffs[1 + j] = alpha(y, dp)
        coeffs[1 + n + j] = alpha(y, dq)
    return coeffs


@dataclass(frozen=True)
class TorusAction:
    """Torus T^g acting on C^{n+1} by x_i -> exp(i sum_j phi_j (W_ji - shift_j)) x_i.

    The shifted weights must be integers so that the action lifts to the
    sphere; the projective action depends only on ``weights``.
    """

    weights: np.ndarray
    shift: np.ndarray | None = None

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.weights))
        if W.size and not np.allclose(W, np.round(W)):
            raise ValueError("weights must be integers")
        W = np.round(W).astype(int)
        s = np.zeros(W.shape[0]) if self.shift is None else np.atleast_1d(np.asarray(self.shift, float))
        if s.shape != (W.shape[0],):
            raise DimensionMismatchError("shift must have one entry per torus factor")
        lifted = W - s[:, None]
        if not np.allclose(lifted, np.round(lifted), atol=1e-12):
            raise ValueError("weights minus shift must be integers for the action to lift to X")
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "shift", s)

    @classmethod
    def trivial(cls, n: int) -> "TorusAction":
        return cls(np.zeros((0, n + 1), dtype=int))

    @property
    def g(self) -> int:
        return self.weights.shape[0]

    @property
    def n(self) -> int:
        return self.weights.shape[1] - 1

    @property
    def lifted_weights(self) -> np.ndarray:
        return np.round(self.weights - self.shift[:, None]).astype(int)

    def phases(self, phi) -> np.ndarray:
        """Diagonal of the unitary for torus angles phi (..., g) -> (..., n+1)."""
        phi = np.asarray(phi, dtype=float)
        if self.g == 0:
            return np.ones(phi.shape[:-1] + (self.n + 1,), dtype=complex)
        return np.exp(1j * (phi @ self.lifted_weights))

    def act(self, phi, x: np.ndarray) -> np.ndarray:
        return self.phases(phi) * x

    def orbit_tangents(self, x: np.ndarray) -> np.ndarray:
        """(n+1) x g matrix of infinitesimal generators d/dphi_j at x."""
        return (1j * self.lifted_weights * np.asarray(x)[None, :]).T


def moment_map(action: TorusAction, x: BundlePoint | np.ndarray) -> np.ndarray:
    c = x.coords if isinstance(x, BundlePoint) else np.asarray(x)
    return action.weights @ (np.abs(c) ** 2) - action.shift


def _integer_det(M: np.ndarray) -> int:
    d = np.linalg.det(M.astype(float))
    r = int(round(d))
    if abs(d - r) > 1e-6:
        raise ArithmeticError("integer determinant not recovered exactly")
    return r


def stabilizer_order(action: TorusAction, m: ProjectivePoint | np.ndarray) -> int:
    """Order of the stabiliser of m in T^g acting on CP^n.

    phi fixes [x] iff (w_i - w_i0) . phi is in 2 pi Z for all i in the support of
    x.  With D the matrix of those difference rows, the stabiliser is finite iff
    rank D = g, and its order is the gcd of the g x g minors of D.
    """
    c = m.coords if isinstance(m, ProjectivePoint) else np.asarray(m)
    g = action.g
    if g == 0:
        return 1
    support = np.flatnonzero(np.abs(c) > 1e-10)
    W = action.weights.T[support]
    D = W[1:] - W[0]
    if D.shape[0] < g or np.linalg.matrix_rank(D.astype(float)) < g:
        raise NotLocallyFreeError("stabiliser is infinite (orbit not locally free)")
    minors = [_integer_det(D[list(rows)]) for rows in combinations(range(D.shape[0]), g)]
    return reduce(math.gcd, (abs(v) for v in minors))


def orbit_gram(action: TorusAction, x: np.ndarray) -> np.ndarray:
    """Gram matrix in CP^n of the generators d/dphi_j at [x]; x may be batched (..., n+1)."""
    x = np.asarray(x, dtype=complex)
    V = 1j * action.lifted_weights * x[..., None, :]
    c = np.sum(V * np.conj(x)[..., None, :], axis=-1)
    H = V - c[..., None] * x[..., None, :]
    return np.real(np.einsum("...ik,...jk->...ij", np.conj(H), H))


@dataclass(frozen=True)
class OrbitData:
    base_point: ProjectivePoint
    v_eff: float
    stabilizer_order: int
    orbit_tangent: RealSubspace
    generator_gram: np.ndarray

    def haar_base_change_det(self) -> float:
        """|det A| for A sending a unit-mass-Haar orthonormal basis of the Lie
        algebra to an orthonormal basis of the orbit tangent space.

        With angles in [0, 2 pi), orthonormal Lie algebra vectors are
        2 pi d/dphi_j, so |det A| = 1 / ((2 pi)^g sqrt(det Gram)).
        """
        g = self.generator_gram.shape[0]
        return 1.0 / ((2 * np.pi) ** g * math.sqrt(np.linalg.det(self.generator_gram)))


def effective_potential(
    action: TorusAction,
    m: ProjectivePoint | BundlePoint,
    nodes: int = settings.ORBIT_QUAD_NODES,
) -> OrbitData:
    """Orbit volume of G.m in CP^n together with stabiliser data."""
    x = m.coords
    pm = m if isinstance(m, ProjectivePoint) else hopf_project(m)
    if np.max(np.abs(moment_map(action, x)), initial=0.0) > settings.ZERO_LEVEL_TOL:
        raise NotInZeroLocusError("point is not on the zero level of the moment map")
    order = stabilizer_order(action, x)
    gram0 = orbit_gram(action, x)
    g = action.g
    if g and np.linalg.eigvalsh(gram0)[0] <= settings.RANK_TOL:
        raise NotLocallyFreeError("orbit tangents are linearly dependent")

    if g:
        grid = np.stack(
            np.meshgrid(*([2 * np.pi * np.arange(nodes) / nodes] * g), indexing="ij"), axis=-1
        ).reshape(-1, g)
        total = 0.0
        for chunk in np.array_split(grid, max(1, len(grid) // 4096)):
            dets = np.linalg.det(orbit_gram(action, action.act(chunk, x[None, :])))
            total += float(np.sum(np.sqrt(np.maximum(dets, 0.0))))
        volume = total * (2 * np.pi / nodes) ** g
    else:
        volume = 1.0
    chart = heisenberg_chart(BundlePoint(x))
    tangent = RealSubspace.spanned_by(to_real(chart.coordinates(action.orbit_tangents(x))))
    return OrbitData(pm, volume / order, order, tangent, gram0)


def random_unitary(m: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


__all__ = [
    "BundlePoint",
    "ProjectivePoint",
    "HeisenbergChart",
    "TorusAction",
    "OrbitData",
    "hopf_project",
    "heisenberg_chart",
    "adapted_chart",
    "displace",
    "connection_form",
    "moment_map",
    "stabilizer_order",
    "effective_potential",
    "orbit_gram",
    "alpha",
    "horizontal_part",
    "random_unitary",
    "to_complex",
]
