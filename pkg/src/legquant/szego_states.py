"""Explicit level-k Szego kernels on the sphere model and the states they produce.

Volume normalisation
--------------------
The sphere carries ``dvol = (Euclidean surface measure) / (2 pi)``, of total
mass ``pi^n / n!``.  With this choice the reproducing kernel of degree-k holomorphic polynomials is

    Pi_k(x, y) = c_{k,n} <x, y>^k,    c_{k,n} = (k + n)! / (k! pi^n),

which is ``(k + 1) / pi`` for n = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from . import settings
from .errors import QuadratureConvergenceError
from .legendrian import LegendrianImmersion, riemannian_density, torus_grid
from .model_geometry import BundlePoint, TorusAction

SPHERE_MEASURE_SCALE = 1.0 / (2 * np.pi)


@dataclass(frozen=True)
class SzegoKernel:
    n: int

    def constant(self, k: int) -> float:
        return float(np.exp(gammaln(k + self.n + 1) - gammaln(k + 1) - self.n * np.log(np.pi)))

    def __call__(self, k: int, x: BundlePoint, y: BundlePoint) -> complex:
        return self.constant(k) * complex(np.vdot(y.coords, x.coords)) ** k


def kernel_eval(k: int, x: BundlePoint, y: BundlePoint) -> complex:
    if k < 0:
        raise ValueError("level must be non-negative")
    return SzegoKernel(x.n)(k, x, y)


def node_count(k: int, d: int) -> int:
    return max(settings.MIN_QUAD_NODES, settings.QUAD_NODES_PER_SQRT_K * math.ceil(math.sqrt(k)) * d)


@dataclass
class StateSequence:
    """Values of a state at a fixed probe for a range of levels k."""

    ks: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.ks = np.asarray(self.ks, dtype=int)
        self.values = np.asarray(self.values, dtype=complex)
        if self.ks.shape != self.values.shape:
            raise ValueError("ks and values must have the same length")

    def __len__(self) -> int:
        return len(self.ks)

    def select(self, mask) -> "StateSequence":
        return StateSequence(self.ks[mask], self.values[mask], dict(self.meta))


@dataclass(frozen=True)
class _Nodes:
    points: np.ndarray  # (N, n+1) complex
    weights: np.ndarray  # (N,) complex, includes f_lambda and the density


def _legendrian_nodes(L: LegendrianImmersion, nodes: int) -> _Nodes:
    t = torus_grid(L.dim, nodes)
    w = L.f_lambda(t) * riemannian_density(L, t) * (2 * np.pi / nodes) ** L.dim
    return _Nodes(L.map(t), w)


def _u_from_nodes(ks, nd: _Nodes, ys: np.ndarray, n: int) -> np.ndarray:
    """c_k sum_j <y, iota_j>^k w_j for each y in ys (M, n+1) and k in ks -> (len(ks), M)."""
    ks = np.atleast_1d(ks)
    out = np.zeros((len(ks), len(ys)), dtype=complex)
    kern = SzegoKernel(n)
    # chunk over probe points to keep the base matrix small
    step = max(1, 2**22 // max(1, len(nd.points)))
    for s in range(0, len(ys), step):
        base = ys[s: s + step] @ np.conj(nd.points).T
        for i, k in enumerate(ks):
            out[i, s: s + step] = kern.constant(int(k)) * (base ** int(k)) @ nd.weights
    return out


def compute_u_k(
    L: LegendrianImmersion,
    k: int,
    x: BundlePoint,
    nodes: int | None = None,
    check: bool = False,
) -> complex:
    """u_k(x): periodic trapezoid of Pi_k(x, iota(t)) f_lambda(t) D_Lambda(t)."""
    N = nodes or node_count(k, L.dim)
    nd = _legendrian_nodes(L, N)
    val = complex(_u_from_nodes([k], nd, x.coords[None, :], L.n)[0, 0])
    if check:
        val2 = compute_u_k(L, k, x, nodes=2 * N)
        # off the orbit the exact value is tiny and both sums are round-off of
        # size eps * c_k * sum |w|; compare against that bound instead
        bound = SzegoKernel(L.n).constant(k) * float(np.sum(np.abs(nd.weights)))
        _check_doubling(val, val2, k, scale=settings.ROUNDOFF_SCALE * bound)
    return val


def _check_doubling(a: complex, b: complex, k: int, scale: float | None = None) -> None:
    ref = max(abs(b), scale or 0.0, 1e-300)
    if abs(a - b) > settings.CONVERGENCE_RTOL * ref:
        raise QuadratureConvergenceError(f"node doubling changed the value at k={k}: {a} vs {b}")


def u_k_sequence(L: LegendrianImmersion, ks, x: BundlePoint, nodes: int | None = None) -> StateSequence:
    ks = np.asarray(list(ks), dtype=int)
    N = nodes or node_count(int(ks.max()), L.dim)
    vals = _u_from_nodes(ks, _legendrian_nodes(L, N), x.coords[None, :], L.n)[:, 0]
    return StateSequence(ks, vals, {"legendrian": L.name, "probe": x.coords.tolist(), "nodes": N})


def group_node_count(k: int, action: TorusAction, varpi=None) -> int:
    """Trapezoid nodes per torus factor that make the varpi-projection exact.

    ``u_k(act(-phi) y)`` is a trigonometric polynomial in phi whose frequencies
    lie in ``[k min_j w_j, k max_j w_j]`` for the lifted weights w.  A frequency m
    aliases onto varpi when ``m - varpi`` is a multiple of the node count, so
    the count must exceed the largest such distance.  Far from the zero level
    those high frequencies carry most of the mass, which is why a sqrt(k) rule
    is not enough for pairings or off-level probes.
    """
    W = action.lifted_weights
    vp = np.zeros(action.g) if varpi is None else np.atleast_2d(np.asarray(varpi, dtype=float))
    vp = np.atleast_2d(vp)
    hi = k * W.max(axis=1)[None, :] - vp
    lo = vp - k * W.min(axis=1)[None, :]
    exact = int(np.ceil(np.max(np.maximum(hi, lo), initial=0.0))) + 1
    return max(node_count(k, max(action.g, 1)), exact)


def _group_nodes(g: int, nodes: int) -> np.ndarray:
    return torus_grid(g, nodes)


def u_k_varpi_sequence(
    L: LegendrianImmersion,
    action: TorusAction,
    varpi,
    ks,
    x: BundlePoint,
    nodes: int | None = None,
    group_nodes: int | None = None,
) -> StateSequence:
    """Torus average of chi_varpi(g^{-1}) u_k(g^{-1} x) against unit-mass Haar measure."""
    ks = np.asarray(list(ks), dtype=int)
    varpi = np.atleast_1d(np.asarray(varpi, dtype=float))
    if varpi.shape != (action.g,):
        raise ValueError("varpi must have one entry per torus factor")
    kmax = int(ks.max())
    N = nodes or node_count(kmax, L.dim)
    NG = group_nodes or group_node_count(kmax, action, varpi)
    phi = _group_nodes(action.g, NG)
    ys = action.act(-phi, x.coords[None, :])
    chi = np.exp(-1j * phi @ varpi)
    u = _u_from_nodes(ks, _legendrian_nodes(L, N), ys, L.n)
    vals = (u @ chi) / len(phi)
    meta = {
        "legendrian": L.name,
        "probe": x.coords.tolist(),
        "varpi": varpi.tolist(),
        "nodes": N,
        "group_nodes": NG,
    }
    return StateSequence(ks, vals, meta)


def compute_u_k_varpi(
    L: LegendrianImmersion,
    action: TorusAction,
    varpi,
    k: int,
    x: BundlePoint,
    nodes: int | None = None,
    group_nodes: int | None = None,
    check: bool = False,
) -> complex:
    """u_{k,varpi}(x); only a torus average is needed since u_k is already circle-equivariant."""
    val = complex(u_k_varpi_sequence(L, action, varpi, [k], x, nodes, group_nodes).values[0])
    if check:
        N = nodes or node_count(k, L.dim)
        NG = group_nodes or group_node_count(k, action, varpi)
        val2 = compute_u_k_varpi(L, action, varpi, k, x, 2 * N, 2 * NG)
        # equivariant components can vanish identically; compare on the scale of u_k
        _check_doubling(val, val2, k, scale=abs(compute_u_k(L, k, x, N)))
    return val


def hermitian_product(
    L: LegendrianImmersion,
    Sigma: LegendrianImmersion,
    k: int,
    action: TorusAction | None = None,
    varpi=None,
    nodes: int | None = None,
) -> complex:
    """(u, v) = integral over Lambda of f_lambda conj(v) dens_Lambda, with v the state of Sigma."""
    return complex(pairing_sequence(L, Sigma, [k], action, varpi, nodes).values[0])


def pairing_sequence(
    L: LegendrianImmersion,
    Sigma: LegendrianImmersion,
    ks,
    action: TorusAction | None = None,
    varpi=None,
    nodes: int | None = None,
    group_nodes: int | None = None,
) -> StateSequence:
    ks = np.asarray(list(ks), dtype=int)
    N = nodes or node_count(int(ks.max()), L.dim)
    lam = _legendrian_nodes(L, N)
    vals = np.zeros(len(ks), dtype=complex)
    if action is None or action.g == 0:
        v = _u_from_nodes(ks, _legendrian_nodes(Sigma, N), lam.points, L.n)
    else:
        varpi = np.atleast_1d(np.asarray(varpi if varpi is not None else np.zeros(action.g), float))
        NG = group_nodes or group_node_count(int(ks.max()), action, varpi)
        phi = _group_nodes(action.g, NG)
        chi = np.exp(-1j * phi @ varpi)
        sig = _legendrian_nodes(Sigma, N)
        v = np.zeros((len(ks), len(lam.points)), dtype=complex)
        for j, p in enumerate(phi):
            ys = action.act(-p, lam.points)
            v += chi[j] * _u_from_nodes(ks, sig, ys, L.n)
        v /= len(phi)
    vals = np.conj(v) @ lam.weights
    meta = {"legendrian": L.name, "sigma": Sigma.name, "nodes": N}
    if action is not None:
        meta["varpi"] = np.atleast_1d(varpi).tolist() if varpi is not None else None
    return StateSequence(ks, vals, meta)
