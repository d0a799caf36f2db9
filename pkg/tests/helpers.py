"""Random admissible configurations and quadrature oracles shared by the tests."""

import numpy as np
from numpy.polynomial.legendre import leggauss

from legquant.symplectic_core import RealSubspace, compute_rt


def random_orbit_frame(rng, n, g, t_scale=1.0):
    """Adapted-frame subspaces (Lambda, Lambda', orbit) for a random isotropic orbit.

    Lambda is {p = 0}.  The orbit is spanned by (R0 r, T0 R0 r) with T0
    symmetric, which makes it isotropic; Lambda' is the part of Lambda that is
    symplectically orthogonal to it.
    """
    R0 = rng.standard_normal((n, g))
    T0 = rng.standard_normal((n, n)) * t_scale
    T0 = 0.5 * (T0 + T0.T)
    orb = RealSubspace.spanned_by(np.vstack([R0, T0 @ R0]))
    lam = RealSubspace(2 * n, np.vstack([np.zeros((n, n)), np.eye(n)]))
    u, s, vt = np.linalg.svd(R0.T)
    ker = vt[g:].T
    lamp = RealSubspace(2 * n, np.vstack([np.zeros((n, n - g)), ker]))
    return lam, lamp, orb, compute_rt(orb, lam)


def gauss_box(dim, nodes=80, half_width=8.0):
    x, w = leggauss(nodes)
    x, w = x * half_width, w * half_width
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    pts = np.stack([gr.ravel() for gr in grids], axis=-1)
    wts = np.ones(len(pts))
    for gw in np.meshgrid(*([w] * dim), indexing="ij"):
        wts = wts * gw.ravel()
    return pts, wts


def gaussian_quadrature(A, b, nodes=80):
    """Integral of exp(-u^t A u - i u^t b) over R^g by tensor Gauss-Legendre on a box."""
    g = A.shape[0]
    pts, wts = gauss_box(g, nodes)
    expo = -np.einsum("ni,ij,nj->n", pts, A, pts) - 1j * pts @ b
    return complex(np.sum(wts * np.exp(expo)))


def sphere_monomial_integral(alpha, beta, n, nodes=48):
    """Integral of z^alpha conj(z)^beta over S^{2n+1} against Euclidean surface measure.

    Coordinates z_j = sqrt(s_j) e^{i phi_j} with s on the simplex turn the
    surface measure into 2^{-n} ds dphi.  The phase integrals are done exactly
    and the simplex integral by a collapsed Gauss-Legendre product rule.
    """
    alpha, beta = np.asarray(alpha), np.asarray(beta)
    if np.any(alpha != beta):
        return 0.0
    x, w = leggauss(nodes)
    x, w = 0.5 * (x + 1), 0.5 * w
    # Duffy map of the unit cube onto the n-simplex
    total = 0.0
    grids = np.meshgrid(*([x] * n), indexing="ij")
    wg = np.meshgrid(*([w] * n), indexing="ij")
    u = [gr.ravel() for gr in grids]
    wt = np.ones_like(u[0]) if n else np.ones(1)
    for gw in wg:
        wt = wt * gw.ravel()
    s = []
    rest = np.ones_like(wt)
    for j in range(n):
        s.append(rest * u[j])
        wt = wt * rest ** 1
        rest = rest * (1 - u[j])
    s.append(rest)
    # Jacobian of the Duffy map: prod_j rest_before_j
    f = np.ones_like(wt)
    for j in range(n + 1):
        f = f * s[j] ** alpha[j]
    total = float(np.sum(wt * f))
    return total * (2 * np.pi) ** (n + 1) / 2**n
