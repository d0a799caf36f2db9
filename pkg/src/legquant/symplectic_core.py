"""Symplectic linear algebra on C^n identified with R^n (+) R^n.

A real 2n-vector is laid out as ``(p, q)`` and corresponds to ``z = p + i q``.
The standard symplectic form is ``Omega0(u, v) = p_u . q_v - q_u . p_v``, which
equals ``Im(conj(z_u) . z_v)``.  Adapted frames put the Lagrangian tangent
space at ``{p = 0}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import settings
from .errors import (
    DegenerateConfigurationError,
    DimensionMismatchError,
    NotLagrangianError,
    SingularMatrixError,
)


def omega_matrix(n: int) -> np.ndarray:
    """Matrix J0 with ``Omega0(u, v) = u @ J0 @ v``."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


def omega0(u: np.ndarray, v: np.ndarray) -> float:
    n = len(u) // 2
    return float(u[:n] @ v[n:] - u[n:] @ v[:n])


def to_real(z: np.ndarray) -> np.ndarray:
    """Complex n-vector (or n x k matrix) to real 2n layout (p, q)."""
    z = np.asarray(z, dtype=complex)
    return np.concatenate([z.real, z.imag], axis=0)


def to_complex(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = v.shape[0] // 2
    return v[:n] + 1j * v[n:]


def det_inv_sqrt(A: np.ndarray) -> complex:
    r"""``det(A)^{-1/2}`` on the branch continuous from positive-definite real part.

    For complex symmetric ``A`` with ``Re A > 0`` every eigenvalue has positive
    real part (``v^H A v = \lambda |v|^2``), so the product of principal square
    roots of the eigenvalues is continuous on that convex set and positive on
    real positive-definite matrices.  Every ``det^{-1/2}`` in the library goes
    through this routine.
    """
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    if A.size == 0:
        return 1.0 + 0.0j
    lam = np.linalg.eigvals(A)
    if np.min(np.abs(lam)) <= settings.RANK_TOL * max(1.0, np.max(np.abs(lam))):
        raise SingularMatrixError("matrix is numerically singular")
    return complex(np.prod(1.0 / np.sqrt(lam)))


def _orthonormal_columns(B: np.ndarray, tol: float = settings.RANK_TOL) -> np.ndarray:
    """Orthonormal basis for the column span of B (rank decided by SVD)."""
    if B.shape[1] == 0:
        return B.copy()
    u, s, _ = np.linalg.svd(B, full_matrices=False)
    rank = int(np.sum(s > tol * max(1.0, s[0])))
    return u[:, :rank]


@dataclass(frozen=True)
class RealSubspace:
    """Linear subspace of R^{ambient_dim} given by independent basis columns."""

    ambient_dim: int
    basis: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.ndim == 1:
            b = b[:, None]
        if b.size == 0:
            b = np.zeros((self.ambient_dim, 0))
        if b.shape[0] != self.ambient_dim:
            raise DimensionMismatchError(
                f"basis rows {b.shape[0]} != ambient dimension {self.ambient_dim}"
            )
        if b.shape[1] > 0:
            s = np.linalg.svd(b, compute_uv=False)
            if s[-1] <= settings.RANK_TOL * max(1.0, s[0]):
                raise DegenerateConfigurationError("basis vectors are linearly dependent")
        object.__setattr__(self, "basis", b)

    @classmethod
    def spanned_by(cls, vectors: np.ndarray) -> "RealSubspace":
        """Span of the columns of ``vectors``; dependent columns are dropped."""
        v = np.asarray(vectors, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        return cls(v.shape[0], _orthonormal_columns(v))

    @classmethod
    def from_complex(cls, vectors: np.ndarray) -> "RealSubspace":
        """Real span of complex n-vectors (columns)."""
        v = np.asarray(vectors, dtype=complex)
        if v.ndim == 1:
            v = v[:, None]
        return cls.spanned_by(to_real(v))

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def n(self) -> int:
        return self.ambient_dim // 2

    def orthonormal(self) -> np.ndarray:
        if self.dim == 0:
            return self.basis
        q, _ = np.linalg.qr(self.basis)
        return q

    def projector(self) -> np.ndarray:
        q = self.orthonormal()
        return q @ q.T

    def contains(self, v: np.ndarray, tol: float = 1e-9) -> bool:
        v = np.asarray(v, dtype=float)
        return bool(np.linalg.norm(v - self.projector() @ v) <= tol * max(1.0, np.linalg.norm(v)))

    def complex_basis(self) -> np.ndarray:
        """Orthonormal basis as complex n-vectors (unitary when Lagrangian)."""
        return to_complex(self.orthonormal())


@dataclass(frozen=True)
class TangentDecomposition:
    w_a: np.ndarray
    w_b: np.ndarray
    w_c: np.ndarray
    w_d: np.ndarray

    @property
    def w_prime(self) -> np.ndarray:
        """Component transverse to T Lambda' + orbit, i.e. w_a + w_b."""
        return self.w_a + self.w_b

    def total(self) -> np.ndarray:
        return self.w_a + self.w_b + self.w_c + self.w_d


@dataclass(frozen=True)
class RTData:
    """Orbit inclusion r -> R r + i T R r in an adapted frame."""

    R: np.ndarray
    T: np.ndarray

    @property
    def g(self) -> int:
        return self.R.shape[1]

    @property
    def n(self) -> int:
        return self.R.shape[0]

    def gram(self) -> np.ndarray:
        """R^t R + R^t T^t T R; the identity for orthonormal orbit bases."""
        TR = self.T @ self.R
        return self.R.T @ self.R + TR.T @ TR

    def complex_gram(self) -> np.ndarray:
        """R^t R + i R^t T R."""
        return self.R.T @ self.R + 1j * (self.R.T @ self.T @ self.R)


@dataclass(frozen=True)
class QuadraticFormsSP:
    """Real symmetric matrices with Q(w) = S(w) + i P(w) in the real layout."""

    S: np.ndarray
    P: np.ndarray

    def s_value(self, w: np.ndarray) -> float:
        w = np.asarray(w, dtype=float)
        return float(w @ self.S @ w)

    def p_value(self, w: np.ndarray) -> float:
        w = np.asarray(w, dtype=float)
        return float(w @ self.P @ w)

    def q_value(self, w: np.ndarray) -> complex:
        return self.s_value(w) + 1j * self.p_value(w)


@dataclass(frozen=True)
class LagrangianPair:
    L: RealSubspace
    Lp: RealSubspace

    def __post_init__(self):
        for S in (self.L, self.Lp):
            if not is_lagrangian(S):
                raise NotLagrangianError("both members of the pair must be Lagrangian")


@dataclass(frozen=True)
class FrameData:
    """Per-point frame package, all subspaces in adapted coordinates.

    ``lambda_tangent`` is ``{p = 0}``.  The optional members are filled in by
    the geometry layer once the orbit volume is known.
    """

    lambda_tangent: RealSubspace
    lambda_prime_tangent: RealSubspace
    orbit_tangent: RealSubspace
    rt: RTData | None = None
    xi: complex | None = None
    forms: QuadraticFormsSP | None = None
    extra: dict = field(default_factory=dict)


def is_lagrangian(S: RealSubspace, tol: float = settings.LAGRANGIAN_TOL) -> bool:
    if S.ambient_dim % 2:
        raise DimensionMismatchError("ambient dimension must be even")
    if S.dim != S.n:
        return False
    B = S.orthonormal()
    W = B.T @ omega_matrix(S.n) @ B
    return bool(np.max(np.abs(W), initial=0.0) <= tol)


def _check_same_ambient(*spaces: RealSubspace) -> int:
    dims = {s.ambient_dim for s in spaces}
    if len(dims) != 1:
        raise DimensionMismatchError(f"subspaces live in different ambient spaces {dims}")
    return dims.pop()


def decomposition_matrices(
    lambda_tangent: RealSubspace,
    lambda_prime_tangent: RealSubspace,
    orbit_tangent: RealSubspace,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Linear maps w -> w_a, w_b, w_c, w_d of the four-part decomposition."""
    N = _check_same_ambient(lambda_tangent, lambda_prime_tangent, orbit_tangent)
    lam = lambda_tangent.orthonormal()
    lamp = lambda_prime_tangent.orthonormal()
    orb = orbit_tangent.orthonormal()

    if lamp.shape[1] and np.linalg.norm(lamp - lam @ (lam.T @ lamp)) > 1e-8:
        raise DegenerateConfigurationError("lambda_prime_tangent is not contained in lambda_tangent")
    joint = np.hstack([lam, orb])
    if joint.shape[1]:
        s = np.linalg.svd(joint, compute_uv=False)
        if s[-1] <= 1e-8:
            raise DegenerateConfigurationError(
                "lambda_tangent meets orbit_tangent nontrivially (not transverse)"
            )
    if joint.shape[1] > N:
        raise DegenerateConfigurationError("lambda_tangent + orbit_tangent exceeds ambient dimension")

    eye = np.eye(N)
    if joint.shape[1]:
        Ej = _orthonormal_columns(joint)
        Pa = eye - Ej @ Ej.T
        # coefficients of (w - w_a) in the (non-orthogonal) basis [lam | orb]
        coef = np.linalg.pinv(joint) @ (eye - Pa)
        w_lam = lam @ coef[: lam.shape[1]]
        Pd = orb @ coef[lam.shape[1]:]
    else:
        Pa = eye
        w_lam = np.zeros((N, N))
        Pd = np.zeros((N, N))
    Pc = lamp @ (lamp.T @ w_lam)
    Pb = w_lam - Pc
    return Pa, Pb, Pc, Pd


def decompose_tangent(
    w: np.ndarray,
    lambda_tangent: RealSubspace,
    lambda_prime_tangent: RealSubspace,
    orbit_tangent: RealSubspace,
) -> TangentDecomposition:
    """Split w into parts normal to T Lambda + orbit, in T Lambda (- T Lambda'),
    in T Lambda', and along the orbit.

    Raises DegenerateConfigurationError when the subspaces are not admissible.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (lambda_tangent.ambient_dim,):
        raise DimensionMismatchError("w has the wrong length")
    Pa, Pb, Pc, Pd = decomposition_matrices(lambda_tangent, lambda_prime_tangent, orbit_tangent)
    return TangentDecomposition(Pa @ w, Pb @ w, Pc @ w, Pd @ w)


def compute_rt(orbit_tangent: RealSubspace, lambda_tangent: RealSubspace | None = None) -> RTData:
    """R and T from an orbit tangent space expressed in an adapted frame.

    The orbit basis is orthonormalised first.  T is fixed by the orbit
    inclusion on range(R) and taken to vanish on its orthocomplement.
    """
    n = orbit_tangent.n
    if lambda_tangent is not None:
        B = lambda_tangent.orthonormal()
        if lambda_tangent.dim != n or np.linalg.norm(B[:n]) > 1e-8:
            raise DegenerateConfigurationError("frame is not adapted: T Lambda must be {p = 0}")
    E = orbit_tangent.orthonormal()
    g = E.shape[1]
    R = E[:n]
    Q = E[n:]
    if g:
        s = np.linalg.svd(R, compute_uv=False)
        if s[-1] <= settings.RANK_TOL:
            raise DegenerateConfigurationError("rank(R) < g: orbit not transverse to Lambda")
        T = Q @ np.linalg.pinv(R)
    else:
        T = np.zeros((n, n))
    return RTData(R=R, T=T)


def xi_lambda(rt: RTData, v_eff: float) -> complex:
    """det(R^t R + i R^t T R)^{-1/2} / v_eff."""
    if not v_eff > 0:
        raise ValueError("v_eff must be positive")
    return det_inv_sqrt(rt.complex_gram()) / v_eff


def _adapted_bases(pair: LagrangianPair, tol: float) -> tuple[np.ndarray, np.ndarray, int]:
    """Orthonormal real bases of L and L' sharing their first c vectors, c = dim(L cap L')."""
    A = pair.L.orthonormal()
    B = pair.Lp.orthonormal()
    u, s, vt = np.linalg.svd(A.T @ B)
    c = int(np.sum(s > 1.0 - tol))
    common = A @ u[:, :c]
    restA = A @ u[:, c:]
    restB = B @ vt.T[:, c:]
    return np.hstack([common, restA]), np.hstack([common, restB]), c


def iota_invariant(pair: LagrangianPair, tol: float = 1e-9) -> float:
    """|det B| for the unitary carrying L onto L' written as blockdiag(O, A + iB).

    Bases of L and L' are chosen to start with a common orthonormal basis of
    the intersection; both are then unitary bases of C^n and the matrix of the
    unitary map between them is ``E^H E'``.
    """
    EA, EB, c = _adapted_bases(pair, tol)
    M = to_complex(EA).conj().T @ to_complex(EB)
    block = M[c:, c:].imag
    if block.size == 0:
        return 1.0
    return float(abs(np.linalg.det(block)))


def gaussian_fourier(A: np.ndarray, b: np.ndarray | None = None) -> complex:
    """Integral of exp(-u^t A u - i u^t b) over R^g.

    Equals pi^{g/2} det(A)^{-1/2} exp(-b^t A^{-1} b / 4) with the principal branch
    of :func:`det_inv_sqrt`.
    """
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    g = A.shape[0]
    if A.shape != (g, g):
        raise DimensionMismatchError("A must be square")
    if np.max(np.abs(A - A.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(A), initial=0.0)):
        raise ValueError("A must be symmetric")
    try:
        np.linalg.cholesky(A.real)
    except np.linalg.LinAlgError as exc:
        raise ValueError("Re A must be positive definite") from exc
    b = np.zeros(g) if b is None else np.asarray(b, dtype=float)
    expo = -0.25 * b @ np.linalg.solve(A, b.astype(complex))
    return np.pi ** (g / 2) * det_inv_sqrt(A) * np.exp(expo)


FORM_CONVENTIONS = ("heisenberg", "literal")


def quadratic_forms_sp(rt: RTData, frame: FrameData, convention: str = "heisenberg") -> QuadraticFormsSP:
    """Quadratic forms S, P governing the Gaussian profile of an equivariant state.

    The leading term at ``x + w/sqrt(k)`` carries ``exp(-(S(w) + i P(w)))``.

    Parameters
    ----------
    rt, frame
        Orbit data and the tangent frame at the base point.
    convention
        ``"heisenberg"`` (default) evaluates the orbit average in the linear
        Heisenberg model, where the lifted group element ``exp(nu)`` acts by
        ``(theta, v) -> (theta - Omega(nu_M, v), v + nu_M)``.  This gives

            S + iP = ||p_a||^2 + c^t (R^tR + iR^tTR)^{-1} c
                     - i [Omega(w_d, w_a + w_b) - Omega(w_a, w_b + w_c)],

        with ``c = R^t q_b``; it agrees with direct quadrature.
        ``"literal"`` evaluates

            S + iP = ||p_a||^2 - i C + (1/4) b^t (R^tR + iR^tTR)^{-1} b,

        with ``b = R^t (q_b - 3 T^t p_a)`` and
        ``C = Omega(w - w_d, w_a) + 2 Omega(w, w_d)``.  Both agree when
        ``w = w_c + w_d``; they differ once ``q_b`` or ``p_a`` is nonzero.
    """
    if convention not in FORM_CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}; expected one of {FORM_CONVENTIONS}")
    n = rt.n
    Pa, Pb, Pc, Pd = decomposition_matrices(
        frame.lambda_tangent, frame.lambda_prime_tangent, frame.orbit_tangent
    )
    N = 2 * n
    pa = Pa[:n]
    qb = Pb[n:]
    J0 = omega_matrix(n)
    if convention == "literal":
        Bm = rt.R.T @ (qb - 3.0 * rt.T.T @ pa) if rt.g else None
        scale = 0.25
        C = (np.eye(N) - Pd).T @ J0 @ Pa + 2.0 * J0 @ Pd
    else:
        Bm = rt.R.T @ qb if rt.g else None
        scale = 1.0
        C = Pd.T @ J0 @ (Pa + Pb) - Pa.T @ J0 @ (Pb + Pc)
    if rt.g:
        minv = np.linalg.inv(rt.complex_gram())
        F = 0.5 * (minv.real + minv.real.T)
        G = 0.5 * (minv.imag + minv.imag.T)
        S = pa.T @ pa + scale * Bm.T @ F @ Bm
        Pquad = scale * Bm.T @ G @ Bm
    else:
        S = pa.T @ pa
        Pquad = np.zeros((N, N))
    P = Pquad - 0.5 * (C + C.T)
    return QuadraticFormsSP(S=0.5 * (S + S.T), P=0.5 * (P + P.T))
