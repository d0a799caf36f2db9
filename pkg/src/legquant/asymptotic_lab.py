"""Leading-order predictions, a stationary-phase oracle and sequence diagnostics."""

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
    LegquantError,
    UnresolvedOscillationError,
    UnsupportedCaseError,
)
from .legendrian import (
    LegendrianImmersion,
    ReturnElement,
    _dedup,
    _local_maxima,
    _solve_return_problem,
    adapted_frame,
    find_return_elements,
    tangent_vectors,
    torus_grid,
)
from .model_geometry import BundlePoint, HeisenbergChart, TorusAction, heisenberg_chart, moment_map
from .symplectic_core import (
    LagrangianPair,
    RealSubspace,
    det_inv_sqrt,
    gaussian_fourier,
    iota_invariant,
    quadratic_forms_sp,
    to_real,
)
from .szego_states import StateSequence

log = logging.getLogger(__name__)


class MissingReturnElementsError(LegquantError):
    pass


@dataclass(frozen=True)
class ReturnTerm:
    """One summand ``amplitude * base**k`` of a leading-order prediction."""

    element: ReturnElement
    base: complex
    amplitude: complex
    details: dict = field(default_factory=dict)


@dataclass(frozen=True)
class LeadingTermPrediction:
    exponent: float
    prefactor: float
    terms: tuple[ReturnTerm, ...]

    def coefficient(self, k) -> complex | np.ndarray:
        k = np.asarray(k)
        total = sum(t.amplitude * t.base ** k for t in self.terms) if self.terms else 0 * k
        return self.prefactor * total

    def value(self, k) -> complex | np.ndarray:
        k = np.asarray(k, dtype=float)
        return k**self.exponent * self.coefficient(k.astype(int))

    def interference(self, k) -> complex | np.ndarray:
        """Sum of base**k over the return terms (the oscillatory phase factor)."""
        k = np.asarray(k)
        return sum(t.base ** k for t in self.terms)


def _horizontal_w(x: BundlePoint, w, chart: HeisenbergChart | None) -> np.ndarray:
    n = x.n
    if w is None:
        return np.zeros(n + 1, dtype=complex)
    chart = chart or heisenberg_chart(x)
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    if w.shape != (n,):
        raise ValueError("w must be a complex n-vector")
    return chart.tangent_vector(w)


def _push(element: ReturnElement, action: TorusAction, v: np.ndarray) -> np.ndarray:
    return element.h * action.act(element.g_params, v)


def predict_theorem_main(
    x: BundlePoint,
    L: LegendrianImmersion,
    action: TorusAction,
    varpi,
    w=None,
    chart: HeisenbergChart | None = None,
    elements: list[ReturnElement] | None = None,
    convention: str = "heisenberg",
) -> LeadingTermPrediction:
    """Leading term of u_{k,varpi}(x + w / sqrt(k)).

    ``w`` is given in ``chart`` (default: the unadapted chart at x).  The
    prediction is

        k^{(n-g)/2} (1/|G_m|) pi^{-n} sqrt((2 pi)^{n+g} / 2^g)
            sum_j h_j^{-k} chi(g_j) Xi(x_j) exp(-S(w_j) - i P(w_j)) f(x_j).

    ``convention`` selects the quadratic forms; see
    :func:`~legquant.symplectic_core.quadratic_forms_sp`.
    """
    n, g = L.n, action.g
    varpi = np.atleast_1d(np.asarray(varpi, dtype=float)) if g else np.zeros(0)
    if varpi.shape != (g,):
        raise ValueError("varpi must have one entry per torus factor")
    if elements is None:
        elements = find_return_elements(x, L, action)
    if not elements:
        raise MissingReturnElementsError("x is not in the orbit of Lambda'; the state is rapidly decreasing there")
    v = _horizontal_w(x, w, chart)
    terms = []
    stab = None
    for e in elements:
        if np.max(np.abs(moment_map(action, e.target)), initial=0.0) > settings.ZERO_LEVEL_TOL:
            raise DegenerateConfigurationError("return element target is off the zero level")
        jchart, frame, orbit = adapted_frame(L, e.t_params, action)
        wj = to_real(jchart.coordinates(_push(e, action, v)))
        forms = frame.forms if convention == "heisenberg" else quadratic_forms_sp(frame.rt, frame, convention)
        S = forms.s_value(wj)
        P = forms.p_value(wj)
        chi = complex(np.exp(1j * varpi @ e.g_params))
        f = complex(L.f_lambda(e.t_params))
        amp = chi * frame.xi * np.exp(-S - 1j * P) * f
        stab = orbit.stabilizer_order if orbit is not None else 1
        terms.append(
            ReturnTerm(e, np.conj(e.h), amp, {"xi": frame.xi, "S": S, "P": P, "chi": chi, "f": f, "w_j": wj})
        )
    pref = (1.0 / stab) * np.pi ** (-n) * math.sqrt((2 * np.pi) ** (n + g) / 2**g)
    return LeadingTermPrediction((n - g) / 2, pref, tuple(terms))


def predict_action_free(
    x: BundlePoint,
    L: LegendrianImmersion,
    w=None,
    chart: HeisenbergChart | None = None,
    elements: list[ReturnElement] | None = None,
) -> LeadingTermPrediction:
    """Leading term of u_k(x + w / sqrt(k)) without symmetry.

    Works directly with ambient vectors: w_j is split orthogonally against the
    real span of the tangent vectors at x_j, and Omega(a, b) = Im(a^H b).
    """
    n = L.n
    if elements is None:
        elements = find_return_elements(x, L, None)
    if not elements:
        raise MissingReturnElementsError("x is not on the circle orbit of Lambda")
    v = _horizontal_w(x, w, chart)
    terms = []
    for e in elements:
        vj = e.h * v
        J = tangent_vectors(L, e.t_params)
        B = np.concatenate([J.real, J.imag])
        Q, _ = np.linalg.qr(B)
        vr = np.concatenate([vj.real, vj.imag])
        par_r = Q @ (Q.T @ vr)
        par = par_r[: n + 1] + 1j * par_r[n + 1:]
        perp = vj - par
        omega = float(np.imag(np.vdot(perp, par)))
        f = complex(L.f_lambda(e.t_params))
        amp = np.exp(-np.linalg.norm(perp) ** 2 - 1j * omega) * f
        terms.append(ReturnTerm(e, np.conj(e.h), amp, {"perp": perp, "par": par}))
    return LeadingTermPrediction(n / 2, (2 / np.pi) ** (n / 2), tuple(terms))


# ---------------------------------------------------------------- pairings


@dataclass(frozen=True)
class Crossing:
    theta: float
    g_params: np.ndarray
    t_params: np.ndarray
    s_params: np.ndarray

    @property
    def h(self) -> complex:
        return complex(np.exp(1j * self.theta))


def find_crossings(
    L: LegendrianImmersion,
    Sigma: LegendrianImmersion,
    action: TorusAction | None = None,
    grid: int = settings.SEEDS_PER_CIRCLE,
) -> list[Crossing]:
    """Solutions of h g.iota(t) = sigma(s) with iota(t) on the zero level."""
    if action is None:
        action = TorusAction.trivial(L.n)
    g, d, e = action.g, L.dim, Sigma.dim
    W = action.lifted_weights

    def merit(pts):
        y = action.act(pts[:, :g], L.map(pts[:, g: g + d]))
        s = Sigma.map(pts[:, g + d:])
        return np.abs(np.sum(y * np.conj(s), axis=-1)) ** 2

    def unpack(v):
        return v[0], v[1: 1 + g], v[1 + g: 1 + g + d], v[1 + g + d:]

    def residual(v):
        th, phi, t, s = unpack(v)
        r = np.exp(1j * th) * action.act(phi, L.map(t)) - Sigma.map(s)
        return np.concatenate([r.real, r.imag, moment_map(action, L.map(t))])

    def jac(v):
        th, phi, t, s = unpack(v)
        ph = np.exp(1j * th) * action.phases(phi)
        y = ph * L.map(t)
        cols = [1j * y] + [1j * W[j] * y for j in range(g)]
        Jt = L.jacobian(t)
        cols += [ph * Jt[:, j] for j in range(d)]
        Js = Sigma.jacobian(s)
        cols += [-Js[:, j] for j in range(e)]
        M = np.stack(cols, axis=1)
        xt = L.map(t)
        dmom = action.weights @ (2.0 * np.real(np.conj(xt)[:, None] * Jt))
        mom_rows = np.zeros((g, 1 + g + d + e))
        mom_rows[:, 1 + g: 1 + g + d] = dmom
        return np.concatenate([M.real, M.imag, mom_rows], axis=0)

    def seed(p):
        y = action.act(p[:g], L.map(p[g: g + d]))
        th = np.angle(np.vdot(y, Sigma.map(p[g + d:])))
        return np.concatenate([[th], p])

    sols = _solve_return_problem(merit, residual, jac, seed, g + d + e, grid)
    return [Crossing(float(s[0]), s[1: 1 + g], s[1 + g: 1 + g + d], s[1 + g + d:]) for s in sols]


def predict_pairing_transverse(
    L: LegendrianImmersion,
    Sigma: LegendrianImmersion,
    action: TorusAction | None = None,
    varpi=None,
    crossings: list[Crossing] | None = None,
    convention: str = "heisenberg",
) -> LeadingTermPrediction:
    """Leading term of (u_{k,varpi}, v_{k,varpi}) for transversally crossing data.

    Each crossing (h, g, y, y_hat) contributes a term proportional to h^k.
    Without an action the Gaussian integral over the pushed tangent plane is
    written as in the graph form: iota(T Lambda_j, T Sigma)^{-1} times the
    integral of exp(-|p|^2 + i p^t Z p).  With an action the quadratic form
    S - iP of Sigma's frame is integrated over the pushed tangent plane.
    """
    n = L.n
    g = 0 if action is None else action.g
    if crossings is None:
        crossings = find_crossings(L, Sigma, action)
    if not crossings:
        raise MissingReturnElementsError("(S^1 x G).Lambda does not meet Sigma on the zero level")
    act = action if action is not None else TorusAction.trivial(n)
    varpi = np.atleast_1d(np.asarray(varpi, dtype=float)) if g else np.zeros(0)
    terms = []
    stab = 1
    for c in crossings:
        e = ReturnElement(c.theta, c.g_params, c.t_params, Sigma.point(c.s_params))
        chart, frame, orbit = adapted_frame(Sigma, c.s_params, action if g else None)
        pushed = c.h * act.act(c.g_params, tangent_vectors(L, c.t_params).T).T
        E = to_real(chart.coordinates(pushed))
        f = complex(L.f_lambda(c.t_params)) * np.conj(complex(Sigma.f_lambda(c.s_params)))
        if g == 0:
            Ep, Eq = E[:n], E[n:]
            if np.linalg.svd(Ep, compute_uv=False)[-1] < settings.DEGENERACY_TOL:
                raise UnsupportedCaseError("tangent planes intersect: clean crossings are not supported")
            Z = Eq @ np.linalg.inv(Ep)
            Z = 0.5 * (Z + Z.T)
            iota = iota_invariant(LagrangianPair(RealSubspace.spanned_by(E), frame.lambda_tangent))
            gauss = gaussian_fourier(np.eye(n) - 1j * Z)
            amp = f * gauss / iota
            details = {"Z": Z, "iota": iota, "gauss": gauss}
        else:
            Q, _ = np.linalg.qr(E)
            forms = frame.forms if convention == "heisenberg" else quadratic_forms_sp(frame.rt, frame, convention)
            M = Q.T @ (forms.S - 1j * forms.P) @ Q
            try:
                gauss = gaussian_fourier(0.5 * (M + M.T))
            except ValueError as exc:
                raise UnsupportedCaseError("crossing is not transverse to Sigma'") from exc
            chi = complex(np.exp(1j * varpi @ c.g_params))
            amp = f * np.conj(chi) * np.conj(frame.xi) * gauss
            stab = orbit.stabilizer_order
            details = {"gauss": gauss, "xi": frame.xi, "chi": chi}
        terms.append(ReturnTerm(e, c.h, amp, details))
    pref = (1.0 / stab) * np.pi ** (-n) * math.sqrt((2 * np.pi) ** (n + g) / 2**g)
    return LeadingTermPrediction(-g / 2, pref, tuple(terms))


# ---------------------------------------------------------------- stationary phase


@dataclass(frozen=True)
class PhaseFunction:
    """Complex phase on the d-torus with first and second derivatives."""

    dim: int
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    exp_ik: Callable[[np.ndarray, int], np.ndarray] | None = None

    def e_ikS(self, t, k: int):
        if self.exp_ik is not None:
            return self.exp_ik(t, k)
        return np.exp(1j * k * self.value(t))

    @classmethod
    def from_log_base(cls, dim, base, base_grad, base_hess) -> "PhaseFunction":
        """S = -i log b for a nonvanishing-at-critical-points function b.

        exp(i k S) = b^k for integer k, so no logarithm branch is needed.
        """

        def value(t):
            # zeros of b give S = inf, which only ever loses to finite values
            with np.errstate(divide="ignore", invalid="ignore"):
                return -1j * np.log(base(t))

        def gradient(t):
            return -1j * base_grad(t) / base(t)[..., None]

        def hessian(t):
            b = base(t)[..., None, None]
            db = base_grad(t)
            return -1j * (base_hess(t) / b - db[..., :, None] * db[..., None, :] / b**2)

        return cls(dim, value, gradient, hessian, lambda t, k: base(t) ** k)


@dataclass(frozen=True)
class StationaryPointReport:
    location: np.ndarray
    phase_value: complex
    hessian: np.ndarray
    nondegenerate: bool


@dataclass(frozen=True)
class StationaryPhaseResult:
    value: complex
    points: tuple[StationaryPointReport, ...]
    rapid_decay: bool


def critical_points(phase: PhaseFunction, grid: int = settings.SEEDS_PER_CIRCLE) -> list[StationaryPointReport]:
    d = phase.dim
    pts = torus_grid(d, grid)
    with np.errstate(all="ignore"):
        gn = np.sum(np.abs(phase.gradient(pts)) ** 2, axis=-1)
    gn = np.where(np.isfinite(gn), gn, np.inf)
    idx = _local_maxima(-gn, (grid,) * d)
    found = []

    def resid(t):
        gr = phase.gradient(t)
        return np.concatenate([gr.real, gr.imag])

    def jac(t):
        H = phase.hessian(t)
        return np.concatenate([H.real, H.imag])

    for i in idx:
        if not np.isfinite(gn[i]):
            continue
        sol = least_squares(resid, pts[i], jac=jac, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
        if np.max(np.abs(resid(sol.x))) < 1e-10:
            found.append(np.mod(sol.x, 2 * np.pi))
    found = _dedup(found, settings.DEDUP_RADIUS)
    reports = []
    for t in found:
        H = np.atleast_2d(phase.hessian(t))
        sv = np.linalg.svd(H, compute_uv=False)
        reports.append(StationaryPointReport(t, complex(phase.value(t)), H, bool(sv[-1] > 1e-8)))
    return reports


def stationary_phase_oracle(
    phase: PhaseFunction,
    amplitude: Callable[[np.ndarray], np.ndarray],
    k: int,
    points: list[StationaryPointReport] | None = None,
) -> StationaryPhaseResult:
    """Leading stationary-phase value of the integral of e^{ikS} a over the torus.

    Sum over real critical points of e^{ikS} a det(k S'' / (2 pi i))^{-1/2}; the
    square root follows :func:`det_inv_sqrt` applied to -i S'' (whose real part
    is Im S'' >= 0).
    """
    if points is None:
        points = critical_points(phase)
    # only real critical points (Im S = 0) contribute at leading order
    points = [p for p in points if abs(p.phase_value.imag) <= 1e-10]
    if not points:
        return StationaryPhaseResult(0.0j, (), True)
    total = 0j
    d = phase.dim
    for p in points:
        if not p.nondegenerate:
            raise DegenerateConfigurationError(f"degenerate critical point at {p.location}")
        total += (
            complex(phase.e_ikS(p.location, k))
            * complex(amplitude(p.location))
            * (2 * np.pi / k) ** (d / 2)
            * det_inv_sqrt(-1j * p.hessian)
        )
    return StationaryPhaseResult(total, tuple(points), False)


# ---------------------------------------------------------------- fits


@dataclass(frozen=True)
class AsymptoticFit:
    kind: str  # "power_law" or "rapid_decay"
    exponent: float
    coefficient_modulus: float
    residuals: np.ndarray
    subsequence: np.ndarray
    rms_log_residual: float
    tail_monotone: bool
    period: int | None = None
    detail: dict = field(default_factory=dict)


def _linfit(x: np.ndarray, y: np.ndarray, extra: np.ndarray | None = None) -> tuple[float, float, float]:
    cols = [x, np.ones_like(x)] + ([] if extra is None else [extra])
    A = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = y - A @ coef
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(r**2)))


def _tail_monotone(res: np.ndarray) -> bool:
    tail = np.abs(res[len(res) // 2:])
    if len(tail) < 3:
        return True
    # allow noise at the level of the smallest residuals
    slack = 1e-12 + 1e-3 * np.max(tail)
    return bool(np.all(np.diff(tail) <= slack) or abs(tail[-1]) <= abs(tail[0]))


def fit_power_law(
    seq: StateSequence,
    phase_pattern=None,
    exponent: float | None = None,
    min_points: int = 8,
    tol: float = 0.05,
    min_pattern: float = 0.1,
    correction: float | None = None,
) -> AsymptoticFit:
    """Fit |values| ~ c k^e after removing oscillation.

    ``phase_pattern`` may be a callable k -> interference factor that is divided
    out, or an integer period p (the residue class of largest magnitude is
    used).  Without a pattern the smallest period up to 8 whose residue classes
    are individually clean power laws is detected.  Geometrically decaying
    sequences are classified as ``rapid_decay``.  Passing ``exponent`` fixes it
    and only the coefficient is fitted.  With a callable pattern, levels where
    the pattern is below ``min_pattern`` times its maximum are dropped, since
    near-cancellations there are dominated by lower-order terms.

    A positive ``correction`` c adds a k^{-c} column to the log-log
    regression.  It absorbs the first subleading term, so that term does not
    bias the exponent and coefficient on moderate k ranges.
    """
    ks = seq.ks.astype(float)
    vals = seq.values.copy()
    scale = np.max(np.abs(vals), initial=0.0)
    period = None
    if callable(phase_pattern):
        pat = np.asarray([phase_pattern(int(k)) for k in seq.ks], dtype=complex)
        keep = np.abs(pat) > min_pattern * np.max(np.abs(pat), initial=0.0)
        ks, vals = ks[keep], vals[keep] / pat[keep]
    else:
        usable = np.abs(vals) > 1e-10 * max(scale, 1e-300)
        periods = [int(phase_pattern)] if phase_pattern is not None else list(range(1, 9))
        best = None
        for p in periods:
            classes = []
            for r in range(p):
                m = (seq.ks % p == r) & usable
                if m.sum() >= min_points:
                    classes.append(m)
            if not classes:
                continue
            fits = [_linfit(np.log(ks[m]), np.log(np.abs(vals[m]))) for m in classes]
            worst = max(f[2] for f in fits)
            big = max(range(len(classes)), key=lambda i: fits[i][1] + fits[i][0] * np.log(ks[classes[i]][-1]))
            if best is None or worst < best[0]:
                best = (worst, p, classes[big])
            if worst < tol and phase_pattern is None:
                break
        if best is None:
            raise ValueError(f"need at least {min_points} nonzero values for a fit")
        decay = _decay_kind(ks[usable], vals[usable])
        if best[0] >= tol and not decay:
            raise UnresolvedOscillationError(
                f"no residue class pattern resolves the oscillation (best period {best[1]})", best[1]
            )
        period = best[1]
        ks, vals = ks[best[2]], vals[best[2]]
    if len(ks) < min_points:
        raise ValueError(f"need at least {min_points} usable values, got {len(ks)}")

    lk, lv = np.log(ks), np.log(np.abs(vals))
    if _decay_kind(ks, vals):
        slope, icpt, rms = _linfit(ks, lv)
        res = lv - (slope * ks + icpt)
        return AsymptoticFit("rapid_decay", float("nan"), float(np.exp(icpt)), res, ks.astype(int), rms,
                             _tail_monotone(res), period, {"log_rate": slope})
    corr = ks ** -float(correction) if correction else None
    if exponent is None:
        e, icpt, rms = _linfit(lk, lv, corr)
    else:
        e = float(exponent)
        _, icpt, rms = _linfit(np.zeros_like(lk), lv - e * lk, corr)
    c = float(np.exp(icpt))
    res = np.abs(vals) / (c * ks**e) - 1.0
    phase = complex(np.mean(vals / np.abs(vals)))
    return AsymptoticFit("power_law", e, c, res, ks.astype(int), rms, _tail_monotone(res), period,
                         {"mean_phase": phase})


def _decay_kind(ks: np.ndarray, vals: np.ndarray) -> bool:
    """True when log|v| is much better explained by a line in k than in log k."""
    if len(ks) < 4:
        return False
    lv = np.log(np.abs(vals))
    s_lin, _, r_lin = _linfit(ks, lv)
    _, _, r_log = _linfit(np.log(ks), lv)
    drop = lv[0] - lv[-1]
    return bool(s_lin < 0 and r_lin < 0.1 * r_log + 1e-9 and drop > 5.0)


@dataclass(frozen=True)
class DecayReport:
    passed: bool
    per_order: dict
    threshold: float


def rapid_decay_test(
    seq: StateSequence, N_max: int = 5, threshold: float = 1e-6, zero_floor: float = 1e-13
) -> DecayReport:
    """Check that |v_k| k^N eventually decreases and ends below ``threshold`` for N <= N_max.

    Values with |v_k| below ``zero_floor`` are quadrature round-off of an
    exactly vanishing state and count as zero.  The "eventually" window is the
    second half of the supplied k range.
    """
    if len(seq) < 8:
        raise ValueError("rapid_decay_test needs at least 8 values")
    order = np.argsort(seq.ks)
    ks = seq.ks[order].astype(float)
    mags = np.abs(seq.values[order])
    mags = np.where(mags < zero_floor, 0.0, mags)
    per = {}
    ok = True
    for N in range(N_max + 1):
        b = mags * ks**N
        tail = b[len(b) // 2:]
        nz = tail[tail > 0]
        decreasing = bool(np.all(np.diff(nz) <= 0)) if len(nz) > 1 else True
        below = bool(b[-1] < threshold)
        per[N] = {"decreasing": decreasing, "final": float(b[-1]), "below": below}
        ok = ok and decreasing and below
    return DecayReport(ok, per, threshold)
