"""Rescaled gradient flow

    (psi(w))_tau = (-1)^{m+1} w^{(2m)} + w - (1/n)|w|^{-alpha} w,   psi(w) = |w|^{-alpha} w,

integrated to steady state. Its Lyapunov functional

    L(w) = -1/2 int|D^m w|^2 + 1/2 int w^2 - (n+1)/(n(n+2)) int|w|^beta

grows along solutions. Stationary states solve the canonical equation after
multiplication by n^{(n+1)/n}.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .bvp import SIGN_THRESHOLD, TRIVIAL_AMPLITUDE, SolveReport, _parity, rounding_floor, support_estimate
from .core import ProblemParams, Profile, count_sign_changes, inverse_n_to_s2, s2_to_inverse_n
from .operators import discrete_mth_derivative, polyharmonic_matrix

log = logging.getLogger(__name__)


class StepRejected(RuntimeError):
    """Lyapunov value dropped by more than the tolerance; retry with a smaller step."""


class NotConverged(RuntimeError):
    def __init__(self, msg, report=None, trace=None):
        super().__init__(msg)
        self.report = report
        self.trace = trace


@dataclass(frozen=True, eq=False)
class FlowState:
    w: Profile
    tau: float
    lyapunov: float


def _reg(w, eps):
    return eps * eps + w * w


def psi_prime(w, params: ProblemParams, eps=None):
    """Derivative of the regularized psi(w) = (eps^2+w^2)^{-alpha/2} w (always positive)."""
    a = params.exponents.alpha
    eps = params.epsilon if eps is None else eps
    s = _reg(w, eps)
    return s ** (-a / 2 - 1) * (eps * eps + (1 - a) * w * w)


def flow_rhs(w_interior: np.ndarray, params: ProblemParams, grid, eps=None) -> np.ndarray:
    """Right side (-1)^{m+1} w^{(2m)} + w - (1/n) g_eps(w) on interior nodes."""
    a = params.exponents.alpha
    eps = params.epsilon if eps is None else eps
    A = polyharmonic_matrix(params.m, grid)
    return -(A @ w_interior) + w_interior - _reg(w_interior, eps) ** (-a / 2) * w_interior / params.n


def lyapunov(w_interior: np.ndarray, params: ProblemParams, grid, eps=None) -> float:
    """Discrete L with the regularized potential that the scheme integrates.

    For m <= 2, h w^T A w is evaluated as the equal sum of squared m-th
    differences, which avoids the cancellation in w^T A w.
    """
    b = params.exponents.beta
    eps = params.epsilon if eps is None else eps
    h = grid.h
    w = w_interior
    if params.m <= 2:
        d, wt = discrete_mth_derivative(Profile.from_interior(grid, w, params))
        dm2 = float(np.sum(wt * d * d))
    else:
        dm2 = h * float(w @ (polyharmonic_matrix(params.m, grid) @ w))
    l2 = h * float(w @ w)
    pot = h * float(np.sum(_reg(w, eps) ** (b / 2) - eps ** b)) / (params.n * b)
    return -0.5 * dm2 + 0.5 * l2 - pot


def lyapunov_rounding(w: np.ndarray, A, h: float, m: int = 3) -> float:
    """Size of rounding noise in the discrete L.

    For m >= 3 it is dominated by cancellation inside w^T A w; for m <= 2 all
    quadratic terms are sums of squares.
    """
    if m <= 2:
        return 64 * np.finfo(float).eps * h * float(w @ (A @ w) + w @ w + np.abs(w).sum())
    aw = abs(A) @ np.abs(w)
    return 64 * np.finfo(float).eps * h * float(np.abs(w) @ aw + w @ w)


def nehari_scale(w_interior: np.ndarray, params: ProblemParams, grid) -> float | None:
    """Factor c putting c*w on {int w^2 - int|D^m w|^2 = (1/n) int|w|^beta}; None if H0 <= 0.

    Along a ray L(c w) has a single minimum at this c; it is the fibering
    normalization and removes the unstable amplitude mode of the flow.
    """
    b = params.exponents.beta
    h = grid.h
    A = polyharmonic_matrix(params.m, grid)
    w = w_interior
    H0 = h * float(w @ w) - h * float(w @ (A @ w))
    lb = h * float(np.sum(np.abs(w) ** b))
    if H0 <= 0 or lb == 0:
        return None
    return (lb / (params.n * H0)) ** (1.0 / (2.0 - b))


def _make_state(w_int, tau, params, grid, eps):
    return FlowState(Profile.from_interior(grid, w_int, params), tau, lyapunov(w_int, params, grid, eps))


def initial_state(w0: Profile, normalize: str | None = "nehari") -> FlowState:
    w = w0.interior.copy()
    if normalize == "nehari":
        c = nehari_scale(w, w0.params, w0.grid)
        if c is not None:
            w = c * w
    return _make_state(w, 0.0, w0.params, w0.grid, w0.params.epsilon)


def flow_step(state: FlowState, dtau: float, params: ProblemParams | None = None,
              normalize: str | None = "nehari", lyap_tol: float = 1e-12, parity: int = 0) -> FlowState:
    """One linearly implicit step: polyharmonic term implicit, the rest explicit, psi' lagged.

    Raises StepRejected if the Lyapunov value decreases by more than
    lyap_tol * max(1, |L|) plus its rounding level. ``parity`` = +1/-1 keeps the state even/odd.
    """
    if not dtau > 0:
        raise ValueError("dtau must be positive")
    params = state.w.params if params is None else params
    grid = state.w.grid
    eps = params.epsilon
    a = params.exponents.alpha
    w = state.w.interior
    if not np.any(w):
        return FlowState(state.w, state.tau + dtau, state.lyapunov)
    A = polyharmonic_matrix(params.m, grid)
    d = psi_prime(w, params, eps)
    rhs = d * w / dtau + w - _reg(w, eps) ** (-a / 2) * w / params.n
    M = (A + sp.diags(d / dtau)).tocsc()
    wn = spla.spsolve(M, rhs)
    if parity:
        wn = 0.5 * (wn + parity * wn[::-1])
    if normalize == "nehari":
        c = nehari_scale(wn, params, grid)
        if c is not None:
            wn = c * wn
    new = _make_state(wn, state.tau + dtau, params, grid, eps)
    slack = lyap_tol * max(1.0, abs(state.lyapunov)) + lyapunov_rounding(wn, A, grid.h, params.m)
    if new.lyapunov < state.lyapunov - slack:
        raise StepRejected(f"Lyapunov dropped from {state.lyapunov:.12g} to {new.lyapunov:.12g}")
    return new


@dataclass
class FlowTrace:
    tau: list = field(default_factory=list)
    lyapunov: list = field(default_factory=list)
    dtau: list = field(default_factory=list)
    wtau: list = field(default_factory=list)
    rejected: int = 0
    rounding: list = field(default_factory=list)   # rounding level of L at each accepted step
    lyap_tol: float = 1e-12

    def monotone(self) -> bool:
        """L nondecreasing up to the acceptance slack (tolerance plus rounding level)."""
        L = np.asarray(self.lyapunov)
        if L.size < 2:
            return True
        slack = self.lyap_tol * np.maximum(1.0, np.abs(L[:-1])) + np.asarray(self.rounding)
        return bool(np.all(np.diff(L) >= -slack))

    def min_increment(self) -> float:
        return float(np.diff(self.lyapunov).min()) if len(self.lyapunov) > 1 else 0.0


def flow_to_steady(w0: Profile, params: ProblemParams | None = None, dtau0: float = 0.1, tol: float = 1e-6,
                   tau_max: float = 2000.0, dtau_max: float | None = None, normalize: str | None = "nehari",
                   lyap_tol: float = 1e-12, max_steps: int = 200000,
                   symmetry="auto") -> tuple[SolveReport, FlowTrace]:
    """Integrate until sup|w_tau| < tol (with w_tau from the last accepted step).

    Steps grow by 1.5 after acceptance and halve on rejection, up to
    ``dtau_max`` (default alpha = n/(n+1): the explicit treatment of the
    nonlinearity is stable near w = 0 only for dtau < 2 alpha). Returns the
    limit in canonical form, F = n^{(n+1)/n} w, together with the trace.
    """
    params = w0.params if params is None else params
    grid = w0.grid
    if dtau_max is None:
        dtau_max = params.exponents.alpha
    st = initial_state(w0.with_params(params), normalize)
    parity = _parity(st.w.interior) if symmetry == "auto" else int(symmetry)
    tr = FlowTrace([st.tau], [st.lyapunov], [], [], lyap_tol=lyap_tol)
    A = polyharmonic_matrix(params.m, grid)
    dt = dtau0
    wt = np.inf
    steps = 0
    while st.tau < tau_max and steps < max_steps:
        steps += 1
        try:
            new = flow_step(st, dt, params, normalize, lyap_tol, parity)
        except StepRejected:
            tr.rejected += 1
            dt *= 0.5
            if dt < 1e-14:
                break
            continue
        wt = float(np.abs(new.w.interior - st.w.interior).max()) / dt
        st = new
        tr.tau.append(st.tau)
        tr.lyapunov.append(st.lyapunov)
        tr.dtau.append(dt)
        tr.wtau.append(wt)
        tr.rounding.append(lyapunov_rounding(st.w.interior, A, grid.h, params.m))
        if wt < tol:
            break
        dt = min(1.5 * dt, dtau_max)
    F = inverse_n_to_s2(st.w.values, params.n)
    prof = Profile(grid, F, params)
    floor = rounding_floor(polyharmonic_matrix(params.m, grid), F[1:-1])
    rep = SolveReport(
        converged=wt < tol,
        iterations=len(tr.dtau),
        residual_inf=wt,
        epsilon_path=[params.epsilon],
        final_profile=prof,
        sign_changes=count_sign_changes(prof, SIGN_THRESHOLD),
        support_estimate=support_estimate(prof),
        newton_tol=tol,
        effective_tol=max(tol, floor),
        trivial=float(np.abs(F).max()) < TRIVIAL_AMPLITUDE,
        label="flow",
    )
    if not rep.converged:
        raise NotConverged(f"sup|w_tau| = {wt:.3e} at tau = {st.tau:.4g}", rep, tr)
    return rep, tr


def to_flow_form(p: Profile) -> Profile:
    """Canonical profile F to the flow variable w = n^{-(n+1)/n} F."""
    return Profile(p.grid, s2_to_inverse_n(p.values, p.params.n), p.params)
