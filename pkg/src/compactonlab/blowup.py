"""Blow-up for m = 1 on an interval (0, L):

    u_t = (u^{n+1})_xx + u^{n+1},   u = 0 at x = 0, L,

integrated in the variable v = u^{n+1}, (psi(v))_t = v_xx + v with psi(v) = v^{1/(n+1)}.
The first Fourier coefficient J(t) = int u e_1 (int e_1 = 1) obeys
dJ/dt >= (1 - lambda_1) J^{n+1}, lambda_1 = (pi/L)^2.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .core import Grid, ProblemParams, Profile, explicit_profile_m1, s2_to_inverse_n

log = logging.getLogger(__name__)


class StepCollapse(RuntimeError):
    def __init__(self, msg, run=None):
        super().__init__(msg)
        self.run = run


@dataclass
class EvolutionRun:
    n: float
    L: float
    lambda1: float
    x: np.ndarray
    times: np.ndarray
    snapshots: np.ndarray          # u at the recorded times, interior + boundary nodes
    J: np.ndarray                  # J at every accepted step
    J_times: np.ndarray
    sup: np.ndarray                # max u at every accepted step
    blown_up: bool
    T_est: float
    m: int = 1
    modified: bool = False
    signed_J: np.ndarray | None = None
    source_integral: np.ndarray | None = None  # int |v| e_1 (modified model) or int v e_1
    diagnostics: dict = field(default_factory=dict)

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    def e1(self) -> np.ndarray:
        return first_eigenfunction(self.x, self.L)


def first_eigenfunction(x: np.ndarray, L: float) -> np.ndarray:
    """sin(pi x / L) normalized to unit integral over (0, L)."""
    return np.sin(np.pi * x / L) * np.pi / (2.0 * L)


def _trapz(f, h):
    return float(h * (np.sum(f) - 0.5 * (f[0] + f[-1])))


def separable_profile(n: float, L: float, npts: int, source: str = "auto") -> np.ndarray:
    """Profile theta on the nodes of (0, L) with u = (T-t)^{-1/n} theta a solution.

    theta solves (theta^{n+1})'' + theta^{n+1} = theta/n with Dirichlet ends. When the
    compacton fits (L >= 2(n+1)pi/n) the explicit one is centred ("explicit");
    otherwise, or with source="discrete", the discrete problem is solved with the
    same three-point Laplacian that the evolution uses.
    """
    from . import bvp

    support = 2 * (n + 1) * math.pi / n
    if source == "auto":
        source = "explicit" if L >= support else "discrete"
    grid = Grid(L / 2.0, npts)
    if source == "explicit":
        return explicit_profile_m1(n, grid, "f").values
    if source != "discrete":
        raise ValueError(f"unknown source {source!r}")
    params = ProblemParams(m=1, n=n, epsilon=1e-7, R=L / 2.0, npts=npts)
    spec = bvp.default_guess_spec("+2", params)
    hw = min(spec.bump_half_width, 0.999 * L / 2.0)
    y = grid.nodes
    z = np.minimum(np.abs(y) / hw, 1.0)
    g = spec.amplitude * np.cos(0.5 * np.pi * z) ** spec.shape_power
    g[0] = g[-1] = 0.0
    rep = bvp.solve(Profile(grid, g, params), newton_tol=1e-12)
    V = s2_to_inverse_n(np.maximum(rep.final_profile.values, 0.0), n)
    return V ** (1.0 / (n + 1))


def _psi_prime(v, n, eps):
    # d/dv of v^{1/(n+1)} for v >= 0, regularized at v = 0
    return (v * v + eps * eps) ** (-n / (2.0 * (n + 1))) / (n + 1)


def evolve_m1(u0: Profile | np.ndarray, n: float, L: float, t_end: float, blowcap: float = 1e6,
              rel_change: float = 0.003, dt0: float = 1e-3, eps: float = 1e-12, snapshot_every: int = 10,
              modified: bool = False, max_steps: int = 500000) -> EvolutionRun:
    """Linearly implicit method of lines in v with psi' lagged.

    Each step solves (D/dt - d_xx - I) v_new = D v/dt, D = psi'(v), on the
    three-point grid of (0, L). The step keeps the relative change of max u
    below ``rel_change`` and stays under the positivity bound dt < min D.
    Stops at t_end or once max u > blowcap. For sign-changing data
    ``modified=True`` replaces the source by |v| (diagnostic model).
    """
    vals = u0.values if isinstance(u0, Profile) else np.asarray(u0, float)
    npts = vals.size
    x = np.linspace(0.0, L, npts)
    h = x[1] - x[0]
    if not modified and np.any(vals < 0):
        raise ValueError("u0 must be nonnegative")
    u = vals.copy()
    u[0] = u[-1] = 0.0
    v = np.abs(u) ** (n + 1) * np.sign(u)
    lam1 = (math.pi / L) ** 2
    e1 = first_eigenfunction(x, L)
    N = npts - 2
    t, dt = 0.0, dt0
    times, snaps = [0.0], [u.copy()]
    J, Jt, sup, srcint = [_trapz(u * e1, h)], [0.0], [float(np.abs(u).max())], [_trapz(np.abs(v) * e1, h)]
    blown = False
    steps = 0
    while t < t_end and steps < max_steps:
        vi = v[1:-1]
        D = _psi_prime(vi, n, eps)
        umax = float(np.abs(u).max())
        if umax > 0:
            dt = min(dt, rel_change / max(umax ** n, 1e-300), 0.5 * float(D.min()), t_end - t)
        else:
            dt = min(dt, t_end - t)
        if dt <= 1e-15 * max(t, 1.0):
            run = _pack(n, L, lam1, x, times, snaps, J, Jt, sup, blown, srcint, modified)
            raise StepCollapse(f"dt = {dt:.3e} at t = {t:.6g} with max u = {umax:.3e}", run)
        ab = np.zeros((3, N))
        ab[0, 1:] = -1.0 / h ** 2
        ab[2, :-1] = -1.0 / h ** 2
        if modified:
            # |v| source, linearized through its sign at the old level
            sgn = np.sign(vi)
            ab[1] = D / dt + 2.0 / h ** 2 - sgn
        else:
            ab[1] = D / dt + 2.0 / h ** 2 - 1.0
        vn = solve_banded((1, 1), ab, D * vi / dt)
        un = np.zeros(npts)
        un[1:-1] = np.abs(vn) ** (1.0 / (n + 1)) * np.sign(vn)
        new_max = float(np.abs(un).max())
        if umax > 0 and abs(new_max - umax) > 3 * rel_change * umax and dt > 1e-12:
            dt *= 0.5
            continue
        if not modified:
            assert vn.min() >= -1e-12 * max(vn.max(), 1.0), "positivity lost"
            vn = np.maximum(vn, 0.0)
            un[1:-1] = vn ** (1.0 / (n + 1))
        v[1:-1] = vn
        u = un
        t += dt
        steps += 1
        J.append(_trapz(u * e1, h))
        Jt.append(t)
        sup.append(new_max)
        srcint.append(_trapz(np.abs(v) * e1, h))
        if steps % snapshot_every == 0:
            times.append(t)
            snaps.append(u.copy())
        if new_max > blowcap:
            blown = True
            break
        dt *= 1.25
    if times[-1] != t:
        times.append(t)
        snaps.append(u.copy())
    return _pack(n, L, lam1, x, times, snaps, J, Jt, sup, blown, srcint, modified)


def _pack(n, L, lam1, x, times, snaps, J, Jt, sup, blown, srcint, modified) -> EvolutionRun:
    Jt_a, sup_a = np.array(Jt), np.array(sup)
    T_est = estimate_blowup_time(Jt_a, sup_a, n) if blown else math.inf
    return EvolutionRun(n=n, L=L, lambda1=lam1, x=x, times=np.array(times), snapshots=np.array(snaps),
                        J=np.array(J), J_times=Jt_a, sup=sup_a, blown_up=blown, T_est=T_est,
                        modified=modified, signed_J=np.array(J), source_integral=np.array(srcint))


def estimate_blowup_time(t: np.ndarray, sup: np.ndarray, n: float, tail: int = 20) -> float:
    """Extrapolate max(u)^{-n}, linear in t for separable growth, to zero."""
    k = min(tail, t.size)
    tt, yy = t[-k:], sup[-k:] ** (-n)
    a, b = np.polyfit(tt, yy, 1)
    return float(-b / a) if a < 0 else math.inf


def fourier_audit(run: EvolutionRun, slack: float = 0.05, fit_window: tuple = (1e-3, 0.3)) -> dict:
    """Discrete check of dJ/dt >= (1 - lambda_1) c_2 J^{n+1} and a fit of the J rate.

    c_2 = (int e_1)^{-n} = 1. The difference quotient over each accepted step is
    compared with the bound at the step start. The rate exponent is the slope of
    log J against log(T_est - t) over steps with T_est - t in
    ``fit_window`` (fractions of T_est).
    """
    out = {"lambda1": run.lambda1, "applicable": bool(run.lambda1 < 1), "slack": slack, "c2": 1.0}
    if run.lambda1 >= 1:
        out["reason"] = "lambda1 >= 1: no blow-up bound"
        return out
    n = run.n
    t, J = run.J_times, run.J
    dJ = np.diff(J) / np.diff(t)
    bound = (1 - run.lambda1) * J[:-1] ** (n + 1)
    viol = dJ < (1 - slack) * bound
    out["steps"] = int(dJ.size)
    out["violations"] = int(np.count_nonzero(viol))
    out["min_ratio"] = float(np.min(dJ / bound)) if dJ.size else math.nan
    T_bound = J[0] ** (-n) / (n * (1 - run.lambda1))
    out["T_upper_bound"] = float(T_bound)
    out["T_est"] = float(run.T_est)
    out["T_within_bound"] = bool(run.T_est <= T_bound * (1 + 1e-9)) if run.blown_up else None
    A = (1.0 / (n * (1 - run.lambda1))) ** (1.0 / n)
    if run.blown_up and math.isfinite(run.T_est):
        tau = run.T_est - t
        lo, hi = fit_window
        sel = (tau > lo * run.T_est) & (tau < hi * run.T_est)
        if np.count_nonzero(sel) >= 5:
            slope, icpt = np.polyfit(np.log(tau[sel]), np.log(J[sel]), 1)
            out["rate_exponent"] = float(slope)
            out["rate_expected"] = -1.0 / n
            out["prefactor"] = float(np.exp(icpt))
            out["prefactor_lower_bound"] = float(A)
    # integrated form of the inequality: J(t) >= A (T - t)^{-1/n} with T the upper bound
    tb = T_bound - t
    ok = tb > 0
    out["J_lower_bound_violations"] = int(np.count_nonzero(J[ok] < (1 - slack) * A * tb[ok] ** (-1.0 / n)))
    return out


def selfsim_invariance(run: EvolutionRun, reference: np.ndarray, sup_max: float = 1e3, recenter: bool = False) -> float:
    """max over snapshots (with max u <= sup_max) of |u/max u - f/max f|_inf."""
    ref = np.asarray(reference, float)
    refn = ref / ref.max()
    drift = 0.0
    for u in run.snapshots:
        mx = float(u.max())
        if mx <= 0 or mx > sup_max:
            continue
        un = u / mx
        if recenter:
            shift = int(np.argmax(u)) - int(np.argmax(ref))
            un = np.roll(un, -shift)
        drift = max(drift, float(np.abs(un - refn).max()))
    return drift


def drift_series(run: EvolutionRun, reference: np.ndarray) -> np.ndarray:
    refn = reference / reference.max()
    return np.array([float(np.abs(u / u.max() - refn).max()) if u.max() > 0 else math.nan for u in run.snapshots])


def conservation_check(run: EvolutionRun) -> float:
    """Relative spread of J(t) = int psi(v) e_1 over the run (constant when lambda_1 = 1)."""
    J = run.J
    return float((J.max() - J.min()) / abs(J[0]))
