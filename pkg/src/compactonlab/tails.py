"""Oscillatory components near interfaces.

Near an interface F(y) = y^gamma phi(s) with s = ln y, and phi solves the
autonomous ODE

    P_{2m}(phi) = (-1)^{m+1} |phi|^{-alpha} phi

whose linear part comes from the P_k recursion. For even m its sign-changing
periodic orbit attracts forward in s; for odd m it sits between the stable
equilibria +-phi_0 and is found by shooting. The module also carries the
small-n and n = infinity limit equations, the envelope decomposition of
computed patterns and the periodic orbit of the full stationary ODE (m = 2).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .core import ProblemParams, Profile
from .operators import pk_build

log = logging.getLogger(__name__)

RTOL = 1e-10
EPS_REL = 1e-14     # regularization of |phi|^{-alpha} phi relative to the amplitude scale
DETECT_TOL = 1e-8


class WrongParity(ValueError):
    pass


class NoConvergence(RuntimeError):
    def __init__(self, msg, returns=None):
        super().__init__(msg)
        self.returns = returns


class BracketFailed(RuntimeError):
    pass


class TailBelowFloor(ArithmeticError):
    """Tail samples are at the level of floating-point noise."""


class Unsupported(ValueError):
    pass


# ---------------------------------------------------------------- equations

@dataclass(frozen=True)
class TailEquation:
    """c_{2m} phi^{(2m)} + ... + c_0 phi = sign * N(phi), c_{2m} = 1.

    N(phi) = |phi|^{-alpha} phi; alpha = 1 is the sign nonlinearity.
    """

    m: int
    n: float
    coeffs: tuple
    sign: int
    alpha: float
    kind: str = "exact"

    @property
    def order(self) -> int:
        return 2 * self.m

    def to_dict(self) -> dict:
        return {"m": self.m, "n": self.n, "coeffs": list(self.coeffs), "sign": self.sign,
                "alpha": self.alpha, "kind": self.kind}


def tail_equation(params: ProblemParams) -> TailEquation:
    """The autonomous equation for phi with P_{2m} evaluated at gamma(m, n)."""
    m = params.m
    gamma = params.exponents.gamma
    c = pk_build(2 * m)[2 * m].numeric(gamma)
    return TailEquation(m, params.n, tuple(float(x) for x in c), (-1) ** (m + 1), params.exponents.alpha)


def limit_infinite_n(m: int = 2) -> TailEquation:
    """n -> infinity: alpha -> 1, gamma -> 2m, nonlinearity sign(phi)."""
    c = pk_build(2 * m)[2 * m].numeric(2.0 * m)
    return TailEquation(m, math.inf, tuple(float(x) for x in c), (-1) ** (m + 1), 1.0, kind="sign")


@dataclass(frozen=True)
class ScaledEquation:
    """phi(s) = amplitude_scale * Phi(eta), eta = argument_scale * s, Phi solving ``equation``.

    ``amplitude_scale`` is the small-n factor (n/2m)^{2m/n}. It drops the
    factors that the 1/alpha power amplifies, so orbit amplitudes are compared
    through ``matched_amplitude_scale`` = c_0^{-1/alpha} instead, with c_0 the
    constant coefficient of P_{2m} (this equates the zero-order terms of the
    two operators, the binomial one having c_0 = 1).
    """

    equation: TailEquation
    amplitude_scale: float
    argument_scale: float
    matched_amplitude_scale: float


def scale_small_n(params: ProblemParams) -> ScaledEquation:
    """Binomial limit system e^{-eta}(e^eta Phi)^{(2m)} = (-1)^{m+1}|Phi|^{-alpha}Phi for m = 2, 3."""
    m, n = params.m, params.n
    if m not in (2, 3):
        raise Unsupported(f"scaled limit equation is available for m = 2, 3 only (got m = {m})")
    k = 2 * m
    coeffs = tuple(float(math.comb(k, j)) for j in range(k + 1))
    alpha = params.exponents.alpha
    eq = TailEquation(m, n, coeffs, (-1) ** (m + 1), alpha, kind="binomial")
    c0 = tail_equation(params).coeffs[0]
    return ScaledEquation(eq, (n / k) ** (k / n), k / n, c0 ** (-1.0 / alpha))


def _as_equation(eq_or_params) -> TailEquation:
    if isinstance(eq_or_params, TailEquation):
        return eq_or_params
    if isinstance(eq_or_params, ScaledEquation):
        return eq_or_params.equation
    return tail_equation(eq_or_params)


def rhs_autonomous(state, eq_or_params, eps: float = 0.0) -> np.ndarray:
    """First-order form of the tail equation; state = (phi, phi', ..., phi^{(2m-1)}).

    The top derivative is sign*N_eps(phi) - sum_{j<2m} c_j phi^{(j)} with
    N_eps(phi) = (eps^2 + phi^2)^{-alpha/2} phi, the convention of the
    regularized nonlinearity.
    """
    eq = _as_equation(eq_or_params)
    y = np.asarray(state, float)
    c = np.asarray(eq.coeffs)
    phi = y[0]
    s = eps * eps + phi * phi
    N = s ** (-eq.alpha / 2) * phi if s > 0 else 0.0
    top = eq.sign * N - float(c[:-1] @ y)
    return np.append(y[1:], top)


def _vector_field(eq: TailEquation, eps: float):
    c = np.asarray(eq.coeffs[:-1])
    a, sg = eq.alpha, eq.sign

    def f(s, y):
        phi = y[0]
        r = eps * eps + phi * phi
        N = r ** (-a / 2) * phi if r > 0 else 0.0
        out = np.empty_like(y)
        out[:-1] = y[1:]
        out[-1] = sg * N - c @ y
        return out
    return f


@dataclass(frozen=True)
class Equilibria:
    phi0: float

    @property
    def values(self) -> tuple[float, float]:
        return (-self.phi0, self.phi0)


def equilibria_odd(eq_or_params) -> Equilibria:
    """phi_0 = [gamma (gamma-1) ... (gamma-2m+1)]^{-1/alpha}; exists for odd m only."""
    eq = _as_equation(eq_or_params)
    if eq.m % 2 == 0:
        raise WrongParity(f"constant equilibria need odd m (got m = {eq.m})")
    c0 = eq.coeffs[0]   # the falling factorial for the exact equation, 1 for the binomial one
    if c0 <= 0:
        raise ValueError("no positive equilibrium: constant coefficient is not positive")
    return Equilibria(float(c0 ** (-1.0 / eq.alpha)))


# ---------------------------------------------------------------- orbits

@dataclass
class OrbitRecord:
    m: int
    n: float
    amplitude: float
    period: float
    stability: str
    cauchy_data: np.ndarray
    method: str
    kind: str = "exact"
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.amplitude > 0 and self.period > 0):
            raise ValueError("orbit needs positive amplitude and period")

    def to_dict(self) -> dict:
        d = {"m": self.m, "n": self.n, "amplitude": self.amplitude, "period": self.period,
             "stability": self.stability, "cauchy_data": [float(x) for x in self.cauchy_data],
             "method": self.method, "kind": self.kind}
        d.update({k: v for k, v in self.extras.items() if not isinstance(v, np.ndarray)})
        return d


def _relative_distance(a, b) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.finfo(float).tiny))


def _segment(f, s0, y0, s_max, rtol, atol, min_gap):
    """Integrate from a section point to the next upward zero of phi."""
    def ev(s, y):
        # a start on the section would register as a crossing; hold the event positive briefly
        return y[0] if s - s0 > min_gap else 1.0
    ev.direction = 1
    ev.terminal = True
    sol = solve_ivp(f, (s0, s_max), y0, method="DOP853", rtol=rtol, atol=atol, events=ev, dense_output=True)
    if sol.t_events[0].size == 0:
        return None, sol
    return (float(sol.t_events[0][0]), sol.y_events[0][0].copy()), sol


def poincare_returns(eq_or_params, y0, n_returns: int, rtol: float = RTOL, s0: float = 0.0,
                     s_max: float | None = None, eps_rel: float = EPS_REL, scale: float | None = None):
    """Successive upward crossings of phi = 0 with their states and segment maxima.

    The regularization eps = eps_rel * scale is refreshed on every segment with
    scale = max|phi| of the previous segment (amplitudes span many decades as n -> 0).
    """
    eq = _as_equation(eq_or_params)
    y = np.asarray(y0, float).copy()
    scale = float(abs(y[0]) or np.abs(y).max()) if scale is None else scale
    s_max = math.inf if s_max is None else s_max
    out = []
    s = s0
    while len(out) < n_returns and s < s_max:
        f = _vector_field(eq, eps_rel * scale)
        min_gap = 1e-6 if y[0] == 0 else 0.0
        atol = 1e-6 * rtol * max(float(np.abs(y).max()), np.finfo(float).tiny)
        span = s + 50.0 if not math.isfinite(s_max) else s_max
        hit, sol = _segment(f, s, y, span, rtol, atol, min_gap)
        if hit is None:
            if not math.isfinite(s_max):
                break
            return out
        s_new, y_new = hit
        ss = np.linspace(s, s_new, 400)
        amp = float(np.abs(sol.sol(ss)[0]).max())
        out.append({"s": s_new, "state": y_new, "amplitude": amp})
        scale = max(amp, np.finfo(float).tiny)
        s, y = s_new, y_new
    return out


def periodic_even(eq_or_params, s_span: float = 2000.0, detect_tol: float = DETECT_TOL, y0=None,
                  rtol: float = RTOL, max_returns: int = 5000, multipliers: bool = False) -> OrbitRecord:
    """Forward attractor of the tail equation for even m (section phi = 0, phi' > 0).

    Converged when two successive returns agree within ``detect_tol`` in
    relative state distance.
    """
    eq = _as_equation(eq_or_params)
    if eq.m % 2:
        raise WrongParity("periodic_even needs even m")
    k = eq.order
    y = np.zeros(k)
    y[0] = 1e-3
    y = y if y0 is None else np.asarray(y0, float)
    rets = []
    s = 0.0
    while s < s_span and len(rets) < max_returns:
        batch = poincare_returns(eq, y, 20, rtol=rtol, s0=s, s_max=s_span)
        if not batch:
            break
        rets.extend(batch)
        s, y = batch[-1]["s"], batch[-1]["state"]
        for i in range(max(1, len(rets) - len(batch)), len(rets)):
            d = _relative_distance(rets[i]["state"], rets[i - 1]["state"])
            if d < detect_tol:
                per = rets[i]["s"] - rets[i - 1]["s"]
                extras = {"return_distance": d, "returns": i + 1, "s_converged": rets[i]["s"]}
                if multipliers:
                    extras["multipliers"] = [float(x) for x in refine_periodic(eq, rets[i]["state"], max_iter=1)[4]]
                return OrbitRecord(eq.m, eq.n, rets[i]["amplitude"], per, "stable", rets[i]["state"].copy(),
                                   "forward-attractor", eq.kind, extras)
    raise NoConvergence(f"no periodic return within s = {s_span} ({len(rets)} returns)", rets)


def shooting_outcome(eq: TailEquation, phi0_start: float, d2: float, strip: float,
                     s_max: float = 200.0, rtol: float = RTOL, order4: float = 0.0):
    """(side, escape time) for data phi = phi0_start, phi'' = d2, other orders zero.

    side is the sign of phi when |phi| first reaches ``strip``, 0 if it never does.
    """
    k = eq.order
    y0 = np.zeros(k)
    y0[0] = phi0_start
    y0[2] = d2
    if k > 4:
        y0[4] = order4
    scale = strip
    f = _vector_field(eq, EPS_REL * scale)

    def ev(s, y):
        return abs(y[0]) - strip
    ev.terminal = True
    sol = solve_ivp(f, (0.0, s_max), y0, method="DOP853", rtol=rtol, atol=1e-14 * scale, events=ev)
    if sol.t_events[0].size:
        return int(np.sign(sol.y_events[0][0][0])), float(sol.t_events[0][0])
    return 0, s_max


def periodic_odd_shoot(eq_or_params, shoot_tol: float = 1e-14, phi_start: float = 1e-4,
                       d2_range: tuple = (-1e-3, 0.0), scan: int = 21, strip_fraction: float = 0.5,
                       s_max: float = 200.0, rtol: float = RTOL) -> OrbitRecord:
    """Shoot in phi''(0) with phi(0) = phi_start and orders 1, 3, 4, 5 zero.

    Data on either side of the unstable orbit's stable set leave the strip
    |phi| < strip_fraction*phi_0 towards opposite equilibria; bisection on the
    side maximizes the escape time. The orbit is read off at the shadowing
    stage of the tuned trajectory.
    """
    eq = _as_equation(eq_or_params)
    if eq.m % 2 == 0:
        raise WrongParity("periodic_odd_shoot needs odd m")
    phi0 = equilibria_odd(eq).phi0
    strip = strip_fraction * phi0
    grid = np.linspace(d2_range[0], d2_range[1], scan)
    sides = [shooting_outcome(eq, phi_start, p, strip, s_max, rtol)[0] for p in grid]
    idx = [i for i in range(scan - 1) if sides[i] * sides[i + 1] < 0]
    if not idx:
        raise BracketFailed(f"no change of escape side for phi''(0) in {d2_range}")
    i = idx[0]
    lo, hi, slo = grid[i], grid[i + 1], sides[i]
    best = (0.0, lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        side, T = shooting_outcome(eq, phi_start, mid, strip, s_max, rtol)
        if T > best[0]:
            best = (T, mid)
        if side == slo:
            lo = mid
        else:
            hi = mid
        if abs(hi - lo) <= shoot_tol * abs(mid):
            break
    d2 = 0.5 * (lo + hi)
    rec = _shadowing_orbit(eq, phi_start, d2, best[0], rtol)
    rec.extras.update({"d2": d2, "bracket": [lo, hi], "escape_time": best[0], "phi0": phi0,
                       "other_brackets": len(idx) - 1})
    return rec


def _shadowing_orbit(eq, phi_start, d2, T_escape, rtol) -> OrbitRecord:
    """Returns of the tuned trajectory before escape; the closest pair gives the orbit."""
    y0 = np.zeros(eq.order)
    y0[0] = phi_start
    y0[2] = d2
    rets = poincare_returns(eq, y0, 10000, rtol=rtol, s_max=0.9 * T_escape)
    if len(rets) < 3:
        raise BracketFailed(f"tuned trajectory makes only {len(rets)} returns before escape")
    best = None
    for i in range(1, len(rets)):
        d = _relative_distance(rets[i]["state"], rets[i - 1]["state"])
        if best is None or d < best[0]:
            best = (d, i)
    d, i = best
    y_orb, per, amp, res, mult = refine_periodic(eq, rets[i]["state"])
    stab = "unstable" if mult[0] > 1 else "stable"
    return OrbitRecord(eq.m, eq.n, amp, per, stab, y_orb, "shooting", eq.kind,
                       {"shadow_distance": d, "return_distance": res, "returns": len(rets),
                        "s_orbit": rets[i]["s"], "multipliers": [float(x) for x in mult],
                        # oscillation size of the tuned shot itself at its last full return
                        "trace_amplitude": float(rets[-1]["amplitude"])})


def return_map(eq: TailEquation, y_section, rtol: float = RTOL):
    """One return to phi = 0, phi' > 0: (state, time, segment max|phi|)."""
    r = poincare_returns(eq, y_section, 1, rtol=rtol)
    if not r:
        return None
    return r[0]["state"], r[0]["s"], r[0]["amplitude"]


def refine_periodic(eq: TailEquation, y_section, rtol: float = 1e-12, tol: float = 1e-11, max_iter: int = 40):
    """Fixed point of the return map near ``y_section`` by Newton in the 2m-1 free components.

    The Jacobian is a forward difference of the return map; its eigenvalues
    (plus one) are the Floquet multipliers. Returns (state, period, amplitude,
    relative return distance, multipliers).
    """
    y = np.asarray(y_section, float).copy()
    y[0] = 0.0
    k = y.size - 1
    nrm = float(np.linalg.norm(y))
    res = math.inf
    J = None
    for _ in range(max_iter):
        r0 = return_map(eq, y, rtol)
        if r0 is None:
            raise BracketFailed("orbit point does not return to the section")
        P = r0[0]
        res = float(np.linalg.norm(P[1:] - y[1:]) / nrm)
        D = np.zeros((k, k))
        h = 1e-5 * nrm
        for j in range(k):
            yp = y.copy()
            yp[j + 1] += h
            rp = return_map(eq, yp, rtol)
            if rp is None:
                raise BracketFailed("perturbed point does not return to the section")
            D[:, j] = (rp[0][1:] - P[1:]) / h
        J = D
        if res < tol:
            break
        y[1:] -= np.linalg.solve(D - np.eye(k), P[1:] - y[1:])
        nrm = float(np.linalg.norm(y))
    r = return_map(eq, y, rtol)
    mult = np.sort(np.abs(np.linalg.eigvals(J)))[::-1]
    return y, r[1], r[2], _relative_distance(r[0], y), mult


def stability_test(orbit: OrbitRecord, eq_or_params=None, rel_perturbation: float = 1e-3, returns: int = 5,
                   rtol: float = RTOL) -> dict:
    """Perturb the orbit point by a relative 1e-3 and follow the Poincare map.

    The distance to the orbit's section point after each return, relative to
    the initial one. Growth means unstable, decay stable.
    """
    eq = _as_equation(eq_or_params) if eq_or_params is not None else tail_equation(
        ProblemParams(m=orbit.m, n=orbit.n))
    base = np.asarray(orbit.cauchy_data, float)
    # scale the non-section components so the start stays on phi = 0
    y = base.copy()
    y[1:] *= 1.0 + rel_perturbation
    per = poincare_returns(eq, y, returns, rtol=rtol)
    d0 = _relative_distance(y, base)
    dist = [float(np.linalg.norm(a["state"] - base) / np.linalg.norm(base)) for a in per]
    escaped = len(per) < returns
    if escaped:
        # left the neighbourhood of the orbit before completing the returns
        ratio = math.inf
    else:
        ratio = dist[-1] / d0
    return {"d0": d0, "distances": dist, "growth": ratio, "grows": bool(ratio > 1.0), "returns": len(dist),
            "escaped": escaped}


def unscaled_amplitude(orbit: OrbitRecord, scaled: ScaledEquation, matched: bool = False) -> float:
    k = scaled.matched_amplitude_scale if matched else scaled.amplitude_scale
    return orbit.amplitude * k


# ---------------------------------------------------------------- envelopes

def transversal_zeros(p: Profile, side: str = "right") -> np.ndarray:
    """Linearly interpolated sign changes of F on one half of the grid, ordered outwards."""
    y, F = p.y, p.values
    sel = y > 0 if side == "right" else y < 0
    idx = np.nonzero(sel[:-1] & sel[1:] & (F[:-1] * F[1:] < 0))[0]
    z = y[idx] - F[idx] * (y[idx + 1] - y[idx]) / (F[idx + 1] - F[idx])
    z = np.sort(z) if side == "right" else np.sort(z)[::-1]
    return z


def estimate_interface(p: Profile, side: str = "right", ratio_band: tuple = (0.3, 0.65)) -> float:
    """Interface position from the geometric accumulation of tail zeros.

    Zeros approach the interface like y_I - C q^k; successive gaps have ratio q.
    The regularized tail beyond the interface has evenly spaced zeros
    (ratio near 1), so only gaps in the geometric regime are used and the
    series is summed from the last of them.
    """
    z = transversal_zeros(p, side)
    g = np.abs(np.diff(z))
    if g.size < 2:
        raise TailBelowFloor("fewer than three tail zeros; interface not resolvable")
    r = g[1:] / g[:-1]
    ok = np.nonzero((r > ratio_band[0]) & (r < ratio_band[1]))[0]
    if ok.size == 0:
        raise TailBelowFloor("no geometric run of zeros found")
    # first contiguous run
    run = [ok[0]]
    for j in ok[1:]:
        if j != run[-1] + 1:
            break
        run.append(j)
    q = float(np.mean(r[run]))
    j = run[-1] + 1                     # gap g[j] = |z[j+1] - z[j]| ends the run
    tail = g[j] * q / (1 - q)
    zj = z[j + 1]
    return float(zj + tail) if side == "right" else float(zj - tail)


def envelope_decompose(p: Profile, interface_y: float, window: int, side: str = "right",
                       floor: float | None = None) -> dict:
    """phi samples F(y)/|y - y_I|^gamma against s = ln|y - y_I| over ``window`` nodes inside the support.

    Samples whose |F| is below ``floor`` (default 1e-12 max|F|) are dropped;
    if nothing survives TailBelowFloor is raised.
    """
    gamma = p.params.exponents.gamma
    y, F = p.y, p.values
    if floor is None:
        floor = 1e-12 * float(np.abs(F).max())
    if side == "right":
        idx = np.nonzero(y < interface_y)[0][-window:]
    else:
        idx = np.nonzero(y > interface_y)[0][:window]
    d = np.abs(y[idx] - interface_y)
    keep = (d > 0) & (np.abs(F[idx]) > floor)
    if not np.any(keep) or not np.any(np.abs(F) > 0):
        raise TailBelowFloor("tail window is below the floating-point floor")
    d, Fi = d[keep], F[idx][keep]
    phi = Fi / d ** gamma
    s = np.log(d)
    o = np.argsort(s)
    s, phi = s[o], phi[o]
    peaks = [abs(phi[i]) for i in range(1, phi.size - 1) if abs(phi[i]) >= abs(phi[i - 1]) and abs(phi[i]) >= abs(phi[i + 1])]
    sign_changes = int(np.count_nonzero(np.diff(np.sign(phi)) != 0))
    return {"s": s, "phi": phi, "peaks": np.array(peaks), "sign_changes": sign_changes, "floor": floor}


def perturbation_ratio(s, phi, eq_or_params, eps: float = 0.0) -> np.ndarray:
    """Size of the term dropped from the full tail equation, relative to the nonlinearity.

    With F = d^gamma phi(ln d) the full ODE reads
    P_{2m}(phi) = sign (N(phi) - e^{2ms} phi); the autonomous equation keeps
    only N. Returns |e^{2ms} phi| / |N_eps(phi)|, which should be small
    wherever an envelope is compared with the autonomous orbit.
    """
    eq = _as_equation(eq_or_params)
    s, phi = np.asarray(s, float), np.asarray(phi, float)
    # |phi| / |N_eps(phi)| = (eps^2 + phi^2)^{alpha/2}
    return np.exp(2 * eq.m * s) * (eps * eps + phi * phi) ** (eq.alpha / 2)


# ---------------------------------------------------------------- stationary orbit, m = 2

def stationary_hamiltonian(F0: float, F2: float, n: float) -> float:
    """F'F''' - F''^2/2 - F^2/2 + |F|^beta/beta at a symmetric point (F' = F''' = 0)."""
    b = (n + 2) / (n + 1)
    return -0.5 * F2 ** 2 - 0.5 * F0 ** 2 + abs(F0) ** b / b


def _stationary_rhs(n):
    a = n / (n + 1)

    def f(y, u):
        F = u[0]
        return [u[1], u[2], u[3], F - (abs(F) ** (-a) * F if F != 0 else 0.0)]
    return f


def _min_event(y, u):
    return u[1]


_min_event.direction = 1


def stationary_mismatch(F2: float, F0: float, n: float = 1.0, y_max: float = 20.0) -> float:
    """F''' at the first minimum of the symmetric shot (F(0), 0, F2, 0); zero for a periodic orbit."""
    sol = solve_ivp(_stationary_rhs(n), (0.0, y_max), [F0, 0.0, F2, 0.0], method="DOP853",
                    rtol=1e-12, atol=1e-14, events=_min_event)
    te = sol.t_events[0]
    k = np.nonzero(te > 1e-6)[0]
    if k.size == 0:
        return math.nan
    return float(sol.y_events[0][k[0]][3])


def symmetric_orbit_roots(F0, n, lo=-1.5, hi=-0.01, scan=150) -> list[float]:
    """All F''(0) in [lo, hi] giving a symmetric periodic shot, ordered by |F''(0)|."""
    grid = np.linspace(lo, hi, scan)
    vals = [stationary_mismatch(g, F0, n) for g in grid]
    roots = []
    for i in range(scan - 1):
        if np.isfinite(vals[i]) and np.isfinite(vals[i + 1]) and vals[i] * vals[i + 1] < 0:
            try:
                r = brentq(stationary_mismatch, grid[i], grid[i + 1], args=(F0, n), xtol=1e-13)
            except ValueError:   # a shot inside the bracket never reached a minimum
                continue
            if abs(stationary_mismatch(r, F0, n)) < 1e-8:
                roots.append(float(r))
    return sorted(roots, key=abs)


def _first_root(F0, n):
    roots = symmetric_orbit_roots(F0, n)
    if not roots:
        raise BracketFailed(f"no symmetric periodic orbit found through F(0) = {F0}")
    # the simplest orbit of the family: the root nearest F''(0) = 0
    return roots[0]


def _half_period(F0, F2, n):
    sol = solve_ivp(_stationary_rhs(n), (0.0, 20.0), [F0, 0.0, F2, 0.0], method="DOP853",
                    rtol=1e-12, atol=1e-14, events=_min_event)
    te = sol.t_events[0]
    te = te[te > 1e-6]
    return float(te[0]), float(sol.y_events[0][np.nonzero(sol.t_events[0] > 1e-6)[0][0]][0])


def full_periodic_orbit_stationary(params: ProblemParams | None = None, F0_start: float = 1.5,
                                   step: float = 0.005, F0_max: float = 1.6) -> OrbitRecord:
    """Periodic orbit of (-1)^{m+1}F'''' + F - |F|^{-alpha}F = 0 (m = 2) about +1.

    Symmetric shooting: F(0) = F0, F'(0) = F'''(0) = 0, F''(0) tuned so that
    F''' vanishes at the first minimum (the orbit is then even about both
    extrema). The branch through F0_start is continued in F0 to the orbit on
    the zero level of the first integral, which is where the oscillations of
    compactly supported patterns live; its maximum is reported as F*(0).
    """
    params = ProblemParams(m=2, n=1.0) if params is None else params
    if params.m != 2:
        raise Unsupported("the stationary orbit shoot is implemented for m = 2")
    n = params.n
    F2_start = _first_root(F0_start, n)
    H_start = stationary_hamiltonian(F0_start, F2_start, n)
    branch = [(F0_start, F2_start, H_start)]
    F0, F2, H = branch[0]
    while F0 < F0_max:
        F0n = F0 + step
        F2n = brentq(stationary_mismatch, F2 - 0.01, F2 + 0.01, args=(F0n, n), xtol=1e-13)
        Hn = stationary_hamiltonian(F0n, F2n, n)
        branch.append((F0n, F2n, Hn))
        if H * Hn <= 0:
            break
        F0, F2, H = F0n, F2n, Hn
    else:
        raise BracketFailed("zero level of the first integral not reached on the branch")

    def H_on_branch(x, guess=[F2]):
        g = brentq(stationary_mismatch, guess[0] - 0.01, guess[0] + 0.01, args=(x, n), xtol=1e-13)
        guess[0] = g
        return stationary_hamiltonian(x, g, n)

    Fs = brentq(H_on_branch, F0, F0 + step, xtol=1e-10)
    F2s = brentq(stationary_mismatch, F2 - 0.02, F2 + 0.02, args=(Fs, n), xtol=1e-13)
    half, Fmin = _half_period(Fs, F2s, n)
    return OrbitRecord(
        m=2, n=n, amplitude=float(Fs), period=2 * half, stability="neutral",
        cauchy_data=np.array([Fs, 0.0, F2s, 0.0]), method="shooting", kind="stationary",
        extras={"F_star0": float(Fs), "F2_star": float(F2s), "F_min": Fmin, "shoot_F0": F0_start,
                "shoot_F2": float(F2_start), "shoot_hamiltonian": float(H_start),
                "branch": [list(b) for b in branch]},
    )
