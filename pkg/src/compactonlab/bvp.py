"""Damped Newton with epsilon continuation for the regularized Dirichlet problem

    (-1)^m F^{(2m)} = F - (eps^2 + F^2)^{-alpha/2} F   on (-R, R),

seeded by gluing signed bumps according to a multiindex.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from .core import DomainTooSmall, Grid, MultiIndex, ProblemParams, Profile, count_sign_changes
from .operators import (
    apply_2m_derivative,
    nonlinearity,
    nonlinearity_derivative,
    polyharmonic_matrix,
)

log = logging.getLogger(__name__)

DEFAULT_SCHEDULE = (1e-2, 1e-3, 1e-4, 1e-7)
TRIVIAL_AMPLITUDE = 1e-3  # converged max|F| below this is the trivial solution
SIGN_THRESHOLD = 0.1      # tail lobes of the m=2 patterns peak near 0.05
TAIL_THRESHOLD = 1e-6


class SingularLinearization(ArithmeticError):
    """eps = 0 derivative requested at a node where F = 0."""


class NewtonDiverged(RuntimeError):
    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


class MaxIterExceeded(RuntimeError):
    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    residual_inf: float
    epsilon_path: list
    final_profile: Profile
    sign_changes: int
    support_estimate: tuple
    newton_tol: float = 0.0
    effective_tol: float = 0.0
    residual_eps0: float = float("nan")
    trivial: bool = False
    label: str = ""
    stage_iterations: list = field(default_factory=list)
    parity: int = 0

    def summary(self) -> dict:
        return {
            "label": self.label,
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "residual_inf": float(self.residual_inf),
            "residual_eps0": float(self.residual_eps0),
            "newton_tol": float(self.newton_tol),
            "effective_tol": float(self.effective_tol),
            "epsilon_path": [float(e) for e in self.epsilon_path],
            "stage_iterations": [int(k) for k in self.stage_iterations],
            "sign_changes": int(self.sign_changes),
            "support_estimate": [float(x) for x in self.support_estimate],
            "trivial": bool(self.trivial),
            "max_abs": float(np.abs(self.final_profile.values).max()),
            "params": self.final_profile.params.to_dict(),
            "parity": int(self.parity),
        }


# ---------------------------------------------------------------- residual / jacobian

def residual(p: Profile, epsilon: float | None = None) -> np.ndarray:
    """(-1)^m F^{(2m)} - F + (eps^2+F^2)^{-alpha/2} F at the interior nodes."""
    m = p.params.m
    return (-1) ** m * apply_2m_derivative(p) - nonlinearity(p.interior, p.params, epsilon)


def jacobian(p: Profile, epsilon: float | None = None) -> sp.csr_matrix:
    eps = p.params.epsilon if epsilon is None else epsilon
    F = p.interior
    if eps == 0 and np.any(F == 0):
        raise SingularLinearization("eps = 0 linearization is singular where F = 0")
    A = polyharmonic_matrix(p.params.m, p.grid)
    return (A - sp.diags(nonlinearity_derivative(F, p.params, eps))).tocsr()


def rounding_floor(A: sp.spmatrix, F: np.ndarray) -> float:
    """Residual level set by rounding in A @ F; Newton cannot go below it."""
    anorm = float(abs(A).sum(axis=1).max())
    return 16 * np.finfo(float).eps * anorm * max(float(np.abs(F).max(initial=0.0)), 1.0)


# ---------------------------------------------------------------- guesses

@dataclass(frozen=True)
class GuessSpec:
    """Bump gluing recipe.

    ``separation`` is the centre distance for neighbours with opposite signs and
    a single zero between them; other gaps are derived from it (see ``gap_length``).
    """

    sigma: MultiIndex
    bump_half_width: float
    separation: float
    amplitude: float
    merged_separation: float | None = None
    merged_half_width: float | None = None
    disjoint_separation: float | None = None
    shape_power: float = 4.0


def length_scale(m: int) -> float:
    """Clamped-beam type width of the first Dirichlet mode reaching lambda = 1, relative to m = 2."""
    return _critical_radius(m) / _critical_radius(2)


def _critical_radius(m: int) -> float:
    from .variational import polyharmonic_spectrum
    lam = polyharmonic_spectrum(m, 1.0, 401 if m < 4 else 201, 1).eigenvalues[0]
    return float(lam ** (1.0 / (2 * m)))


def m1_support_half_width(n: float) -> float:
    return (n + 1) * math.pi / n


def m1_amplitude(n: float) -> float:
    return n ** ((n + 1) / n) * (2 * (n + 1) / (n * (n + 2))) ** ((n + 1) / n)


def default_guess_spec(sigma: MultiIndex | str, params: ProblemParams) -> GuessSpec:
    """Gluing geometry calibrated on m = 2, n = 1 and rescaled for other m.

    For m = 1 the bumps are exact compactons touching end to end.
    """
    if isinstance(sigma, str):
        sigma = MultiIndex.parse(sigma)
    p = 2 * (params.n + 1) / params.n
    if params.m == 1:
        hw = m1_support_half_width(params.n)
        return GuessSpec(sigma, hw, 2 * hw, m1_amplitude(params.n), 2 * hw, hw, 2 * hw, p)
    ell = length_scale(params.m)
    return GuessSpec(
        sigma,
        bump_half_width=4.0 * ell,
        separation=7.5 * ell,
        amplitude=1.5,
        merged_separation=7.57 * ell,
        merged_half_width=3.0 * ell,
        disjoint_separation=28.0 * ell,
        shape_power=p,
    )


def gap_length(spec: GuessSpec, left_sign: int, right_sign: int, zeros) -> float:
    """Centre distance between neighbouring bumps across a gap with ``zeros`` sign changes."""
    s = spec.separation
    if zeros == math.inf:
        return spec.disjoint_separation or 4 * s
    opposite = left_sign != right_sign
    if opposite != (zeros % 2 == 1):
        raise ValueError(f"{zeros} zeros cannot separate bumps of signs {left_sign:+d}, {right_sign:+d}")
    if zeros == 0:
        return spec.merged_separation or s
    if opposite:
        return s * (1.0 + 0.4 * (zeros - 1))
    return s * (1.2 + (zeros - 2) / 3.0)


def bump_layout(spec: GuessSpec) -> list[tuple[int, float, float]]:
    """(sign, centre, half-width) of every bump, centred on y = 0."""
    sig = spec.sigma
    bumps = []
    x = 0.0
    for t, s in enumerate(sig.signed):
        sign = 1 if s > 0 else -1
        k = abs(s) // 2
        # a zero-count gap merges its neighbours: +2,0,+2 is laid out like +4
        touches0 = (t > 0 and sig.gaps[t - 1] == 0) or (t < len(sig.gaps) and sig.gaps[t] == 0)
        merged = k > 1 or touches0
        hw = (spec.merged_half_width or spec.bump_half_width) if merged else spec.bump_half_width
        if t:
            x += gap_length(spec, bumps[-1][0], sign, sig.gaps[t - 1])
        for j in range(k):
            if j:
                x += spec.merged_separation or spec.separation
            bumps.append((sign, x, hw))
    mid = 0.5 * (bumps[0][1] + bumps[-1][1])
    return [(s, c - mid, hw) for s, c, hw in bumps]


def default_R(spec: GuessSpec, m: int) -> float:
    lay = bump_layout(spec)
    reach = max(abs(c) + hw for _, c, hw in lay)
    if m == 1:
        return reach + spec.bump_half_width
    return reach + 4.0 * spec.bump_half_width


def default_h(m: int) -> float:
    return {1: 0.01, 2: 0.01, 3: 0.02}.get(m, 0.04)


def grid_for(R: float, h: float) -> Grid:
    half = int(math.ceil(R / h))
    return Grid(half * h, 2 * half + 1)


def guess_from_multiindex(spec: GuessSpec, grid: Grid, params: ProblemParams) -> Profile:
    """Sum of signed cosine-power bumps placed according to the multiindex."""
    y = grid.nodes
    F = np.zeros_like(y)
    for sign, c, hw in bump_layout(spec):
        if abs(c) + hw > grid.R:
            raise DomainTooSmall(f"bump at {c:.3f} with half-width {hw:.3f} exceeds R = {grid.R}")
        z = np.abs(y - c) / hw
        F += sign * spec.amplitude * np.where(z < 1, np.cos(0.5 * np.pi * np.minimum(z, 1)) ** spec.shape_power, 0.0)
    F[0] = F[-1] = 0.0
    return Profile(grid, F, params.with_(R=grid.R, npts=grid.npts))


def pattern_guess(sigma: MultiIndex | str, m: int, n: float, R: float | None = None, h: float | None = None,
                  epsilon: float = 1e-4) -> Profile:
    """Guess for a pattern on an automatically sized grid."""
    base = ProblemParams(m=m, n=n, epsilon=epsilon, R=1.0, npts=2 * m + 3)
    spec = default_guess_spec(sigma, base)
    R = default_R(spec, m) if R is None else R
    grid = grid_for(R, default_h(m) if h is None else h)
    return guess_from_multiindex(spec, grid, base)


# ---------------------------------------------------------------- Newton

def support_estimate(p: Profile, threshold: float = TAIL_THRESHOLD) -> tuple[float, float]:
    v = np.abs(p.values)
    idx = np.nonzero(v > threshold * max(v.max(), 1e-300))[0]
    if idx.size == 0 or v.max() == 0:
        return (0.0, 0.0)
    y = p.grid.nodes
    return (float(y[idx[0]]), float(y[idx[-1]]))


def _parity(values: np.ndarray) -> int:
    """+1 if even about y = 0, -1 if odd, 0 otherwise (to rounding)."""
    scale = max(float(np.abs(values).max()), 1e-300)
    if np.abs(values - values[::-1]).max() <= 1e-12 * scale:
        return 1
    if np.abs(values + values[::-1]).max() <= 1e-12 * scale:
        return -1
    return 0


def _newton_stage(F, A, params, eps, tol, max_iter, parity=0):
    """Damped Newton at one eps. Returns (F, residual, iterations, converged, floor).

    With parity = +1 / -1 every step is projected on even / odd functions, which
    removes the near-null translation mode of well separated structures.
    """
    def res(x):
        return A @ x - nonlinearity(x, params, eps)

    r = res(F)
    rn = float(np.abs(r).max())
    floor = rounding_floor(A, F)
    for it in range(max_iter + 1):
        floor = rounding_floor(A, F)
        if rn <= max(tol, floor):
            return F, rn, it, True, floor
        if it == max_iter:
            break
        J = (A - sp.diags(nonlinearity_derivative(F, params, eps))).tocsc()
        d = spla.spsolve(J, -r)
        if parity:
            d = 0.5 * (d + parity * d[::-1])
        if not np.all(np.isfinite(d)):
            raise NewtonDiverged(f"non-finite Newton step at eps={eps:g}")
        t = 1.0
        m0 = float(r @ r)
        for _ in range(40):
            Fn = F + t * d
            rnew = res(Fn)
            if float(rnew @ rnew) < m0:
                break
            t *= 0.5
        else:
            # full damping failed: at the rounding floor this is stagnation, not divergence
            if rn <= 8 * max(tol, floor):
                return F, rn, it, True, floor
            raise NewtonDiverged(f"residual {rn:.3e} not reduced under maximal damping at eps={eps:g}")
        F, r, rn = Fn, rnew, float(np.abs(rnew).max())
    return F, rn, max_iter, False, floor


def solve(guess: Profile, schedule=DEFAULT_SCHEDULE, newton_tol: float = 1e-9, max_iter: int = 60,
          sign_threshold: float = SIGN_THRESHOLD, label: str = "", max_refine: int = 8,
          symmetry="auto") -> SolveReport:
    """Damped Newton at each eps of ``schedule`` (strictly decreasing, > 0), warm-started.

    A stage that fails is retried from the last converged profile after inserting
    the geometric mean of the two eps values (at most ``max_refine`` times); the
    walked path is recorded in ``epsilon_path``. ``symmetry="auto"`` keeps an even
    or odd guess exactly even or odd (pass 0 to disable, +1/-1 to force); if the
    projected continuation fails (a fold of the symmetric branch in eps), it is
    rerun without the projection.

    The tolerance actually enforced is max(newton_tol, rounding floor of A @ F);
    both are recorded. The eps = 0 residual of the result is evaluated as a diagnostic.
    """
    schedule = [float(e) for e in schedule]
    if not schedule or any(e <= 0 for e in schedule):
        raise ValueError("eps schedule must be nonempty and positive (eps = 0 is diagnostic only)")
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("eps schedule must be strictly decreasing")
    parity = _parity(guess.interior) if symmetry == "auto" else int(symmetry)
    try:
        return _continuation(guess, schedule, newton_tol, max_iter, sign_threshold, label, max_refine, parity)
    except (NewtonDiverged, MaxIterExceeded):
        if symmetry != "auto" or parity == 0:
            raise
        log.debug("symmetric continuation failed for %s; retrying unprojected", label)
        return _continuation(guess, schedule, newton_tol, max_iter, sign_threshold, label, max_refine, 0)


def _continuation(guess, schedule, newton_tol, max_iter, sign_threshold, label, max_refine, parity):
    params, grid = guess.params, guess.grid
    A = polyharmonic_matrix(params.m, grid)
    F = guess.interior.copy()
    total, stages, path = 0, [], []
    ok, rn, floor = False, float("inf"), 0.0
    pending = list(schedule)
    last_ok = None  # (eps, F) of the last converged stage
    refinements = 0
    while pending:
        eps = pending[0]
        start = F if last_ok is None else last_ok[1]
        try:
            Fs, rn, it, ok, floor = _newton_stage(start, A, params, eps, newton_tol, max_iter, parity)
            err = None
        except NewtonDiverged as e:
            Fs, ok, it, err = start, False, max_iter, e
        total += it
        if ok or last_ok is None and err is None and len(pending) > 1:
            # an unconverged first stage still hands a better start to the next eps
            F = Fs
            path.append(eps)
            stages.append(it)
            pending.pop(0)
            if ok:
                last_ok = (eps, F)
            log.debug("eps=%g iterations=%d residual=%.3e", eps, it, rn)
            continue
        if last_ok is not None and refinements < max_refine:
            # insert an intermediate eps between the last converged value and this one
            refinements += 1
            pending.insert(0, math.sqrt(last_ok[0] * eps))
            log.debug("eps=%g failed; refining to %g", eps, pending[0])
            continue
        path.append(eps)
        stages.append(it)
        rep = _report(grid, Fs, params.with_(epsilon=eps), False, total, rn, path, newton_tol, floor,
                      sign_threshold, label, stages, parity)
        if err is not None:
            raise NewtonDiverged(str(err), rep) from None
        raise MaxIterExceeded(f"no convergence in {max_iter} iterations at eps={eps:g}", rep)
    return _report(grid, F, params.with_(epsilon=schedule[-1]), ok, total, rn, path, newton_tol, floor,
                   sign_threshold, label, stages, parity)


def _report(grid, F, params, ok, total, rn, path, tol, floor, thr, label, stages, parity=0) -> SolveReport:
    prof = Profile.from_interior(grid, F, params)
    r0 = np.nan
    with np.errstate(divide="ignore", invalid="ignore"):
        r0 = float(np.abs(residual(prof, 0.0)).max())
    trivial = float(np.abs(F).max(initial=0.0)) < TRIVIAL_AMPLITUDE
    return SolveReport(
        converged=ok,
        iterations=total,
        residual_inf=rn,
        epsilon_path=list(path),
        final_profile=prof,
        sign_changes=count_sign_changes(prof, thr),
        support_estimate=support_estimate(prof),
        newton_tol=tol,
        effective_tol=max(tol, floor),
        residual_eps0=r0,
        trivial=trivial,
        label=label,
        stage_iterations=list(stages),
        parity=int(parity),
    )


def solve_pattern(sigma: MultiIndex | str, m: int, n: float, R: float | None = None, h: float | None = None,
                  schedule=DEFAULT_SCHEDULE, newton_tol: float = 1e-9, max_iter: int = 60) -> SolveReport:
    """Guess synthesis plus ``solve`` in one call."""
    g = pattern_guess(sigma, m, n, R=R, h=h, epsilon=schedule[-1])
    return solve(g, schedule, newton_tol, max_iter, label=str(sigma))


def relative_l2(a: Profile, b: Profile) -> float:
    na, nb = np.linalg.norm(a.values), np.linalg.norm(b.values)
    den = max(na, nb)
    return 0.0 if den == 0 else float(np.linalg.norm(a.values - b.values) / den)


@dataclass
class FamilyItem:
    sigma: str
    report: SolveReport | None
    error: str | None = None
    duplicate_of: str | None = None


def solve_family(sigmas, params: ProblemParams, schedule=DEFAULT_SCHEDULE, newton_tol: float = 1e-9,
                 max_iter: int = 60, dedup_tol: float = 1e-3, specs: dict | None = None) -> list[FamilyItem]:
    """Solve every multiindex on the common grid of ``params``; failures do not abort the batch.

    Converged nontrivial profiles within relative L2 distance ``dedup_tol`` of an
    earlier one are marked as duplicates.
    """
    grid = params.grid
    items: list[FamilyItem] = []
    kept: list[FamilyItem] = []
    for s in sigmas:
        sig = MultiIndex.parse(s) if isinstance(s, str) else s
        label = str(sig)
        try:
            spec = (specs or {}).get(label) or default_guess_spec(sig, params)
            g = guess_from_multiindex(spec, grid, params)
            rep = solve(g, schedule, newton_tol, max_iter, label=label)
        except (NewtonDiverged, MaxIterExceeded, DomainTooSmall, ValueError) as e:
            items.append(FamilyItem(label, getattr(e, "report", None), f"{type(e).__name__}: {e}"))
            continue
        item = FamilyItem(label, rep)
        if not rep.trivial:
            for k in kept:
                if relative_l2(k.report.final_profile, rep.final_profile) < dedup_tol:
                    item.duplicate_of = k.sigma
                    break
            if item.duplicate_of is None:
                kept.append(item)
        items.append(item)
    return items


def support_bound_radius() -> float:
    """First positive root of tanh R = -tan R (in (pi/2, pi))."""
    return float(brentq(lambda r: np.tanh(r) + np.tan(r), np.pi / 2 + 1e-9, np.pi - 1e-9, xtol=1e-15))
