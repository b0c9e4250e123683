"""End-to-end acceptance checks, one test per criterion.

Each test records (passed, detail) in conftest.ACCEPTANCE before asserting,
so the terminal summary prints one PASS/FAIL line per criterion even when
an assertion fails.
"""

import math
import time

import numpy as np
import pytest
import sympy

from compactonlab.blowup import evolve_m1, fourier_audit, selfsim_invariance, separable_profile
from compactonlab.bvp import MaxIterExceeded, NewtonDiverged, solve_pattern
from compactonlab.cli import REFERENCE_TABLES
from compactonlab.core import Grid, MultiIndex, ProblemParams, explicit_profile_m1
from compactonlab.flow import flow_to_steady, to_flow_form
from compactonlab.operators import GAMMA, _pk_cached, pk_build
from compactonlab.tails import (
    full_periodic_orbit_stationary,
    periodic_even,
    periodic_odd_shoot,
    stability_test,
)
from compactonlab.variational import (
    energy,
    ls_category,
    nonlocal_residual,
    ordering_preserved,
    polyharmonic_spectrum,
)

from conftest import ACCEPTANCE


def record(key, ok, detail):
    ACCEPTANCE[key] = (bool(ok), detail)
    print(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


def _table(which):
    rows = []
    for sigma, ref in REFERENCE_TABLES[which]:
        rep = solve_pattern(sigma, 2, 1.0)
        rows.append((sigma, rep.converged, energy(rep.final_profile).cF, ref))
    return rows


@pytest.fixture(scope="module")
def table1():
    t0 = time.perf_counter()
    rows = _table("1")
    return rows, time.perf_counter() - t0


@pytest.fixture(scope="module")
def table2():
    return _table("2")


def _table_verdict(rows, tol):
    vals = [c for _, _, c, _ in rows]
    refs = [r for _, _, _, r in rows]
    close = all(ok and c is not None and abs(c - r) <= tol for _, ok, c, r in rows)
    order = all(ok for _, ok, _, _ in rows) and ordering_preserved(vals, refs, atol=5e-4)
    worst = max(abs(c - r) for _, _, c, r in rows)
    return close, order, worst


# ---------------------------------------------------------------- 1

def test_criterion_1_m1_analytic_profile():
    t0 = time.perf_counter()
    errs = []
    for npts in (1001, 2001):
        R = 3 * math.pi
        rep = solve_pattern("+2", 1, 1.0, R=R, h=2 * R / (npts - 1))
        ex = explicit_profile_m1(1.0, rep.final_profile.grid, "s2")
        errs.append(float(np.abs(rep.final_profile.values - ex.values).max()))
    dt = time.perf_counter() - t0
    order = math.log2(errs[0] / errs[1])
    ok = rep.converged and errs[1] <= 1e-3 and order >= 1.8 and dt <= 10.0
    record(1, ok, f"sup error {errs[1]:.2e} at npts 2001, order {order:.2f}, {dt:.1f} s")
    assert ok


# ---------------------------------------------------------------- 2, 3, 4

def test_criterion_2_first_table(table1):
    rows, dt = table1
    close, order, worst = _table_verdict(rows, 0.005)
    ok = close and order and dt <= 300.0
    vals = ", ".join(f"{c:.4f}" for _, _, c, _ in rows)
    record(2, ok, f"cF [{vals}], worst diff {worst:.1e}, ordering {order}, {dt:.0f} s")
    assert ok


def test_criterion_3_second_table(table2):
    close, order, worst = _table_verdict(table2, 0.01)
    ok = close and order
    vals = ", ".join(f"{c:.4f}" for _, _, c, _ in table2)
    record(3, ok, f"cF [{vals}], worst diff {worst:.1e}, ordering {order}")
    assert ok


def test_criterion_4_disjoint_scaling(table1, table2):
    c = {s: v for s, _, v, _ in table1[0] + table2}
    r2 = c["+2,inf,+2"] / c["+2"]
    r3 = c["+2,inf,+2,inf,+2"] / c["+2"]
    e2 = abs(r2 / 2 ** 0.25 - 1)
    e3 = abs(r3 / 3 ** 0.25 - 1)
    ok = e2 <= 1e-3 and e3 <= 1e-3
    record(4, ok, f"ratios {r2:.6f} (rel {e2:.1e}), {r3:.6f} (rel {e3:.1e})")
    assert ok


# ---------------------------------------------------------------- 5

g = GAMMA
PRINTED = {
    1: [g, 1],
    2: [g * (g - 1), 2 * g - 1, 1],
    3: [g * (g - 1) * (g - 2), 3 * g ** 2 - 6 * g + 2, 3 * (g - 1), 1],
    4: [g * (g - 1) * (g - 2) * (g - 3), 2 * (2 * g ** 3 - 9 * g ** 2 + 11 * g - 3),
        6 * g ** 2 - 18 * g + 11, 2 * (2 * g - 3), 1],
    5: [g * (g - 1) * (g - 2) * (g - 3) * (g - 4), 5 * g ** 4 - 40 * g ** 3 + 105 * g ** 2 - 100 * g + 24,
        5 * (g - 2) * (2 * g ** 2 - 8 * g + 5), 5 * (2 * g ** 2 - 8 * g + 7), 5 * (g - 2), 1],
}


def test_criterion_5_pk_polynomials():
    _pk_cached.cache_clear()
    t0 = time.perf_counter()
    P = pk_build(5)
    dt = time.perf_counter() - t0
    bad = []
    for k, cs in PRINTED.items():
        if set(P[k].coeffs) != set(range(k + 1)):
            bad.append(k)
        for j, c in enumerate(cs):
            if P[k].coefficient(j) != sympy.Poly(sympy.expand(c), GAMMA, domain="ZZ"):
                bad.append((k, j))
    ok = not bad and dt < 1.0
    record(5, ok, f"P1..P5 mismatches {bad or 'none'}, built in {dt * 1e3:.0f} ms")
    assert ok


# ---------------------------------------------------------------- 6

def test_criterion_6_periodic_orbits():
    parts, ok = [], True
    for n in (1.0, 2.0, 4.0):
        o = periodic_even(ProblemParams(m=2, n=n, npts=7, R=1.0))
        d = o.extras["return_distance"]
        ok &= d < 1e-8
        parts.append(f"m2 n{n:g} return {d:.1e}")
    p3 = ProblemParams(m=3, n=15.0, npts=9, R=1.0)
    o3 = periodic_odd_shoot(p3)
    d2 = o3.extras["d2"]
    grows = stability_test(o3, p3)["grows"]
    ok &= float(f"{d2:.3e}") == -5.068e-4 and grows
    parts.append(f"m3 n15 d2 {d2:.4e}, grows {grows}")
    st = full_periodic_orbit_stationary()
    Fs, F2 = st.extras["F_star0"], st.extras["shoot_F2"]
    ok &= abs(Fs - 1.535) <= 0.01 and abs(F2 + 0.3787) <= 1e-3
    parts.append(f"F*(0) {Fs:.4f} (ref 1.535 +- 0.01), F''(0) {F2:.4f}")
    record(6, ok, "; ".join(parts))
    assert ok


# ---------------------------------------------------------------- 7

def test_criterion_7_spectrum_and_category():
    R = 2.5 * math.pi
    errs = []
    for npts in (201, 401):
        lam = polyharmonic_spectrum(1, R, npts, 6).eigenvalues
        errs.append(np.abs(lam - (np.arange(1, 7) * math.pi / (2 * R)) ** 2).max())
    o_eig = math.log2(errs[0] / errs[1])
    scal = 0.0
    for m in (1, 2, 3):
        a = polyharmonic_spectrum(m, 1.0, 201, 4).eigenvalues
        for Rs in (0.7, 3.0, 11.0):
            b = polyharmonic_spectrum(m, Rs, 201, 4).eigenvalues
            scal = max(scal, float(np.abs(b / (Rs ** (-2 * m) * a) - 1).max()))
    cat = ls_category(polyharmonic_spectrum(1, R, 401, 8))
    # continuum modes of the explicit non-local solutions, l = 1..4
    res = []
    for npts in (201, 401):
        grid = Grid(R, npts)
        y = grid.interior
        worst = 0.0
        for l in range(1, 5):
            psi = np.sin(l * math.pi * (y + R) / (2 * R)) / math.sqrt(R)
            c = (1 - (l * math.pi / (2 * R)) ** 2) ** (1 / (1.5 - 2))
            worst = max(worst, float(np.abs(nonlocal_residual(c * psi, 1, grid, 1.5)).max()))
        res.append(worst)
    o_nl = math.log2(res[0] / res[1])
    ok = o_eig > 1.8 and scal <= 1e-12 and cat == 4 and o_nl > 1.8
    record(7, ok, f"eigen order {o_eig:.2f}, scaling rel {scal:.1e}, category {cat}, non-local order {o_nl:.2f}")
    assert ok


# ---------------------------------------------------------------- 8

def test_criterion_8_flow_matches_bvp(f0_m2):
    from compactonlab.bvp import pattern_guess
    g = pattern_guess("+2", 2, 1.0, h=0.02, epsilon=1e-4)
    rep, tr = flow_to_steady(to_flow_form(g))
    c_flow = energy(rep.final_profile).cF
    c_bvp = energy(f0_m2.final_profile).cF
    rel = abs(c_flow / c_bvp - 1)
    ok = rep.converged and rel <= 1e-2 and tr.monotone()
    record(8, ok, f"flow cF {c_flow:.4f} vs bvp {c_bvp:.4f} (rel {rel:.1e}), "
                  f"monotone over {len(tr.dtau)} steps {tr.monotone()}")
    assert ok


# ---------------------------------------------------------------- 9

def test_criterion_9_blowup():
    t0 = time.perf_counter()
    L = 3 * math.pi
    theta = separable_profile(1.0, L, 301)
    run = evolve_m1(theta, 1.0, L, t_end=2.0)
    a = fourier_audit(run)
    rate_rel = abs(a["rate_exponent"] - a["rate_expected"]) / abs(a["rate_expected"])
    drift = selfsim_invariance(run, theta, sup_max=1e3)
    Lc = 0.9 * math.pi
    x = np.linspace(0, Lc, 201)
    ctrl = evolve_m1(0.3 * np.sin(math.pi * x / Lc), 1.0, Lc, t_end=2.0)
    dt = time.perf_counter() - t0
    ok = (run.blown_up and rate_rel <= 0.1 and a["violations"] == 0 and drift <= 0.02
          and not ctrl.blown_up and dt <= 120.0)
    record(9, ok, f"rate {a['rate_exponent']:.4f} (rel {rate_rel:.1e}), inequality violations {a['violations']}, "
                  f"drift {drift:.1e}, control blown up {ctrl.blown_up}, {dt:.1f} s")
    assert ok


# ---------------------------------------------------------------- 10

# The printed 15-token index does not alternate signed and zero counts; this
# is the reading with the two stray unsigned tokens removed.
COMPLEX_INDEX = "-8,1,+4,1,-10,1,+8,1,-2,2,-8,2,-2"


def test_criterion_10_property_substitutes(f0_m2, f1_m2):
    # substitutes: attraction of the even-m orbit, symmetry classes of the
    # computed patterns and agreement of the tail envelope with the orbit
    p2 = ProblemParams(m=2, n=1.0, npts=7, R=1.0)
    orb = periodic_even(p2)
    attracts = stability_test(orb, p2)["growth"] < 0.5
    F0, F1 = f0_m2.final_profile.values, f1_m2.final_profile.values
    sym = np.abs(F0 - F0[::-1]).max() < 1e-6 and np.abs(F1 + F1[::-1]).max() < 1e-6
    try:
        rep = solve_pattern(COMPLEX_INDEX, 2, 1.0)
        expected = sum(MultiIndex.parse(COMPLEX_INDEX).gaps) + 6  # sign flips between signed groups
        attempt = f"converged {rep.converged}, sign changes {rep.sign_changes} (expected {expected})"
    except (MaxIterExceeded, NewtonDiverged) as err:
        attempt = f"not converged ({type(err).__name__})"
    ok = attracts and sym
    record(10, ok, f"orbit attracts {attracts}, pattern symmetry {sym}; complex index attempt: {attempt}")
    assert ok
