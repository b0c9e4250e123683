import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from compactonlab.bvp import (
    GuessSpec,
    TRIVIAL_AMPLITUDE,
    default_guess_spec,
    gap_length,
    jacobian,
    pattern_guess,
    relative_l2,
    residual,
    solve,
    solve_family,
    solve_pattern,
    support_bound_radius,
)
from compactonlab.core import DomainTooSmall, Grid, MultiIndex, ProblemParams, Profile, explicit_profile_m1
from compactonlab.variational import energy

R_STAR = 2.365020372431352  # first positive root of tanh R + tan R


def _m1_error(npts):
    rep = solve_pattern("+2", 1, 1.0, R=3 * math.pi, h=6 * math.pi / (npts - 1))
    ex = explicit_profile_m1(1.0, rep.final_profile.grid, "s2")
    return float(np.abs(rep.final_profile.values - ex.values).max()), rep


def test_m1_converges_to_explicit_second_order():
    e1, _ = _m1_error(501)
    e2, rep = _m1_error(1001)
    assert rep.converged and e2 < 1e-3
    assert math.log2(e1 / e2) > 1.8


def test_perturbed_m1_guess_reaches_same_profile():
    g = pattern_guess("+2", 1, 1.0, R=3 * math.pi, h=0.02)
    y = g.grid.nodes
    bumpy = g.values * (1 + 0.1 * np.cos(y))
    rep = solve(Profile(g.grid, bumpy, g.params))
    ex = explicit_profile_m1(1.0, g.grid, "s2")
    assert np.abs(rep.final_profile.values - ex.values).max() < 5e-3


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_jacobian_matches_directional_differences(seed):
    rng = np.random.default_rng(seed)
    g = pattern_guess("+2", 2, 1.0, h=0.05, epsilon=1e-3)
    J = jacobian(g)
    d = rng.standard_normal(g.grid.npts - 2)
    errs = []
    for t in (1e-3, 5e-4):
        pd = Profile.from_interior(g.grid, g.interior + t * d, g.params)
        errs.append(np.abs(J @ (t * d) - (residual(pd) - residual(g))).max())
    assert errs[1] < errs[0] / 3  # quadratic remainder


def test_residual_sign_equivariance():
    g = pattern_guess("-2,1,+2", 2, 1.0, h=0.05)
    np.testing.assert_allclose(residual(g.scaled(-1.0)), -residual(g), atol=0)


def test_f0_critical_value_and_symmetry(f0_m2):
    rep = f0_m2
    F = rep.final_profile.values
    assert rep.converged and not rep.trivial
    assert abs(energy(rep.final_profile).cF - 1.6203) <= 0.005
    assert np.abs(F - F[::-1]).max() <= 10 * rep.newton_tol
    assert 1.4 < F.max() < 1.6
    assert F[0] == F[-1] == 0.0


def test_f1_antisymmetric_single_zero(f1_m2):
    rep = f1_m2
    F = rep.final_profile.values
    assert rep.converged
    assert abs(energy(rep.final_profile).cF - 1.8855) <= 0.005
    assert np.abs(F + F[::-1]).max() <= 10 * rep.newton_tol
    assert rep.sign_changes == 1
    i = np.argmax(np.abs(F))
    left = F[: F.size // 2]
    assert left[np.argmax(np.abs(left))] < 0


def test_guess_topologies():
    g = pattern_guess("-2,1,+2", 2, 1.0)
    F = g.values
    y = g.grid.nodes
    assert F[y < 0].min() < -1 and F[y > 0].max() > 1
    g2 = pattern_guess("+2,2,+2", 2, 1.0).values
    assert g2.min() >= 0
    mid = g2[(g2.size - 1) // 2]
    assert mid < 0.5 * g2.max()


def test_support_bound_root():
    r = support_bound_radius()
    assert math.isclose(r, R_STAR, rel_tol=1e-12)
    assert abs(math.tanh(r) + math.tan(r)) < 1e-12


def test_support_exceeds_bound(f0_m2, f1_m2):
    for rep in (f0_m2, f1_m2):
        lo, hi = rep.support_estimate
        assert hi - lo > 2 * R_STAR


def test_basic_family_sign_changes():
    sigmas = [str(MultiIndex.basic(l)) for l in range(5)]
    reps = [solve_pattern(s, 2, 1.0) for s in sigmas]
    for l, rep in enumerate(reps):
        assert rep.converged and rep.sign_changes == l
    # distinct profiles: critical values strictly increasing
    cf = [energy(r.final_profile).cF for r in reps]
    assert all(b > a for a, b in zip(cf, cf[1:]))


def test_two_bump_family_distinct():
    reps = [solve_pattern(f"+2,{k},+2", 2, 1.0) for k in (0, 2, 4)]
    cf = [energy(r.final_profile).cF for r in reps]
    assert all(r.converged for r in reps)
    assert len({round(c, 4) for c in cf}) == 3


def test_mesh_convergence_of_critical_value():
    cfs = [energy(solve_pattern("+2", 2, 1.0, h=h).final_profile).cF for h in (0.04, 0.02, 0.01)]
    d1, d2 = abs(cfs[1] - cfs[0]), abs(cfs[2] - cfs[1])
    assert 3.0 < d1 / d2 < 5.0


def test_trivial_attractor_guard():
    g = pattern_guess("+2", 2, 1.0, h=0.05)
    small = g.scaled(1e-4 / np.abs(g.values).max())
    rep = solve(small)
    assert rep.trivial
    assert np.abs(rep.final_profile.values).max() < TRIVIAL_AMPLITUDE


def test_schedule_validation():
    g = pattern_guess("+2", 2, 1.0, h=0.05)
    for bad in ([], [1e-3, 0.0], [1e-4, 1e-3], [1e-3, 1e-3]):
        with pytest.raises(ValueError):
            solve(g, schedule=bad)


def test_gap_rules():
    spec = default_guess_spec("+2", ProblemParams(m=2, n=1.0))
    with pytest.raises(ValueError):
        gap_length(spec, 1, 1, 1)
    with pytest.raises(ValueError):
        gap_length(spec, 1, -1, 2)
    assert gap_length(spec, 1, 1, math.inf) > gap_length(spec, 1, 1, 4) > gap_length(spec, 1, 1, 2)
    assert gap_length(spec, -1, 1, 3) > gap_length(spec, -1, 1, 1)


def test_domain_too_small():
    with pytest.raises(DomainTooSmall):
        pattern_guess("+2,inf,+2", 2, 1.0, R=10.0)


def test_family_marks_duplicates():
    params = ProblemParams(m=2, n=1.0, epsilon=1e-7, R=20.0, npts=1001)
    items = solve_family(["+2", "+2", "-2,1,+2"], params)
    assert items[1].duplicate_of == "+2"
    assert items[2].duplicate_of is None and items[2].report.converged
    assert relative_l2(items[0].report.final_profile, items[1].report.final_profile) < 1e-3


def test_unprojected_fallback_for_asymmetric_branch():
    rep = solve_pattern("+2,4,+2", 2, 1.0)
    assert rep.converged
    assert abs(energy(rep.final_profile).cF - 1.9269) <= 0.005
