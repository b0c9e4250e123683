import math

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from compactonlab.core import (
    DomainTooSmall,
    Grid,
    MultiIndex,
    ProblemParams,
    Profile,
    count_sign_changes,
    derive_exponents,
    explicit_profile_m1,
    inverse_n_to_s2,
    s2_to_inverse_n,
)


def test_params_validation():
    with pytest.raises(ValueError):
        ProblemParams(m=0, n=1.0)
    with pytest.raises(ValueError):
        ProblemParams(m=2, n=0.0)
    with pytest.raises(ValueError):
        ProblemParams(m=2, n=1.0, npts=100)
    with pytest.raises(ValueError):
        ProblemParams(m=2, n=1.0, epsilon=-1.0)
    with pytest.raises(ValueError):
        ProblemParams(m=3, n=1.0, npts=7)


def test_exponents_n1_m2():
    e = derive_exponents(ProblemParams(m=2, n=1.0))
    assert (e.alpha, e.beta, e.gamma) == (0.5, 1.5, 8.0)


@given(m=st.integers(1, 6), n=st.floats(1e-3, 1e3))
def test_gamma_alpha_product(m, n):
    e = derive_exponents(ProblemParams(m=m, n=n, npts=2 * m + 3))
    assert math.isclose(e.gamma * e.alpha, 2 * m, rel_tol=1e-12)
    assert math.isclose(e.alpha + e.beta, 2.0, rel_tol=1e-12)


@given(R=st.floats(0.1, 100), half=st.integers(1, 2000))
def test_grid_symmetric_with_centre_node(R, half):
    g = Grid(R, 2 * half + 1)
    y = g.nodes
    assert y[half] == 0.0
    assert np.array_equal(y, -y[::-1])
    assert math.isclose(y[-1], R, rel_tol=1e-12)


def test_profile_is_read_only():
    p = Profile(Grid(1.0, 5), np.arange(5.0), ProblemParams(m=1, n=1.0, R=1.0, npts=5))
    with pytest.raises(ValueError):
        p.values[0] = 3.0
    with pytest.raises(ValueError):
        Profile(Grid(1.0, 5), np.zeros(4), ProblemParams(m=1, n=1.0, R=1.0, npts=5))


def test_multiindex_parse_and_grammar():
    s = MultiIndex.parse("+2,inf,+2")
    assert s.entries == (2, math.inf, 2)
    assert str(s) == "+2,inf,+2"
    assert s.n_bumps == 2 and s.is_symmetric()
    assert MultiIndex.parse("-2,1,+2").is_antisymmetric()
    assert MultiIndex.parse("+4").n_bumps == 2
    for bad in ["2", "+2,1", "+3", "+2,-1,+2", "", "+2,x,+2"]:
        with pytest.raises(ValueError):
            MultiIndex.parse(bad)


@given(l=st.integers(0, 8))
def test_basic_family_alternates(l):
    s = MultiIndex.basic(l)
    assert len(s.signed) == l + 1
    assert all(a * b < 0 for a, b in zip(s.signed, s.signed[1:]))
    assert all(g == 1 for g in s.gaps)
    assert s.signed[-1] == 2


signed = st.sampled_from([-4, -2, 2, 4])
zeros = st.one_of(st.integers(0, 9), st.just(math.inf))


@given(st.lists(st.tuples(zeros, signed), max_size=5), signed)
def test_multiindex_roundtrip(rest, first):
    e = [first]
    for z, s in rest:
        e += [z, s]
    m = MultiIndex(tuple(e))
    assert MultiIndex.parse(str(m)) == m


def test_explicit_profile_values():
    g = Grid(3 * math.pi, 3001)
    f = explicit_profile_m1(1.0, g, "f")
    i0 = (g.npts - 1) // 2
    assert math.isclose(f.values[i0], 4.0 / 3.0, rel_tol=1e-15)
    at = np.argmin(np.abs(g.nodes - 2 * math.pi))
    assert abs(f.values[at]) < 1e-6
    assert np.all(f.values[np.abs(g.nodes) > 2 * math.pi] == 0)
    with pytest.raises(DomainTooSmall):
        explicit_profile_m1(1.0, Grid(5.0, 101))


def test_explicit_profile_symbolic_oracle():
    # f^{n+1} scaled to the canonical form solves F'' + F - |F|^{-alpha} F = 0 inside the support
    x = sympy.Symbol("x", real=True)
    for n in [sympy.Integer(1), sympy.Rational(1, 2), sympy.Integer(3)]:
        f = (2 * (n + 1) / (n * (n + 2)) * sympy.cos(n * x / (2 * (n + 1))) ** 2) ** (1 / n)
        F = n ** ((n + 1) / n) * f ** (n + 1)
        a = n / (n + 1)
        r = sympy.diff(F, x, 2) + F - F ** (1 - a)
        for xv in [0.1, 0.7, 1.9]:
            assert abs(float(r.subs(x, xv))) < 1e-12


def _second_difference_residual(n, h):
    half = (n + 1) * math.pi / n
    npts = 2 * int(round(1.2 * half / h)) + 1
    g = Grid((npts - 1) // 2 * h, npts)
    F = explicit_profile_m1(n, g, "s2").values
    a = n / (n + 1)
    y = g.nodes
    r = (F[2:] - 2 * F[1:-1] + F[:-2]) / h ** 2 + F[1:-1] - np.abs(F[1:-1]) ** (1 - a)
    inner = np.abs(y[1:-1]) < 0.8 * half
    return float(np.abs(r[inner]).max())


@pytest.mark.parametrize("n", [1.0, 2.0])
def test_explicit_profile_residual_second_order(n):
    e1, e2 = _second_difference_residual(n, 0.02), _second_difference_residual(n, 0.01)
    assert e2 < e1
    assert math.log2(e1 / e2) > 1.8


@given(st.floats(0.05, 20), st.lists(st.floats(-10, 10), min_size=1, max_size=20))
def test_conversions_inverse(n, vals):
    v = np.array(vals)
    np.testing.assert_allclose(inverse_n_to_s2(s2_to_inverse_n(v, n), n), v, rtol=1e-12, atol=1e-300)


def test_sign_changes_threshold():
    v = [1.0, 0.5, -1e-4, 1e-4, -0.5, -1.0, 0.2]
    assert count_sign_changes(v, 1e-3) == 2
    assert count_sign_changes(v, 1e-6) == 4
    with pytest.raises(ValueError):
        count_sign_changes(v, 0.0)


@settings(max_examples=25)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=40), st.floats(1e-3, 1.0))
def test_sign_changes_invariant_under_negation(vals, thr):
    v = np.array(vals)
    assert count_sign_changes(v, thr) == count_sign_changes(-v, thr)
