"""Finite-difference polyharmonic operators, the regularized nonlinearity and
the symbolic P_k recursion."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb, factorial

import numpy as np
import scipy.sparse as sp
import sympy

from .core import Grid, ProblemParams, Profile

GAMMA = sympy.Symbol("gamma")


# ---------------------------------------------------------------- nonlinearity

def _alpha(params_or_n) -> float:
    n = params_or_n.n if isinstance(params_or_n, ProblemParams) else float(params_or_n)
    return n / (n + 1)


def nonlinearity(F, params: ProblemParams, epsilon: float | None = None):
    """F - (eps^2 + F^2)^{-alpha/2} F, with the eps = 0 value 0 at F = 0."""
    a = _alpha(params)
    eps = params.epsilon if epsilon is None else epsilon
    F = np.asarray(F, dtype=float)
    s = eps * eps + F * F
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(s > 0, s ** (-a / 2) * F, 0.0)
    out = F - g
    return out if out.ndim else float(out)


def nonlinearity_derivative(F, params: ProblemParams, epsilon: float | None = None):
    """d/dF of nonlinearity; +inf magnitude where eps = 0 and F = 0."""
    a = _alpha(params)
    eps = params.epsilon if epsilon is None else epsilon
    F = np.asarray(F, dtype=float)
    s = eps * eps + F * F
    with np.errstate(divide="ignore", invalid="ignore"):
        d = 1.0 - s ** (-a / 2) + a * F * F * s ** (-a / 2 - 1)
        # eps = 0: 1 - (1 - a)|F|^{-a}, written without F^2/s cancellation
        d = np.where(eps == 0, 1.0 - (1 - a) * np.abs(F) ** (-a), d)
    return d if d.ndim else float(d)


# ---------------------------------------------------------------- P_k

@dataclass(frozen=True)
class PkPolynomial:
    """P_k(phi) = sum_j coeffs[j](gamma) phi^{(j)}, integer polynomials in gamma."""

    k: int
    coeffs: dict

    def coefficient(self, j: int) -> sympy.Poly:
        return self.coeffs.get(j, sympy.Poly(0, GAMMA, domain="ZZ"))

    def numeric(self, gamma: float) -> np.ndarray:
        """Coefficient array c[j] of phi^{(j)}, j = 0..k, at a numeric gamma."""
        return np.array([float(self.coefficient(j).eval(gamma)) for j in range(self.k + 1)])

    def as_expr(self):
        phi = sympy.Function("phi")
        s = sympy.Symbol("s")
        return sum(self.coefficient(j).as_expr() * phi(s).diff(s, j) for j in range(self.k + 1))


@lru_cache(maxsize=None)
def _pk_cached(kmax: int) -> tuple:
    out = []
    cur = {0: sympy.Poly(1, GAMMA, domain="ZZ")}
    out.append(PkPolynomial(0, dict(cur)))
    g = sympy.Poly(GAMMA, GAMMA, domain="ZZ")
    for k in range(kmax):
        nxt = {}
        # derivative shifts order j -> j+1, then add (gamma - k) times the old operator
        for j, c in cur.items():
            nxt[j + 1] = nxt.get(j + 1, sympy.Poly(0, GAMMA, domain="ZZ")) + c
        for j, c in cur.items():
            nxt[j] = nxt.get(j, sympy.Poly(0, GAMMA, domain="ZZ")) + c * (g - k)
        cur = {j: c for j, c in nxt.items() if not c.is_zero}
        out.append(PkPolynomial(k + 1, dict(cur)))
    return tuple(out)


def pk_build(kmax: int) -> list[PkPolynomial]:
    """P_0 = phi, P_{k+1} = P_k' + (gamma - k) P_k, for k = 0..kmax."""
    if kmax < 0:
        raise ValueError("kmax must be >= 0")
    return list(_pk_cached(int(kmax)))


# ---------------------------------------------------------------- stencils

@lru_cache(maxsize=None)
def ghost_matrix(m: int) -> np.ndarray:
    """Ghost values from the clamp F^{(1)} = ... = F^{(m-1)} = 0 at a boundary node.

    Returns G of shape (m-1, m) so that ghosts (F_{-1}, ..., F_{-(m-1)}) equal
    G @ (F_0, F_1, ..., F_{m-1}). Derivatives at the boundary node are those of
    the degree-(2m-2) interpolant through nodes -(m-1)..(m-1).
    """
    if m == 1:
        return np.zeros((0, 1))
    nodes = np.arange(-(m - 1), m)
    V = np.vander(nodes, 2 * m - 1, increasing=True).T
    W = np.array([np.linalg.solve(V, np.eye(2 * m - 1)[k] * factorial(k)) for k in range(1, m)])
    pos = {int(q): i for i, q in enumerate(nodes)}
    Wg = W[:, [pos[-g] for g in range(1, m)]]
    Wk = W[:, [pos[q] for q in range(0, m)]]
    return -np.linalg.solve(Wg, Wk)


@dataclass(frozen=True, eq=False)
class Stencil2m:
    """Second-order 2m-th derivative on interior nodes with clamp closure.

    ``matrix`` acts on interior values (boundary F = 0); ``boundary`` holds the
    columns multiplying the two endpoint values, for profiles that do not vanish there.
    """

    order: int
    accuracy: int
    matrix: sp.csr_matrix
    boundary: np.ndarray

    @property
    def m(self) -> int:
        return self.order // 2


@lru_cache(maxsize=64)
def _stencil_cached(m: int, npts: int, h: float) -> Stencil2m:
    N = npts - 2
    if N < 2 * m + 1:
        raise ValueError("grid too small for the stencil")
    c = np.array([(-1) ** k * comb(2 * m, k) for k in range(2 * m + 1)], dtype=float)
    offsets = [m - k for k in range(2 * m + 1)]
    A = sp.diags([np.full(N - abs(o), ck) for o, ck in zip(offsets, c)], offsets, shape=(N, N), format="lil")
    G = ghost_matrix(m)
    B = np.zeros((N, 2))
    for i in range(m):
        j = i + 1
        for ck, o in zip(c, offsets):
            idx = j + o
            if idx == 0:
                B[i, 0] += ck
                B[N - 1 - i, 1] += ck
            elif idx < 0:
                g = -idx
                B[i, 0] += ck * G[g - 1, 0]
                B[N - 1 - i, 1] += ck * G[g - 1, 0]
                for q in range(1, m):
                    A[i, q - 1] += ck * G[g - 1, q]
                    A[N - 1 - i, N - q] += ck * G[g - 1, q]
    scale = h ** (-2 * m)
    return Stencil2m(2 * m, 2, (A.tocsr() * scale), B * scale)


def stencil_2m(m: int, grid: Grid) -> Stencil2m:
    return _stencil_cached(int(m), int(grid.npts), float(grid.h))


def polyharmonic_matrix(m: int, grid: Grid) -> sp.csr_matrix:
    """(-1)^m d^{2m}/dy^{2m} on interior nodes with the Dirichlet clamp."""
    return stencil_2m(m, grid).matrix * float((-1) ** m)


def apply_2m_derivative(p: Profile) -> np.ndarray:
    """F^{(2m)} at interior nodes (second order, clamp ghost closure)."""
    st = stencil_2m(p.params.m, p.grid)
    v = p.values
    return st.matrix @ v[1:-1] + st.boundary @ np.array([v[0], v[-1]])


def _extended(values: np.ndarray, m: int) -> np.ndarray:
    """Values padded on both sides with the m-1 clamp ghosts."""
    if m == 1:
        return np.asarray(values, float)
    G = ghost_matrix(m)
    left = G @ values[:m]
    right = G @ values[::-1][:m]
    return np.concatenate([left[::-1], values, right])


def discrete_mth_derivative(p: Profile) -> tuple[np.ndarray, np.ndarray]:
    """m-th differences of the clamp-extended profile and their quadrature weights.

    Even m: centred differences at the nodes, trapezoid weights.
    Odd m: centred differences at the half nodes, midpoint weights.
    """
    m, h = p.params.m, p.grid.h
    v = p.values
    ext = _extended(v, m)
    k = m - 1  # offset of node 0 inside ext
    cf = [(-1) ** j * comb(m, j) for j in range(m + 1)]
    if m % 2 == 0:
        size, top = v.size, m // 2
        w = np.full(size, h)
        w[0] = w[-1] = h / 2
    else:
        size, top = v.size - 1, (m + 1) // 2
        w = np.full(size, h)
    d = np.zeros(size)
    for j, c in enumerate(cf):
        sh = top - j
        d += c * ext[k + sh: k + sh + size]
    return d / h ** m, w


def tilde_Dm_quadratic(p: Profile) -> float:
    """Quadrature of |F^{(m)}|^2 over [-R, R] (in 1D the m-th derivative for any m)."""
    d, w = discrete_mth_derivative(p)
    return float(np.sum(w * d * d))


# ---------------------------------------------------------------- quadrature

def trapezoid(values: np.ndarray, h: float) -> float:
    v = np.asarray(values, float)
    return float(h * (v.sum() - 0.5 * (v[0] + v[-1])))


def richardson(coarse: float, fine: float, order: int = 2, ratio: float = 2.0) -> float:
    """Richardson extrapolation of two estimates with error ~ h^order."""
    r = ratio ** order
    return (r * fine - coarse) / (r - 1)


def observed_order(e_coarse: float, e_fine: float, ratio: float = 2.0) -> float:
    return float(np.log(abs(e_coarse) / abs(e_fine)) / np.log(ratio))
