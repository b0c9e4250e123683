"""Energies, critical values c_F, polyharmonic spectra and category counts."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sl
import scipy.sparse.linalg as spla

from .core import Grid, MultiIndex, Profile
from .operators import polyharmonic_matrix, tilde_Dm_quadratic, trapezoid


class InsufficientSpectrum(ValueError):
    """Largest computed eigenvalue is below 1, so the count may be incomplete."""


@dataclass(frozen=True)
class EnergyBreakdown:
    dm2: float
    l2: float
    lbeta: float
    E: float
    H0: float
    cF: float | None

    @property
    def cf_defined(self) -> bool:
        return self.cF is not None

    def as_dict(self) -> dict:
        return {"dm2": self.dm2, "l2": self.l2, "lbeta": self.lbeta, "E": self.E, "H0": self.H0,
                "cF": self.cF, "cf_defined": self.cf_defined}


def energy(p: Profile) -> EnergyBreakdown:
    """Quadratures of |D^m F|^2, F^2 and |F|^beta; E and c_F from them.

    c_F = int|F|^beta / (int F^2 - int|D^m F|^2)^{beta/2}, left undefined (None) if H0 <= 0.
    """
    beta = p.params.exponents.beta
    h = p.grid.h
    F = p.values
    dm2 = tilde_Dm_quadratic(p)
    l2 = trapezoid(F * F, h)
    lb = trapezoid(np.abs(F) ** beta, h)
    H0 = l2 - dm2
    E = -0.5 * dm2 + 0.5 * l2 - lb / beta
    cF = lb / H0 ** (beta / 2) if H0 > 0 else None
    return EnergyBreakdown(dm2, l2, lb, E, H0, cF)


def critical_value(p: Profile) -> float:
    e = energy(p)
    if e.cF is None:
        raise ValueError("c_F undefined: int F^2 - int |D^m F|^2 <= 0")
    return e.cF


def cf_scaling_check(cF1: float, k: int, beta: float) -> float:
    """k^{(2-beta)/2} c_1: the value for k non-interacting copies of the first pattern."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return k ** ((2 - beta) / 2) * cF1


# ---------------------------------------------------------------- spectrum

@dataclass(frozen=True, eq=False)
class Spectrum:
    m: int
    R: float
    eigenvalues: np.ndarray
    vectors: np.ndarray | None = None
    grid: Grid | None = None

    @property
    def count(self) -> int:
        return int(self.eigenvalues.size)


def _band_lower(A, bw: int) -> np.ndarray:
    N = A.shape[0]
    Ac = A.tocsr()
    ab = np.zeros((bw + 1, N))
    for k in range(bw + 1):
        ab[k, : N - k] = Ac.diagonal(-k)
    return ab


def polyharmonic_spectrum(m: int, R: float, npts: int, kmax: int, vectors: bool = False) -> Spectrum:
    """Lowest ``kmax`` Dirichlet eigenvalues of (-1)^m d^{2m}/dy^{2m} on (-R, R).

    The clamp closure gives a symmetric matrix for m <= 2 (banded symmetric solver);
    for m >= 3 it is not symmetric and shift-invert Arnoldi is used.
    """
    grid = Grid(R, npts)
    # eigenvalues of the h-free stencil, scaled afterwards: lambda_k(R) = R^{-2m} lambda_k(1)
    # then holds up to one rounding whatever the solver tolerance
    scale = grid.h ** (2 * m)
    A = polyharmonic_matrix(m, Grid((npts - 1) / 2.0, npts))   # unit spacing
    N = A.shape[0]
    if kmax < 1 or kmax >= N:
        raise ValueError("need 1 <= kmax < number of interior nodes")
    if m <= 2:
        ab = _band_lower(A, m)
        res = sl.eig_banded(ab, lower=True, select="i", select_range=(0, kmax - 1), eigvals_only=not vectors)
        lam, vec = (res, None) if not vectors else res
    else:
        k = min(kmax, N - 2)
        lam, vec = spla.eigs(A.tocsc(), k=k, sigma=0.0, which="LM", v0=np.ones(N), tol=1e-14)
        o = np.argsort(lam.real)
        lam, vec = lam.real[o], vec.real[:, o]
        if not vectors:
            vec = None
    lam = np.asarray(lam, float) / scale
    if vec is not None:
        # unit L2 norm in the trapezoid sense, positive near the left end
        vec = vec / np.sqrt(grid.h * np.sum(vec * vec, axis=0))
        sgn = np.sign(vec[np.argmax(np.abs(vec) > 1e-8 * np.abs(vec).max(axis=0), axis=0), np.arange(vec.shape[1])])
        vec = vec * np.where(sgn == 0, 1.0, sgn)
    return Spectrum(m, float(R), lam, vec, grid)


def eigenvalue_error(spectrum: Spectrum) -> tuple[np.ndarray, np.ndarray]:
    """Richardson values and error bars from a rerun on the half-resolution grid."""
    npts = spectrum.grid.npts
    coarse_n = (npts - 1) // 2 + 1
    if coarse_n % 2 == 0:
        coarse_n += 1
    # the coarse grid must have exactly twice the spacing for the h^2 extrapolation
    ratio = (npts - 1) / (coarse_n - 1)
    k = spectrum.count
    coarse = polyharmonic_spectrum(spectrum.m, spectrum.R, coarse_n, min(k, coarse_n - 3)).eigenvalues
    k = min(k, coarse.size)
    fine = spectrum.eigenvalues[:k]
    r2 = ratio ** 2
    ext = (r2 * fine - coarse[:k]) / (r2 - 1)
    return ext, np.abs(fine - ext)


def ls_category(spectrum: Spectrum, resolve: bool = True) -> int:
    """Number of eigenvalues strictly below 1.

    With ``resolve`` an eigenvalue counts only if its extrapolated value plus
    error bar is below 1, so a continuum eigenvalue equal to 1 (whose discrete
    value sits an O(h^2) amount under it) is not counted.
    """
    lam = spectrum.eigenvalues
    if lam.size == 0 or lam.max() < 1:
        raise InsufficientSpectrum(f"largest computed eigenvalue {lam.max(initial=0):.4g} < 1; compute more")
    if not resolve or spectrum.grid is None:
        return int(np.count_nonzero(lam < 1))
    ext, err = eigenvalue_error(spectrum)
    below = ext + err < 1
    if below.size < lam.size:
        below = np.concatenate([below, lam[below.size:] < 1])
    return int(np.count_nonzero(below))


def nonlocal_explicit(spectrum: Spectrum, beta: float) -> list[tuple[int, float]]:
    """(l, c_l) with c_l = (1 - lambda_l)^{1/(beta-2)} for every lambda_l < 1."""
    if not 1 < beta < 2:
        raise ValueError("beta must lie in (1, 2)")
    return [(l + 1, float((1 - lam) ** (1 / (beta - 2)))) for l, lam in enumerate(spectrum.eigenvalues) if lam < 1]


def nonlocal_residual(F_interior: np.ndarray, m: int, grid: Grid, beta: float) -> np.ndarray:
    """-(−d²)^m F + F - F (int F^2)^{beta/2 - 1} on the interior nodes."""
    A = polyharmonic_matrix(m, grid)
    l2 = grid.h * float(F_interior @ F_interior)
    return -(A @ F_interior) + F_interior - F_interior * l2 ** (beta / 2 - 1)


# ---------------------------------------------------------------- audit

def genus_class(sigma: MultiIndex | str) -> int:
    """Number of glued copies of the first pattern (the genus class used by the tables)."""
    s = MultiIndex.parse(sigma) if isinstance(sigma, str) else sigma
    return s.n_bumps


def frc_ordering_audit(reports, reference_order: list[str] | None = None) -> list[dict]:
    """c_F-sorted rows per genus class, with a flag for whether the basic pattern is minimal.

    ``reports`` are SolveReports whose ``label`` is a multiindex string. If
    ``reference_order`` is given, each row also records its position there.
    """
    rows = []
    for rep in reports:
        sig = MultiIndex.parse(rep.label)
        e = energy(rep.final_profile)
        rows.append({"label": rep.label, "genus": sig.n_bumps, "cF": e.cF})
    out = []
    for g in sorted({r["genus"] for r in rows}):
        cls = sorted((r for r in rows if r["genus"] == g), key=lambda r: (math.inf if r["cF"] is None else r["cF"]))
        basic = str(MultiIndex.basic(g - 1))
        basic_alt = str(MultiIndex.parse(basic.replace("+", "#").replace("-", "+").replace("#", "-")))
        minimal = cls[0]["label"] in (basic, basic_alt)
        for rank, r in enumerate(cls):
            row = dict(r, rank=rank, basic=r["label"] in (basic, basic_alt), basic_minimal=minimal)
            if reference_order is not None:
                row["reference_position"] = reference_order.index(r["label"]) if r["label"] in reference_order else None
            out.append(row)
    return out


def ordering_preserved(values: list[float], reference: list[float], atol: float = 0.0) -> bool:
    """Computed values follow the reference order: strictly where the reference
    values differ, and within ``atol`` of each other where the reference ties."""
    for i in range(len(values) - 1):
        if reference[i + 1] > reference[i]:
            if not values[i + 1] > values[i]:
                return False
        elif reference[i + 1] == reference[i]:
            if abs(values[i + 1] - values[i]) > atol:
                return False
        else:
            if not values[i + 1] < values[i]:
                return False
    return True
