"""Shared types: problem parameters, exponents, grids, profiles, multiindices."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np


class DomainTooSmall(ValueError):
    """Requested structure does not fit inside [-R, R]."""


@dataclass(frozen=True)
class ProblemParams:
    """Order m, exponent n, regularization epsilon, half-width R, grid size."""

    m: int
    n: float
    epsilon: float = 1e-4
    R: float = 15.0
    npts: int = 3001

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be an integer >= 1, got {self.m}")
        if not self.n > 0:
            raise ValueError(f"n must be positive, got {self.n}")
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")
        if not self.R > 0:
            raise ValueError(f"R must be positive, got {self.R}")
        if int(self.npts) != self.npts or self.npts % 2 == 0:
            raise ValueError(f"npts must be an odd integer, got {self.npts}")
        if self.npts < 2 * self.m + 3:
            raise ValueError(f"npts must be >= 2m+3 = {2 * self.m + 3}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "npts", int(self.npts))
        object.__setattr__(self, "n", float(self.n))
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "R", float(self.R))

    @property
    def exponents(self) -> "DerivedExponents":
        return derive_exponents(self)

    @property
    def grid(self) -> "Grid":
        return Grid(self.R, self.npts)

    def with_(self, **kw) -> "ProblemParams":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return {"m": self.m, "n": self.n, "epsilon": self.epsilon, "R": self.R, "npts": self.npts}


@dataclass(frozen=True)
class DerivedExponents:
    alpha: float
    beta: float
    gamma: float


def derive_exponents(params: ProblemParams) -> DerivedExponents:
    """alpha = n/(n+1), beta = (n+2)/(n+1), gamma = 2m(n+1)/n."""
    n, m = params.n, params.m
    return DerivedExponents(alpha=n / (n + 1), beta=(n + 2) / (n + 1), gamma=2 * m * (n + 1) / n)


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [-R, R] with an odd number of nodes (y = 0 is a node)."""

    R: float
    npts: int

    def __post_init__(self):
        if self.npts < 3 or self.npts % 2 == 0:
            raise ValueError("npts must be odd and >= 3")
        if not self.R > 0:
            raise ValueError("R must be positive")

    @property
    def h(self) -> float:
        return 2.0 * self.R / (self.npts - 1)

    @property
    def nodes(self) -> np.ndarray:
        # built from integers so the grid is exactly symmetric
        i = np.arange(self.npts) - (self.npts - 1) // 2
        return i * self.h

    @property
    def interior(self) -> np.ndarray:
        return self.nodes[1:-1]


@dataclass(frozen=True, eq=False)
class Profile:
    """Samples of F on all grid nodes, endpoints included."""

    grid: Grid
    values: np.ndarray
    params: ProblemParams

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.npts,):
            raise ValueError(f"values must have length {self.grid.npts}, got {v.shape}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_interior(cls, grid: Grid, interior: np.ndarray, params: ProblemParams) -> "Profile":
        v = np.zeros(grid.npts)
        v[1:-1] = interior
        return cls(grid, v, params)

    @property
    def interior(self) -> np.ndarray:
        return self.values[1:-1]

    @property
    def y(self) -> np.ndarray:
        return self.grid.nodes

    def scaled(self, c: float) -> "Profile":
        return Profile(self.grid, c * self.values, self.params)

    def with_params(self, params: ProblemParams) -> "Profile":
        return Profile(self.grid, self.values, params)


_SIGNED = re.compile(r"^[+-]\d+$")
_UNSIGNED = re.compile(r"^(\d+|inf)$")


@dataclass(frozen=True)
class MultiIndex:
    """Signed intersection counts alternating with zero counts.

    ``MultiIndex.parse("+2,2,+2")`` gives entries (+2, 2, +2). Signed entries
    are nonzero even integers, zero counts are nonnegative integers or
    ``math.inf`` (disjoint gluing). The label names a class of profiles,
    not a unique solution.
    """

    entries: tuple = field(default_factory=tuple)

    def __post_init__(self):
        e = tuple(self.entries)
        if not e or len(e) % 2 == 0:
            raise ValueError("multiindex must start and end with a signed count")
        for i, x in enumerate(e):
            if i % 2 == 0:
                if x == 0 or int(x) != x or int(x) % 2:
                    raise ValueError(f"signed entry {x!r} must be a nonzero even integer")
            else:
                if not (x == math.inf or (int(x) == x and x >= 0)):
                    raise ValueError(f"zero count {x!r} must be a nonnegative integer or inf")
        object.__setattr__(self, "entries", tuple(int(x) if x != math.inf else math.inf for x in e))

    @classmethod
    def parse(cls, text: str) -> "MultiIndex":
        toks = [t.strip() for t in text.replace("{", "").replace("}", "").split(",") if t.strip()]
        out = []
        for i, t in enumerate(toks):
            if i % 2 == 0:
                if not _SIGNED.match(t):
                    raise ValueError(f"token {t!r} at position {i} must be signed, like +2")
                out.append(int(t))
            else:
                if not _UNSIGNED.match(t):
                    raise ValueError(f"token {t!r} at position {i} must be a zero count or inf")
                out.append(math.inf if t == "inf" else int(t))
        return cls(tuple(out))

    @classmethod
    def basic(cls, l: int) -> "MultiIndex":
        """Basic family F_l: l+1 alternating bumps, one zero between neighbours."""
        if l < 0:
            raise ValueError("l must be >= 0")
        signs = [(-1) ** (l - k) for k in range(l + 1)]
        e = []
        for k, s in enumerate(signs):
            if k:
                e.append(1)
            e.append(2 * s)
        return cls(tuple(e))

    def __str__(self) -> str:
        parts = []
        for i, x in enumerate(self.entries):
            if i % 2 == 0:
                parts.append(f"{x:+d}")
            else:
                parts.append("inf" if x == math.inf else str(x))
        return ",".join(parts)

    @property
    def signed(self) -> tuple:
        return self.entries[0::2]

    @property
    def gaps(self) -> tuple:
        return self.entries[1::2]

    @property
    def n_bumps(self) -> int:
        return sum(abs(s) // 2 for s in self.signed)

    def is_symmetric(self) -> bool:
        return self.entries == self.entries[::-1]

    def is_antisymmetric(self) -> bool:
        e = self.entries
        flipped = tuple(-x if i % 2 == 0 else x for i, x in enumerate(e[::-1]))
        return e == flipped


def explicit_profile_m1(n: float, grid: Grid, form: str = "f") -> Profile:
    """Explicit compacton for m = 1.

    form="f":   f(x) = [2(n+1)/(n(n+2)) cos^2(n x/(2(n+1)))]^{1/n}
    form="1/n": f^{n+1}, solving F'' + F - (1/n)|F|^{-alpha}F = 0
    form="s2":  n^{(n+1)/n} f^{n+1}, solving F'' + F - |F|^{-alpha}F = 0
    Zero outside |x| <= (n+1)pi/n.
    """
    if not n > 0:
        raise ValueError("n must be positive")
    half = (n + 1) * math.pi / n
    if grid.R < half:
        raise DomainTooSmall(f"R = {grid.R} < support half-width {half}")
    x = grid.nodes
    inside = np.abs(x) <= half
    c = np.cos(n * np.where(inside, x, 0.0) / (2 * (n + 1))) ** 2
    f = np.where(inside, (2 * (n + 1) / (n * (n + 2)) * c) ** (1.0 / n), 0.0)
    if form == "f":
        v = f
    elif form == "1/n":
        v = f ** (n + 1)
    elif form == "s2":
        v = n ** ((n + 1) / n) * f ** (n + 1)
    else:
        raise ValueError(f"unknown form {form!r}")
    params = ProblemParams(m=1, n=n, epsilon=0.0, R=grid.R, npts=grid.npts)
    return Profile(grid, v, params)


def s2_to_inverse_n(values, n: float):
    """Map a canonical solution to the form with coefficient 1/n on the nonlinearity."""
    return n ** (-(n + 1) / n) * np.asarray(values)


def inverse_n_to_s2(values, n: float):
    return n ** ((n + 1) / n) * np.asarray(values)


def count_sign_changes(p: Profile | Sequence[float], threshold: float) -> int:
    """Sign changes between successive nodes where |F| > threshold.

    Sub-threshold wiggles (tail oscillations) are skipped.
    """
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    v = p.values if isinstance(p, Profile) else np.asarray(p, float)
    big = v[np.abs(v) > threshold]
    if big.size < 2:
        return 0
    s = np.sign(big)
    return int(np.count_nonzero(s[1:] != s[:-1]))
