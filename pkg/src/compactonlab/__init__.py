"""Numerical laboratory for compactly supported oscillatory solutions of

    (-1)^{m+1} F^{(2m)} + F - |F|^{-n/(n+1)} F = 0

together with their variational scores, interface oscillations and the
related blow-up problem for m = 1.
"""

from .core import (
    DerivedExponents,
    DomainTooSmall,
    Grid,
    MultiIndex,
    ProblemParams,
    Profile,
    count_sign_changes,
    derive_exponents,
    explicit_profile_m1,
)

__all__ = [
    "DerivedExponents",
    "DomainTooSmall",
    "Grid",
    "MultiIndex",
    "ProblemParams",
    "Profile",
    "count_sign_changes",
    "derive_exponents",
    "explicit_profile_m1",
]

__version__ = "0.1.0"
