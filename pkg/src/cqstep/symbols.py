"""Generating-polynomial coefficients of the BDF, shifted BDF and weighted
schemes, kept exact (``fractions.Fraction``) and tau-free.

All sequences are coefficients of polynomials in xi:

* base      sum_{j=1}^k (1-xi)^j / j
* shifted   base - sum_{j=2}^k (1-xi)^j / (j-1)
* weighted  beta * base + (1 - beta) * shifted
* powers    base**m, shifted**m   (length k*m + 1)

The stepper divides by tau (or tau**m) itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb

import gmpy2
import mpmath

from .errors import InvalidOrderError, WeightConstraintError

K_MAX = 7
BETA_MIN = Fraction(3)
FAMILIES = ("base", "shifted", "weighted")


def as_fraction(x) -> Fraction:
    """Exact rational from int/Fraction/str; floats go through their repr."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(str(x))


def check_order(k: int, m: int = 0) -> None:
    if not isinstance(k, int) or not 1 <= k <= K_MAX:
        raise InvalidOrderError(f"step number k must be an integer in 1..{K_MAX}, got {k!r}")
    if not isinstance(m, int) or not 0 <= m <= k:
        raise InvalidOrderError(f"smoothing order m must be an integer in 0..k={k}, got {m!r}")


def check_beta(beta: Fraction, allow_small_beta: bool = False) -> None:
    if not allow_small_beta and beta < BETA_MIN:
        raise WeightConstraintError(
            f"beta must be >= {BETA_MIN} (got {beta}); pass allow_small_beta=True to override"
        )


@dataclass(frozen=True)
class SchemeOrder:
    """Step number ``k``, smoothing order ``m`` (0 = none) and weight ``beta``."""

    k: int
    m: int = 0
    beta: Fraction = BETA_MIN
    allow_small_beta: bool = False

    def __post_init__(self):
        object.__setattr__(self, "beta", as_fraction(self.beta))
        check_order(self.k, self.m)
        check_beta(self.beta, self.allow_small_beta)

    @property
    def memory(self) -> int:
        return max(self.k, self.k * self.m)


@dataclass(frozen=True)
class SymbolCoefficients:
    family: str
    k: int
    m: int
    coeffs: tuple

    def __len__(self):
        return len(self.coeffs)

    def __getitem__(self, j):
        return self.coeffs[j]

    def __iter__(self):
        return iter(self.coeffs)

    def get(self, j: int) -> Fraction:
        """Coefficient j, zero outside the stored range."""
        return self.coeffs[j] if 0 <= j < len(self.coeffs) else Fraction(0)

    def __call__(self, zeta):
        return eval_symbol(self, zeta)

    def common_denominator(self) -> tuple[int, list[int]]:
        """(D, integer numerators) with coeffs[j] == numerators[j] / D."""
        d = 1
        for c in self.coeffs:
            d = d * c.denominator // gmpy2.gcd(d, c.denominator)
        d = int(d)
        return d, [int(c * d) for c in self.coeffs]


def _binomial_expand(weights: dict[int, Fraction], k: int) -> tuple:
    # sum_j weights[j] (1 - xi)^j  ->  coefficients of xi^0 .. xi^k
    out = [Fraction(0)] * (k + 1)
    for j, c in weights.items():
        for i in range(j + 1):
            out[i] += c * comb(j, i) * (-1) ** i
    return tuple(out)


def _poly_mul(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return tuple(out)


@lru_cache(maxsize=None)
def _base(k):
    return _binomial_expand({j: Fraction(1, j) for j in range(1, k + 1)}, k)


@lru_cache(maxsize=None)
def _shifted(k):
    weights = {j: Fraction(1, j) for j in range(1, k + 1)}
    for j in range(2, k + 1):
        weights[j] -= Fraction(1, j - 1)
    return _binomial_expand(weights, k)


def base_coeffs(k: int) -> SymbolCoefficients:
    """BDFk coefficients b̄_0..b̄_k."""
    check_order(k)
    return SymbolCoefficients("base", k, 1, _base(k))


def shifted_coeffs(k: int) -> SymbolCoefficients:
    """Shifted BDFk coefficients s̄_0..s̄_k (identical to base for k = 1)."""
    check_order(k)
    return SymbolCoefficients("shifted", k, 1, _shifted(k))


def weighted_coeffs(k: int, beta=BETA_MIN, allow_small_beta: bool = False) -> SymbolCoefficients:
    """w_j = beta * b̄_j + (1 - beta) * s̄_j."""
    check_order(k)
    beta = as_fraction(beta)
    check_beta(beta, allow_small_beta)
    w = tuple(beta * b + (1 - beta) * s for b, s in zip(_base(k), _shifted(k)))
    return SymbolCoefficients("weighted", k, 1, w)


@lru_cache(maxsize=None)
def _power(k, m, family):
    factor = _base(k) if family == "base" else _shifted(k)
    out = (Fraction(1),)
    for _ in range(m):
        out = _poly_mul(out, factor)
    return out


def power_coeffs(k: int, m: int, family: str = "base") -> SymbolCoefficients:
    """Coefficients b_j (``family='base'``) or s_j (``'shifted'``) of the m-th power."""
    if family not in ("base", "shifted"):
        raise ValueError(f"power family must be 'base' or 'shifted', got {family!r}")
    check_order(k)
    if not isinstance(m, int) or not 1 <= m <= k:
        raise InvalidOrderError(f"power m must be in 1..k={k}, got {m!r}")
    return SymbolCoefficients(family, k, m, _power(k, m, family))


_GMPY_TYPES = (type(gmpy2.mpfr(0)), type(gmpy2.mpc(0)))


def _lift(c: Fraction, zeta):
    if isinstance(zeta, (mpmath.mpf, mpmath.mpc)):
        return mpmath.mpf(c.numerator) / c.denominator
    if isinstance(zeta, _GMPY_TYPES):
        return gmpy2.mpfr(gmpy2.mpq(c.numerator, c.denominator))
    return c.numerator / c.denominator


def eval_symbol(coeffs: SymbolCoefficients, zeta):
    """Horner evaluation of sum_j coeffs_j zeta^j in the precision of ``zeta``."""
    acc = 0
    for c in reversed(coeffs.coeffs):
        acc = acc * zeta + _lift(c, zeta)
    return acc
