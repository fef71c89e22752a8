"""The m-fold integral J^m f(t) = 1/Gamma(m) int_0^t (t - s)^(m-1) f(s) ds and
the sampled sequences F^n = J^m f(t_n) consumed by the schemes.

Temporal parts built from t^p, cos(w t) and sin(w t) are integrated in closed
form with exact rational coefficients. Anything else (a Python callable, or
tabulated samples) goes through composite Gauss--Legendre quadrature in double
precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial

import numpy as np
import scipy.interpolate

from .errors import QuadratureAccuracyError
from .precision import DOUBLE
from .spatial import Constant, NodalFunction, as_nodal
from .symbols import as_fraction

# i**e for e mod 4, as (re, im)
_I_POW = ((1, 0), (0, 1), (-1, 0), (0, -1))


@dataclass(frozen=True)
class TimeTerm:
    """``coef * t**param`` (kind 'poly'), ``coef * cos(param t)`` or ``coef * sin(param t)``."""

    kind: str
    coef: Fraction
    param: Fraction


@dataclass(frozen=True)
class TemporalExpr:
    """Finite linear combination of monomials and trigonometric terms in t."""

    terms: tuple = ()

    @classmethod
    def monomial(cls, p=0, coef=1):
        return cls((TimeTerm("poly", as_fraction(coef), as_fraction(p)),))

    @classmethod
    def constant(cls, coef=1):
        return cls.monomial(0, coef)

    @classmethod
    def cos(cls, omega=1, coef=1):
        omega = as_fraction(omega)
        if omega == 0:
            return cls.constant(coef)
        return cls((TimeTerm("cos", as_fraction(coef), omega),))

    @classmethod
    def sin(cls, omega=1, coef=1):
        omega = as_fraction(omega)
        if omega == 0:
            return cls()
        return cls((TimeTerm("sin", as_fraction(coef), omega),))

    def __add__(self, other):
        return TemporalExpr(self.terms + other.terms).simplify()

    def __mul__(self, c):
        c = as_fraction(c)
        return TemporalExpr(tuple(TimeTerm(t.kind, c * t.coef, t.param) for t in self.terms)).simplify()

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    def simplify(self) -> "TemporalExpr":
        acc: dict = {}
        for t in self.terms:
            acc[(t.kind, t.param)] = acc.get((t.kind, t.param), Fraction(0)) + t.coef
        return TemporalExpr(tuple(TimeTerm(k, c, p) for (k, p), c in acc.items() if c != 0))

    @property
    def is_polynomial(self) -> bool:
        return all(t.kind == "poly" for t in self.terms)

    def integrate(self, m: int) -> "TemporalExpr":
        """Closed form of J^m applied to this expression."""
        if m == 0:
            return self
        out = []
        for t in self.terms:
            if t.kind == "poly":
                denom = Fraction(1)
                for r in range(1, m + 1):
                    denom *= t.param + r
                out.append(TimeTerm("poly", t.coef / denom, t.param + m))
                continue
            # J^m e^{iwt} = (iw)^-m [e^{iwt} - sum_{r<m} (iwt)^r / r!]; take Re (cos) or Im (sin)
            w = t.param
            a, b = _I_POW[(-m) % 4]
            scale = t.coef / w**m
            if t.kind == "cos":
                out.append(TimeTerm("cos", scale * a, w))
                out.append(TimeTerm("sin", -scale * b, w))
            else:
                out.append(TimeTerm("sin", scale * a, w))
                out.append(TimeTerm("cos", scale * b, w))
            for r in range(m):
                c, d = _I_POW[r % 4]
                re, im = a * c - b * d, a * d + b * c
                part = re if t.kind == "cos" else im
                if part:
                    out.append(TimeTerm("poly", -scale * part * w**r / factorial(r), Fraction(r)))
        return TemporalExpr(tuple(out)).simplify()

    def __call__(self, t, prec=DOUBLE):
        """Evaluate at ``t`` (Fraction, float or backend scalar)."""
        with prec:
            t = t if not isinstance(t, (Fraction, int, float)) else prec.scalar(t)
            acc = prec.scalar(0)
            for term in self.terms:
                c = prec.scalar(term.coef)
                if term.kind == "poly":
                    p = term.param
                    if p.denominator == 1:
                        acc = acc + c * t ** int(p)
                    else:
                        acc = acc + c * t ** prec.scalar(p)
                else:
                    arg = prec.scalar(term.param) * t
                    acc = acc + c * (prec.cos(arg) if term.kind == "cos" else prec.sin(arg))
            return acc


@dataclass(frozen=True)
class Tabulated:
    """Samples (times, values) of a temporal factor, interpolated by a cubic spline."""

    times: tuple
    values: tuple

    def spline(self, stride=1):
        t = np.asarray(self.times, float)[::stride]
        v = np.asarray(self.values, float)[::stride]
        if stride > 1 and t[-1] != self.times[-1]:
            t = np.append(t, self.times[-1])
            v = np.append(v, self.values[-1])
        return scipy.interpolate.CubicSpline(t, v)

    def __call__(self, t, prec=DOUBLE):
        return self.spline()(t)


def _quad_tolerance(prec=DOUBLE):
    return 1e-2 * DOUBLE.eps ** 0.5


_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _gl_panel(fn, m, t, lo, hi):
    s = 0.5 * (hi - lo) * _GL_X + 0.5 * (hi + lo)
    kern = (t - s) ** (m - 1) / factorial(m - 1)
    return 0.5 * (hi - lo) * np.dot(_GL_W, kern * np.asarray(fn(s), float))


def jm_quadrature(fn, m: int, t: float, tol: float | None = None, max_panels: int = 20000) -> float:
    """J^m fn(t) by adaptive composite Gauss--Legendre (16 points per panel).

    A panel is accepted when it agrees with the sum over its two halves to
    ``tol`` relative to the running integral, with the budget split by width.
    """
    tol = _quad_tolerance() if tol is None else tol
    t = float(t)
    if t == 0.0:
        return 0.0
    whole = _gl_panel(fn, m, t, 0.0, t)
    scale = abs(whole)
    stack = [(0.0, t, whole)]
    total, panels = 0.0, 0
    while stack:
        lo, hi, est = stack.pop()
        mid = 0.5 * (lo + hi)
        left, right = _gl_panel(fn, m, t, lo, mid), _gl_panel(fn, m, t, mid, hi)
        panels += 2
        budget = tol * max(scale, 1e-300) * (hi - lo) / t
        if abs(left + right - est) <= budget or mid in (lo, hi):
            total += left + right
            scale = max(scale, abs(total))
        elif panels > max_panels:
            raise QuadratureAccuracyError(f"J^{m} quadrature at t={t} did not reach tol={tol:g}")
        else:
            stack.append((lo, mid, left))
            stack.append((mid, hi, right))
    return total


def jm_temporal(g, m: int, t, prec=DOUBLE, tol=None):
    """Scalar J^m g(t) for a temporal factor ``g``."""
    if m == 0:
        return g(t, prec) if isinstance(g, TemporalExpr) else prec.scalar(float(np.asarray(g(float(t)))))
    if isinstance(g, TemporalExpr):
        if t == 0:
            return prec.scalar(0)
        return g.integrate(m)(t, prec)
    if isinstance(g, Tabulated):
        tol = _quad_tolerance() if tol is None else tol
        t = float(t)
        if t > g.times[-1] or t < g.times[0]:
            raise QuadratureAccuracyError(f"t={t} outside tabulated range")
        fine = jm_quadrature(g.spline(), m, t, tol)
        coarse = jm_quadrature(g.spline(2), m, t, tol)
        if abs(fine - coarse) > tol * max(abs(fine), 1e-300):
            raise QuadratureAccuracyError(
                f"tabulated source too coarse for tol={tol:g} (resolution change {abs(fine - coarse):.3g})"
            )
        return prec.scalar(fine)
    return prec.scalar(jm_quadrature(g, m, float(t), tol))


@dataclass(frozen=True)
class SourceTerm:
    """One separable product g(t) * h(x)."""

    temporal: object
    spatial: NodalFunction


@dataclass(frozen=True)
class SourceDescriptor:
    """f(x, t) as a sum of separable terms, or a user closed form of J^m f.

    ``smoothed`` (optional) is ``F(m, t, nodes, prec) -> nodal vector`` giving
    J^m f directly; when set, ``terms`` are ignored by the samplers.
    """

    terms: tuple = ()
    smoothed: object = None

    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def separable(cls, temporal, spatial=None):
        spatial = Constant(1) if spatial is None else as_nodal(spatial)
        if not isinstance(temporal, (TemporalExpr, Tabulated)) and not callable(temporal):
            temporal = TemporalExpr.constant(temporal)
        return cls((SourceTerm(temporal, spatial),))

    def __add__(self, other):
        return SourceDescriptor(self.terms + other.terms, self.smoothed or other.smoothed)

    @property
    def kind(self) -> str:
        if self.smoothed is not None:
            return "closed-form"
        if not self.terms:
            return "zero"
        if all(isinstance(t.temporal, TemporalExpr) for t in self.terms):
            return "separable-product"
        return "tabulated"

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"


def jm_transform(source: SourceDescriptor, m: int, t, nodes, prec=DOUBLE, tol=None):
    """J^m f(., t) at the given nodes."""
    with prec:
        if source.smoothed is not None:
            return source.smoothed(m, t, nodes, prec)
        out = prec.zeros(len(nodes))
        for term in source.terms:
            out = out + jm_temporal(term.temporal, m, t, prec, tol) * term.spatial(nodes, prec)
        return out


@dataclass(frozen=True, eq=False)
class SmoothedSamples:
    """F^n = J^m f(t_n), n = 0..count-1, kept factored as temporal x spatial.

    ``temporal`` has shape (n_terms, count), ``spatial`` (n_terms, size). A
    closed-form source stores full nodal samples in ``dense`` instead.
    """

    m: int
    tau: Fraction
    temporal: np.ndarray
    spatial: np.ndarray
    dense: np.ndarray | None = None
    prec: object = DOUBLE

    @property
    def count(self) -> int:
        if self.dense is not None:
            return self.dense.shape[0]
        return self.temporal.shape[1]

    @property
    def values(self) -> np.ndarray:
        if self.dense is not None:
            return self.dense
        with self.prec:
            if self.temporal.shape[0] == 0:
                return self.prec.zeros((self.count, self.spatial.shape[1]))
            return self.prec.array(self.temporal).T @ self.spatial


def sample_times(tau: Fraction, count: int) -> list[Fraction]:
    return [n * tau for n in range(count)]


def sample_smoothed(source: SourceDescriptor, m: int, tau, N: int, nodes, prec=DOUBLE,
                    temporal_prec=None, tol=None) -> SmoothedSamples:
    """Samples for n = 0..N+m-1 (m >= 1) or the raw f^0..f^N (m = 0).

    ``temporal_prec`` evaluates the temporal factors in a different (usually
    higher) precision than the nodal factors.
    """
    tau = as_fraction(tau)
    count = N + m if m >= 1 else N + 1
    times = sample_times(tau, count)
    tprec = prec if temporal_prec is None else temporal_prec
    size = len(nodes)
    if source.smoothed is not None:
        with prec:
            dense = np.empty((count, size), dtype=prec.dtype)
            for n, t in enumerate(times):
                dense[n] = prec.zeros(size) if (m >= 1 and n == 0) else source.smoothed(m, prec.scalar(t), nodes, prec)
        return SmoothedSamples(m, tau, tprec.zeros((0, count)), prec.zeros((0, size)), dense, prec)
    with tprec:
        temporal = tprec.zeros((len(source.terms), count))
        for i, term in enumerate(source.terms):
            g = term.temporal
            if isinstance(g, TemporalExpr):
                G = g.integrate(m)
                for n, t in enumerate(times):
                    temporal[i, n] = tprec.scalar(0) if (m >= 1 and n == 0) else G(t, tprec)
            else:
                for n, t in enumerate(times):
                    temporal[i, n] = jm_temporal(g, m, t, tprec, tol)
    with prec:
        spatial = prec.zeros((len(source.terms), size))
        for i, term in enumerate(source.terms):
            spatial[i] = term.spatial(nodes, prec)
    return SmoothedSamples(m, tau, temporal, spatial, None, prec)
