"""Contour-integral evaluation of the discrete solution and symbol probes.

The generating function of V^n is

    V~(xi) = (rho_w(xi) / mu(xi) - A)^{-1} mu(xi)^{-1} G(xi),   mu(xi) = beta + (1 - beta) xi,

so with xi = exp(-z tau)

    V^n = tau / (2 pi i) * int_{Gamma} exp(z t_n) V~(exp(-z tau)) dz

over the keyhole contour cut at |Im z| <= pi / tau. Sources are restricted to
those whose generating series is a finite combination of gamma_l(xi) =
sum_n n^l xi^n, i.e. f = 0 or F = J^m f polynomial in t. Nothing here reuses
the stepper's source assembly; only the coefficient tables are shared.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import factorial

import mpmath
import numpy as np

from .errors import ContourError, SolverError
from .precision import DOUBLE
from .smoothing import TemporalExpr
from .spatial import SpatialOperator
from .symbols import SchemeOrder, as_fraction, base_coeffs, power_coeffs, shifted_coeffs, weighted_coeffs

DEFAULT_THETA = math.pi / 2 + 0.05
DEFAULT_Q = 400


# --- gamma_l closed forms ---------------------------------------------------


@dataclass(frozen=True)
class GammaClosedForm:
    """gamma_l(xi) = sum_{n>=0} n^l xi^n = P_l(xi) / (1 - xi)^(l+1)."""

    l: int
    numerator: tuple  # integer coefficients of P_l, lowest degree first

    def __call__(self, xi):
        acc = 0
        for c in reversed(self.numerator):
            acc = acc * xi + c
        return acc / (1 - xi) ** (self.l + 1)

    def at_one(self) -> int:
        """P_l(1), which equals l!."""
        return sum(self.numerator)


@lru_cache(maxsize=None)
def _gamma_numerator(l: int) -> tuple:
    if l == 0:
        return (1,)
    prev = _gamma_numerator(l - 1)
    # P_l = xi (1 - xi) P'_{l-1} + l xi P_{l-1}
    out = [0] * (len(prev) + 1)
    for i, c in enumerate(prev):
        if i:
            out[i] += i * c
            out[i + 1] -= i * c
        out[i + 1] += l * c
    while len(out) > 1 and out[-1] == 0:
        out.pop()
    return tuple(out)


def gamma_closed_form(l: int) -> GammaClosedForm:
    if not isinstance(l, int) or l < 0:
        raise ValueError(f"gamma_l needs an integer l >= 0, got {l!r}")
    return GammaClosedForm(l, _gamma_numerator(l))


# --- contour ----------------------------------------------------------------


@dataclass(frozen=True)
class ContourSpec:
    """Truncated keyhole contour: arc |z| = kappa for |arg z| <= theta, and
    the rays r exp(+-i theta), kappa <= r <= pi / (tau sin theta)."""

    tau: float
    theta: float = DEFAULT_THETA
    kappa: float = 1.0
    Q: int = DEFAULT_Q
    rule: str = "gauss"

    def __post_init__(self):
        if not math.pi / 2 < self.theta < math.pi:
            raise ContourError(f"theta must lie in (pi/2, pi), got {self.theta}")
        if not self.kappa > 0:
            raise ContourError(f"kappa must be positive, got {self.kappa}")
        if not self.tau > 0:
            raise ContourError(f"tau must be positive, got {self.tau}")
        if self.Q < 2:
            raise ContourError(f"need at least 2 points per piece, got Q={self.Q}")
        if self.rule not in ("gauss", "trapezoid"):
            raise ContourError(f"unknown quadrature rule {self.rule!r}")
        if self.kappa >= self.r_max:
            raise ContourError(
                f"kappa={self.kappa} leaves no ray inside |Im z| <= pi/tau (r_max={self.r_max:.4g})"
            )

    @property
    def r_max(self) -> float:
        return math.pi / (self.tau * math.sin(self.theta))


def _rule(a, b, Q, kind):
    if kind == "gauss":
        x, w = np.polynomial.legendre.leggauss(Q)
        return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w
    x = np.linspace(a, b, Q)
    w = np.full(Q, (b - a) / (Q - 1))
    w[0] = w[-1] = 0.5 * (b - a) / (Q - 1)
    return x, w


def contour_samples(spec: ContourSpec):
    """Nodes z and oriented weights dz along the contour, in fixed order:
    lower ray (inwards), arc (upwards), upper ray (outwards)."""
    th, kap = spec.theta, spec.kappa
    r, wr = _rule(kap, spec.r_max, spec.Q, spec.rule)
    psi, wpsi = _rule(-th, th, spec.Q, spec.rule)
    lo, up = np.exp(-1j * th), np.exp(1j * th)
    # lower ray runs from r_max down to kappa, hence the minus sign
    z_lower, dz_lower = (r * lo)[::-1], (-wr * lo)[::-1]
    z_arc = kap * np.exp(1j * psi)
    dz_arc = 1j * z_arc * wpsi
    return (np.concatenate([z_lower, z_arc, r * up]),
            np.concatenate([dz_lower, dz_arc, wr * up]))


# --- source series ----------------------------------------------------------


def _poly_terms(expr, who):
    """[(coef, p)] for a polynomial TemporalExpr with integer powers."""
    if not isinstance(expr, TemporalExpr) or not expr.is_polynomial:
        raise ContourError(f"{who}: only f = 0 or sources polynomial in t are supported by the oracle")
    out = []
    for t in expr.terms:
        if t.param.denominator != 1 or t.param < 0:
            raise ContourError(f"{who}: non-integer power t^{t.param} has no gamma_l closed form")
        out.append((t.coef, int(t.param)))
    return out


def _series(terms, tau, xi):
    """sum_n P(n tau) xi^n for P = sum c_p t^p."""
    return sum(float(c) * float(tau) ** p * gamma_closed_form(p)(xi) for c, p in terms)


def _sample(terms, t):
    return sum(c * t ** p for c, p in terms)


def _horner(coeffs, xi):
    acc = 0
    for c in reversed(coeffs):
        acc = acc * xi + float(c)
    return acc


class _GeneratingFunction:
    """G(xi) split as Av * a(xi) + sum_i g_i * c_i(xi) (scalar factors)."""

    def __init__(self, order: SchemeOrder, kind: str, tau: Fraction, sources):
        self.order, self.kind, self.tau = order, kind, tau
        self.sources = sources  # list of (temporal terms, spatial vector)
        k, m = order.k, order.m
        self.m = 0 if kind == "plain" else m
        if self.m:
            self.B = list(power_coeffs(k, m, "base"))
            self.S = list(power_coeffs(k, m, "shifted"))

    def _smoothed_part(self, seq, series, xi):
        """beta B F~ + (1-beta) S xi^{1-m} (...) for one scalar sequence, tau-free B, S."""
        m, beta = self.m, float(self.order.beta)
        B = _horner(self.B, xi)
        S = _horner(self.S, xi)
        if self.kind == "corrected":
            head = sum(seq(n) * xi ** n for n in range(m))
            shifted = S * xi ** (1 - m) * (series - head)
        else:
            # smoothed: drop only the products (s * F)_q with q < m
            head = 0
            for q in range(m):
                conv = sum(float(self.S[j]) * seq(q - j) for j in range(min(q, len(self.S) - 1) + 1))
                head += conv * xi ** q
            shifted = xi ** (1 - m) * (S * series - head)
        return beta * B * series + (1 - beta) * shifted

    def av_factor(self, xi):
        tau, m = self.tau, self.m
        if m == 0:
            return gamma_closed_form(0)(xi) - 1
        # t_n^m / m! scaled by tau^-m: the sequence n^m / m!
        fm = factorial(m)
        return self._smoothed_part(lambda n: n ** m / fm, gamma_closed_form(m)(xi) / fm, xi)

    def source_factor(self, terms, xi):
        tau, m, beta = self.tau, self.m, float(self.order.beta)
        if m == 0:
            series = _series(terms, tau, xi)
            f0 = float(_sample(terms, Fraction(0)))
            return beta * (series - f0) + (1 - beta) * xi * series
        scale = float(tau) ** (-m)
        seq = lambda n: float(_sample(terms, n * tau))
        return scale * self._smoothed_part(seq, _series(terms, tau, xi), xi)


def _source_terms(problem, m, nodes):
    src = problem.source
    if src.smoothed is not None:
        raise ContourError("the oracle needs the source as separable terms, not a closed-form J^m f")
    out = []
    for term in src.terms:
        g = term.temporal
        if not isinstance(g, TemporalExpr):
            raise ContourError("only f = 0 or sources polynomial in t are supported by the oracle")
        lifted = g.integrate(m) if m else g
        out.append((_poly_terms(lifted, "source"), np.asarray(DOUBLE.lift(term.spatial(nodes, DOUBLE)))))
    return out


def contour_solution(problem, order: SchemeOrder, kind, N: int, n: int, op: SpatialOperator,
                     spec: ContourSpec | None = None, theta: float = DEFAULT_THETA,
                     kappa: float | None = None, Q: int = DEFAULT_Q, rule: str = "gauss") -> np.ndarray:
    """V^n by quadrature of the generating-function inverse transform (double complex)."""
    kind = getattr(kind, "value", str(kind)).lower()
    if kind not in ("plain", "smoothed", "corrected"):
        raise ContourError(f"unknown scheme {kind!r}")
    if kind != "plain" and not 1 <= order.m <= order.k:
        raise ContourError(f"{kind} scheme needs 1 <= m <= k")
    if not 1 <= n <= N:
        raise ContourError(f"step index must be in 1..{N}, got {n}")
    tau = as_fraction(problem.T) / N
    t_n = float(n * tau)
    if spec is None:
        spec = ContourSpec(float(tau), theta, 1.0 / t_n if kappa is None else kappa, Q, rule)
    elif abs(spec.tau - float(tau)) > 1e-15 * float(tau):
        raise ContourError(f"contour built for tau={spec.tau}, but the problem has tau={float(tau)}")

    A = np.asarray(DOUBLE.lift(op.prec.to_float(op.matrix)))
    nodes = np.asarray(op.prec.to_float(op.nodes))
    size = A.shape[0]
    v = np.asarray(DOUBLE.lift(problem.v(nodes, DOUBLE)))
    Av = A @ v
    gen = _GeneratingFunction(order, kind, tau, _source_terms(problem, _smoothing_order(order, kind), nodes))
    w = [float(c) for c in weighted_coeffs(order.k, order.beta, allow_small_beta=order.allow_small_beta)]
    beta = float(order.beta)
    eye = np.eye(size)
    if not Av.any() and not gen.sources:
        return np.zeros(size)

    z, dz = contour_samples(spec)
    vals = np.empty((len(z), size), dtype=complex)
    for i, zi in enumerate(z):
        xi = np.exp(-zi * float(tau))
        mu = beta + (1 - beta) * xi
        rho_w = _horner(w, xi) / float(tau)
        G = gen.av_factor(xi) * Av
        for terms, g in gen.sources:
            G = G + gen.source_factor(terms, xi) * g
        try:
            Vt = np.linalg.solve(rho_w / mu * eye - A, G / mu)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"resolvent solve failed at z={zi}: {exc}") from exc
        vals[i] = np.exp(zi * t_n) * Vt * dz[i]
    total = np.sum(vals, axis=0)  # pairwise summation, fixed node order
    return np.real(float(tau) / (2j * math.pi) * total)


def _smoothing_order(order, kind):
    return 0 if kind == "plain" else order.m


@dataclass
class EquivalenceReport:
    n: int
    max_abs: float
    max_rel: float
    scale: float
    oracle: np.ndarray = field(repr=False)
    stepper: np.ndarray = field(repr=False)

    def rows(self):
        return [("n", self.n), ("max_abs", self.max_abs), ("max_rel", self.max_rel), ("scale", self.scale)]


def equivalence(problem, order, kind, N, op, n=None, **contour) -> EquivalenceReport:
    """Compare contour_solution with the stepper's V^n."""
    from .stepper import run

    n = N if n is None else n
    traj = run(problem, order, kind, N, op, keep_states=True)
    ref = np.asarray(traj.prec.to_float(traj.states[n]))
    orc = contour_solution(problem, order, kind, N, n, op, **contour)
    diff = np.abs(orc - ref)
    scale = float(np.max(np.abs(ref))) if ref.size else 0.0
    rel = float(np.max(diff)) / scale if scale else float(np.max(diff))
    return EquivalenceReport(n, float(np.max(diff)), rel, scale, orc, ref)


# --- symbol probes ----------------------------------------------------------


def denominator_check(beta, z, tau, theta=None, enforce_condition: bool = True) -> float:
    """min |beta + (1 - beta) exp(-z tau)| over samples.

    With ``enforce_condition`` only samples obeying |exp(-z tau)| <=
    (beta - 1/3) / (beta - 1) are kept (the admissible set of the bound).
    """
    beta = float(beta)
    xi = np.exp(-np.asarray(z, dtype=complex) * float(tau))
    if enforce_condition and beta > 1:
        xi = xi[np.abs(xi) <= (beta - 1 / 3) / (beta - 1) * (1 + 1e-15)]
    if xi.size == 0:
        raise ContourError("no admissible samples for the denominator check")
    return float(np.min(np.abs(beta + (1 - beta) * xi)))


@dataclass
class ProbeReport:
    family: str
    k: int
    m: int
    taus: tuple
    max_ratio: tuple  # per tau
    samples: list = field(repr=False)  # (tau, z, defect, ratio)

    @property
    def overall(self) -> float:
        return max(self.max_ratio)

    @property
    def spread(self) -> float:
        lo = min(self.max_ratio)
        return self.overall / lo if lo else math.inf


def _defect(family, k, m, beta, z, tau):
    xi = mpmath.exp(-z * tau)
    if family == "weighted":
        w = weighted_coeffs(k, beta, allow_small_beta=True)
        rho = _mp_horner(w, xi) / tau
        mu = beta + (1 - beta) * xi
        return abs(rho - mu * z), tau ** k * abs(z) ** (k + 1)
    coeffs = base_coeffs(k) if family == "base" else shifted_coeffs(k)
    rho = (_mp_horner(coeffs, xi) / tau) ** m
    target = z ** m if family == "base" else mpmath.exp(-m * z * tau) * z ** m
    return abs(rho - target), tau ** k * abs(z) ** (k + m)


def _mp_horner(coeffs, x):
    acc = mpmath.mpf(0)
    for c in reversed(list(coeffs)):
        acc = acc * x + mpmath.mpf(c.numerator) / c.denominator
    return acc


def defect_probe(family: str, k: int, m: int = 1, taus=(1e-2, 1e-3, 1e-4), beta=3,
                 theta: float = DEFAULT_THETA, kappa: float = 1.0, Q: int = 40, dps: int = 50) -> ProbeReport:
    """Ratio defect / (tau^k |z|^(k+m)) on contour samples for each tau."""
    if family not in ("base", "shifted", "weighted"):
        raise ValueError(f"unknown family {family!r}")
    beta = as_fraction(beta)
    samples, maxima = [], []
    with mpmath.workdps(dps):
        for tau in taus:
            spec = ContourSpec(float(tau), theta, kappa, Q, "trapezoid")
            z, _ = contour_samples(spec)
            best = 0.0
            t = mpmath.mpf(tau)
            for zi in z:
                zm = mpmath.mpc(zi.real, zi.imag)
                d, s = _defect(family, k, m, mpmath.mpf(beta.numerator) / beta.denominator, zm, t)
                ratio = float(d / s)
                samples.append((float(tau), complex(zi), float(d), ratio))
                best = max(best, ratio)
            maxima.append(best)
    return ProbeReport(family, k, m, tuple(float(t) for t in taus), tuple(maxima), samples)


def order_defect(family: str, k: int, lam, beta=3, dps: int = 50):
    """Real-axis consistency defect at xi = exp(-lam) (tau-free symbols):
    base |b(xi) - lam|, shifted |s(xi) - lam xi|, weighted |w(xi) - mu(xi) lam|."""
    with mpmath.workdps(dps):
        lam = mpmath.mpf(lam)
        xi = mpmath.exp(-lam)
        if family == "base":
            return abs(_mp_horner(base_coeffs(k), xi) - lam)
        if family == "shifted":
            return abs(_mp_horner(shifted_coeffs(k), xi) - lam * xi)
        if family == "weighted":
            beta = as_fraction(beta)
            b = mpmath.mpf(beta.numerator) / beta.denominator
            return abs(_mp_horner(weighted_coeffs(k, beta, allow_small_beta=True), xi) - (b + (1 - b) * xi) * lam)
        raise ValueError(f"unknown family {family!r}")


def defect_slope(family: str, k: int, lams=("1e-1", "1e-2", "1e-3"), beta=3, dps: int = 50) -> float:
    """Least-squares slope of log defect against log lam."""
    xs = [math.log10(float(mpmath.mpf(l))) for l in lams]
    ys = [float(mpmath.log10(order_defect(family, k, l, beta, dps))) for l in lams]
    return float(np.polyfit(xs, ys, 1)[0])
