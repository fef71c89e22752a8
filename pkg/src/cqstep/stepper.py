"""Time marching for the plain, smoothed (IDm) and corrected IDm WSBDFk schemes.

With V = u - v and V^0 = 0 every scheme solves, for n = 1..N,

    M V^n = -(1/tau) sum_{j=1}^{min(n,k)} w_j V^{n-j} + (1 - beta) A V^{n-1} + S^n,
    M     = (w_0 / tau) I - beta A,

and differs only in the source vector S^n, which is assembled once per plan:

* plain:      A v + beta f^n + (1 - beta) f^{n-1}
* smoothed:   A v / m! * [beta sum_{j<=n} b_j (n-j)^m + (1-beta) sum_{j<=n+m-1} s_j (n+m-1-j)^m]
              + tau^-m [beta sum_{j<=n} b_j F^{n-j} + (1-beta) sum_{j<=n+m-1} s_j F^{n+m-1-j}]
* corrected:  as smoothed, with both shifted sums cut at j <= n - 1.

b_j and s_j vanish beyond k*m, so every sum is finite.

The A v weights are exact rationals. For separable sources the temporal sums
carry the tau^-m cancellation, so they are evaluated on the scalar temporal
factors with at least 128 guard bits beyond max(working, 50 digits) and only
then rounded to the working precision.
"""

from __future__ import annotations

import csv
import enum
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial

import numpy as np

from .errors import InvalidOrderError, ShapeError
from .precision import get_precision, guard
from .smoothing import SmoothedSamples, SourceDescriptor, sample_smoothed
from .spatial import Constant, NodalFunction, SpatialOperator, as_nodal
from .symbols import SchemeOrder, SymbolCoefficients, as_fraction, power_coeffs, weighted_coeffs


class SchemeKind(str, enum.Enum):
    PLAIN = "plain"
    SMOOTHED = "smoothed"
    CORRECTED = "corrected"

    @classmethod
    def parse(cls, value) -> "SchemeKind":
        try:
            return cls(value.value if isinstance(value, cls) else str(value).lower())
        except ValueError:
            raise InvalidOrderError(f"unknown scheme {value!r}; use plain, smoothed or corrected") from None


@dataclass(frozen=True)
class ProblemSpec:
    """u_t - A u = f on (-1, 1) x (0, T], u(0) = v."""

    v: NodalFunction = Constant(0)
    source: SourceDescriptor = SourceDescriptor()
    T: Fraction = Fraction(1)
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "v", as_nodal(self.v))
        object.__setattr__(self, "T", as_fraction(self.T))


@dataclass(frozen=True, eq=False)
class StepPlan:
    order: SchemeOrder
    kind: SchemeKind
    N: int
    tau: Fraction
    op: SpatialOperator
    prec: object
    w: SymbolCoefficients
    b: SymbolCoefficients | None
    s: SymbolCoefficients | None
    M: np.ndarray
    factor: object = field(repr=False)
    v: np.ndarray = field(repr=False)
    Av: np.ndarray = field(repr=False)
    av_weights: tuple = field(repr=False)
    source: np.ndarray = field(repr=False)
    samples: SmoothedSamples | None = field(default=None, repr=False)
    w_over_tau: tuple = field(default=(), repr=False)
    one_minus_beta: object = None

    @property
    def k(self) -> int:
        return self.order.k

    @property
    def m(self) -> int:
        return 0 if self.kind is SchemeKind.PLAIN else self.order.m

    @property
    def memory(self) -> int:
        """Number of past states a step reads."""
        return self.order.k


@dataclass(eq=False)
class Trajectory:
    u: np.ndarray
    V: np.ndarray
    states: list | None
    k: int
    m: int
    beta: Fraction
    N: int
    tau: Fraction
    kind: SchemeKind
    digits: int
    prec: object = None

    def to_csv(self, path, nodes=None) -> None:
        nodes = list(range(len(self.u))) if nodes is None else nodes
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["x", "u"])
            for x, u in zip(nodes, self.u):
                out.writerow([repr(float(x)), repr(float(u)) if isinstance(u, (float, np.floating)) else str(u)])


def _check_kind(order: SchemeOrder, kind: SchemeKind) -> None:
    if kind is not SchemeKind.PLAIN and not 1 <= order.m <= order.k:
        raise InvalidOrderError(f"{kind.value} scheme needs 1 <= m <= k, got k={order.k}, m={order.m}")


def _shift_limit(kind: SchemeKind, n: int, m: int) -> int:
    return n - 1 if kind is SchemeKind.CORRECTED else n + m - 1


def av_weights(order: SchemeOrder, kind: SchemeKind, N: int) -> tuple:
    """Exact coefficients c_n (n = 0..N) of A v in S^n."""
    if kind is SchemeKind.PLAIN:
        return tuple(Fraction(1) for _ in range(N + 1))
    k, m, beta = order.k, order.m, order.beta
    km = k * m
    db, bnum = power_coeffs(k, m, "base").common_denominator()
    ds, snum = power_coeffs(k, m, "shifted").common_denominator()
    out = [Fraction(0)]
    for n in range(1, N + 1):
        sb = sum(bnum[j] * (n - j) ** m for j in range(min(n, km) + 1))
        top = min(_shift_limit(kind, n, m), km)
        ss = sum(snum[j] * (n + m - 1 - j) ** m for j in range(top + 1))
        out.append((beta * Fraction(sb, db) + (1 - beta) * Fraction(ss, ds)) / factorial(m))
    return tuple(out)


def _temporal_sums(order, kind, N, tau, temporal, tprec):
    """tau^-m [beta sum b_j F^{n-j} + (1 - beta) sum s_j F^{n+m-1-j}] per term, in tprec.

    ``temporal`` has shape (terms, count); plain schemes combine f^n, f^{n-1}.
    """
    n_terms = temporal.shape[0]
    with tprec:
        out = tprec.zeros((n_terms, N + 1))
        beta = tprec.scalar(order.beta)
        omb = tprec.scalar(1 - order.beta)
        if kind is SchemeKind.PLAIN:
            for n in range(1, N + 1):
                out[:, n] = beta * temporal[:, n] + omb * temporal[:, n - 1]
            return out
        k, m = order.k, order.m
        km = k * m
        bvec = tprec.array(list(power_coeffs(k, m, "base")))
        svec = tprec.array(list(power_coeffs(k, m, "shifted")))
        scale = tprec.scalar(1 / tau ** m)
        for i in range(n_terms):
            row = temporal[i]
            for n in range(1, N + 1):
                jb = min(n, km)
                acc_b = bvec[: jb + 1] @ row[n - jb: n + 1][::-1]
                js = min(_shift_limit(kind, n, m), km)
                top = n + m - 1
                acc_s = svec[: js + 1] @ row[top - js: top + 1][::-1] if js >= 0 else 0
                out[i, n] = (beta * acc_b + omb * acc_s) * scale
    return out


def build_plan(problem: ProblemSpec, order: SchemeOrder, kind, N: int, op: SpatialOperator,
               precision=None) -> StepPlan:
    """Factor M once and assemble S^1..S^N."""
    kind = SchemeKind.parse(kind)
    _check_kind(order, kind)
    if not isinstance(N, (int, np.integer)) or N < 1:
        raise InvalidOrderError(f"number of steps must be a positive integer, got {N!r}")
    N = int(N)
    prec = op.prec if precision is None else get_precision(precision)
    op = op.with_precision(prec)
    tau = problem.T / N
    m = 0 if kind is SchemeKind.PLAIN else order.m
    w = weighted_coeffs(order.k, order.beta, allow_small_beta=order.allow_small_beta)
    b = power_coeffs(order.k, m, "base") if m else None
    s = power_coeffs(order.k, m, "shifted") if m else None
    nodes = op.nodes
    size = op.size

    with prec:
        inv_tau = prec.scalar(1 / tau)
        beta = prec.scalar(order.beta)
        eye = prec.zeros((size, size))
        for i in range(size):
            eye[i, i] = prec.scalar(1)
        M = prec.scalar(w[0]) * inv_tau * eye - beta * op.matrix
        factor = prec.lu_factor(M)
        v = problem.v(nodes, prec)
        if np.shape(v) != (size,):
            raise ShapeError(f"initial value has shape {np.shape(v)}, expected ({size},)")
        Av = op.matrix @ v
        cav = av_weights(order, kind, N)
        source = prec.zeros((N + 1, size))
        for n in range(1, N + 1):
            source[n] = prec.scalar(cav[n]) * Av

    samples = None
    src = problem.source
    if not src.is_zero:
        tprec = guard(prec)
        samples = sample_smoothed(src, m, tau, N, nodes, prec, temporal_prec=tprec)
        if samples.dense is not None:
            with prec:
                sums = _temporal_sums(order, kind, N, tau, np.ascontiguousarray(samples.dense.T), prec)
                source = source + sums.T
        else:
            weights = _temporal_sums(order, kind, N, tau, samples.temporal, tprec)
            with prec:
                wts = prec.array(weights)
                source = source + wts.T @ samples.spatial
                source[0] = prec.zeros(size)

    with prec:
        w_over_tau = tuple(prec.scalar(c) * inv_tau for c in w)
        omb = prec.scalar(1 - order.beta)
    return StepPlan(order, kind, N, tau, op, prec, w, b, s, M, factor, v, Av, cav, source,
                    samples, w_over_tau, omb)


def advance(plan: StepPlan, n: int, history):
    """V^n from ``history`` = [V^{n-1}, V^{n-2}, ..., V^1].

    Only the first min(n - 1, k) entries are read; V^0 = 0 contributes nothing.
    """
    if n < 1 or n > plan.N:
        raise InvalidOrderError(f"step index must be in 1..{plan.N}, got {n}")
    need = min(n - 1, plan.k)
    if len(history) < need:
        raise ValueError(f"step {n} needs {need} previous states, got {len(history)}")
    with plan.prec:
        rhs = plan.source[n].copy()
        for j in range(1, need + 1):
            rhs = rhs - plan.w_over_tau[j] * history[j - 1]
        if n >= 2:
            rhs = rhs + plan.one_minus_beta * (plan.op.matrix @ history[0])
        return plan.prec.lu_solve(plan.factor, rhs)


def march(plan: StepPlan, keep_states: bool = False):
    """All steps of a plan; returns (V^N, [V^0..V^N] or None)."""
    history = deque(maxlen=plan.k)
    with plan.prec:
        V = plan.prec.zeros(plan.op.size)
    states = [V] if keep_states else None
    for n in range(1, plan.N + 1):
        V = advance(plan, n, history)
        history.appendleft(V)
        if keep_states:
            states.append(V)
    return V, states


def run(problem: ProblemSpec, order: SchemeOrder, kind, N: int, op: SpatialOperator,
        precision=None, keep_states: bool = False) -> Trajectory:
    """March n = 1..N and return u^N = V^N + v."""
    plan = build_plan(problem, order, kind, N, op, precision)
    V, states = march(plan, keep_states)
    with plan.prec:
        u = V + plan.v
    return Trajectory(u, V, states, order.k, plan.m, order.beta, plan.N, plan.tau, plan.kind,
                      plan.prec.digits, plan.prec)
