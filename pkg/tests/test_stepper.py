import math
import random
from fractions import Fraction

import numpy as np
import pytest

from cqstep.errors import InvalidOrderError, ShapeError
from cqstep.precision import DOUBLE, Extended
from cqstep.smoothing import SourceDescriptor, TemporalExpr
from cqstep.spatial import (Constant, FunctionOfX, Indicator, SineMode, SpatialOperator, SqrtCap,
                            discrete_l2, laplacian_dirichlet)
from cqstep.stepper import ProblemSpec, SchemeKind, advance, av_weights, build_plan, march, run
from cqstep.symbols import SchemeOrder, power_coeffs, weighted_coeffs

SCALAR = SpatialOperator.from_matrix([[-1.0]])


def reference_march(problem, order, kind, N, A):
    """Direct transcription of the expanded scheme with full-history sums and
    Fractions for every coefficient; the source is sampled at each n from
    scratch (no factored plans, no shared assembly)."""
    k, m, beta = order.k, (0 if kind == "plain" else order.m), order.beta
    tau = Fraction(1, N) * problem.T
    w = list(weighted_coeffs(k, beta))
    v = problem.v(np.arange(A.shape[0], dtype=float))  # abstract operators use index nodes
    Av = A @ v
    size = A.shape[0]
    M = float(w[0] / tau) * np.eye(size) - float(beta) * A
    V = [np.zeros(size)]

    def coef(seq, j):
        return seq[j] if 0 <= j < len(seq) else Fraction(0)

    for n in range(1, N + 1):
        rhs = (1 - float(beta)) * (A @ V[n - 1])
        for j in range(1, n + 1):
            rhs -= float(coef(w, j) / tau) * V[n - j]
        if m == 0:
            rhs += Av
        else:
            b, s = list(power_coeffs(k, m, "base")), list(power_coeffs(k, m, "shifted"))
            top = n - 1 if kind == "corrected" else n + m - 1
            cb = sum(coef(b, j) * Fraction(n - j) ** m for j in range(n + 1))
            cs = sum(coef(s, j) * Fraction(n + m - 1 - j) ** m for j in range(top + 1))
            rhs += float((beta * cb + (1 - beta) * cs) / math.factorial(m)) * Av
        V.append(np.linalg.solve(M, rhs))
    return V


def test_hand_check_first_step():
    plan = build_plan(ProblemSpec(v=1.0), SchemeOrder(1), "plain", 10, SCALAR)
    assert plan.M[0, 0] == pytest.approx(13.0)
    V1 = advance(plan, 1, [])
    assert V1[0] == pytest.approx(-1 / 13, rel=1e-15)


def test_k2_leading_coefficient_in_M():
    plan = build_plan(ProblemSpec(v=1.0), SchemeOrder(2), "plain", 4, SCALAR)
    assert plan.M[0, 0] == pytest.approx(3.5 * 4 + 3)


def test_zero_operator_and_zero_data():
    zero = SpatialOperator.from_matrix(np.zeros((3, 3)))
    plan = build_plan(ProblemSpec(v=FunctionOfX(lambda x: x + 1)), SchemeOrder(3, 2), "corrected", 8, zero)
    assert np.allclose(plan.M, float(plan.w[0]) * 8 * np.eye(3))
    V, states = march(plan, keep_states=True)
    assert all(np.all(s == 0) for s in states)


@pytest.mark.parametrize("kind,k,m", [("plain", 3, 0), ("plain", 7, 0), ("smoothed", 3, 2),
                                      ("corrected", 3, 2), ("corrected", 5, 3), ("smoothed", 4, 4)])
def test_matches_full_history_reference(kind, k, m):
    A = np.array([[-2.0, 0.5], [0.3, -5.0]])
    op = SpatialOperator.from_matrix(A)
    problem = ProblemSpec(v=FunctionOfX(lambda x: 1 + x))
    N = 30
    traj = run(problem, SchemeOrder(k, m), kind, N, op, keep_states=True)
    ref = reference_march(problem, SchemeOrder(k, m), kind, N, A)
    for n in range(N + 1):
        assert np.allclose(traj.states[n], ref[n], rtol=1e-11, atol=1e-13)


def test_av_weights_become_one():
    c = av_weights(SchemeOrder(3, 2), SchemeKind.CORRECTED, 20)
    assert c[0] == 0
    assert all(x == 1 for x in c[7:])
    s = av_weights(SchemeOrder(3, 2), SchemeKind.SMOOTHED, 20)
    assert all(x == 1 for x in s[7:])
    assert c[1:7] != s[1:7]


def test_invalid_kind_and_steps():
    with pytest.raises(InvalidOrderError):
        build_plan(ProblemSpec(), SchemeOrder(3, 0), "corrected", 4, SCALAR)
    with pytest.raises(InvalidOrderError):
        build_plan(ProblemSpec(), SchemeOrder(3, 1), "corrected", 0, SCALAR)
    with pytest.raises(InvalidOrderError):
        SchemeKind.parse("implicit")
    plan = build_plan(ProblemSpec(v=1.0), SchemeOrder(3), "plain", 4, SCALAR)
    with pytest.raises(ValueError):
        advance(plan, 3, [])
    with pytest.raises(InvalidOrderError):
        advance(plan, 5, [0, 0, 0])


def test_initial_value_shape_error():
    op = SpatialOperator.from_matrix(np.eye(2) * -1)

    class Bad(Constant):
        def __call__(self, x, prec=DOUBLE):
            return np.zeros(3)

    with pytest.raises(ShapeError):
        build_plan(ProblemSpec(v=Bad()), SchemeOrder(1), "plain", 2, op)


def test_finite_memory_window():
    """Advancing with only the last k states equals the full march."""
    op = laplacian_dirichlet(8)
    plan = build_plan(ProblemSpec(v=SqrtCap()), SchemeOrder(4, 2), "corrected", 40, op)
    _, states = march(plan, keep_states=True)
    for n in (5, 17, 40):
        hist = [states[n - j] for j in range(1, min(n - 1, 4) + 1)]
        assert np.array_equal(advance(plan, n, hist), states[n])


def _random_configs(count=20, seed=7):
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        k = rng.randint(1, 7)
        m = rng.randint(1, k)
        beta = Fraction(rng.choice([3, 4, 7, 10]), rng.choice([1, 1, 2])) if rng.random() < 0.5 else Fraction(3)
        if beta < 3:
            beta = Fraction(3)
        out.append((k, m, beta, rng.choice([8, 12]), rng.choice([20, 40])))
    return out


def scheme_equivalence_sweep(configs=None):
    """(max |corrected - smoothed| at m=1 over all n, max single-step mismatch for n >= km+1)."""
    worst_m1, worst_tail = 0.0, 0.0
    for k, m, beta, P, N in configs or _random_configs():
        op = laplacian_dirichlet(P)
        src = SourceDescriptor.separable(TemporalExpr.cos(1), Constant(1) + Indicator(0, 1))
        problem = ProblemSpec(v=SqrtCap(), source=src)
        o1 = SchemeOrder(k, 1, beta)
        a = run(problem, o1, "corrected", N, op, keep_states=True).states
        b = run(problem, o1, "smoothed", N, op, keep_states=True).states
        worst_m1 = max(worst_m1, max(float(np.max(np.abs(x - y))) for x, y in zip(a, b)))
        order = SchemeOrder(k, m, beta)
        pc = build_plan(problem, order, "corrected", N, op)
        ps = build_plan(problem, order, "smoothed", N, op)
        _, hist = march(pc, keep_states=True)
        scale = max(float(np.max(np.abs(h))) for h in hist) or 1.0
        for n in range(k * m + 1, N + 1):
            h = [hist[n - j] for j in range(1, min(n - 1, k) + 1)]
            diff = np.max(np.abs(advance(pc, n, h) - advance(ps, n, h)))
            worst_tail = max(worst_tail, float(diff) / scale)
    return worst_m1, worst_tail


def test_scheme_equivalences_small_sweep():
    m1, tail = scheme_equivalence_sweep(_random_configs(5, seed=3))
    assert m1 < 1e-12 and tail < 1e-12


def test_linearity_in_data():
    op = laplacian_dirichlet(12)
    o = SchemeOrder(4, 3)
    f1 = SourceDescriptor.separable(TemporalExpr.cos(1), Indicator(0, 1))
    f2 = SourceDescriptor.separable(TemporalExpr.monomial(2), Constant(1))
    v1, v2 = SqrtCap(), SineMode(3)
    for kind in ("plain", "smoothed", "corrected"):
        order = o if kind != "plain" else SchemeOrder(4)
        u1 = run(ProblemSpec(v1, f1), order, kind, 25, op).u
        u2 = run(ProblemSpec(v2, f2), order, kind, 25, op).u
        u12 = run(ProblemSpec(v1 + v2, f1 + f2), order, kind, 25, op).u
        assert np.allclose(u12, u1 + u2, rtol=1e-11, atol=1e-12)


def test_decay_sanity():
    op = laplacian_dirichlet(16)
    for order, kind in ((SchemeOrder(3), "plain"), (SchemeOrder(7), "plain"), (SchemeOrder(4, 2), "corrected")):
        norms = [discrete_l2(run(ProblemSpec(v=SqrtCap()), order, kind, N, op).u, op) for N in (50, 100, 200)]
        u0 = discrete_l2(SqrtCap()(op.nodes), op)
        assert all(n <= u0 * (1 + 1e-12) for n in norms)


def test_precision_invariance():
    src = SourceDescriptor.separable(TemporalExpr.cos(1), Constant(1) + Indicator(0, 1))
    problem = ProblemSpec(v=SqrtCap(), source=src)
    order = SchemeOrder(4, 2)
    d = run(problem, order, "corrected", 40, laplacian_dirichlet(12)).u
    e = run(problem, order, "corrected", 40, laplacian_dirichlet(12, Extended(166))).u
    ef = np.array([float(x) for x in e])
    assert np.max(np.abs(d - ef)) <= 1e-10 * np.max(np.abs(ef))


def _manufactured(T_expr, dT_expr):
    lam = math.pi ** 2 / 4
    mode = SineMode(1)
    src = (SourceDescriptor.separable(dT_expr, mode)
           + SourceDescriptor.separable(T_expr, FunctionOfX(lambda x: lam * np.sin(np.pi * (x + 1) / 2))))
    return ProblemSpec(v=mode, source=src)


def _plain_rate(problem, k, exact_T, Ns=(40, 80)):
    op = laplacian_dirichlet(16)
    exact = exact_T * SineMode(1)(op.nodes)
    errs = [discrete_l2(run(problem, SchemeOrder(k), "plain", N, op).u - exact, op) for N in Ns]
    return math.log2(errs[0] / errs[1])


@pytest.mark.parametrize("k", range(1, 5))
def test_smooth_compatible_data_gives_order_k(k):
    """u = (1 + t^(k+2)) sin mode: Av + f vanishes to order k at t = 0."""
    p = k + 2
    T = TemporalExpr.constant(1) + TemporalExpr.monomial(p)
    dT = TemporalExpr.monomial(p - 1, p)
    assert _plain_rate(_manufactured(T, dT), k, 2.0, Ns=(40, 80)) == pytest.approx(k, abs=0.15)


@pytest.mark.parametrize("k", [2, 3, 4])
def test_exponential_manufactured_solution_is_first_order(k):
    """u = exp(-t) sin mode: Av + f(0) != 0, and the V^0 = 0 start limits the
    plain scheme to first order at t = 1 whatever k is."""
    expo = TemporalExpr(())
    for q in range(25):
        expo = expo + TemporalExpr.monomial(q, Fraction((-1) ** q, math.factorial(q)))
    problem = _manufactured(expo, -expo)
    assert _plain_rate(problem, k, math.exp(-1), Ns=(200, 400)) == pytest.approx(1.0, abs=0.15)


def test_trajectory_csv(tmp_path):
    op = laplacian_dirichlet(8)
    traj = run(ProblemSpec(v=SqrtCap()), SchemeOrder(2), "plain", 10, op)
    path = tmp_path / "u.csv"
    traj.to_csv(path, op.nodes)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,u" and len(lines) == op.size + 1
    assert float(lines[1].split(",")[1]) == pytest.approx(traj.u[0])
