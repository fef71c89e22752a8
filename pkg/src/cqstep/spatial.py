"""Chebyshev--Gauss--Lobatto collocation for the Dirichlet Laplacian on (-1, 1).

Nodes are x_j = cos(j pi / P), j = 0..P, ordered from +1 down to -1. The
operator acts on the P - 1 interior values; boundary rows and columns of the
second-derivative matrix are dropped (homogeneous Dirichlet data).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import GridTooSmallError, ShapeError
from .precision import DOUBLE


@dataclass(frozen=True, eq=False)
class CollocationGrid:
    P: int
    nodes: np.ndarray
    prec: object = DOUBLE

    @property
    def interior(self) -> np.ndarray:
        return self.nodes[1:-1]


def cgl_nodes(P: int, prec=DOUBLE) -> CollocationGrid:
    """Chebyshev--Gauss--Lobatto nodes, computed as sin(pi (P - 2j) / 2P) so that
    the set is exactly symmetric and contains 0 exactly when P is even."""
    if not isinstance(P, (int, np.integer)) or P < 2:
        raise GridTooSmallError(f"need P >= 2 collocation intervals, got {P!r}")
    P = int(P)
    with prec:
        pi = prec.pi()
        arg = prec.array([Fraction(P - 2 * j, 2 * P) for j in range(P + 1)]) * pi
        x = prec.sin(arg)
    return CollocationGrid(P, x, prec)


def cheb_diff_matrix(P: int, prec=DOUBLE) -> np.ndarray:
    """First-derivative collocation matrix on the P + 1 CGL nodes.

    Node differences use 2 sin((i+j) pi/2P) sin((j-i) pi/2P) with the flipping
    trick; the diagonal is the negative row sum so constants are annihilated.
    """
    n = P + 1
    with prec:
        pi = prec.pi()
        half = prec.array([Fraction(i, 2 * P) for i in range(2 * P + 1)]) * pi
        s = prec.sin(half)  # s[i] = sin(i pi / 2P), i = 0..2P
        dx = prec.zeros((n, n))
        n2 = (n + 1) // 2
        for i in range(n2):
            for j in range(n):
                if i != j:
                    # sin((j - i) pi/2P) for negative j - i is -s[i - j]
                    d = s[j - i] if j >= i else -s[i - j]
                    dx[i, j] = 2 * s[i + j] * d
        for i in range(n2, n):
            for j in range(n):
                if i != j:
                    dx[i, j] = -dx[P - i, P - j]
        c = [2 if i in (0, P) else 1 for i in range(n)]
        D = prec.zeros((n, n))
        for i in range(n):
            for j in range(n):
                if i != j:
                    sign = 1 if (i + j) % 2 == 0 else -1
                    D[i, j] = prec.scalar(Fraction(sign * c[i], c[j])) / dx[i, j]
        for i in range(n):
            D[i, i] = -sum(D[i, j] for j in range(n) if j != i)
    return D


def clenshaw_curtis_weights(P: int, prec=DOUBLE) -> np.ndarray:
    """Clenshaw--Curtis weights on all P + 1 CGL nodes (they sum to 2)."""
    with prec:
        pi = prec.pi()
        w = prec.zeros(P + 1)
        theta = prec.array([Fraction(j, P) for j in range(P + 1)]) * pi
        inner = theta[1:-1]
        v = prec.array([1] * (P - 1))
        one = prec.scalar(1)
        if P % 2 == 0:
            w[0] = w[P] = one / (P * P - 1)
            for k in range(1, P // 2):
                v = v - 2 * prec.cos(2 * k * inner) / (4 * k * k - 1)
            v = v - prec.cos(P * inner) / (P * P - 1)
        else:
            w[0] = w[P] = one / (P * P)
            for k in range(1, (P - 1) // 2 + 1):
                v = v - 2 * prec.cos(2 * k * inner) / (4 * k * k - 1)
        w[1:-1] = 2 * v / P
    return w


@dataclass(frozen=True, eq=False)
class SpatialOperator:
    """Dense operator on interior nodal values plus discrete-L2 weights."""

    matrix: np.ndarray
    weights: np.ndarray
    grid: CollocationGrid | None = None
    prec: object = DOUBLE
    first_derivative: np.ndarray | None = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def nodes(self) -> np.ndarray:
        """Interior node coordinates (or indices for abstract operators)."""
        if self.grid is None:
            return self.prec.array(list(range(self.size)))
        return self.grid.interior

    def apply(self, u):
        check_shape(u, self)
        with self.prec:
            return self.matrix @ u

    def with_precision(self, prec) -> "SpatialOperator":
        if prec == self.prec:
            return self
        if self.grid is not None:
            return laplacian_dirichlet(self.grid.P, prec)
        return SpatialOperator(prec.lift(self.matrix), prec.lift(self.weights), None, prec)

    @classmethod
    def from_matrix(cls, matrix, weights=None, prec=DOUBLE) -> "SpatialOperator":
        """Wrap an arbitrary square matrix (unit norm weights by default)."""
        matrix = np.atleast_2d(np.asarray(matrix, dtype=object if prec.dtype is object else float))
        if matrix.shape[0] != matrix.shape[1]:
            raise ShapeError(f"operator must be square, got {matrix.shape}")
        with prec:
            m = prec.lift(matrix)
            w = prec.array([1] * m.shape[0]) if weights is None else prec.lift(np.asarray(weights))
        return cls(m, w, None, prec)


def laplacian_dirichlet(P: int, prec=DOUBLE) -> SpatialOperator:
    """Second-derivative collocation matrix restricted to interior nodes."""
    if P < 4:
        raise GridTooSmallError(f"the Dirichlet Laplacian needs P >= 4, got {P}")
    grid = cgl_nodes(P, prec)
    D = cheb_diff_matrix(P, prec)
    with prec:
        D2 = D @ D
        A = np.array(D2[1:-1, 1:-1])
        w = clenshaw_curtis_weights(P, prec)[1:-1]
    return SpatialOperator(A, w, grid, prec, D)


def check_shape(u, op: SpatialOperator) -> None:
    if np.shape(u) != (op.size,):
        raise ShapeError(f"grid function has shape {np.shape(u)}, operator expects ({op.size},)")


def discrete_l2(u, op: SpatialOperator):
    """sqrt(sum_j w_j |u_j|^2) over interior nodes with Clenshaw--Curtis weights."""
    check_shape(u, op)
    prec = op.prec
    with prec:
        u = np.asarray(u)
        if u.dtype == object:
            sq = np.array([abs(e) ** 2 for e in u], dtype=object)
            return prec.sqrt(sum(op.weights * sq))
        return float(np.sqrt(np.sum(op.weights * np.abs(u) ** 2)))


# --- nodal data descriptors -------------------------------------------------


class NodalFunction:
    """A spatial factor evaluated at collocation nodes in a given precision."""

    def __call__(self, x, prec=DOUBLE):
        raise NotImplementedError

    def __add__(self, other):
        return SumFunction((self, as_nodal(other)))

    __radd__ = __add__

    def __mul__(self, c):
        return ScaledFunction(Fraction(c) if isinstance(c, int) else c, self)

    __rmul__ = __mul__

    @property
    def is_zero(self) -> bool:
        return False


@dataclass(frozen=True)
class Constant(NodalFunction):
    value: object = 1

    def __call__(self, x, prec=DOUBLE):
        with prec:
            return prec.array([self.value] * len(x))

    @property
    def is_zero(self):
        return self.value == 0


@dataclass(frozen=True)
class Indicator(NodalFunction):
    """Characteristic function of (a, b); nodes lying exactly on a or b get 1/2."""

    a: object = 0
    b: object = 1

    def __call__(self, x, prec=DOUBLE):
        with prec:
            a, b = prec.scalar(self.a), prec.scalar(self.b)
            vals = []
            for xi in x:
                if a < xi < b:
                    vals.append(Fraction(1))
                elif xi == a or xi == b:
                    vals.append(Fraction(1, 2))
                else:
                    vals.append(Fraction(0))
            return prec.array(vals)


@dataclass(frozen=True)
class SqrtCap(NodalFunction):
    """sqrt(1 - x^2)."""

    def __call__(self, x, prec=DOUBLE):
        with prec:
            xs = prec.lift(x)
            return prec.sqrt(1 - xs * xs)


@dataclass(frozen=True)
class SineMode(NodalFunction):
    """sin(j pi (x + 1) / 2), the j-th Dirichlet eigenfunction on (-1, 1)."""

    j: int = 1

    def __call__(self, x, prec=DOUBLE):
        with prec:
            return prec.sin(prec.scalar(Fraction(self.j, 2)) * prec.pi() * (prec.lift(x) + 1))


@dataclass(frozen=True)
class FunctionOfX(NodalFunction):
    """Wrap a numpy-vectorized callable. Values are computed in double and
    lifted, so extended runs inherit double accuracy from this factor."""

    fn: object

    def __call__(self, x, prec=DOUBLE):
        vals = np.asarray(self.fn(np.asarray(DOUBLE.lift(prec.to_float(x)))), dtype=float)
        with prec:
            return prec.lift(np.broadcast_to(vals, (len(x),)).copy())


@dataclass(frozen=True)
class SumFunction(NodalFunction):
    parts: tuple

    def __call__(self, x, prec=DOUBLE):
        with prec:
            out = self.parts[0](x, prec)
            for p in self.parts[1:]:
                out = out + p(x, prec)
            return out


@dataclass(frozen=True)
class ScaledFunction(NodalFunction):
    c: object
    f: NodalFunction

    def __call__(self, x, prec=DOUBLE):
        with prec:
            return prec.scalar(self.c) * self.f(x, prec)


def as_nodal(f) -> NodalFunction:
    if isinstance(f, NodalFunction):
        return f
    if isinstance(f, (int, float, Fraction)):
        return Constant(f)
    if callable(f):
        return FunctionOfX(f)
    raise TypeError(f"cannot interpret {f!r} as a nodal function")
