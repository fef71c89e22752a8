"""Working-precision backends.

Two backends share one small surface so that grid assembly, the time march
and the norms are written once:

* :class:`Double` -- numpy float64 arrays, scipy LU.
* :class:`Extended` -- gmpy2 ``mpfr`` scalars in numpy object arrays with a
  configurable significand, and a pure-Python LU with partial pivoting.

All arithmetic on extended values must happen inside ``with prec:`` so that
gmpy2 rounds to the requested number of bits.
"""

from __future__ import annotations

import contextlib
import math
from fractions import Fraction

import gmpy2
import numpy as np
import scipy.linalg

from .errors import ConfigError, SingularSystemError

DEFAULT_EXTENDED_BITS = 167  # 50 decimal digits


class Double:
    """IEEE double precision."""

    name = "double"
    bits = 53
    eps = float(np.finfo(np.float64).eps)
    dtype = np.float64

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False

    def __repr__(self):
        return "Double()"

    def __eq__(self, other):
        return isinstance(other, Double)

    def __hash__(self):
        return hash("double")

    @property
    def digits(self):
        return 16

    def scalar(self, x):
        if isinstance(x, Fraction):
            return x.numerator / x.denominator
        return float(x)

    def array(self, values):
        return np.array([self.scalar(v) for v in np.ravel(values)], dtype=np.float64).reshape(np.shape(values))

    def lift(self, arr):
        return np.asarray(arr, dtype=np.float64)

    def zeros(self, shape):
        return np.zeros(shape, dtype=np.float64)

    def pi(self):
        return math.pi

    def sqrt(self, x):
        return np.sqrt(x)

    def sin(self, x):
        return np.sin(x)

    def cos(self, x):
        return np.cos(x)

    def to_float(self, x):
        return np.asarray(x, dtype=np.float64) if isinstance(x, np.ndarray) else float(x)

    def lu_factor(self, M):
        M = np.asarray(M)
        lu, piv = scipy.linalg.lu_factor(M, check_finite=True)
        if np.any(np.diag(lu) == 0):
            raise SingularSystemError("matrix is singular to working precision")
        return lu, piv

    def lu_solve(self, factor, b):
        return scipy.linalg.lu_solve(factor, b, check_finite=False)


class Extended:
    """Software floating point with ``bits`` bits of significand (gmpy2)."""

    name = "extended"
    dtype = object

    def __init__(self, bits: int = DEFAULT_EXTENDED_BITS):
        if bits < 53:
            raise ConfigError(f"extended precision needs at least 53 bits, got {bits}")
        self.bits = int(bits)
        self.eps = 2.0 ** (1 - self.bits)
        self._stack: list = []

    @classmethod
    def from_digits(cls, digits: int) -> "Extended":
        return cls(max(53, math.ceil(digits * math.log2(10))))

    def __enter__(self):
        cm = gmpy2.context(precision=self.bits)
        self._stack.append(cm)
        cm.__enter__()
        return self

    def __exit__(self, *exc):
        return self._stack.pop().__exit__(*exc)

    def __repr__(self):
        return f"Extended(bits={self.bits})"

    def __eq__(self, other):
        return isinstance(other, Extended) and other.bits == self.bits

    def __hash__(self):
        return hash(("extended", self.bits))

    @property
    def digits(self):
        return int(self.bits * math.log10(2))

    def scalar(self, x):
        if isinstance(x, Fraction):
            return gmpy2.mpfr(gmpy2.mpq(x.numerator, x.denominator), self.bits)
        if isinstance(x, (int, np.integer)):
            return gmpy2.mpfr(int(x), self.bits)
        if isinstance(x, str):
            return gmpy2.mpfr(x, self.bits)
        return gmpy2.mpfr(x, self.bits)

    def array(self, values):
        out = np.empty(np.shape(values), dtype=object)
        flat = out.reshape(-1)
        for i, v in enumerate(np.ravel(np.asarray(values, dtype=object))):
            flat[i] = self.scalar(v)
        return out

    lift = array

    def zeros(self, shape):
        out = np.empty(shape, dtype=object)
        out.reshape(-1)[:] = [gmpy2.mpfr(0, self.bits)] * out.size
        return out

    def pi(self):
        with self:
            return gmpy2.const_pi()

    def _map(self, fn, x):
        if isinstance(x, np.ndarray):
            out = np.empty(x.shape, dtype=object)
            out.reshape(-1)[:] = [fn(e) for e in x.reshape(-1)]
            return out
        return fn(x)

    def sqrt(self, x):
        return self._map(gmpy2.sqrt, x)

    def sin(self, x):
        return self._map(gmpy2.sin, x)

    def cos(self, x):
        return self._map(gmpy2.cos, x)

    def to_float(self, x):
        if isinstance(x, np.ndarray):
            return np.array([float(e) for e in x.reshape(-1)], dtype=np.float64).reshape(x.shape)
        return float(x)

    def lu_factor(self, M):
        a = np.array(M, dtype=object, copy=True)
        n = a.shape[0]
        piv = np.arange(n)
        for c in range(n):
            p = c + int(np.argmax([abs(e) for e in a[c:, c]]))
            if a[p, c] == 0:
                raise SingularSystemError("matrix is singular to working precision")
            if p != c:
                a[[c, p]] = a[[p, c]]
                piv[[c, p]] = piv[[p, c]]
            a[c + 1:, c] = a[c + 1:, c] / a[c, c]
            a[c + 1:, c + 1:] = a[c + 1:, c + 1:] - np.outer(a[c + 1:, c], a[c, c + 1:])
        return a, piv

    def lu_solve(self, factor, b):
        a, piv = factor
        n = a.shape[0]
        y = np.array(b, dtype=object)[piv]
        for i in range(1, n):
            y[i] = y[i] - a[i, :i] @ y[:i]
        x = y
        x[n - 1] = x[n - 1] / a[n - 1, n - 1]
        for i in range(n - 2, -1, -1):
            x[i] = (x[i] - a[i, i + 1:] @ x[i + 1:]) / a[i, i]
        return x


DOUBLE = Double()


def get_precision(spec) -> Double | Extended:
    """Resolve ``'double'``, a digit count, or a backend instance."""
    if isinstance(spec, (Double, Extended)):
        return spec
    if spec is None:
        return DOUBLE
    if isinstance(spec, str):
        s = spec.strip().lower()
        if s in ("double", "float64", "53"):
            return DOUBLE
        if s.endswith("bits"):
            return Extended(int(s[:-4]))
        try:
            digits = int(s)
        except ValueError:
            raise ConfigError(f"unknown precision {spec!r}; use 'double' or a digit count") from None
        return get_precision(digits)
    if isinstance(spec, (int, np.integer)):
        if spec <= 16:
            return DOUBLE
        return Extended.from_digits(int(spec))
    raise ConfigError(f"unknown precision {spec!r}")


def guard(prec, extra_bits: int = 128) -> Extended:
    """Extended backend with ``extra_bits`` beyond max(prec, 50 digits)."""
    return Extended(max(prec.bits, DEFAULT_EXTENDED_BITS) + extra_bits)


@contextlib.contextmanager
def active(prec):
    with prec:
        yield prec
