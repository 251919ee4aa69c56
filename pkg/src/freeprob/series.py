"""Truncated formal power series in one variable.

A :class:`TruncatedSeries` of order K stores c_0..c_K and represents the
class of a power series modulo z^(K+1). Binary operations require equal
orders; nothing here changes K behind the caller's back.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ValidationError

RECIPROCAL_MIN = 1e-300
INVERT_MIN_LINEAR = 1e-12
# inversions run in extended precision (80-bit on x86) and round back to double
WORK_DTYPE = np.longdouble


class TruncatedSeries:
    __slots__ = ("_c",)

    def __init__(self, coeffs: Sequence[float]):
        c = np.array(coeffs, dtype=float).ravel()
        if c.size < 1:
            raise ValidationError("series needs at least the constant coefficient")
        if not np.all(np.isfinite(c)):
            raise ValidationError("series coefficients must be finite")
        c.setflags(write=False)
        self._c = c

    @classmethod
    def zeros(cls, K: int) -> "TruncatedSeries":
        return cls(np.zeros(K + 1))

    @classmethod
    def constant(cls, value: float, K: int) -> "TruncatedSeries":
        c = np.zeros(K + 1)
        c[0] = value
        return cls(c)

    @classmethod
    def identity(cls, K: int) -> "TruncatedSeries":
        """The series z."""
        c = np.zeros(K + 1)
        if K >= 1:
            c[1] = 1.0
        return cls(c)

    @property
    def order(self) -> int:
        return self._c.size - 1

    @property
    def coeffs(self) -> np.ndarray:
        return self._c

    def __len__(self):
        return self._c.size

    def __getitem__(self, k):
        return self._c[k]

    def __iter__(self):
        return iter(self._c)

    def __repr__(self):
        return f"TruncatedSeries(order={self.order}, coeffs={self._c.tolist()!r})"

    def __eq__(self, other):
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        return self.order == other.order and np.array_equal(self._c, other._c)

    __hash__ = None

    def _check(self, other: "TruncatedSeries"):
        if self.order != other.order:
            raise ValidationError(f"series order mismatch: {self.order} vs {other.order}")

    def __add__(self, other):
        if isinstance(other, TruncatedSeries):
            self._check(other)
            return TruncatedSeries(self._c + other._c)
        c = self._c.copy()
        c[0] += other
        return TruncatedSeries(c)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries(-self._c)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, TruncatedSeries):
            return mul(self, other)
        return TruncatedSeries(self._c * other)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        return power(self, n)

    def __call__(self, z):
        """Evaluate the truncated polynomial at (complex) ``z`` by Horner's rule."""
        z = np.asarray(z)
        out = np.full(z.shape, self._c[-1], dtype=np.result_type(z, float))
        for ck in self._c[-2::-1]:
            out = out * z + ck
        return out

    def truncate(self, K: int) -> "TruncatedSeries":
        if not 0 <= K <= self.order:
            raise ValidationError(f"cannot truncate order {self.order} to {K}")
        return TruncatedSeries(self._c[: K + 1])

    def shift_down(self) -> "TruncatedSeries":
        """f(z)/z for f with zero constant term; the order drops by one."""
        if self._c[0] != 0:
            raise ValidationError("f(z)/z needs f_0 = 0")
        if self.order < 1:
            raise ValidationError("cannot divide an order-0 series by z")
        return TruncatedSeries(self._c[1:])

    def shift_up(self) -> "TruncatedSeries":
        """z f(z); the order rises by one and stays exact."""
        return TruncatedSeries(np.concatenate(([0.0], self._c)))


def mul(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    """Cauchy product truncated at the common order."""
    a._check(b)
    return TruncatedSeries(np.convolve(a.coeffs, b.coeffs)[: a.order + 1])


def reciprocal_work(c) -> np.ndarray:
    """Coefficients of 1/a in working precision, from those of a."""
    c = np.asarray(c, dtype=WORK_DTYPE)
    b = np.zeros_like(c)
    b[0] = 1 / c[0]
    for k in range(1, c.size):
        b[k] = -np.dot(c[1 : k + 1], b[k - 1 :: -1][:k]) / c[0]
    return b


def reciprocal(a: TruncatedSeries) -> TruncatedSeries:
    if abs(a[0]) <= RECIPROCAL_MIN:
        raise ValidationError("reciprocal needs a nonvanishing constant term")
    return TruncatedSeries(reciprocal_work(a.coeffs).astype(float))


def compose(f: TruncatedSeries, g: TruncatedSeries) -> TruncatedSeries:
    """f(g(z)) truncated at order K; needs g_0 = 0 so truncation is exact."""
    f._check(g)
    if g[0] != 0:
        raise ValidationError("composition needs g_0 = 0")
    K = f.order
    gc = g.coeffs
    out = np.zeros(K + 1)
    out[0] = f[K]
    for fk in f.coeffs[-2::-1]:
        out = np.convolve(out, gc)[: K + 1]
        out[0] += fk
    return TruncatedSeries(out)


def power(a: TruncatedSeries, n: int) -> TruncatedSeries:
    """a^n by binary exponentiation (about log2 n multiplications)."""
    if int(n) != n or n < 0:
        raise ValidationError("series power needs a nonnegative integer exponent")
    n = int(n)
    result = TruncatedSeries.constant(1.0, a.order)
    base = a
    while n:
        if n & 1:
            result = mul(result, base)
        n >>= 1
        if n:
            base = mul(base, base)
    return result


def fixed_point_work(phi, K: int) -> np.ndarray:
    """Coefficients h_0..h_K of the series solving h = z phi(h), in working precision.

    Uses h_k = [z^(k-1)] phi(z)^k / k, which only needs phi_0..phi_(K-1).
    """
    phi = np.asarray(phi, dtype=WORK_DTYPE)[:K]
    h = np.zeros(K + 1, dtype=WORK_DTYPE)
    p = np.ones(1, dtype=WORK_DTYPE)
    for k in range(1, K + 1):
        p = np.convolve(p, phi)[:K]
        h[k] = p[k - 1] / k
    return h


def invert_work(f) -> np.ndarray:
    """Functional inverse of f (f_0 = 0, f_1 != 0) in working precision."""
    f = np.asarray(f, dtype=WORK_DTYPE)
    # h = f^{-1} solves h = z * (z / f(z)) evaluated at h
    return fixed_point_work(reciprocal_work(f[1:]), f.size - 1)


def lagrange_invert(f: TruncatedSeries) -> TruncatedSeries:
    """Functional inverse h of f, so that f(h(z)) = z = h(f(z)) mod z^(K+1).

    With g = z / f(z), the inverse solves h = z g(h) and its coefficients
    are h_k = [z^(k-1)] g^k / k. Powers of g are accumulated in extended
    precision, which keeps the cancellations of alternating g in check.
    """
    if f[0] != 0:
        raise ValidationError("functional inverse needs f_0 = 0")
    if f.order < 1:
        raise ValidationError("functional inverse needs order >= 1")
    if abs(f[1]) < INVERT_MIN_LINEAR:
        raise ValidationError("functional inverse needs |f_1| >= 1e-12")
    return TruncatedSeries(invert_work(f.coeffs).astype(float))
