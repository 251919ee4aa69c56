"""Free multiplicative convolution through products of S-transforms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UndefinedTransform, ValidationError
from .measure import DEFAULT_ORDER, MomentSequence, SpectralMeasure
from .series import TruncatedSeries, mul, power
from .transforms import moments_from_s, s_transform


@dataclass(frozen=True)
class ConvolutionResult:
    """Law of an n-fold free product, as moments plus the S-series that produced them."""

    n: int
    base_label: str
    moments: MomentSequence
    s_series: TruncatedSeries


def free_multiply(a: MomentSequence, b: MomentSequence) -> MomentSequence:
    """Moments of XY for free X, Y with the given moments (equal orders)."""
    if a.order != b.order:
        raise ValidationError(f"moment order mismatch: {a.order} vs {b.order}")
    return moments_from_s(mul(s_transform(a), s_transform(b)))


def free_power(ms: MomentSequence, n: int, label: str = "") -> ConvolutionResult:
    """n-fold free multiplicative convolution of a law with itself."""
    if int(n) != n or n < 1:
        raise ValidationError("fold count n must be a positive integer")
    n = int(n)
    s = s_transform(ms)
    if n == 1:
        return ConvolutionResult(1, label, ms, s)
    sn = power(s, n)
    return ConvolutionResult(n, label, moments_from_s(sn), sn)


def gram_base(m: SpectralMeasure, K: int = DEFAULT_ORDER) -> MomentSequence:
    """Moments of X*X = X^2 for self-adjoint X with law ``m``."""
    if K < 1:
        raise ValidationError("moment order K must be >= 1")
    sq = m.x**2
    powers = np.cumprod(np.broadcast_to(sq, (K, sq.size)), axis=0)
    return MomentSequence.from_values(powers @ m.w)


def product_gram_moments(gram: MomentSequence, n: int, label: str = "") -> ConvolutionResult:
    """Law of Pi_n* Pi_n, whose S-transform is the n-th power of that of X*X."""
    if not gram.mean > 0:
        raise UndefinedTransform("X*X must have positive expectation")
    return free_power(gram, n, label=label)
