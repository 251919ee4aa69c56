"""Independent reference computations used by the tests.

Nothing here calls into the package's series or transform code.
"""

from __future__ import annotations

import math

import numpy as np


def contour_inverse_coeff(f_coeffs, k: int, radius: float = 0.2, points: int = 512) -> float:
    """k-th coefficient of the compositional inverse of f by a contour integral.

    h_k = (1 / 2 pi i k) * closed integral of dz / f(z)^k around a small circle,
    evaluated with the trapezoid rule (spectrally accurate for periodic integrands).
    """
    theta = 2 * np.pi * np.arange(points) / points
    z = radius * np.exp(1j * theta)
    fz = np.polyval(np.asarray(f_coeffs, dtype=float)[::-1], z)
    return float(np.mean(z / fz**k).real / k)


def catalan(k: int) -> int:
    return math.comb(2 * k, k) // (k + 1)


def fuss_catalan(k: int) -> int:
    """Moments of the square of the free Poisson law: C(3k, k) / (2k + 1)."""
    return math.comb(3 * k, k) // (2 * k + 1)


def bernoulli_square_moment(k: int) -> int:
    """Moments of the free square of the two-point law on {0, 2}: C(2k-1, k)."""
    return math.comb(2 * k - 1, k)


def free_product_second_moment(a1, a2, b1, b2) -> float:
    """E(abab) for free a, b from their first two moments."""
    return a2 * b1**2 + a1**2 * b2 - a1**2 * b1**2


def mp_density(x):
    """Free Poisson (rate one) density on [0, 4]."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = (x > 0) & (x < 4)
    out[inside] = np.sqrt(x[inside] * (4 - x[inside])) / (2 * np.pi * x[inside])
    return out


def bernoulli_power_edge(n: int) -> float:
    """Right support edge of the n-fold free power of the two-point law on {0, 2}.

    The inverse of psi for the power is chi(z) = z (1+z)^(n-1) / (1+2z)^n; the
    edge is 1 / chi at the positive critical point z = 1 / (n - 2) (n > 2),
    or 1 / chi(inf) = 2^n when no critical point exists.
    """
    if n <= 2:
        return 2.0**n
    z = 1.0 / (n - 2)
    return (1 + 2 * z) ** n / (z * (1 + z) ** (n - 1))


def bernoulli_product_log_norm(n: int) -> float:
    """log ||Pi_n|| in the limit law for free factors distributed as the law on {0, 2}.

    Pi_n* Pi_n is the n-fold free power of X^2 = 2 X, so its norm is
    2^n times the support edge of the n-fold power of X.
    """
    return 0.5 * (n * math.log(2) + math.log(bernoulli_power_edge(n)))


LOG_ABS_GAUSSIAN = -(np.euler_gamma + math.log(2)) / 2  # E log|Z| for Z ~ N(0, 1)
