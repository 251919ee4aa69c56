"""Norm-growth bounds for products and symmetric products of free variables.

The constants 102 and 11 are the explicit ones produced by the support
argument for symmetric products; they are proof constants, not sharp ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import ValidationError
from .freeconv import gram_base
from .measure import (
    DEFAULT_ORDER,
    MomentSequence,
    SpectralMeasure,
    mean_variance,
    moments,
    support_radius,
)
from .series import lagrange_invert
from .transforms import psi_from_moments

SUPPORT_CONSTANT = 102.0
PRODUCT_CONSTANT = 11.0
MEAN_TOL = 1e-9
# some inequalities are attained (two-atom laws at z = 1/(4L)); allow roundoff
ROUNDOFF = 1e-12


def _check_mean_one(m: SpectralMeasure):
    mean = float(np.dot(m.x, m.w))
    if abs(mean - 1.0) > MEAN_TOL:
        raise ValidationError(
            f"bound needs E(X) = 1 (got {mean:.12g}); rescale with normalize_mean first"
        )
    if not m.is_positive:
        raise ValidationError("bound needs a positive variable (measure on [0, L])")


def symmetric_product_bounds(m: SpectralMeasure, n: int) -> tuple[float, float]:
    """(sigma sqrt(n), 102 L n): window for the norm of the symmetric product Y_n."""
    _check_mean_one(m)
    if n < 1:
        raise ValidationError("n must be >= 1")
    _, var = mean_variance(moments(m, 2))
    return math.sqrt(var) * math.sqrt(n), SUPPORT_CONSTANT * support_radius(m) * n


def gamma_constant(gram: MomentSequence) -> float:
    """Standard deviation of X*X / E(X*X)."""
    m1, var = mean_variance(gram)
    if not m1 > 0:
        raise ValidationError("E(X*X) must be positive")
    return math.sqrt(var) / m1


def _check_gram(gram: MomentSequence, x_norm: float, n: int):
    if not gram.mean > 0:
        raise ValidationError("E(X*X) must be positive")
    if n < 1:
        raise ValidationError("n must be >= 1")
    if x_norm < math.sqrt(gram.mean) * (1 - 1e-12):
        raise ValidationError(
            f"inconsistent input: ||X|| = {x_norm:g} but ||X||^2 >= E(X*X) = {gram.mean:g}"
        )


def product_norm_log_bounds(gram: MomentSequence, x_norm: float, n: int) -> tuple[float, float]:
    """Natural logs of the lower and upper bounds on ||Pi_n||.

    The lower bound is ``-inf`` when X*X is constant (gamma = 0).
    """
    _check_gram(gram, x_norm, n)
    log_s2 = math.log(gram.mean)
    gamma = gamma_constant(gram)
    upper = math.log(PRODUCT_CONSTANT * x_norm) + 0.5 * math.log(n) + 0.5 * (n - 1) * log_s2
    if gamma == 0:
        lower = -math.inf
    else:
        lower = 0.5 * math.log(gamma) + 0.25 * math.log(n) + 0.5 * n * log_s2
    return lower, upper


def product_norm_bounds(gram: MomentSequence, x_norm: float, n: int) -> tuple[float, float]:
    lo, hi = product_norm_log_bounds(gram, x_norm, n)
    return math.exp(lo), math.exp(hi)


def growth_rate(gram: MomentSequence) -> float:
    """Limit of n^-1 log ||Pi_n||, i.e. log sqrt(E(X*X))."""
    if not gram.mean > 0:
        raise ValidationError("E(X*X) must be positive")
    return 0.5 * math.log(gram.mean)


def cyclic_vector_norm(gram_m1: float, n: int) -> float:
    """Exact length of Pi_n applied to a cyclic vector: E(X*X)^(n/2)."""
    cyclic_vector_log_norm(gram_m1, n)  # validates
    return float(gram_m1) ** (0.5 * n)


def cyclic_vector_log_norm(gram_m1: float, n: int) -> float:
    if not gram_m1 > 0:
        raise ValidationError("E(X*X) must be positive")
    if n < 1:
        raise ValidationError("n must be >= 1")
    if gram_m1 == 1:
        return 0.0
    return 0.5 * n * math.log(gram_m1)


@dataclass(frozen=True)
class BoundsRecord:
    n: int
    y_lower: float | None
    y_upper: float | None
    pi_lower_log: float
    pi_upper_log: float
    cyclic_exact_log: float

    @property
    def pi_lower(self) -> float:
        return math.exp(self.pi_lower_log)

    @property
    def pi_upper(self) -> float:
        return math.exp(self.pi_upper_log)

    @property
    def cyclic_exact(self) -> float:
        return math.exp(self.cyclic_exact_log)

    @property
    def pi_lower_vacuous(self) -> bool:
        return self.pi_lower_log == -math.inf


@dataclass(frozen=True)
class NormBoundsReport:
    records: list[BoundsRecord]
    L: float
    sigma: float | None
    s2: float
    gamma: float
    growth_rate: float
    x_norm: float
    notes: list[str] = field(default_factory=list)


def bounds_report(
    n_values: Iterable[int],
    measure: SpectralMeasure | None = None,
    gram: MomentSequence | None = None,
    x_norm: float | None = None,
) -> NormBoundsReport:
    """Tabulate every bound for each n.

    Pass ``measure`` for a self-adjoint X (its square gives the X*X law and
    ``||X|| = L``), or ``gram`` and ``x_norm`` for a general X. The
    symmetric-product columns are filled only for a mean-one positive measure.
    """
    notes = []
    sigma = None
    L = math.nan
    symmetric_ok = False
    if measure is not None:
        L = support_radius(measure)
        if gram is None:
            gram = gram_base(measure, 2)
        if x_norm is None:
            x_norm = L
        mean, var = mean_variance(moments(measure, 2))
        sigma = math.sqrt(var)
        symmetric_ok = measure.is_positive and abs(mean - 1) <= MEAN_TOL
        if not symmetric_ok:
            notes.append("symmetric-product bounds skipped: need a mean-one measure on [0, L]")
    if gram is None or x_norm is None:
        raise ValidationError("need a measure, or an X*X law together with ||X||")
    gamma = gamma_constant(gram)
    if gamma == 0:
        notes.append("gamma = 0: the lower bound on ||Pi_n|| is vacuous")
    records = []
    for n in n_values:
        n = int(n)
        y_lo = y_hi = None
        if symmetric_ok:
            y_lo, y_hi = symmetric_product_bounds(measure, n)
        lo, hi = product_norm_log_bounds(gram, x_norm, n)
        records.append(BoundsRecord(n, y_lo, y_hi, lo, hi, cyclic_vector_log_norm(gram.mean, n)))
    return NormBoundsReport(
        records=records,
        L=L,
        sigma=sigma,
        s2=gram.mean,
        gamma=gamma,
        growth_rate=growth_rate(gram),
        x_norm=float(x_norm),
        notes=notes,
    )


# -- numerical check of the support-argument inequalities --------------------


@dataclass(frozen=True)
class InequalityCheck:
    name: str
    statement: str
    passed: bool
    worst_slack: float
    worst_relative_slack: float
    points: int


@dataclass(frozen=True)
class ProofCheckReport:
    n: int
    L: float
    samples: int
    checks: list[InequalityCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def worst(self) -> InequalityCheck:
        return min(self.checks, key=lambda c: c.worst_relative_slack)


def _circle(radius, samples):
    theta = 2 * math.pi * (np.arange(samples) + 0.5) / samples
    return radius * np.exp(1j * theta)


def _disk(radius, samples):
    """Sunflower points filling the disk, plus its boundary circle."""
    j = np.arange(samples)
    r = radius * np.sqrt((j + 0.5) / samples)
    theta = j * math.pi * (3 - math.sqrt(5))
    return np.concatenate((r * np.exp(1j * theta), _circle(radius, samples)))


def _check(name, statement, values, bound, upper):
    slack = (bound - values) if upper else (values - bound)
    worst = float(np.min(slack))
    return InequalityCheck(
        name=name,
        statement=statement,
        passed=bool(worst >= -ROUNDOFF * bound),
        worst_slack=worst,
        worst_relative_slack=worst / bound,
        points=int(np.size(values)),
    )


def verify_proof_inequalities(
    m: SpectralMeasure, n: int, samples: int = 256, K: int = DEFAULT_ORDER
) -> ProofCheckReport:
    """Evaluate the seven inequalities of the linear support bound at sample points.

    psi_X is evaluated exactly from the atoms; psi_X^{-1}, S_X and S_X^n come
    from the order-K Lagrange series. Each check reports the smallest slack
    (bound minus value for upper bounds, value minus bound for lower bounds).
    """
    _check_mean_one(m)
    if n < 2:
        raise ValidationError("the inequalities are stated for n >= 2")
    if samples < 64:
        raise ValidationError("need at least 64 sample points")
    L = support_radius(m)
    x, w = m.x, m.w

    def psi(z):
        return ((x * z[:, None] / (1 - x * z[:, None])) * w).sum(axis=1)

    inverse = lagrange_invert(psi_from_moments(moments(m, K)))
    ratio = inverse.shift_down()  # psi^{-1}(u) / u
    u_radius = 1.0 / (72 * L * n)
    if u_radius >= 1.0 / (6 * L):
        raise ValidationError("series evaluation outside its guaranteed convergence disk")

    z_radius = 1.0 / (4 * L)
    z_disk = _disk(z_radius, samples)
    z_circle = _circle(z_radius, samples)
    u_disk = _disk(u_radius, samples)
    u_circle = _circle(u_radius, samples)

    checks = [
        _check(
            "psi_near_identity",
            "|psi(z) - z| <= |z|/3 for |z| <= 1/(4L)",
            np.abs(psi(z_disk) - z_disk) / np.abs(z_disk),
            1 / 3,
            upper=True,
        ),
        _check(
            "psi_circle_lower",
            "|psi(z)| >= 1/(6L) for |z| = 1/(4L)",
            np.abs(psi(z_circle)),
            1 / (6 * L),
            upper=False,
        ),
    ]
    q = ratio(u_disk)
    s = (1 + u_disk) * q
    s_abs_n = np.abs(s) ** n
    checks.append(
        _check(
            "inverse_ratio",
            "|psi^{-1}(u)/u - 1| <= 1/(7n) for |u| <= 1/(72Ln)",
            np.abs(q - 1),
            1 / (7 * n),
            upper=True,
        )
    )
    checks.append(
        _check("s_near_one", "|1 - S(u)| <= 1/(6n)", np.abs(1 - s), 1 / (6 * n), upper=True)
    )
    hi = _check("", "", s_abs_n, math.exp(1 / 6), upper=True)
    lo = _check("", "", s_abs_n, math.exp(-1 / 3), upper=False)
    side = hi if hi.worst_relative_slack <= lo.worst_relative_slack else lo
    checks.append(
        InequalityCheck(
            name="s_power_window",
            statement="exp(-1/3) <= |S(u)|^n <= exp(1/6)",
            passed=hi.passed and lo.passed,
            worst_slack=side.worst_slack,
            worst_relative_slack=side.worst_relative_slack,
            points=hi.points,
        )
    )
    checks.append(
        _check("s_n_near_one", "|S(u)^n - 1| <= 1/5", np.abs(s**n - 1), 0.2, upper=True)
    )
    s_circle_n = ((1 + u_circle) * ratio(u_circle)) ** n
    checks.append(
        _check(
            "inverse_psi_n_lower",
            "|psi_n^{-1}(u)| >= 1/(102Ln) for |u| = 1/(72Ln)",
            np.abs(u_circle * s_circle_n / (1 + u_circle)),
            1 / (SUPPORT_CONSTANT * L * n),
            upper=False,
        )
    )
    return ProofCheckReport(n=n, L=L, samples=samples, checks=checks)


# -- Gaussian matrix products --------------------------------------------------

_ASYMPTOTIC = (
    1.0 / 12,
    -1.0 / 120,
    1.0 / 252,
    -1.0 / 240,
    1.0 / 132,
    -691.0 / 32760,
    1.0 / 12,
)


def digamma(x: float) -> float:
    """d log Gamma / dx for x > 0: upward recurrence to x >= 8, then the asymptotic series."""
    x = float(x)
    if not x > 0 or not math.isfinite(x):
        raise ValidationError("digamma needs a finite x > 0")
    acc = 0.0
    while x < 8.0:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    tail = 0.0
    for c in reversed(_ASYMPTOTIC):
        tail = (tail + c) * inv2
    return acc + math.log(x) - 0.5 / x - tail


def cohen_newman_lambda(k: int, s2: float) -> float:
    """Top Lyapunov exponent of products of k x k matrices with iid N(0, s2) entries."""
    if int(k) != k or k < 1:
        raise ValidationError("matrix size k must be a positive integer")
    if not s2 > 0:
        raise ValidationError("entry variance must be positive")
    return 0.5 * (math.log(s2) + math.log(2.0) + digamma(k / 2))


def cohen_newman_large_k(k: int, s2: float) -> float:
    """Large-k comparison value (1/2) log(k s2)."""
    if int(k) != k or k < 1 or not s2 > 0:
        raise ValidationError("need k >= 1 and s2 > 0")
    return 0.5 * math.log(k * s2)
