"""Moment sequence <-> psi-function <-> S-transform, Cauchy transforms, Stieltjes inversion.

Conventions: ``psi(z) = sum_{k>=1} m_k z^k``, ``S(z) = (1 + 1/z) psi^{-1}(z)``
and ``G(z) = z^{-1} (psi(1/z) + 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalBreakdown, UndefinedTransform, ValidationError
from .measure import MomentSequence, SpectralMeasure, support_radius
from .series import TruncatedSeries, fixed_point_work, invert_work, reciprocal_work

DEFAULT_EPS = 1e-3
THRESHOLD_FACTOR = 1.1
EDGE_FLOOR = 10.0
EDGE_RATIO = 0.75
CONTINUATION_RATIO = 2.0


def psi_from_moments(ms: MomentSequence) -> TruncatedSeries:
    return TruncatedSeries(ms.array(with_zero=True) * np.r_[0.0, np.ones(ms.order)])


def s_transform(ms: MomentSequence) -> TruncatedSeries:
    """S-transform to order K-1 from K moments; the leading coefficient is 1/m_1."""
    if ms.mean == 0:
        raise UndefinedTransform("S-transform undefined: E(X) = 0")
    chi = invert_work(psi_from_moments(ms).coeffs)  # psi^{-1}, order K
    q = chi[1:]  # psi^{-1}(z)/z, order K-1
    s = q.copy()
    s[1:] += q[:-1]  # times (1 + z)
    return TruncatedSeries(s.astype(float))


def moments_from_s(s: TruncatedSeries, K: int | None = None) -> MomentSequence:
    """Invert :func:`s_transform`: an order K-1 S-series determines m_1..m_K.

    psi solves psi = z (1 + psi) / S(psi), so m_k = [w^(k-1)] ((1+w)/S(w))^k / k.
    """
    if s[0] == 0:
        raise UndefinedTransform("S-series with vanishing constant term has no moments")
    if K is None:
        K = s.order + 1
    if not 1 <= K <= s.order + 1:
        raise ValidationError(f"an order {s.order} S-series determines at most {s.order + 1} moments")
    inv_s = reciprocal_work(s.coeffs[:K])
    phi = inv_s.copy()
    phi[1:] += inv_s[:-1]  # (1 + w) / S(w)
    psi = fixed_point_work(phi, K)
    return MomentSequence.from_values(psi[1:].astype(float))


@dataclass(frozen=True)
class CauchyEvaluator:
    """Evaluates G(z) = E[1/(z - X)].

    ``kind`` is one of

    * ``"atoms"``: exact rational sum over the atoms of ``measure``;
    * ``"moments"``: Laurent tail from ``moments``; only valid for
      ``|z| > threshold``;
    * ``"free_power"``: law of the ``n``-fold free multiplicative power of
      ``measure``, obtained by solving the subordination equation along a
      vertical path from far above the support.
    """

    kind: str
    measure: SpectralMeasure | None = None
    moments: MomentSequence | None = None
    n: int = 1
    threshold: float = 0.0

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.kind == "atoms":
            return _atoms_cauchy(self.measure, z)
        if self.kind == "moments":
            if np.any(np.abs(z) <= self.threshold):
                raise ValidationError(
                    f"moment-series Cauchy transform only valid for |z| > {self.threshold:g}"
                )
            w = 1.0 / z
            coeffs = self.moments.array(with_zero=True)
            acc = np.full(z.shape, coeffs[-1], dtype=complex)
            for c in coeffs[-2::-1]:
                acc = acc * w + c
            return acc * w
        if self.kind == "free_power":
            return _free_power_cauchy(self.measure, self.n, z)
        raise ValidationError(f"unknown evaluator kind {self.kind!r}")

    def density(self, x, eps: float) -> np.ndarray:
        """Poisson-smoothed density -Im G(x + i eps) / pi."""
        if not eps > 0:
            raise ValidationError("eps must be positive")
        x = np.asarray(x, dtype=float)
        return -self(x + 1j * eps).imag / math.pi


def cauchy_evaluator(source, support_hint: float | None = None) -> CauchyEvaluator:
    """Exact evaluator for a measure, Laurent-tail evaluator for moments."""
    if isinstance(source, SpectralMeasure):
        return CauchyEvaluator("atoms", measure=source)
    if isinstance(source, MomentSequence):
        if support_hint is None:
            raise ValidationError("moment-mode Cauchy transform needs a support-radius hint")
        if not support_hint >= 0:
            raise ValidationError("support hint must be nonnegative")
        return CauchyEvaluator(
            "moments", moments=source, threshold=THRESHOLD_FACTOR * float(support_hint)
        )
    raise ValidationError(f"cannot build a Cauchy transform from {type(source).__name__}")


def free_power_evaluator(m: SpectralMeasure, n: int) -> CauchyEvaluator:
    """Cauchy transform of the n-fold free multiplicative convolution of ``m``."""
    if n < 1:
        raise ValidationError("fold count n must be >= 1")
    if n == 1:
        return CauchyEvaluator("atoms", measure=m)
    if not m.is_positive:
        raise ValidationError("free multiplicative powers need a measure on [0, inf)")
    if float(np.dot(m.x, m.w)) <= 0:
        raise UndefinedTransform("S-transform undefined: E(X) = 0")
    return CauchyEvaluator("free_power", measure=m, n=int(n))


def _atoms_cauchy(m: SpectralMeasure, z: np.ndarray) -> np.ndarray:
    x, w = m.x, m.w
    flat = z.ravel()
    out = np.empty(flat.shape, dtype=complex)
    chunk = max(1, 2_000_000 // x.size)
    for i in range(0, flat.size, chunk):
        zz = flat[i : i + chunk]
        out[i : i + chunk] = (w / (zz[:, None] - x)).sum(axis=1)
    return out.reshape(z.shape)


def _free_power_radius(m: SpectralMeasure, n: int) -> float:
    """Upper bound 102 (L/mean) n mean^n on the support of the n-fold power."""
    mean = float(np.dot(m.x, m.w))
    L = support_radius(m)
    return 102.0 * (L / mean) * n * mean**n


def _subordination_step(t, z, x, w, n, tol=1e-13, max_iter=60):
    """Newton solve of t = z h(t)^(n-1), h(t) = p(t) / (1 + t p(t)), p(t) = E[X / (1 - tX)]."""
    ok = np.zeros(t.shape, dtype=bool)
    for _ in range(max_iter):
        r = 1.0 / (1.0 - t[:, None] * x)
        p = (r * x) @ w
        dp = (r * r * x * x) @ w
        den = 1.0 + t * p
        h = p / den
        dh = (dp - p * p) / (den * den)
        hn2 = h ** (n - 2)
        F = t - z * hn2 * h
        dF = 1.0 - z * (n - 1) * hn2 * dh
        step = F / dF
        t = t - step
        ok = np.abs(step) <= tol * np.abs(t)
        if ok.all():
            break
    bad = ~ok | ~np.isfinite(t) | (t.imag > 1e-9 * np.abs(t))
    return t, ~bad


def _advance(t, z_from, z_to, x, w, n, depth=0):
    t_new, good = _subordination_step(t.copy(), z_to, x, w, n)
    jumped = np.abs(t_new - t) > np.abs(t)
    good &= ~jumped
    if good.all():
        return t_new
    if depth >= 12:
        raise NumericalBreakdown("subordination continuation failed to converge")
    idx = np.flatnonzero(~good)
    zf, zt = z_from[idx], z_to[idx]
    # split the path segment in the zeta-plane (z = 1/zeta)
    zeta_mid = 0.5 * (1.0 / zf + 1.0 / zt)
    z_mid = 1.0 / zeta_mid
    t_mid = _advance(t[idx], zf, z_mid, x, w, n, depth + 1)
    t_new[idx] = _advance(t_mid, z_mid, zt, x, w, n, depth + 1)
    return t_new


def _free_power_cauchy(m: SpectralMeasure, n: int, zeta: np.ndarray) -> np.ndarray:
    flat = zeta.ravel()
    x = m.x
    w = m.w
    mean = float(np.dot(x, w))
    R = _free_power_radius(m, n)
    if np.any((flat.imag <= 0) & (np.abs(flat) <= R)):
        raise ValidationError("free-power Cauchy transform needs Im z > 0 inside the support bound")
    out = np.empty(flat.shape, dtype=complex)
    chunk = max(1, 1_000_000 // x.size)
    for i in range(0, flat.size, chunk):
        zz = flat[i : i + chunk]
        y0 = 2.0 * (R + np.abs(zz.real)) + 1.0
        # real points lie beyond R, where any small height is safe
        y_stop = np.where(zz.imag > 0, zz.imag, 1e-3 * y0)
        levels = int(math.ceil(np.max(np.log(y0 / y_stop)) / math.log(CONTINUATION_RATIO))) + 1
        z_cur = 1.0 / (zz.real + 1j * y0)
        t, good = _subordination_step(z_cur * mean ** (n - 1), z_cur, x, w, n)
        if not good.all():
            raise NumericalBreakdown("subordination solve failed far from the support")
        for j in range(1, levels + 1):
            y = y0 * (y_stop / y0) ** (j / levels)
            z_next = 1.0 / (zz.real + 1j * y)
            t = _advance(t, z_cur, z_next, x, w, n)
            z_cur = z_next
        if np.any(zz.imag <= 0):
            t = _advance(t, z_cur, 1.0 / zz, x, w, n)
        psi = t * ((x / (1.0 - t[:, None] * x)) @ w)
        out[i : i + chunk] = (1.0 + psi) / zz
    return out.reshape(zeta.shape)


def _grid(grid) -> np.ndarray:
    if isinstance(grid, np.ndarray):
        xs = grid.astype(float)
    else:
        lo, hi, step = (float(v) for v in grid)
        if not (math.isfinite(lo) and math.isfinite(hi) and math.isfinite(step)):
            raise ValidationError("grid bounds must be finite")
        if step <= 0 or hi < lo:
            raise ValidationError("grid needs lo <= hi and step > 0")
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        xs = lo + step * np.arange(count)
    if not np.all(np.isfinite(xs)):
        raise ValidationError("grid must be finite")
    return xs


def stieltjes_invert(g: CauchyEvaluator, grid, eps: float = DEFAULT_EPS) -> tuple[np.ndarray, np.ndarray]:
    """Smoothed density -Im G(x + i eps)/pi on ``grid = (lo, hi, step)``.

    Returns ``(x, density)`` arrays.
    """
    if not eps > 0:
        raise ValidationError("eps must be positive")
    xs = _grid(grid)
    return xs, g.density(xs, eps)


def extrapolated_density(g: CauchyEvaluator, x, eps: float, levels: int = 3, ratio: float = 2.0):
    """Richardson extrapolation of the smoothed density to eps -> 0.

    Evaluates at ``eps * ratio**j`` for ``j < levels`` and returns the value
    at eps = 0 of the interpolating polynomial in eps.
    """
    if levels < 1:
        raise ValidationError("need at least one smoothing level")
    x = np.asarray(x, dtype=float)
    epss = eps * ratio ** np.arange(levels)
    vals = np.stack([g.density(x, e) for e in epss])
    # Neville's scheme at eps = 0
    table = list(vals)
    for k in range(1, levels):
        table = [
            (epss[i + k] * table[i] - epss[i] * table[i + 1]) / (epss[i + k] - epss[i])
            for i in range(levels - k)
        ]
    return table[0]


def _in_support(g: CauchyEvaluator, x, eps: float) -> np.ndarray:
    d1 = g.density(x, eps)
    d2 = g.density(x, 2 * eps)
    floor = EDGE_FLOOR * eps / math.pi
    return (d1 >= floor) & (d1 >= EDGE_RATIO * d2)


def support_edge(g: CauchyEvaluator, eps: float = DEFAULT_EPS, search=(0.0, 1.0), step: float | None = None) -> float:
    """Rightmost point of the support, located on a grid then refined by bisection.

    A point counts as inside the support when its smoothed density exceeds
    ``10 eps / pi`` and does not fall by more than a quarter when eps is
    halved; outside the support the smoothed density is linear in eps.
    """
    if not eps > 0:
        raise ValidationError("eps must be positive")
    lo, hi = (float(v) for v in search)
    if hi <= lo:
        raise ValidationError("support search range needs lo < hi")
    step = eps / 3 if step is None else float(step)
    xs = _grid((lo, hi, step))
    inside = _in_support(g, xs, eps)
    if not inside.any():
        raise ValidationError("no density above the detection floor in the search range")
    i = int(np.flatnonzero(inside)[-1])
    if i == xs.size - 1:
        return float(xs[i])
    a, b = xs[i], xs[i + 1]
    for _ in range(40):
        mid = 0.5 * (a + b)
        if _in_support(g, np.array([mid]), eps)[0]:
            a = mid
        else:
            b = mid
        if b - a <= 1e-6 * step:
            break
    return float(0.5 * (a + b))
