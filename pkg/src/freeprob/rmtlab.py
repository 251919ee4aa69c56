"""Random-matrix Monte Carlo harness.

Free variables are modelled by independent Haar-orthogonal conjugations
Q D Q^T of a fixed spectrum D that reproduces the target law by a
proportional fill; Gaussian products use iid N(0, s^2/N) entries.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from .errors import NonConvergence, NumericalBreakdown, ValidationError
from .measure import SpectralMeasure, measure_to_json

MODES = ("product", "symmetric", "cyclic", "ginibre")
NORM_METHODS = ("dense", "power")
PSD_TOL = 1e-9


# -- building blocks ------------------------------------------------------------


def haar_orthogonal(N: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix: QR of a Gaussian matrix with sign-fixed R."""
    Z = rng.standard_normal((N, N))
    Q, R = np.linalg.qr(Z)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def proportional_fill(m: SpectralMeasure, N: int) -> np.ndarray:
    """N eigenvalues reproducing ``m``: floor(w N) copies per atom, the rest by weight."""
    w = m.w
    counts = np.floor(w * N).astype(int)
    remainder = N - counts.sum()
    order = np.argsort(-w, kind="stable")
    counts[order[:remainder]] += 1
    return np.repeat(m.x, counts)


def _factor_parts(m: SpectralMeasure, N: int, rng: np.random.Generator):
    if len(m) == 1:
        # a point mass gives a multiple of the identity; skip the rounding of Q D Q^T
        return np.eye(N), proportional_fill(m, N)
    return haar_orthogonal(N, rng), proportional_fill(m, N)


def sample_free_factor(m: SpectralMeasure, N: int, rng: np.random.Generator) -> np.ndarray:
    """Q D Q^T with D the proportional fill of ``m`` and Q Haar-orthogonal."""
    if N < 2:
        raise ValidationError("matrix dimension must be >= 2")
    Q, d = _factor_parts(m, N, rng)
    return (Q * d) @ Q.T


@lru_cache(maxsize=8)
def _start_vector(n: int) -> np.ndarray:
    v = np.random.default_rng(20250101).standard_normal(n)
    v /= np.linalg.norm(v)
    v.setflags(write=False)
    return v


def operator_norm(M: np.ndarray, tol: float = 1e-10, max_iter: int = 1000, method: str = "power") -> float:
    """Largest singular value of ``M``.

    ``method="power"`` runs power iteration on M^T M from a fixed start
    vector and stops when the Rayleigh quotient changes by less than ``tol``
    relative; it raises :class:`NonConvergence` after ``max_iter`` steps.
    ``method="dense"`` takes the top eigenvalue of a symmetric eigensolver.
    """
    M = np.asarray(M)
    if M.ndim != 2:
        raise ValidationError("operator norm needs a matrix")
    if not np.all(np.isfinite(M)):
        raise ValidationError("matrix has non-finite entries")
    if method == "dense":
        if M.shape[0] == M.shape[1] and np.array_equal(M, M.T):
            return float(np.max(np.abs(np.linalg.eigvalsh(M))))
        return float(math.sqrt(max(np.linalg.eigvalsh(M.T @ M)[-1], 0.0)))
    if method != "power":
        raise ValidationError(f"unknown norm method {method!r}")

    v = _start_vector(M.shape[1]).copy()
    v_prev = v
    rho = 0.0
    for _ in range(max_iter):
        Mv = M @ v
        new = float(Mv @ Mv)
        if new == 0.0:
            return 0.0
        w = M.T @ Mv
        v_prev, v = v, w / np.linalg.norm(w)
        if abs(new - rho) <= tol * new:
            return math.sqrt(new)
        rho = new
    # Ritz values of M^T M on the last two iterates give the gap estimate
    V, _ = np.linalg.qr(np.column_stack([v_prev, v]))
    MV = M @ V
    ritz = np.linalg.eigvalsh(MV.T @ MV)
    gap = 1.0 - ritz[0] / ritz[1] if ritz[1] > 0 else float("nan")
    raise NonConvergence(
        f"power iteration did not converge in {max_iter} iterations "
        f"(estimate {math.sqrt(rho):.12g}, relative gap ~ {gap:.2e})",
        estimate=math.sqrt(rho),
        gap=gap,
        iterations=max_iter,
    )


# -- configuration and results ----------------------------------------------------


@dataclass(frozen=True)
class SimulationConfig:
    mode: str
    dim: int
    steps: int
    trials: int
    seed: int
    measure: SpectralMeasure | None = None
    ginibre_s: float | None = None
    norm_method: str = "dense"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}")
        if self.norm_method not in NORM_METHODS:
            raise ValidationError(f"norm method must be one of {NORM_METHODS}")
        min_dim = 1 if self.mode == "ginibre" else 2
        if self.dim < min_dim:
            raise ValidationError(f"dimension must be >= {min_dim} in {self.mode} mode")
        if self.steps < 1 or self.trials < 1:
            raise ValidationError("steps and trials must be >= 1")
        if self.seed < 0:
            raise ValidationError("seed must be nonnegative")
        if self.mode == "ginibre":
            if self.ginibre_s is None or not self.ginibre_s > 0:
                raise ValidationError("ginibre mode needs a positive scale s")
        else:
            if self.measure is None:
                raise ValidationError(f"{self.mode} mode needs a base measure")
            if self.mode == "symmetric" and not self.measure.is_positive:
                raise ValidationError("symmetric products need a measure on [0, inf)")

    def echo(self) -> dict:
        out = asdict(self)
        out["measure"] = None if self.measure is None else measure_to_json(self.measure)
        return out

    def trial_seed(self, trial: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.seed, spawn_key=(trial,))


@dataclass(frozen=True)
class TrialResult:
    """Per-step measurements of one trial; arrays are indexed by step n - 1."""

    trial: int
    n: np.ndarray
    log_op_norm: np.ndarray
    trace_gram: np.ndarray
    cyclic_norm: np.ndarray | None
    wall_time: float
    dim: int
    config: SimulationConfig = field(repr=False)

    @property
    def op_norm(self) -> np.ndarray:
        return np.exp(self.log_op_norm)

    @property
    def seed(self) -> tuple[int, int]:
        return (self.config.seed, self.trial)

    def records(self):
        for i, n in enumerate(self.n):
            rec = {
                "n": int(n),
                "op_norm": float(self.op_norm[i]),
                "log_op_norm": float(self.log_op_norm[i]),
                "trace_gram": float(self.trace_gram[i]),
            }
            if self.cyclic_norm is not None:
                rec["cyclic_norm"] = float(self.cyclic_norm[i])
            yield rec


class SimulationBreakdown(NumericalBreakdown):
    """A trial broke down numerically; ``partial`` holds the trials that finished."""

    def __init__(self, message, partial, failed_trial):
        super().__init__(message)
        self.partial = partial
        self.failed_trial = failed_trial


# -- trials -----------------------------------------------------------------


class _Scaled:
    """Running matrix product kept at unit norm, with its log scale tracked apart."""

    def __init__(self, N):
        self.P = np.eye(N)
        self.log_scale = 0.0
        self.zero = False

    def absorb(self, X, norm_method):
        self.P = X @ self.P
        if self.zero:
            return -math.inf, 0.0
        s = operator_norm(self.P, method=norm_method)
        if s == 0.0:
            self.zero = True
            return -math.inf, 0.0
        self.P /= s
        self.log_scale += math.log(s)
        N = self.P.shape[0]
        frob = float(np.sum(self.P * self.P)) / N
        return self.log_scale, math.exp(2 * self.log_scale) * frob


def run_trial(cfg: SimulationConfig, trial: int) -> TrialResult:
    """One independent realization of the configured product, step by step."""
    if cfg.mode == "ginibre":
        return run_ginibre_trial(cfg, trial)
    start = time.perf_counter()
    rng = np.random.default_rng(cfg.trial_seed(trial))
    N = cfg.dim
    logs = np.empty(cfg.steps)
    traces = np.empty(cfg.steps)
    cyclic = None

    if cfg.mode == "symmetric":
        Y = None
        for i in range(cfg.steps):
            Q, d = _factor_parts(cfg.measure, N, rng)
            if Y is None:
                Y = (Q * d) @ Q.T
            else:
                S = (Q * np.sqrt(d)) @ Q.T
                Y = S @ Y @ S
            Y = 0.5 * (Y + Y.T)
            eig = np.linalg.eigvalsh(Y)
            top = max(abs(eig[0]), abs(eig[-1]))
            if eig[0] < -PSD_TOL * top:
                raise NumericalBreakdown(
                    f"symmetric product lost positivity at step {i + 1} "
                    f"(min eigenvalue {eig[0]:.3e})"
                )
            norm = top if cfg.norm_method == "dense" else operator_norm(Y, method="power")
            logs[i] = math.log(norm) if norm > 0 else -math.inf
            traces[i] = float(np.sum(Y * Y)) / N
    else:
        if cfg.mode == "cyclic":
            xi = rng.standard_normal(N)
            xi /= np.linalg.norm(xi)
            v, log_v = xi, 0.0
            cyclic = np.empty(cfg.steps)
        prod = _Scaled(N)
        for i in range(cfg.steps):
            X = sample_free_factor(cfg.measure, N, rng)
            logs[i], traces[i] = prod.absorb(X, cfg.norm_method)
            if cyclic is not None:
                v = X @ v
                nv = float(np.linalg.norm(v))
                if nv > 0:
                    v /= nv
                    log_v += math.log(nv)
                    cyclic[i] = math.exp(log_v)
                else:
                    log_v = -math.inf
                    cyclic[i] = 0.0
    return TrialResult(
        trial=trial,
        n=np.arange(1, cfg.steps + 1),
        log_op_norm=logs,
        trace_gram=traces,
        cyclic_norm=cyclic,
        wall_time=time.perf_counter() - start,
        dim=N,
        config=cfg,
    )


def run_ginibre_trial(cfg: SimulationConfig, trial: int) -> TrialResult:
    """Products of iid Gaussian matrices with entry variance s^2 / N."""
    if cfg.mode != "ginibre":
        raise ValidationError("run_ginibre_trial needs mode 'ginibre'")
    start = time.perf_counter()
    rng = np.random.default_rng(cfg.trial_seed(trial))
    N = cfg.dim
    scale = cfg.ginibre_s / math.sqrt(N)
    logs = np.empty(cfg.steps)
    traces = np.empty(cfg.steps)
    prod = _Scaled(N)
    for i in range(cfg.steps):
        X = scale * rng.standard_normal((N, N))
        logs[i], traces[i] = prod.absorb(X, cfg.norm_method)
    return TrialResult(
        trial=trial,
        n=np.arange(1, cfg.steps + 1),
        log_op_norm=logs,
        trace_gram=traces,
        cyclic_norm=None,
        wall_time=time.perf_counter() - start,
        dim=N,
        config=cfg,
    )


def default_threads() -> int:
    env = os.environ.get("FREEPROB_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ValidationError("FREEPROB_THREADS must be a positive integer") from None
        if value < 1:
            raise ValidationError("FREEPROB_THREADS must be a positive integer")
        return value
    return os.cpu_count() or 1


def run_trials(cfg: SimulationConfig, threads: int | None = None) -> list[TrialResult]:
    """Run every trial of ``cfg``; results come back ordered by trial index.

    On a numerical breakdown the finished trials are attached to the raised
    :class:`SimulationBreakdown`.
    """
    threads = default_threads() if threads is None else threads
    indices = range(cfg.trials)
    results: dict[int, TrialResult] = {}
    failure = None

    def attempt(t):
        try:
            return t, run_trial(cfg, t), None
        except NumericalBreakdown as exc:
            return t, None, exc

    if threads <= 1 or cfg.trials == 1:
        outcomes = map(attempt, indices)
    else:
        pool = ThreadPoolExecutor(max_workers=threads)
        outcomes = pool.map(attempt, indices)
    for t, res, exc in outcomes:
        if exc is not None:
            if failure is None or t < failure[0]:
                failure = (t, exc)
        else:
            results[t] = res
    if threads > 1 and cfg.trials > 1:
        pool.shutdown()
    ordered = [results[t] for t in sorted(results)]
    if failure is not None:
        raise SimulationBreakdown(
            f"trial {failure[0]} broke down: {failure[1]}", partial=ordered, failed_trial=failure[0]
        ) from failure[1]
    return ordered


# -- reductions ---------------------------------------------------------------


@dataclass(frozen=True)
class Summary:
    n: np.ndarray
    trials: int
    log_op_norm: dict[str, np.ndarray]
    trace_gram: dict[str, np.ndarray]
    cyclic_norm: dict[str, np.ndarray] | None

    def to_json(self) -> dict:
        def conv(stats):
            return None if stats is None else {k: v.tolist() for k, v in stats.items()}

        return {
            "n": self.n.tolist(),
            "trials": self.trials,
            "log_op_norm": conv(self.log_op_norm),
            "trace_gram": conv(self.trace_gram),
            "cyclic_norm": conv(self.cyclic_norm),
        }


def _stats(stack: np.ndarray) -> dict[str, np.ndarray]:
    return {
        "mean": stack.mean(axis=0),
        "std": stack.std(axis=0),
        "min": stack.min(axis=0),
        "max": stack.max(axis=0),
    }


def aggregate(trials: list[TrialResult]) -> Summary:
    """Per-step statistics across trials, reduced in trial-index order."""
    if not trials:
        raise ValidationError("nothing to aggregate")
    cfg = trials[0].config
    if any(t.config != cfg for t in trials):
        raise ValidationError("cannot aggregate trials from different configurations")
    ordered = sorted(trials, key=lambda t: t.trial)
    cyc = None
    if ordered[0].cyclic_norm is not None:
        cyc = _stats(np.stack([t.cyclic_norm for t in ordered]))
    return Summary(
        n=ordered[0].n.copy(),
        trials=len(ordered),
        log_op_norm=_stats(np.stack([t.log_op_norm for t in ordered])),
        trace_gram=_stats(np.stack([t.trace_gram for t in ordered])),
        cyclic_norm=cyc,
    )


def growth_estimate(summary: Summary, n_lo: int | None = None, n_hi: int | None = None) -> float:
    """Least-squares slope of the mean log-norm against n over [n_lo, n_hi].

    Defaults to the last two thirds of the run; with a single step the
    estimate falls back to log-norm / n.
    """
    n = summary.n
    n_hi = int(n[-1]) if n_hi is None else n_hi
    n_lo = max(1, n_hi // 3) if n_lo is None else n_lo
    sel = (n >= n_lo) & (n <= n_hi)
    y = summary.log_op_norm["mean"][sel]
    if sel.sum() < 1:
        raise ValidationError("empty range for the growth estimate")
    if sel.sum() == 1:
        return float(y[0] / n[sel][0])
    slope, _ = np.polyfit(n[sel].astype(float), y, 1)
    return float(slope)


def product_trace_moments(
    a: SpectralMeasure, b: SpectralMeasure, N: int, kmax: int, trials: int, seed: int
) -> np.ndarray:
    """Trial-averaged N^-1 tr((M_a M_b)^k), k = 1..kmax, for independent conjugations."""
    acc = np.zeros(kmax)
    for t in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(t,)))
        P = sample_free_factor(a, N, rng) @ sample_free_factor(b, N, rng)
        Pk = np.eye(N)
        for k in range(kmax):
            Pk = Pk @ P
            acc[k] += np.trace(Pk) / N
    return acc / trials
