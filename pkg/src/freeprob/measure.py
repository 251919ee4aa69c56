"""Atomic spectral measures and their moment sequences."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError

DEFAULT_ORDER = 32
MERGE_TOL = 1e-12
HANKEL_REL_TOL = 1e-9


@dataclass(frozen=True)
class SpectralMeasure:
    """Probability measure made of finitely many weighted atoms.

    Build instances with :func:`measure_from_atoms`, which sorts, merges and
    normalizes; the constructor itself trusts its input.
    """

    positions: tuple[float, ...]
    weights: tuple[float, ...]
    label: str = ""

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.positions, self.weights))

    @property
    def x(self) -> np.ndarray:
        return np.array(self.positions, dtype=float)

    @property
    def w(self) -> np.ndarray:
        return np.array(self.weights, dtype=float)

    @property
    def support_radius(self) -> float:
        return support_radius(self)

    @property
    def is_positive(self) -> bool:
        """True when every atom sits in [0, inf)."""
        return self.positions[0] >= 0.0

    def __len__(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class MomentSequence:
    """Moments m_1..m_K of a law; m_0 = 1 is implicit."""

    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) < 1:
            raise ValidationError("moment sequence needs order K >= 1")
        if not all(math.isfinite(v) for v in self.values):
            raise ValidationError("moment sequence has non-finite entries")

    @classmethod
    def from_values(cls, values: Iterable[float]) -> "MomentSequence":
        return cls(tuple(float(v) for v in values))

    @property
    def order(self) -> int:
        return len(self.values)

    def m(self, k: int) -> float:
        """The k-th moment, with m(0) = 1."""
        if k == 0:
            return 1.0
        return self.values[k - 1]

    @property
    def mean(self) -> float:
        return self.values[0]

    @property
    def variance(self) -> float:
        return mean_variance(self)[1]

    def array(self, with_zero: bool = False) -> np.ndarray:
        vals = np.array(self.values, dtype=float)
        if with_zero:
            return np.concatenate(([1.0], vals))
        return vals

    def truncate(self, K: int) -> "MomentSequence":
        if not 1 <= K <= self.order:
            raise ValidationError(f"cannot truncate order {self.order} sequence to {K}")
        return MomentSequence(self.values[:K])


def measure_from_atoms(
    positions: Sequence[float], weights: Sequence[float], label: str = ""
) -> SpectralMeasure:
    """Canonical measure from atom positions and (unnormalized) weights.

    Atoms are sorted by position, atoms closer than ``MERGE_TOL`` are merged
    by adding their weights, and the weights are rescaled to sum to one.
    """
    x = np.asarray(positions, dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    if x.size == 0:
        raise ValidationError("measure needs at least one atom")
    if x.size != w.size:
        raise ValidationError(
            f"positions and weights differ in length ({x.size} vs {w.size})"
        )
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w))):
        raise ValidationError("atom positions and weights must be finite")
    if np.any(w <= 0):
        raise ValidationError("atom weights must be strictly positive")

    order = np.argsort(x, kind="stable")
    x, w = x[order], w[order]
    merged_x, merged_w = [x[0]], [w[0]]
    for xi, wi in zip(x[1:], w[1:]):
        if xi - merged_x[-1] <= MERGE_TOL:
            merged_w[-1] += wi
        else:
            merged_x.append(xi)
            merged_w.append(wi)
    total = math.fsum(merged_w)
    return SpectralMeasure(
        positions=tuple(float(v) for v in merged_x),
        weights=tuple(float(v / total) for v in merged_w),
        label=label,
    )


def point_mass(at: float = 1.0, label: str = "") -> SpectralMeasure:
    return measure_from_atoms([at], [1.0], label=label or f"delta_{at:g}")


def moments(m: SpectralMeasure, K: int = DEFAULT_ORDER) -> MomentSequence:
    """Moments m_k = sum_a w_a x_a^k for k = 1..K."""
    if K < 1:
        raise ValidationError("moment order K must be >= 1")
    x, w = m.x, m.w
    powers = np.cumprod(np.broadcast_to(x, (K, x.size)), axis=0)
    return MomentSequence.from_values(powers @ w)


def mean_variance(ms: MomentSequence) -> tuple[float, float]:
    if ms.order < 2:
        raise ValidationError("variance needs at least two moments")
    m1, m2 = ms.values[0], ms.values[1]
    var = m2 - m1 * m1
    if -1e-12 <= var < 0:
        var = 0.0
    return m1, var


def support_radius(m: SpectralMeasure) -> float:
    return float(max(abs(m.positions[0]), abs(m.positions[-1])))


def hankel_psd_check(ms: MomentSequence) -> tuple[bool, float]:
    """Test the Hankel moment matrix H_ij = m_{i+j} for positive semidefiniteness.

    Returns ``(ok, smallest_eigenvalue)`` where ``ok`` allows eigenvalues down
    to ``-1e-9 * ||H||``.
    """
    if ms.order < 2:
        raise ValidationError("Hankel check needs K >= 2")
    full = ms.array(with_zero=True)
    r = np.arange(ms.order // 2 + 1)
    H = full[r[:, None] + r[None, :]]
    eig = np.linalg.eigvalsh(H)
    scale = np.max(np.abs(eig))
    lo = float(eig[0])
    return bool(lo >= -HANKEL_REL_TOL * scale), lo


def scale_measure(m: SpectralMeasure, c: float, label: str | None = None) -> SpectralMeasure:
    """Pushforward of ``m`` under x -> c x."""
    if c == 0 or not math.isfinite(c):
        raise ValidationError("scale factor must be finite and nonzero")
    return measure_from_atoms(
        [c * p for p in m.positions], m.weights, label=m.label if label is None else label
    )


def normalize_mean(m: SpectralMeasure) -> tuple[SpectralMeasure, float]:
    """Rescale ``m`` to mean one; returns the new measure and the factor s with X = s R."""
    mean = float(np.dot(m.x, m.w))
    if mean == 0:
        raise ValidationError("cannot normalize a zero-mean measure")
    return scale_measure(m, 1.0 / mean), mean


def marchenko_pastur(n_atoms: int = 2000, label: str = "marchenko-pastur") -> SpectralMeasure:
    """Gauss quadrature discretization of the free Poisson law of rate one.

    Nodes and weights come from the Golub-Welsch eigenproblem on the law's
    Jacobi matrix (diagonal 1, 2, 2, ...; off-diagonal 1), so the first
    ``2 * n_atoms - 1`` moments are the Catalan numbers up to rounding.
    """
    if n_atoms < 1:
        raise ValidationError("n_atoms must be >= 1")
    diag = np.full(n_atoms, 2.0)
    diag[0] = 1.0
    J = np.diag(diag) + np.diag(np.ones(n_atoms - 1), 1) + np.diag(np.ones(n_atoms - 1), -1)
    nodes, vecs = np.linalg.eigh(J)
    weights = vecs[0] ** 2
    nodes = np.clip(nodes, 0.0, None)
    return measure_from_atoms(nodes, weights, label=label)


_JSON_TOP = {"label", "atoms"}
_JSON_ATOM = {"x", "w"}


def measure_from_json(data: dict) -> SpectralMeasure:
    """Parse the measure JSON object ``{"label": ..., "atoms": [{"x": .., "w": ..}]}``."""
    if not isinstance(data, dict):
        raise ValidationError("measure JSON must be an object")
    extra = set(data) - _JSON_TOP
    if extra:
        raise ValidationError(f"unknown measure fields: {sorted(extra)}")
    if "atoms" not in data:
        raise ValidationError("measure JSON lacks 'atoms'")
    label = data.get("label", "")
    if not isinstance(label, str):
        raise ValidationError("'label' must be a string")
    atoms = data["atoms"]
    if not isinstance(atoms, list):
        raise ValidationError("'atoms' must be a list")
    xs, ws = [], []
    for i, atom in enumerate(atoms):
        if not isinstance(atom, dict):
            raise ValidationError(f"atom {i} must be an object")
        if set(atom) != _JSON_ATOM:
            raise ValidationError(f"atom {i} must have exactly the fields 'x' and 'w'")
        for key in ("x", "w"):
            if isinstance(atom[key], bool) or not isinstance(atom[key], (int, float)):
                raise ValidationError(f"atom {i} field '{key}' must be a number")
        xs.append(float(atom["x"]))
        ws.append(float(atom["w"]))
    return measure_from_atoms(xs, ws, label=label)


def measure_to_json(m: SpectralMeasure) -> dict:
    return {"label": m.label, "atoms": [{"x": x, "w": w} for x, w in m.atoms]}


def load_measure(path: str | Path) -> SpectralMeasure:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    return measure_from_json(data)


def save_measure(m: SpectralMeasure, path: str | Path) -> None:
    Path(path).write_text(json.dumps(measure_to_json(m), indent=2) + "\n")
