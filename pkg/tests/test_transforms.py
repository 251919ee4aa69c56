import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freeprob.errors import UndefinedTransform, ValidationError
from freeprob.freeconv import free_power
from freeprob.measure import MomentSequence, measure_from_atoms, moments
from freeprob.series import TruncatedSeries
from freeprob.transforms import (
    cauchy_evaluator,
    extrapolated_density,
    free_power_evaluator,
    moments_from_s,
    psi_from_moments,
    s_transform,
    stieltjes_invert,
    support_edge,
)
from oracles import bernoulli_power_edge, catalan, mp_density

positive_atoms = st.lists(
    st.tuples(st.floats(0.0, 2.0), st.floats(0.05, 1.0)), min_size=1, max_size=6
).filter(lambda a: sum(x * w for x, w in a) > 0.05 * sum(w for _, w in a))


def test_psi_coefficients(bernoulli, delta1):
    assert psi_from_moments(moments(delta1, 5)).coeffs.tolist() == [0, 1, 1, 1, 1, 1]
    assert psi_from_moments(moments(bernoulli, 4)).coeffs.tolist() == [0, 1, 2, 4, 8]
    zero = MomentSequence.from_values([0.0, 0.0, 0.0])
    assert psi_from_moments(zero).coeffs.tolist() == [0, 0, 0, 0]


def test_s_transform_examples(bernoulli, delta1):
    s = s_transform(moments(delta1, 16))
    assert s[0] == 1 and np.max(np.abs(s.coeffs[1:])) < 1e-12
    s = s_transform(moments(bernoulli, 4))
    np.testing.assert_allclose(s.coeffs, [1, -1, 2, -4], atol=1e-12)


@given(positive_atoms)
def test_s_low_order_coefficients(atoms):
    xs, ws = zip(*atoms)
    m = measure_from_atoms(xs, ws)
    m = measure_from_atoms([x / np.dot(m.x, m.w) for x in m.positions], m.weights)
    m2, m3 = moments(m, 3).values[1:]
    s = s_transform(moments(m, 3))
    assert s[0] == pytest.approx(1, abs=1e-12)
    assert s[1] == pytest.approx(1 - m2, abs=1e-10 * max(1, m2))
    assert s[2] == pytest.approx(2 * m2**2 - m2 - m3, abs=1e-9 * max(1, m3, m2**2))


def test_s_requires_nonzero_mean():
    ms = moments(measure_from_atoms([-1.0, 1.0], [0.5, 0.5]), 4)
    with pytest.raises(UndefinedTransform, match=r"E\(X\) = 0"):
        s_transform(ms)


def test_moments_from_s_examples():
    assert moments_from_s(TruncatedSeries([1.0] + [0.0] * 7)).values == (1.0,) * 8
    cat = moments_from_s(TruncatedSeries([1, -1, 1, -1]))
    np.testing.assert_allclose(cat.values, [catalan(k) for k in range(1, 5)], atol=1e-12)
    bern = moments_from_s(TruncatedSeries([1, -1, 2, -4]))
    np.testing.assert_allclose(bern.values, [1, 2, 4, 8], atol=1e-12)
    with pytest.raises(UndefinedTransform):
        moments_from_s(TruncatedSeries([0, 1]))
    with pytest.raises(ValidationError):
        moments_from_s(TruncatedSeries([1, 1]), K=5)


@settings(max_examples=60)
@given(positive_atoms, st.integers(2, 16))
def test_round_trip(atoms, K):
    xs, ws = zip(*atoms)
    ms = moments(measure_from_atoms(xs, ws), K)
    back = moments_from_s(s_transform(ms))
    ref = np.array(ms.values)
    assert np.all(np.abs(np.array(back.values) - ref) <= 1e-9 * np.maximum(1, np.abs(ref)))


def test_cauchy_atoms(bernoulli, delta1):
    assert cauchy_evaluator(delta1)(2.0) == pytest.approx(1.0)
    assert cauchy_evaluator(bernoulli)(4.0) == pytest.approx(0.375)


def test_cauchy_moment_mode(bernoulli):
    exact = cauchy_evaluator(bernoulli)
    tail = cauchy_evaluator(moments(bernoulli, 64), support_hint=2.0)
    assert tail.threshold == pytest.approx(2.2)
    z = np.array([10.0, 10j, 3.0 + 1.0j, -4.0])
    np.testing.assert_allclose(tail(z), exact(z), atol=1e-9)
    with pytest.raises(ValidationError):
        tail(2.0)
    with pytest.raises(ValidationError):
        cauchy_evaluator(moments(bernoulli, 8))


@given(positive_atoms, st.floats(-5, 5), st.floats(1e-3, 5))
def test_nevanlinna_property(atoms, re, im):
    xs, ws = zip(*atoms)
    g = cauchy_evaluator(measure_from_atoms(xs, ws))
    assert g(complex(re, im)).imag < 0


def test_moment_mode_agrees_on_a_circle(bernoulli):
    # |z| = 1.5 L needs about 64 terms of the Laurent tail for 1e-9
    z = 3.0 * np.exp(1j * np.linspace(0, 2 * np.pi, 33))
    tail = cauchy_evaluator(moments(bernoulli, 64), support_hint=2.0)
    np.testing.assert_allclose(tail(z), cauchy_evaluator(bernoulli)(z), atol=1e-9)


@pytest.mark.parametrize("n", [2, 3, 5])
def test_free_power_evaluator_matches_moments(bernoulli, n):
    ms = free_power(moments(bernoulli, 64), n).moments
    R = 2.0**n
    tail = cauchy_evaluator(ms, support_hint=R)
    g = free_power_evaluator(bernoulli, n)
    z = np.array([2000.0, 2000j, 1500 + 900j])
    np.testing.assert_allclose(g(z), tail(z), rtol=1e-10)


def test_free_power_evaluator_nevanlinna(bernoulli):
    g = free_power_evaluator(bernoulli, 3)
    z = np.linspace(-2, 10, 25) + 0.05j
    assert np.all(g(z).imag < 0)


def test_free_power_evaluator_preconditions(bernoulli):
    with pytest.raises(ValidationError):
        free_power_evaluator(measure_from_atoms([-1.0, 2.0], [0.5, 0.5]), 2)
    with pytest.raises(UndefinedTransform):
        free_power_evaluator(measure_from_atoms([0.0], [1.0]), 2)
    with pytest.raises(ValidationError):
        free_power_evaluator(bernoulli, 2)(50.0)  # real point inside the support bound


@pytest.mark.parametrize("eps", [0.05, 0.01])
def test_total_mass(bernoulli, eps):
    # mass outside [-A, A] of a Cauchy kernel of width eps is about 2 eps / (pi A)
    A = 50.0
    x, d = stieltjes_invert(cauchy_evaluator(bernoulli), (-A, A + 2, eps / 4), eps)
    assert np.trapezoid(d, x) == pytest.approx(1.0, abs=2.0 * eps / (math.pi * (A - 2)))


def test_density_nonnegative(mp):
    x, d = stieltjes_invert(cauchy_evaluator(mp), (-1, 5, 0.05), 0.01)
    assert np.all(d >= 0)


def test_grid_validation(bernoulli):
    g = cauchy_evaluator(bernoulli)
    for bad in [(1, 0, 0.1), (0, 1, 0), (0, math.inf, 0.1)]:
        with pytest.raises(ValidationError):
            stieltjes_invert(g, bad, 0.01)
    with pytest.raises(ValidationError):
        stieltjes_invert(g, (0, 1, 0.1), 0.0)


def test_bernoulli_density_peaks(bernoulli):
    x, d = stieltjes_invert(cauchy_evaluator(bernoulli), (-0.5, 2.5, 0.01), 1e-2)
    peaks = x[np.argsort(d)[-2:]]
    assert sorted(np.round(peaks, 6)) == [0.0, 2.0]


def test_marchenko_pastur_density(mp):
    g = cauchy_evaluator(mp)
    x = np.array([0.5, 1.0, 2.0, 3.0])
    d = extrapolated_density(g, x, 0.02, levels=3)
    np.testing.assert_allclose(d, mp_density(x), rtol=0.01)
    assert d[1] == pytest.approx(math.sqrt(3) / (2 * math.pi), rel=1e-3)


def test_support_edges(bernoulli, mp):
    assert support_edge(cauchy_evaluator(bernoulli), search=(0, 3)) == pytest.approx(2.0, abs=0.05)
    assert support_edge(cauchy_evaluator(mp), eps=1e-3, search=(0, 6)) == pytest.approx(4.0, abs=0.05)
    assert support_edge(free_power_evaluator(bernoulli, 2), search=(0, 6)) == pytest.approx(
        bernoulli_power_edge(2), abs=0.05
    )


def test_support_edge_of_fourfold_power(bernoulli):
    edge = support_edge(free_power_evaluator(bernoulli, 4), eps=1e-3, search=(8, 12))
    assert edge == pytest.approx(bernoulli_power_edge(4), abs=0.1)
    assert edge <= 816


def test_support_edge_requires_support(bernoulli):
    with pytest.raises(ValidationError):
        support_edge(cauchy_evaluator(bernoulli), search=(5, 6))


def test_round_trip_at_order_32(bernoulli, mp):
    for m in (bernoulli, mp, measure_from_atoms([0.3, 1.1, 1.9], [0.2, 0.5, 0.3])):
        ms = moments(m, 32)
        back = np.array(moments_from_s(s_transform(ms)).values)
        assert np.max(np.abs(back - ms.values) / np.abs(ms.values)) <= 1e-9
