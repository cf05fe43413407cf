from __future__ import annotations

import numpy as np
import pytest

from vrag.errors import AlphaOutOfRange, DimMismatch, EmptyInput, ZeroVector
from vrag.vecmath import cosine, interpolate_ensemble, l2_normalize, mean_pool


def test_l2_normalize_unit_norm():
    v = l2_normalize(np.array([3.0, 4.0]))
    assert np.allclose(v, [0.6, 0.8])
    assert abs(np.linalg.norm(v) - 1.0) < 1e-12


def test_l2_normalize_rejects_zero():
    with pytest.raises(ZeroVector):
        l2_normalize(np.zeros(4))


def test_cosine_known_value():
    # (1,2,3) vs (4,5,6), computed with 50-digit decimal arithmetic.
    got = cosine(np.array([1.0, 2.0, 3.0]), np.array([4.0, 5.0, 6.0]))
    assert abs(got - 0.9746318461970763) < 1e-12


def test_cosine_bounds_and_symmetry():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, b = rng.standard_normal(8), rng.standard_normal(8)
        c = cosine(a, b)
        assert -1.0 <= c <= 1.0
        assert abs(c - cosine(b, a)) < 1e-12
    assert cosine(np.ones(3), np.ones(3)) == 1.0
    assert cosine(np.ones(3), -np.ones(3)) == -1.0


def test_cosine_errors():
    with pytest.raises(DimMismatch):
        cosine(np.ones(3), np.ones(4))
    with pytest.raises(ZeroVector):
        cosine(np.zeros(3), np.ones(3))


def test_mean_pool():
    rows = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    assert np.allclose(mean_pool(rows), [3.0, 4.0])
    with pytest.raises(EmptyInput):
        mean_pool(np.empty((0, 2)))


def test_interpolate_known_value():
    # alpha=0.7 between the two basis vectors; expected is normalize([0.7, 0.3])
    # computed with 50-digit Decimal arithmetic.
    t = np.array([1.0, 0.0])
    v = np.array([0.0, 1.0])
    got = interpolate_ensemble(t, v, 0.7)
    assert np.allclose(got, [0.9191450300180579, 0.3939192985791677], atol=1e-12)
    assert abs(np.linalg.norm(got) - 1.0) < 1e-12


def test_interpolate_endpoints():
    t = l2_normalize(np.array([1.0, 0.0, 0.0]))
    v = l2_normalize(np.array([0.0, 1.0, 0.0]))
    assert np.allclose(interpolate_ensemble(t, v, 1.0), t)
    assert np.allclose(interpolate_ensemble(t, v, 0.0), v)


def test_interpolate_alpha_range():
    t = l2_normalize(np.ones(3))
    for bad in (-0.1, 1.1, 2.0):
        with pytest.raises(AlphaOutOfRange):
            interpolate_ensemble(t, t, bad)


def test_interpolate_requires_unit_inputs():
    with pytest.raises(ZeroVector):
        interpolate_ensemble(np.array([2.0, 0.0]), np.array([0.0, 1.0]), 0.5)
