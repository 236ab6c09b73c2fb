import numpy as np
import pytest

from asyscd import rng


def test_uniform_is_counter_based():
    full = rng.uniform(7, rng.COORDINATES, 10)
    np.testing.assert_array_equal(full[5:], rng.uniform(7, rng.COORDINATES, 5, offset=5))
    assert np.all((full > 0.0) & (full < 1.0))


def test_streams_and_seeds_differ():
    a = rng.uniform(1, rng.COORDINATES, 100)
    assert not np.array_equal(a, rng.uniform(1, rng.DELAYS, 100))
    assert not np.array_equal(a, rng.uniform(2, rng.COORDINATES, 100))


def test_integers_range_and_coverage():
    draws = rng.integers(3, rng.COORDINATES, np.arange(20_000, dtype=np.uint64), 7)
    assert draws.min() == 0 and draws.max() == 6
    counts = np.bincount(draws, minlength=7)
    assert np.all(np.abs(counts / 20_000 - 1 / 7) < 0.02)


def test_integers_rejects_empty_range():
    with pytest.raises(ValueError):
        rng.integers(0, rng.COORDINATES, [0], 0)


def test_standard_normal_moments():
    z = rng.standard_normal(5, rng.MATRIX, 40_001)
    assert z.shape == (40_001,)
    assert abs(z.mean()) < 0.03
    assert abs(z.var() - 1.0) < 0.03


def test_permutation():
    perm = rng.permutation(2, rng.SHUFFLE, 50, round_index=3)
    assert sorted(perm.tolist()) == list(range(50))
    assert not np.array_equal(perm, rng.permutation(2, rng.SHUFFLE, 50, round_index=4))
