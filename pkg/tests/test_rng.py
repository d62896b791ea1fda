import numpy as np

from halftonelab.rng import Stream, derive_seed


def test_uniform_deterministic():
    a = Stream(42).uniform(1000)
    b = Stream(42).uniform(1000)
    assert np.array_equal(a, b)


def test_uniform_range_open_closed():
    u = Stream(3).uniform(100000)
    assert u.min() > 0.0
    assert u.max() <= 1.0


def test_normal_moments():
    z = Stream(7).normal(200000)
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1.0) < 0.01


def test_streams_continue_counter():
    s = Stream(5)
    first = s.uniform(10)
    second = s.uniform(10)
    combined = Stream(5).uniform(20)
    assert np.array_equal(np.concatenate([first, second]), combined)


def test_derive_seed_order_sensitive():
    assert derive_seed(1, 2) != derive_seed(2, 1)
    assert derive_seed(0) != derive_seed(0, 0)


def test_split_independent():
    s = Stream(9)
    a = s.split(0).uniform(50)
    b = s.split(1).uniform(50)
    assert not np.array_equal(a, b)


def test_integers_bounds():
    v = Stream(1).integers(10000, 7)
    assert v.min() >= 0 and v.max() <= 6
    assert set(np.unique(v)) == set(range(7))


def test_permutation_valid():
    p = Stream(4).permutation(257)
    assert np.array_equal(np.sort(p), np.arange(257))
