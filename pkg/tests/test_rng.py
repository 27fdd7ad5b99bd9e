import numpy as np

from stablebranch import rng as rngmod


def test_streams_are_keyed():
    a = rngmod.stream(1, 2, 3).random(5)
    assert np.array_equal(a, rngmod.stream(1, 2, 3).random(5))
    assert not np.array_equal(a, rngmod.stream(1, 3, 2).random(5))
    m, b = rngmod.replication_streams(1, 0)
    assert not np.array_equal(m.random(3), b.random(3))


def test_large_seeds_accepted():
    rngmod.stream(2**64 - 1, 0).random()
