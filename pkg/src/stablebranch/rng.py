"""Reproducible random streams.

Every stream is a Philox (counter-based) generator keyed by a master seed and
a tuple of integer labels, so replications and sub-streams are independent of
execution order.
"""
import numpy as np

MOTION = 0
BRANCH = 1
PROBE = 2


def stream(seed, *labels):
    """Return a ``numpy.random.Generator`` for ``(seed, *labels)``."""
    key = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(v) for v in labels]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def replication_streams(seed, rep):
    """Motion and branching streams for replication ``rep``."""
    return stream(seed, rep, MOTION), stream(seed, rep, BRANCH)
