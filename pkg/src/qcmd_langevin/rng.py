"""Counter-based random streams.

Every trajectory owns a Philox generator keyed by ``(seed, stream)``. Draws
depend only on that pair, so an ensemble gives the same numbers whatever the
batch layout or worker count.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def stream_rng(seed, stream=0):
    """Return a ``numpy.random.Generator`` for the ``(seed, stream)`` pair."""
    seed = int(seed)
    stream = int(stream)
    if not (0 <= seed <= _MASK64 and 0 <= stream <= _MASK64):
        raise ValueError("seed and stream must be unsigned 64-bit integers")
    return np.random.Generator(np.random.Philox(key=(seed << 64) | stream))


def stream_rngs(seed, streams):
    return [stream_rng(seed, s) for s in streams]
