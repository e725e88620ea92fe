"""Seed-derived random streams.

Every random draw in the package comes from a stream addressed by
``(seed, stream, chunk)``.  Work is cut into fixed-size chunks, so the draws
do not depend on how many workers consume them.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

CHUNK = 1024

# stream identifiers
DATASET = 1
QUERIES = 2
MEDIAN = 3
WITNESS = 4
REFERENCE = 5
LIPSCHITZ = 6
POLE = 7


def generator(seed, *key):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(key))))


def chunk_sizes(count, chunk=CHUNK):
    full, rest = divmod(int(count), chunk)
    return [chunk] * full + ([rest] if rest else [])


def map_chunks(fn, items, workers=1):
    """Apply ``fn`` to each item, preserving order."""
    items = list(items)
    if workers is None or workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def derive(seed, *key):
    """A 63-bit integer seed derived from ``(seed, *key)``."""
    state = np.random.SeedSequence(int(seed), spawn_key=tuple(key)).generate_state(1, np.uint64)[0]
    return int(state >> np.uint64(1))
