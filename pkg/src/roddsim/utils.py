## Copyright © 2023, Alex J. Champandard.  Licensed under MIT; see LICENSE! ⚘

import enum
import concurrent.futures

import numpy as np
from tqdm import tqdm


__all__ = [
    "Stream",
    "derive_rng",
    "derive_seed",
    "parallel_map",
]


class Stream(enum.IntEnum):
    """
    Tags that keep the random streams of one seed independent of each other.
    """

    NETWORK = 1
    CODEBOOK = 2
    MESSAGES = 3
    FRAME = 4
    ACCESS = 5
    RECEIVERS = 6


def derive_rng(seed: int, stream: Stream, *keys: int) -> np.random.Generator:
    """
    Seeded generator for one stream, optionally specialized by extra integer
    keys such as a node id or a receiver id.
    """
    return np.random.default_rng([int(stream), int(seed), *(int(k) for k in keys)])


def derive_seed(base: int, index: int) -> int:
    return int(base) ^ int(index)


def parallel_map(fn, items, workers: int = 1, progress: bool = False, desc: str = None) -> list:
    """
    Apply a picklable function to every item, in a pool of processes when
    more than one worker is requested.  Results are returned in input order.
    """
    items = list(items)
    bar = tqdm(total=len(items), desc=desc, disable=not progress)

    if workers <= 1 or len(items) <= 1:
        results = []
        for item in items:
            results.append(fn(item))
            bar.update(1)
        bar.close()
        return results

    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as executor:
        results = []
        for result in executor.map(fn, items):
            results.append(result)
            bar.update(1)
    bar.close()
    return results
