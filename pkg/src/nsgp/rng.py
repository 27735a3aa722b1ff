"""Named random substreams derived from a single integer seed."""

import zlib

import numpy as np


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for component ``name`` under ``seed``."""
    return np.random.default_rng([int(seed), zlib.crc32(name.encode())])
