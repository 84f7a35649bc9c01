import zlib
from typing import Union

import numpy as np

SeedKey = Union[int, str]


def _as_int(key: SeedKey) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    return int(key)


def derive_seed(master: int, *keys: SeedKey) -> int:
    """Mix a master seed with unit keys (cell index, combo name, ...) into an independent 64-bit seed."""
    seq = np.random.SeedSequence(int(master) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(_as_int(k) for k in keys))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)
