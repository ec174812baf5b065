"""Named, independent random streams derived from one 64-bit seed."""

import zlib

import numpy as np

STREAMS = ("init", "masking", "training", "synth", "split")


def stream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Generator for stream ``name`` (plus optional integer sub-keys) under ``seed``.

    The stream name is hashed with CRC32, which is stable across processes
    and platforms (unlike ``hash``).
    """
    key = (zlib.crc32(name.encode("utf-8")),) + tuple(int(e) for e in extra)
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=key)
    return np.random.default_rng(ss)
