# rng.py - Seeded random streams for LosaTAL
# One root seed fans out into independent named streams so that adding a
# parameter to the head never shifts the backbone's initialization.

import zlib

import numpy as np

STREAMS = ("backbone", "adapters", "fusion", "head", "data", "train", "probe", "gradcheck")


def make_rng(seed, stream, *subkeys):
    # subkeys split a stream further (dataset split, ablation variant, ...)
    if stream not in STREAMS:
        raise ValueError(f"Unknown random stream '{stream}'")
    # crc32 keeps the stream key stable across interpreter runs (hash() is salted)
    key = zlib.crc32(stream.encode("utf-8"))
    entropy = [int(seed), key] + [int(k) for k in subkeys]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
