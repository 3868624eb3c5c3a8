"""Reproducible random streams.

Every random draw in pcsim comes from a Philox generator (counter-based,
64-bit keys). Seeds for independent streams are split off a master seed with
numpy's SeedSequence, using the path of integers that names the stream, e.g.
derive_seed(master, point_index, NOISE). The same (master, path) always gives
the same stream, whichever worker runs it.
"""
import numpy as np

SYMBOLS = 0
NOISE = 1
BOOTSTRAP = 2
CALIBRATION = 3

_SEED_MASK = (1 << 64) - 1


def derive_seed(master: int, *path: int) -> int:
    """Split a 64-bit child seed off ``master`` along ``path``."""
    if master < 0:
        raise ValueError(f"seed must be non-negative, got {master}")
    seq = np.random.SeedSequence(entropy=int(master) & _SEED_MASK, spawn_key=tuple(int(p) for p in path))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    """Fresh Philox generator for ``seed``."""
    return np.random.Generator(np.random.Philox(int(seed) & _SEED_MASK))
