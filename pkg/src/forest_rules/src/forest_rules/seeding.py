"""Sub-seeding of random streams from a single run seed.

Every consumer of randomness derives its own ``numpy.random.Generator`` from
the run seed and a stream key, so results never depend on the order in which
workers are scheduled:

===============================  ==========================================
stream key                       consumer
===============================  ==========================================
``("folds",)``                   fold assignment in ``stratified_kfold``
``("tree", t)``                  bagging and feature draws of tree ``t``
``("fold-forest", f)``           forest seed for fold ``f`` of an experiment
``("random-trees",)``            tree permutation of the random-trees baseline
``("fold-random-trees", f)``     random-trees seed for fold ``f``
``("synthetic",)``               synthetic dataset points
===============================  ==========================================
"""

import zlib

import numpy as np

STREAM_FOLDS = "folds"
STREAM_TREE = "tree"
STREAM_FOLD_FOREST = "fold-forest"
STREAM_RANDOM_TREES = "random-trees"
STREAM_FOLD_RANDOM_TREES = "fold-random-trees"
STREAM_SYNTHETIC = "synthetic"


def _spawn_key(stream: str, indices: tuple[int, ...]) -> tuple[int, ...]:
    # crc32 is stable across interpreter runs, unlike hash()
    return (zlib.crc32(stream.encode("utf-8")), *indices)


def derive_seed_sequence(seed: int, stream: str, *indices: int) -> np.random.SeedSequence:
    """Seed sequence for ``stream`` (and optional indices) under ``seed``."""
    if seed < 0:
        raise ValueError(f"Seed must be non-negative, got {seed}")
    return np.random.SeedSequence(seed, spawn_key=_spawn_key(stream, indices))


def derive_rng(seed: int, stream: str, *indices: int) -> np.random.Generator:
    """Independent generator for one stream of a seeded run."""
    return np.random.default_rng(derive_seed_sequence(seed, stream, *indices))


def derive_seed(seed: int, stream: str, *indices: int) -> int:
    """Integer seed for a nested run (e.g. the forest of one fold)."""
    return int(derive_seed_sequence(seed, stream, *indices).generate_state(1, dtype=np.uint32)[0])
