"""Deterministic derivation of independent random streams from one master seed."""

from __future__ import annotations

import numpy as np


def substream(seed: int, *key: int) -> np.random.Generator:
    """Generator identified by a master seed and an integer key path.

    The same (seed, key) always yields the same stream, and streams with
    different keys are statistically independent, so callers can hand out
    generators without coordinating.
    """
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(seq)


def node_streams(seed: int, n: int, namespace: tuple[int, ...] = ()) -> list[np.random.Generator]:
    """One independent generator per node.

    Stream i depends only on (seed, namespace, i), never on the order in
    which the streams are consumed; per-node sampling is therefore
    reproducible under any execution schedule or degree of parallelism.
    """
    return [substream(seed, *namespace, i) for i in range(n)]
