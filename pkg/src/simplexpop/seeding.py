"""Counter-based random streams forked by stable labels."""

from __future__ import annotations

import zlib

import numpy as np


def _label_to_int(label) -> int:
    if isinstance(label, (int, np.integer)) and not isinstance(label, bool):
        if label < 0:
            raise ValueError("integer labels must be non-negative")
        return int(label)
    return zlib.crc32(str(label).encode("utf-8"))


def fork_rng(seed: int, *labels) -> np.random.Generator:
    """Independent Philox stream for ``(seed, *labels)``.

    The same labels always give the same stream, whatever else was drawn
    before, so work can be reordered or parallelised without changing results.
    """
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(_label_to_int(x) for x in labels))
    return np.random.Generator(np.random.Philox(seq))
