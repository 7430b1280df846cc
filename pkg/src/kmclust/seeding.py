"""Labeled seed derivation.

Every random draw in the package comes from one master seed plus a tuple of
labels, so a sub-component (one MIS call, one sketch repetition, one p-median
probe) can be replayed on its own.
"""
from __future__ import annotations

import zlib

import numpy as np


def _label_words(labels) -> list[int]:
    words = []
    for label in labels:
        if isinstance(label, (int, np.integer)):
            words.append(int(label) & 0xFFFFFFFF)
            words.append((int(label) >> 32) & 0xFFFFFFFF)
        else:
            words.append(zlib.crc32(str(label).encode()))
    return words


def derive_rng(seed: int, *labels) -> np.random.Generator:
    """Generator for ``seed`` specialised by ``labels`` (ints or strings)."""
    entropy = [int(seed) & 0xFFFFFFFF, (int(seed) >> 32) & 0xFFFFFFFF]
    entropy.extend(_label_words(labels))
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(seed: int, *labels) -> int:
    return int(derive_rng(seed, *labels).integers(0, 2**63 - 1))
