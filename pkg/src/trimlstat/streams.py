"""Counter-based random streams.

A study is identified by ``(seed, tag, n)``; it owns one Philox key.  Replicate
``r`` of the study consumes raw words ``[r * n, (r + 1) * n)`` of that keyed
counter stream, so any replicate can be regenerated on its own and blocks of
replicates can be produced by any worker in any order.
"""

from __future__ import annotations

import zlib

import numpy as np

_SCALE = 2.0 ** -52


def uniforms_from_raw(raw):
    """Map 64-bit words to doubles strictly inside (0, 1).

    Uses the top 52 bits: ``u = (k + 1/2) 2^-52``, so ``u`` is never 0 or 1.
    """
    return ((raw >> np.uint64(12)).astype(np.float64) + 0.5) * _SCALE


def study_key(seed, tag, n=0):
    tag_id = zlib.crc32(tag.encode())
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, tag_id, int(n)])
    return ss.generate_state(2, np.uint64)


class Stream:
    """Single-owner uniform stream backed by a keyed Philox generator."""

    def __init__(self, key, offset=0):
        self._bitgen = np.random.Philox(key=np.asarray(key, dtype=np.uint64))
        if offset:
            self._bitgen.advance(offset // 4)
            if offset % 4:
                self._bitgen.random_raw(offset % 4)

    @classmethod
    def from_seed(cls, seed, tag="sample", n=0):
        return cls(study_key(seed, tag, n))

    def raw(self, size):
        return self._bitgen.random_raw(size)

    def uniforms(self, size):
        return uniforms_from_raw(self.raw(size))


def replicate_block(key, n, start, count):
    """Raw words for replicates ``start .. start + count - 1`` as ``(count, n)``."""
    return Stream(key, offset=start * n).raw((count, n))
