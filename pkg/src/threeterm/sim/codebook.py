"""Random codebooks and bin assignments addressed by index.

All randomness comes from a counter-based hash: the variate for
``(stream key, index, salt, column)`` is computed directly, so codeword ``k``
or the bin of index pair ``(k, l)`` can be produced without drawing any other
codeword. Stream keys hash ``(seed, *labels)`` where the labels name the
purpose (``"codebook"``, ``"bins"``, ``"superbin"``), the description and the
conditioning indices.
"""
from __future__ import annotations

import hashlib
import math
from typing import Hashable

import numpy as np

from ..info import JointPmf
from .typicality import Draws, TypicalSetSampler

_M64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLD = np.uint64(0x9E3779B97F4A7C15)
CHUNK = 8192


def stream_key(seed: int, *labels: Hashable) -> int:
    digest = hashlib.blake2b(repr((int(seed),) + labels).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream(seed: int, *labels: Hashable) -> np.random.Generator:
    """A Philox generator for sequential draws (sources, pilot sampling)."""
    digest = hashlib.blake2b(repr((int(seed),) + labels).encode(), digest_size=16).digest()
    return np.random.Generator(np.random.Philox(key=np.frombuffer(digest, dtype=np.uint64)))


def _mix(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def hash64(key: int, *parts: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        h = _mix(np.uint64(key) + _GOLD)
        for p in parts:
            h = _mix(h ^ (np.asarray(p).astype(np.uint64) + _GOLD))
    return h


def hash_uniforms(key: int):
    """Uniforms source for :class:`TypicalSetSampler` keyed by draw index."""
    def unif(ids, cols, salt):
        ids = np.asarray(ids, dtype=np.uint64)[:, None]
        h = hash64(key, ids, np.uint64(salt), np.arange(cols, dtype=np.uint64)[None, :])
        return (h >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
    return unif


def index_count(n: int, rate: float) -> int:
    """ceil(2^(n * rate)), at least one."""
    if rate < 0:
        raise ValueError("rates must be nonnegative")
    return max(1, math.ceil(2.0 ** (n * rate) * (1 - 1e-12)))


def typical_sampler(joint: JointPmf, target: str, cond: dict[str, np.ndarray], n: int,
                    delta: float, mode: str = "auto", max_attempts: int = 200) -> TypicalSetSampler:
    """Sampler of ``target`` sequences uniform over the typical set given ``cond``."""
    names = tuple(cond)
    sizes = [joint.size(c) for c in names] + [joint.size(target)]
    p = joint.marginal_mass(names + (target,)).reshape(-1, joint.size(target))
    code = np.zeros(n, dtype=np.int64)
    for c, k in zip(names, sizes):
        code = code * k + np.asarray(cond[c], dtype=np.int64)
    return TypicalSetSampler(p, code, delta, mode, max_attempts, sizes)


class Codebook:
    """``count`` codewords drawn independently and uniformly from one conditional typical set.

    Codewords are computed on demand from their indices.
    """

    def __init__(self, key: int, count: int, rate_nominal: float, conditioning: tuple,
                 sampler: TypicalSetSampler):
        self.key = key
        self.count = count
        self.rate_nominal = rate_nominal
        self.conditioning = conditioning
        self.sampler = sampler
        self._unif = hash_uniforms(key)

    @property
    def empty(self) -> bool:
        return self.sampler.empty

    def draws(self, idx) -> Draws:
        idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
        if idx.size and (idx.min() < 0 or idx.max() >= self.count):
            raise IndexError("codeword index out of range")
        return self.sampler.draw(self._unif, idx)

    def __getitem__(self, idx) -> np.ndarray:
        d = self.draws(idx).seqs
        return d[0] if np.ndim(idx) == 0 else d

    def first(self, accept) -> tuple[int | None, int]:
        """Smallest index whose codeword satisfies ``accept`` (vectorized), plus fallback count seen."""
        fb = 0
        for start in range(0, self.count, CHUNK):
            ids = np.arange(start, min(start + CHUNK, self.count))
            d = self.draws(ids)
            fb += int(d.fallback.sum())
            hit = np.flatnonzero(accept(d.seqs))
            if hit.size:
                return int(ids[hit[0]]), fb
        return None, fb


def draw_codebook(seed: int, name: str, conditioning: tuple, n: int, rate: float,
                  sampler: TypicalSetSampler) -> Codebook:
    return Codebook(stream_key(seed, "codebook", name, conditioning), index_count(n, rate), rate,
                    conditioning, sampler)


class Binning:
    """Uniform assignment of ``count`` indices to bins ``1..bin_count``."""

    def __init__(self, key: int, count: int, bin_count: int):
        self.key, self.count, self.bin_count = key, count, bin_count
        self._members: dict[int, np.ndarray] = {}

    def bin_of(self, idx):
        b = hash64(self.key, np.asarray(idx, dtype=np.uint64)) % np.uint64(self.bin_count)
        return (b + np.uint64(1)).astype(np.int64)

    @property
    def assignment(self) -> np.ndarray:
        return self.bin_of(np.arange(self.count))

    def members(self, b: int) -> np.ndarray:
        m = self._members.get(b)
        if m is None:
            parts = []
            for start in range(0, self.count, 1 << 20):
                ids = np.arange(start, min(start + (1 << 20), self.count))
                parts.append(ids[self.bin_of(ids) == b])
            m = np.concatenate(parts) if parts else np.zeros(0, np.int64)
            self._members[b] = m
        return m


def draw_binning(seed: int, name: str, conditioning: tuple, count: int, n: int, rate: float) -> Binning:
    return Binning(stream_key(seed, "bins", name, conditioning), count, index_count(n, rate))


class SuperBinning:
    """One bin structure over index pairs ``(parent, own)``.

    All pairs share the same ``bin_count`` bins rather than one structure per
    parent index.
    """

    def __init__(self, key: int, own_count: int, bin_count: int):
        self.key, self.own_count, self.bin_count = key, own_count, bin_count

    def bin_of(self, parent, own):
        b = hash64(self.key, np.asarray(parent, dtype=np.uint64), np.asarray(own, dtype=np.uint64))
        return ((b % np.uint64(self.bin_count)) + np.uint64(1)).astype(np.int64)

    def row(self, parent: int) -> np.ndarray:
        return self.bin_of(parent, np.arange(self.own_count))

    def members(self, parent: int, b: int) -> np.ndarray:
        return np.flatnonzero(self.row(parent) == b)


def draw_superbinning(seed: int, name: str, conditioning: tuple, own_count: int, n: int,
                      rate: float) -> SuperBinning:
    return SuperBinning(stream_key(seed, "superbin", name, conditioning), own_count, index_count(n, rate))


class LazyBooks:
    """Codebooks keyed by conditioning indices, built on first use."""

    def __init__(self, make):
        self._make = make
        self._books: dict[tuple, Codebook] = {}

    def __getitem__(self, conditioning: tuple) -> Codebook:
        b = self._books.get(conditioning)
        if b is None:
            b = self._make(conditioning)
            self._books[conditioning] = b
        return b

    def __len__(self) -> int:
        return len(self._books)
