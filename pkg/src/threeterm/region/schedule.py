"""Auxiliary description schedules for the K-round three-node scheme.

A description is keyed by ``(origin, dest, round)`` where ``dest`` is a string
such as ``"23"`` (common, to both other nodes) or ``"2"`` (private). Nodes
speak in the order 1, 2, 3 inside every round and each node emits its common
description first, then its private ones in ascending destination order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..info import JointPmf, extend_with_kernel

SOURCES = ("X1", "X2", "X3")
COMMON = {1: "23", 2: "13", 3: "12"}
ORDER = ((1, "23"), (1, "2"), (1, "3"), (2, "13"), (2, "1"), (2, "3"), (3, "12"), (3, "1"), (3, "2"))
PAIRS = ("12", "13", "23")

Key = tuple[int, str, int]


def aux_name(key: Key) -> str:
    i, dest, l = key
    return f"U{i}>{dest}_{l}"


def rate_name(key: Key) -> str:
    i, dest, l = key
    return f"R{i}>{dest}_{l}"


def common_history(i: int, l: int) -> list[Key]:
    """Common descriptions known to everybody when node ``i`` speaks in round ``l``."""
    keys = [(j, COMMON[j], k) for k in range(1, l) for j in (1, 2, 3)]
    if i >= 2:
        keys.append((1, "23", l))
    if i >= 3:
        keys.append((2, "13", l))
    return keys


def private_history(pair: str, l: int, i: int) -> list[Key]:
    """Private descriptions exchanged inside ``pair`` before node ``i`` speaks in round ``l``."""
    a, b = int(pair[0]), int(pair[1])
    keys = []
    for k in range(1, l):
        keys += [(a, str(b), k), (b, str(a), k)]
    if i == b:
        keys.append((a, str(b), l))
    return keys


def generation_history(key: Key) -> list[Key]:
    """Descriptions a description may depend on, besides its origin's source."""
    i, dest, l = key
    if dest == COMMON[i]:
        return common_history(i, l)
    pair = "".join(sorted(f"{i}{dest}"))
    if i == 3:
        base = common_history(1, l + 1)
    else:
        base = common_history(i + 1, l)
    return base + private_history(pair, l, i)


def canonical_order(K: int) -> list[Key]:
    return [(i, dest, l) for l in range(1, K + 1) for i, dest in ORDER]


@dataclass
class AuxSpec:
    origin: int
    dest: str
    round: int
    cardinality: int = 1
    kernel: np.ndarray | None = None

    @property
    def key(self) -> Key:
        return (self.origin, self.dest, self.round)

    @property
    def name(self) -> str:
        return aux_name(self.key)


@dataclass
class AuxSchedule:
    """Which descriptions are used, their kernels and the reconstruction maps.

    Descriptions that are absent or have cardinality 1 are constants and are
    left out of the extended joint entirely.
    """

    K: int
    specs: dict[Key, AuxSpec] = field(default_factory=dict)
    recon: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("at least one round is required")

    def add(self, origin: int, dest: str, round: int, cardinality: int,
            kernel: np.ndarray | None = None) -> "AuxSchedule":
        key = (origin, dest, round)
        if (origin, dest) not in ORDER:
            raise ValueError(f"no description {origin}->{dest}")
        if not 1 <= round <= self.K:
            raise ValueError(f"round {round} outside 1..{self.K}")
        self.specs[key] = AuxSpec(origin, dest, round, cardinality, kernel)
        return self

    def active(self) -> list[Key]:
        """Non-constant descriptions in generation order."""
        return [k for k in canonical_order(self.K) if k in self.specs and self.specs[k].cardinality > 1]

    def present(self, keys) -> list[str]:
        act = set(self.active())
        return [aux_name(k) for k in keys if k in act]

    def conditioning(self, key: Key) -> tuple[str, ...]:
        return (SOURCES[key[0] - 1],) + tuple(self.present(generation_history(key)))

    def kernel_shape(self, key: Key, sizes: Mapping[str, int]) -> tuple[int, ...]:
        allsizes = dict(sizes)
        for k in self.active():
            allsizes[aux_name(k)] = self.specs[k].cardinality
        return tuple(allsizes[c] for c in self.conditioning(key)) + (self.specs[key].cardinality,)

    def fill_random(self, sizes: Mapping[str, int], rng: np.random.Generator,
                    concentration: float = 1.0) -> "AuxSchedule":
        """Draw Dirichlet kernels for every active description lacking one."""
        for k in self.active():
            spec = self.specs[k]
            if spec.kernel is None:
                shape = self.kernel_shape(k, sizes)
                spec.kernel = rng.dirichlet(np.full(shape[-1], concentration), size=shape[:-1])
        return self

    def extend(self, pmf: JointPmf) -> JointPmf:
        """Joint of the sources and every active description."""
        joint = pmf
        for k in self.active():
            spec = self.specs[k]
            if spec.kernel is None:
                raise ValueError(f"description {aux_name(k)} has no kernel")
            cond = self.conditioning(k)
            want = self.kernel_shape(k, pmf.sizes)
            if tuple(np.shape(spec.kernel)) != want:
                raise ValueError(f"kernel of {aux_name(k)} must have shape {want} (conditioning on {cond})")
            joint = extend_with_kernel(joint, aux_name(k), spec.kernel, cond)
        return joint

    def recon_inputs(self, i: int, j: int) -> tuple[str, ...]:
        """What node ``i`` uses to rebuild source ``j`` after the last round."""
        pair = "".join(sorted(f"{i}{j}"))
        a, b = int(pair[0]), int(pair[1])
        keys = common_history(1, self.K + 1) + private_history(pair, self.K + 1, a)
        return (SOURCES[i - 1],) + tuple(self.present(keys))
