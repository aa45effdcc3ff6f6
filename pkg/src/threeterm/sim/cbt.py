"""Two encoders, the second one hearing the first, and one decoder with side information.

Node 1 describes X1 by U1 and sends a bin index m1 to nodes 2 and 3. Node 2
recovers U1 from its bin, describes X2 by U2 drawn on top of U1 and sends a
super-bin index m2 over the pair of indices. Node 3 searches both bins jointly.
V1 is known to everybody, V2 only to node 3.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..info import JointPmf, extend_with_kernel
from .codebook import (LazyBooks, draw_binning, draw_codebook, draw_superbinning, index_count, stream,
                       typical_sampler)
from .report import SimParams, TrialReport
from .typicality import typical_many

EVENTS = tuple(f"E{i}" for i in range(1, 8))


@dataclass(frozen=True)
class CbtRates:
    R1: float
    R2: float
    R1_hat: float
    R2_hat: float

    def __post_init__(self):
        if min(self.R1, self.R2, self.R1_hat, self.R2_hat) <= 0:
            raise ValueError("rates must be positive")


@dataclass
class CbtConfig:
    pmf: JointPmf            # over X1, X2, X3 and optionally V1, V2
    kernel_u1: np.ndarray    # p(u1 | x1[, v1])
    kernel_u2: np.ndarray    # p(u2 | u1, x2[, v1])
    rates: CbtRates
    n: int
    params: SimParams = SimParams()

    def __post_init__(self):
        for k in ("X1", "X2", "X3"):
            self.pmf.axis(k)
        if self.n < 1:
            raise ValueError("block length must be at least 1")

    @property
    def v1(self) -> tuple[str, ...]:
        return ("V1",) if "V1" in self.pmf.names else ()

    @property
    def v2(self) -> tuple[str, ...]:
        return ("V2",) if "V2" in self.pmf.names else ()

    def joint(self) -> JointPmf:
        j = extend_with_kernel(self.pmf, "U1", self.kernel_u1, ("X1",) + self.v1)
        return extend_with_kernel(j, "U2", self.kernel_u2, ("U1", "X2") + self.v1)


def copy_kernels(pmf: JointPmf) -> tuple[np.ndarray, np.ndarray]:
    """U1 = X1 and U2 = X2 (lossless descriptions)."""
    v1 = ("V1",) if "V1" in pmf.names else ()
    k1, k2 = pmf.size("X1"), pmf.size("X2")
    ku1 = np.broadcast_to(np.eye(k1).reshape((k1,) + (1,) * len(v1) + (k1,)),
                          (k1,) + tuple(pmf.size(v) for v in v1) + (k1,)).copy()
    ku2 = np.broadcast_to(np.eye(k2).reshape((1, k2) + (1,) * len(v1) + (k2,)),
                          (k1, k2) + tuple(pmf.size(v) for v in v1) + (k2,)).copy()
    return ku1, ku2


def sample_sources(pmf: JointPmf, n: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    flat = rng.choice(pmf.mass.size, size=n, p=pmf.mass.ravel())
    idx = np.unravel_index(flat, pmf.mass.shape)
    return {name: idx[a].astype(np.int64) for a, name in enumerate(pmf.names)}


def run_cbt_trial(cfg: CbtConfig, seed: int, trial: int = 0) -> TrialReport:
    """One draw of sources, codebooks and bins followed by the four protocol stages.

    Ties in the encoder searches go to the smallest index; a failed search
    takes index 0 and the event is recorded. Decoders resolve codewords:
    candidates carrying the same codeword are one candidate and the smallest
    index stands for them. Without a unique codeword a decoder falls back to
    the smallest index of the received bin.
    Every event is evaluated even after an earlier one fired.
    """
    p, n, r = cfg.params, cfg.n, cfg.rates
    joint = cfg.joint()
    tag = ("cbt", trial)
    src = sample_sources(cfg.pmf, n, stream(seed, "source", trial))
    v1 = {k: src[k] for k in cfg.v1}
    v2 = {k: src[k] for k in cfg.v2}
    ev = dict.fromkeys(EVENTS, False)
    fallbacks = 0

    ev["E1"] = not typical_many(joint, src, {}, p.source)[0]

    # node 1 codebook, drawn against V1 when present
    book1 = draw_codebook(seed, "U1", tag, n, r.R1_hat,
                          typical_sampler(joint, "U1", v1, n, p.codebook, p.mode, p.max_attempts))
    bins1 = draw_binning(seed, "U1", tag, book1.count, n, r.R1)

    def book2_for(c):
        samp = typical_sampler(joint, "U2", {"U1": book1[c[0]], **v1}, n, p.codebook, p.mode, p.max_attempts)
        return draw_codebook(seed, "U2", tag + c, n, r.R2_hat, samp)

    books2 = LazyBooks(book2_for)
    superbins = draw_superbinning(seed, "U2", tag, index_count(n, r.R2_hat), n, r.R2)

    # encoding at node 1
    fixed1 = {"X1": src["X1"], **v1}
    K, fb = book1.first(lambda cw: typical_many(joint, fixed1, {"U1": cw}, p.encode))
    fallbacks += fb
    ev["E2"] = K is None
    K = K or 0
    u1_true = book1[K]
    m1 = int(bins1.bin_of(K))
    ev["E3"] = not typical_many(joint, src, {"U1": u1_true}, p.decode)[0]

    # decoding at node 2; candidates sharing a codeword count as one
    cand = bins1.members(m1)
    cw1 = book1[cand]
    ok2 = typical_many(joint, {"X2": src["X2"], **v1}, {"U1": cw1}, p.decode)
    found = cand[ok2]
    ev["E4"] = bool(np.any(cw1[ok2] != u1_true))
    unique2 = distinct_rows(cw1[ok2]) == 1
    k2 = int(found[0]) if unique2 else int(cand[0])

    # encoding at node 2
    b2 = books2[(k2,)]
    u1_2 = book1[k2]
    fixed2 = {"X2": src["X2"], **v1}
    L, fb = b2.first(lambda cw: typical_many(joint, fixed2, {"U1": u1_2[None, :], "U2": cw}, p.encode))
    fallbacks += fb
    ev["E5"] = L is None
    L = L or 0
    m2 = int(superbins.bin_of(k2, L))
    ev["E6"] = not typical_many(joint, src, {"U1": u1_true, "U2": b2[L]}, p.decode)[0]

    # decoding at node 3: joint search over both bins
    u2_true = b2[L]
    side = {"X3": src["X3"], **v1, **v2}
    pairs, words = [], []
    for k in cand:
        ls = superbins.members(int(k), m2)
        if ls.size == 0:
            continue
        u1k = book1[int(k)]
        cw2 = books2[(int(k),)][ls]
        ok = typical_many(joint, side, {"U1": u1k[None, :], "U2": cw2}, p.decode)
        pairs += [(int(k), int(l)) for l in ls[ok]]
        words += [np.concatenate([u1k, w]) for w in cw2[ok]]
    truth = np.concatenate([u1_true, u2_true])
    ev["E7"] = any(np.any(w != truth) for w in words)
    unique3 = len(words) > 0 and distinct_rows(np.stack(words)) == 1
    if unique3:
        k3, l3 = pairs[0]
    else:
        k3 = int(cand[0])
        ls = superbins.members(k3, m2)
        l3 = int(ls[0]) if ls.size else 0
    u1_3, u2_3 = book1[k3], books2[(k3,)][l3]

    rec = {"node2": unique2 and bool(np.array_equal(book1[k2], u1_true)),
           "node3": unique3 and bool(np.array_equal(np.concatenate([u1_3, u2_3]), truth))}
    final = typical_many(joint, src, {"U1": u1_3, "U2": u2_3}, p.decode)[0]
    ev["E"] = not bool(final)
    return TrialReport(ev, rec, {}, fallbacks)


def distinct_rows(a: np.ndarray) -> int:
    return 0 if len(a) == 0 else len(np.unique(np.asarray(a).reshape(len(a), -1), axis=0))
