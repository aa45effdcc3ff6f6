"""K rounds of common and private descriptions among three nodes.

Inside every round nodes speak in the order 1, 2, 3. Before speaking, a node
decodes what was sent to it since it last spoke: first the common layer, then
the private layer, each by a joint search inside the received bins. After the
last round node 1 decodes round K and node 2 decodes node 3's last
descriptions; then every node rebuilds the other sources through its
reconstruction tables.

Common descriptions form a chain: each one is drawn on top of the previous
speaker's common description and binned jointly with it (super-binning), so a
decoder resolves the pair in one search. Private descriptions are binned on
their own.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Mapping

import numpy as np

from ..info import DistortionMatrix, JointPmf, mutual_info, optimal_reconstruction
from ..region.schedule import (COMMON, SOURCES, AuxSchedule, Key, aux_name, common_history,
                               generation_history, private_history)
from ..region.theorem1 import bound_terms, theorem1_bounds
from .cbt import distinct_rows, sample_sources
from .codebook import draw_binning, draw_codebook, draw_superbinning, index_count, stream, typical_sampler
from .report import SimParams, TrialReport
from .typicality import typical_many

# per decoder: (bound tag, keys of round l); a common pair lists the parent first
_GROUPS = {
    2: [("c13@2", lambda l: [(3, "12", l - 1), (1, "23", l)]),
        ("p12+p32@2", lambda l: [(3, "2", l - 1), (1, "2", l)])],
    3: [("c12@3", lambda l: [(1, "23", l), (2, "13", l)]),
        ("p13+p23@3", lambda l: [(1, "3", l), (2, "3", l)])],
    1: [("c23@1", lambda l: [(2, "13", l), (3, "12", l)]),
        ("p21+p31@1", lambda l: [(2, "1", l), (3, "1", l)])],
}


def decode_context(tag: str, l: int) -> list[Key]:
    """Descriptions the decoder already holds when it resolves group ``tag`` of round ``l``."""
    for t, _dec, _lhs, _tg, _descr, _side, hist in bound_terms(l):
        if t == tag:
            return list(dict.fromkeys(hist))
    raise KeyError(tag)


def chain_parent(key: Key) -> Key:
    """The common description a common description is drawn on top of."""
    i, _, l = key
    if i == 1:
        return (3, "12", l - 1)
    return (i - 1, COMMON[i - 1], l)


@dataclass
class InteractiveConfig:
    pmf: JointPmf
    schedule: AuxSchedule
    rates: Mapping[str, tuple[float, float]]   # description name -> (bin rate R, codebook rate R_hat)
    n: int
    params: SimParams = SimParams()
    d: Mapping[str, DistortionMatrix] | None = None

    def __post_init__(self):
        for s in SOURCES:
            self.pmf.axis(s)
        for k in self.schedule.active():
            name = aux_name(k)
            if name not in self.rates:
                raise ValueError(f"no rates for {name}")
            R, Rh = self.rates[name]
            if R <= 0 or Rh <= 0:
                raise ValueError("rates must be positive")


def suggest_rates(pmf: JointPmf, schedule: AuxSchedule, margin: float, cover: float) -> dict[str, tuple[float, float]]:
    """Bin rates ``margin`` above the per-round bounds and codebook rates ``cover`` above covering.

    Single-description bounds are met first; each two-description bound that
    is still short is made up on its second description.
    """
    joint = schedule.extend(pmf)
    bounds = theorem1_bounds(joint, schedule)
    active = {aux_name(k): k for k in schedule.active()}
    rate_of = {f"R{n[1:]}": n for n in active}
    R = {n: 0.0 for n in active}
    for c in sorted(bounds, key=lambda c: len(c.coeffs)):
        names = [rate_of[v] for v in c.coeffs if v in rate_of]
        if not names:
            continue
        short = c.bound + margin - sum(R[n] for n in names)
        if short > 0:
            R[names[-1]] += short
    out = {}
    for n, k in active.items():
        hist = schedule.present(generation_history(k))
        need = mutual_info(joint, [SOURCES[k[0] - 1]], [n], hist)
        out[n] = (max(R[n], margin), max(need, 0.0) + cover)
    return out


@dataclass
class NodeState:
    """Indices and codewords a node holds: its own descriptions and its decoded ones."""

    idx: dict[str, int] = field(default_factory=dict)
    words: dict[str, np.ndarray] = field(default_factory=dict)


class InteractiveTrial:
    """State of one trial; after :meth:`run` it holds what every node sent, decoded and rebuilt."""

    def __init__(self, cfg: InteractiveConfig, seed: int, trial: int):
        self.cfg, self.seed, self.trial = cfg, seed, trial
        self.p = cfg.params
        self.n = cfg.n
        self.sched = cfg.schedule
        self.joint = self.sched.extend(cfg.pmf)
        self.active = set(self.sched.active())
        self.src = sample_sources(cfg.pmf, self.n, stream(seed, "source", trial))
        self.nodes = {i: NodeState() for i in (1, 2, 3)}
        self.sent: dict[str, int] = {}
        self.sent_words: dict[str, np.ndarray] = {}
        self.bins: dict[str, int] = {}
        self.events: dict[str, bool] = {}
        self.recovered: dict[str, bool] = {}
        self.fallbacks = 0
        self.reconstructions: dict[tuple[int, int], np.ndarray] = {}
        self._books: dict[tuple, object] = {}

    # codebooks -------------------------------------------------------------
    def _hist(self, key: Key) -> list[Key]:
        return [h for h in generation_history(key) if h in self.active]

    def book(self, key: Key, known: NodeState):
        """Codebook of ``key`` located through the holder's own index estimates."""
        name = aux_name(key)
        hist = self._hist(key)
        cond = tuple(known.idx[aux_name(h)] for h in hist)
        book = self._books.get((name, cond))
        if book is None:
            words = {aux_name(h): known.words[aux_name(h)] for h in hist}
            samp = typical_sampler(self.joint, name, words, self.n, self.p.codebook, self.p.mode,
                                   self.p.max_attempts)
            book = draw_codebook(self.seed, name, ("int", self.trial) + cond, self.n, self.cfg.rates[name][1], samp)
            self._books[(name, cond)] = book
        return book

    def binner(self, key: Key, known: NodeState):
        name = aux_name(key)
        R, Rh = self.cfg.rates[name]
        hist = self._hist(key)
        count = index_count(self.n, Rh)
        if key[1] == COMMON[key[0]]:
            parent = chain_parent(key)
            rest = tuple(known.idx[aux_name(h)] for h in hist if h != parent)
            sb = draw_superbinning(self.seed, name, ("int", self.trial) + rest, count, self.n, R)
            pidx = known.idx.get(aux_name(parent), 0) if parent in self.active else 0
            return "super", sb, pidx
        cond = tuple(known.idx[aux_name(h)] for h in hist)
        return "plain", draw_binning(self.seed, name, ("int", self.trial) + cond, count, self.n, R), None

    # protocol --------------------------------------------------------------
    def encode(self, key: Key):
        i = key[0]
        node = self.nodes[i]
        name = aux_name(key)
        book = self.book(key, node)
        hist = {aux_name(h): node.words[aux_name(h)] for h in self._hist(key)}
        fixed = {SOURCES[i - 1]: self.src[SOURCES[i - 1]], **hist}
        m, fb = book.first(lambda cw: typical_many(self.joint, fixed, {name: cw}, self.p.encode))
        self.fallbacks += fb
        self.events[f"enc:{name}"] = m is None
        m = m or 0
        node.idx[name], node.words[name] = m, book[m]
        self.sent[name] = m
        self.sent_words[name] = node.words[name]
        kind, b, pidx = self.binner(key, node)
        self.bins[name] = int(b.bin_of(pidx, m)) if kind == "super" else int(b.bin_of(m))

    def decode(self, j: int, tag: str, keys: list[Key], l: int):
        keys = [k for k in keys if k in self.active]
        if not keys:
            return
        node = self.nodes[j]
        names = [aux_name(k) for k in keys]
        ctx = [aux_name(k) for k in decode_context(tag, l) if k in self.active and k not in keys]
        fixed = {SOURCES[j - 1]: self.src[SOURCES[j - 1]], **{c: node.words[c] for c in ctx}}
        # candidate tuples, built member by member; a chain member is looked up through its parent candidate
        tuples = [({}, {})]
        for key in keys:
            name = aux_name(key)
            grown = []
            for idxs, words in tuples:
                view = NodeState({**node.idx, **idxs}, {**node.words, **words})
                kind, b, pidx = self.binner(key, view)
                cands = b.members(pidx, self.bins[name]) if kind == "super" else b.members(self.bins[name])
                if cands.size:
                    cw = self.book(key, view)[cands]
                    grown += [({**idxs, name: int(c)}, {**words, name: w}) for c, w in zip(cands, cw)]
            tuples = grown
        hits = []
        if tuples:
            ok = typical_many(self.joint, fixed, {nm: np.stack([w[nm] for _, w in tuples]) for nm in names},
                              self.p.decode)
            hits = [tuples[t] for t in np.flatnonzero(ok)]
        flat = [np.concatenate([w[nm] for nm in names]) for _, w in hits]
        unique = len(hits) > 0 and distinct_rows(np.stack(flat)) == 1
        if unique:
            idxs, words = hits[0]
        elif tuples:
            idxs, words = tuples[0]
        else:
            idxs, words = {}, {}
            for key in keys:
                view = NodeState({**node.idx, **idxs}, {**node.words, **words})
                idxs[aux_name(key)] = 0
                words[aux_name(key)] = self.book(key, view)[0]
        correct = unique and all(np.array_equal(words[nm], self.sent_words[nm]) for nm in names)
        stage = f"dec{j}:{tag}/l{l}"
        self.events[stage] = not correct
        self.recovered[stage] = correct
        node.idx.update(idxs)
        node.words.update(words)

    def run(self) -> TrialReport:
        K = self.sched.K
        order = self.sched.active()
        for l in range(1, K + 1):
            for i in (1, 2, 3):
                if not (i == 1 and l == 1):
                    j, ll = (1, l - 1) if i == 1 else (i, l)
                    for tag, keys in _GROUPS[j]:
                        self.decode(j, tag, [k for k in keys(ll) if 1 <= k[2] <= K], ll)
                for key in order:
                    if key[0] == i and key[2] == l:
                        self.encode(key)
        for tag, keys in _GROUPS[1]:
            self.decode(1, tag, [k for k in keys(K) if 1 <= k[2] <= K], K)
        for tag, keys in _GROUPS[2]:
            self.decode(2, tag, [k for k in keys(K + 1) if 1 <= k[2] <= K], K + 1)
        return TrialReport(self.events, self.recovered, self.distortions(), self.fallbacks)

    def distortions(self) -> dict[str, float]:
        out = {}
        for i in (1, 2, 3):
            for j in (1, 2, 3):
                if i == j:
                    continue
                target = SOURCES[j - 1]
                if self.cfg.d is not None:
                    d = self.cfg.d[target]
                else:
                    d = DistortionMatrix.hamming(self.cfg.pmf.size(target))
                inputs = self.sched.recon_inputs(i, j)
                if (i, j) in self.sched.recon:
                    table = np.asarray(self.sched.recon[(i, j)], dtype=int)
                else:
                    table, _ = optimal_reconstruction(self.joint, target, inputs, d)
                node = self.nodes[i]
                seqs = [self.src[v] if v in SOURCES else node.words[v] for v in inputs]
                xhat = table[tuple(seqs)]
                self.reconstructions[(i, j)] = xhat
                out[f"D{i}{j}"] = float(d.values[self.src[target], xhat].mean())
        return out


def run_interactive_trial(cfg: InteractiveConfig, seed: int, trial: int = 0) -> TrialReport:
    """One draw of sources and codes followed by all rounds and the final reconstructions."""
    return InteractiveTrial(cfg, seed, trial).run()
