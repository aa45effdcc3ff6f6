"""Strong typicality tests and uniform draws from conditional typical sets.

A tuple of aligned sequences is typical when every symbol-tuple frequency is
within ``delta / prod(alphabet sizes)`` of its probability and no zero-mass
tuple occurs at all.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import gammaln

from ..info import ZERO_MASS, JointPmf

# above this many candidate compositions per conditioning symbol we switch to rejection
EXACT_WORK_LIMIT = 200_000


class IntractableEnumeration(RuntimeError):
    """Exact mode was forced on a conditional typical set too large to enumerate."""


@dataclass(frozen=True)
class TypicalityParams:
    delta: float
    n: int

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.n < 1:
            raise ValueError("block length must be at least 1")


def composite(seqs: Sequence[np.ndarray], sizes: Sequence[int]) -> np.ndarray:
    """Mixed-radix code of aligned sequences (works on trailing axis batches too)."""
    if not seqs:
        raise ValueError("no sequences")
    out = np.zeros(np.broadcast_shapes(*(np.shape(s) for s in seqs)), dtype=np.int64)
    for s, k in zip(seqs, sizes):
        out = out * k + np.asarray(s, dtype=np.int64)
    return out


def threshold(delta: float, sizes: Sequence[int]) -> float:
    return delta / math.prod(sizes)


def _counts(codes: np.ndarray, cells: int) -> np.ndarray:
    """Per-row histogram of a (rows, n) code array."""
    codes = np.atleast_2d(codes)
    rows = codes.shape[0]
    flat = (np.arange(rows)[:, None] * cells + codes).ravel()
    return np.bincount(flat, minlength=rows * cells).reshape(rows, cells)


def typical_rows(codes: np.ndarray, p: np.ndarray, thr: float) -> np.ndarray:
    """Typicality of each row of composite codes against the flat pmf ``p``."""
    codes = np.atleast_2d(codes)
    n = codes.shape[1]
    freq = _counts(codes, p.size) / n
    ok = np.all(np.abs(freq - p) <= thr + 1e-12, axis=1)
    zero = p < ZERO_MASS
    if zero.any():
        ok &= ~np.any(freq[:, zero] > 0, axis=1)
    return ok


def typical_check(seqs: Mapping[str, np.ndarray] | Sequence[np.ndarray], pmf: JointPmf, delta: float) -> bool:
    """True iff the aligned sequences are jointly strongly typical.

    ``seqs`` maps variable names to sequences, or lists one sequence per pmf
    variable in order. Only the named variables are tested, against their
    marginal.
    """
    if not isinstance(seqs, Mapping):
        if len(seqs) != len(pmf.names):
            raise ValueError("one sequence per pmf variable expected")
        seqs = dict(zip(pmf.names, seqs))
    if not seqs:
        raise ValueError("no sequences")
    names = tuple(seqs)
    arrs = [np.asarray(seqs[k]) for k in names]
    n = len(arrs[0])
    if any(a.ndim != 1 or len(a) != n for a in arrs):
        raise ValueError("sequences must be one-dimensional with equal lengths")
    sizes = [pmf.size(k) for k in names]
    for a, k in zip(arrs, sizes):
        if a.size and (a.min() < 0 or a.max() >= k):
            raise ValueError("symbol outside its alphabet")
    p = pmf.marginal_mass(names).ravel()
    return bool(typical_rows(composite(arrs, sizes)[None, :], p, threshold(delta, sizes))[0])


def typical_many(pmf: JointPmf, fixed: Mapping[str, np.ndarray], cands: Mapping[str, np.ndarray],
                 delta: float) -> np.ndarray:
    """Joint typicality of fixed sequences with each row of candidate sequences.

    ``cands`` maps names to arrays broadcastable to ``(rows, n)``.
    """
    names = tuple(fixed) + tuple(cands)
    sizes = [pmf.size(k) for k in names]
    p = pmf.marginal_mass(names).ravel()
    base = composite([np.asarray(fixed[k]) for k in fixed], sizes[:len(fixed)]) if fixed else 0
    code = np.asarray(base, dtype=np.int64)
    for k, sz in zip(cands, sizes[len(fixed):]):
        code = code * sz + np.asarray(cands[k], dtype=np.int64)
    return typical_rows(np.atleast_2d(code), p, threshold(delta, sizes))


@dataclass
class Draws:
    seqs: np.ndarray          # (count, n)
    fallback: np.ndarray      # bool (count,), True where no typical draw was produced
    mode: str
    empty: bool = False       # the conditional typical set is provably empty


def _row_options(count: int, prow: np.ndarray, n: int, thr: float, cap: int):
    """All admissible compositions of ``count`` positions over the target alphabet."""
    k = prow.size
    lo = np.zeros(k, dtype=int)
    hi = np.zeros(k, dtype=int)
    for b in range(k):
        if prow[b] < ZERO_MASS:
            lo[b] = hi[b] = 0
        else:
            lo[b] = max(0, math.ceil(n * (prow[b] - thr) - 1e-9))
            hi[b] = min(count, math.floor(n * (prow[b] + thr) + 1e-9))
    out = []

    def rec(b, left, acc):
        if len(out) > cap:
            return
        if b == k - 1:
            if lo[b] <= left <= hi[b]:
                out.append(acc + [left])
            return
        rest_hi = hi[b + 1:].sum()
        rest_lo = lo[b + 1:].sum()
        for c in range(max(lo[b], left - rest_hi), min(hi[b], left - rest_lo) + 1):
            rec(b + 1, left - c, acc + [c])

    if lo.sum() <= count <= hi.sum():
        rec(0, count, [])
    return out


def _raw_work(cond: np.ndarray, ncond: int, k: int) -> float:
    counts = np.bincount(cond, minlength=ncond)
    return float(sum(math.comb(int(c) + k - 1, k - 1) for c in counts))


# uniform variates for the given draw ids: (ids, columns, salt) -> array (len(ids), columns)
Uniforms = Callable[[np.ndarray, int, int], np.ndarray]


def rng_uniforms(rng: np.random.Generator) -> Uniforms:
    return lambda ids, cols, salt: rng.random((len(ids), cols))


class TypicalSetSampler:
    """Uniform draws from {u : (cond, u) jointly typical} for one conditioning sequence.

    ``joint`` is p(w, u) with the conditioning collapsed to one axis and
    ``cond`` the conditioning sequence as codes into that axis. ``sizes`` lists
    the alphabet sizes entering the typicality threshold (defaults to the two
    axis lengths).

    Exact mode picks a conditional type for each conditioning symbol with
    probability proportional to its number of sequences, then places the
    symbols by a uniform shuffle; the result is uniform over the typical set.
    Rejection mode proposes i.i.d. draws from p(u|w) and keeps the first
    typical one, flagging a fallback after ``max_attempts``.
    """

    def __init__(self, joint: np.ndarray, cond: np.ndarray, delta: float, mode: str = "auto",
                 max_attempts: int = 1000, sizes: Sequence[int] | None = None):
        self.joint = np.asarray(joint, dtype=float)
        self.cond = np.asarray(cond, dtype=np.int64)
        nw, nu = self.joint.shape
        self.n = self.cond.size
        self.thr = threshold(delta, sizes if sizes is not None else (nw, nu))
        self.max_attempts = max_attempts
        work = _raw_work(self.cond, nw, nu)
        if mode == "auto":
            mode = "exact" if work <= EXACT_WORK_LIMIT else "rejection"
        if mode == "exact" and work > EXACT_WORK_LIMIT:
            raise IntractableEnumeration(f"{work:.0f} compositions exceed the exact-mode limit; use rejection mode")
        if mode not in ("exact", "rejection"):
            raise ValueError(f"unknown sampling mode {mode!r}")
        self.mode = mode
        pw = self.joint.sum(axis=1, keepdims=True)
        cond_p = np.divide(self.joint, pw, out=np.full_like(self.joint, 1.0 / nu), where=pw > 0)
        self._iid_cdf = np.cumsum(cond_p[self.cond], axis=1)
        self._iid_cdf[:, -1] = 1.0
        self.empty = False
        if mode == "exact":
            self._plan = self._exact_plan()

    def _exact_plan(self):
        nw, nu = self.joint.shape
        plan = []
        for a in range(nw):
            pos = np.flatnonzero(self.cond == a)
            if pos.size == 0:
                # a symbol that never occurs must have no mass beyond the tolerance
                if np.any(self.joint[a] - self.thr > 1e-12):
                    self.empty = True
                continue
            opts = _row_options(pos.size, self.joint[a], self.n, self.thr, EXACT_WORK_LIMIT)
            if not opts:
                self.empty = True
                continue
            comp = np.array(opts)
            logw = gammaln(pos.size + 1) - gammaln(comp + 1).sum(axis=1)
            w = np.exp(logw - logw.max())
            cdf = np.cumsum(w / w.sum())
            cdf[-1] = 1.0
            plan.append((pos, comp, cdf))
        return plan

    def _iid(self, u: np.ndarray) -> np.ndarray:
        return (u[..., None] > self._iid_cdf[None]).sum(axis=-1)

    def draw(self, unif: Uniforms, ids: np.ndarray) -> Draws:
        ids = np.asarray(ids)
        count = len(ids)
        if self.mode == "exact":
            if self.empty:
                return Draws(self._iid(unif(ids, self.n, 0)), np.ones(count, bool), "exact", empty=True)
            out = np.zeros((count, self.n), dtype=np.int64)
            for salt, (pos, comp, cdf) in enumerate(self._plan, start=1):
                pick = np.searchsorted(cdf, unif(ids, 1, 2 * salt)[:, 0], side="right")
                pick = np.minimum(pick, len(cdf) - 1)
                edges = np.cumsum(comp[pick], axis=1)
                ranks = np.arange(pos.size)
                vals = (ranks[None, :, None] >= edges[:, None, :]).sum(axis=-1)  # symbols in sorted order
                perm = np.argsort(unif(ids, pos.size, 2 * salt + 1), axis=1)
                out[:, pos] = np.take_along_axis(vals, perm, axis=1)
            return Draws(out, np.zeros(count, bool), "exact")
        nu = self.joint.shape[1]
        p = self.joint.ravel()
        out = np.zeros((count, self.n), dtype=np.int64)
        done = np.zeros(count, bool)
        for attempt in range(self.max_attempts):
            todo = np.flatnonzero(~done)
            if todo.size == 0:
                break
            prop = self._iid(unif(ids[todo], self.n, 1000 + attempt))
            ok = typical_rows(self.cond[None, :] * nu + prop, p, self.thr)
            out[todo] = prop
            done[todo[ok]] = True
        return Draws(out, ~done, "rejection")


def sample_conditional_typical(joint: np.ndarray, cond: np.ndarray, delta: float, rng: np.random.Generator,
                               count: int = 1, mode: str = "auto", max_attempts: int = 1000,
                               sizes: Sequence[int] | None = None) -> Draws:
    """``count`` independent draws from a :class:`TypicalSetSampler` driven by ``rng``."""
    sampler = TypicalSetSampler(joint, cond, delta, mode, max_attempts, sizes)
    return sampler.draw(rng_uniforms(rng), np.arange(count))
