"""Exact probability calculus on finite alphabets.

A :class:`JointPmf` is a dense tensor of probabilities with one named axis per
variable. Entropies and mutual informations are returned in bits.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

ZERO_MASS = 1e-15
NORM_TOL = 1e-12
MI_CLAMP = 1e-12


class Alphabet(NamedTuple):
    name: str
    size: int


def _as_names(x: str | Iterable[str] | None) -> tuple[str, ...]:
    if x is None:
        return ()
    if isinstance(x, str):
        return (x,)
    return tuple(x)


@dataclass(frozen=True, eq=False)
class JointPmf:
    """Normalized joint mass over named finite alphabets.

    ``mass`` has one axis per entry of ``names``, in the same order.
    """

    names: tuple[str, ...]
    mass: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        names = tuple(self.names)
        mass = np.array(self.mass, dtype=float)
        if mass.ndim != len(names):
            raise ValueError(f"tensor rank {mass.ndim} does not match {len(names)} variables")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate variable names in {names}")
        if mass.size == 0 or min(mass.shape, default=1) < 1:
            raise ValueError("every alphabet needs at least one symbol")
        if not np.all(np.isfinite(mass)) or np.any(mass < 0):
            raise ValueError("probabilities must be finite and nonnegative")
        total = mass.sum()
        if abs(total - 1.0) > NORM_TOL:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        mass.flags.writeable = False
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "mass", mass)

    @classmethod
    def from_array(cls, mass, names: Sequence[str], normalize: bool = False) -> "JointPmf":
        mass = np.asarray(mass, dtype=float)
        if normalize:
            mass = mass / mass.sum()
        return cls(tuple(names), mass)

    @classmethod
    def product(cls, *factors: "JointPmf") -> "JointPmf":
        """Joint law of independent pmfs."""
        mass = np.ones(())
        names: tuple[str, ...] = ()
        for f in factors:
            mass = np.multiply.outer(mass, f.mass)
            names += f.names
        return cls(names, mass)

    @property
    def variables(self) -> tuple[Alphabet, ...]:
        return tuple(Alphabet(n, s) for n, s in zip(self.names, self.mass.shape))

    @property
    def sizes(self) -> dict[str, int]:
        return dict(zip(self.names, self.mass.shape))

    def axis(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown variable {name!r}; have {self.names}") from None

    def size(self, name: str) -> int:
        return self.mass.shape[self.axis(name)]

    def marginal_mass(self, keep: Sequence[str]) -> np.ndarray:
        """Marginal tensor with axes ordered as ``keep``."""
        keep = tuple(keep)
        axes = [self.axis(k) for k in keep]
        if len(set(axes)) != len(axes):
            raise ValueError(f"repeated variable in {keep}")
        drop = tuple(i for i in range(len(self.names)) if i not in axes)
        m = self.mass.sum(axis=drop) if drop else self.mass
        remaining = [i for i in range(len(self.names)) if i in axes]
        return np.transpose(m, [remaining.index(a) for a in axes])

    def joint_entropy(self, subset: Iterable[str]) -> float:
        key = frozenset(subset)
        if not key:
            return 0.0
        hit = self._cache.get(key)
        if hit is None:
            p = self.marginal_mass(sorted(key, key=self.axis)).ravel()
            p = p[p > ZERO_MASS]
            hit = float(-np.sum(p * np.log2(p)))
            self._cache[key] = hit
        return hit


def _check_known(pmf: JointPmf, names: Iterable[str]) -> None:
    for n in names:
        pmf.axis(n)


def entropy(pmf: JointPmf, targets, given=()) -> float:
    """H(targets | given) in bits."""
    t, g = _as_names(targets), _as_names(given)
    if not t:
        raise ValueError("entropy needs at least one target variable")
    _check_known(pmf, t + g)
    if set(t) & set(g):
        raise ValueError("targets and given must be disjoint")
    h = pmf.joint_entropy(t + g) - pmf.joint_entropy(g)
    return max(h, 0.0) if h > -MI_CLAMP else h


def mutual_info(pmf: JointPmf, a, b, given=()) -> float:
    """I(a; b | given) in bits, clamped to zero inside the round-off band."""
    a, b, g = _as_names(a), _as_names(b), _as_names(given)
    if not a or not b:
        raise ValueError("both sides of a mutual information must be nonempty")
    if set(a) & set(b) or set(a) & set(g) or set(b) & set(g):
        raise ValueError("variable groups must be pairwise disjoint")
    _check_known(pmf, a + b + g)
    h = pmf.joint_entropy
    val = h(a + g) + h(b + g) - h(a + b + g) - h(g)
    if -MI_CLAMP < val < 0.0:
        return 0.0
    return val


def marginalize(pmf: JointPmf, keep) -> JointPmf:
    keep = _as_names(keep)
    if not keep:
        raise ValueError("keep must name at least one variable")
    return JointPmf(keep, pmf.marginal_mass(keep))


def extend_with_kernel(pmf: JointPmf, name: str, kernel, given=()) -> JointPmf:
    """Append a variable drawn from ``kernel`` given the variables in ``given``.

    ``kernel`` has shape ``(*sizes of given, size of new)``; every row must be
    a probability vector. The new variable depends on the rest of the joint
    only through ``given``.
    """
    given = _as_names(given)
    if name in pmf.names:
        raise ValueError(f"variable {name!r} already present")
    _check_known(pmf, given)
    kernel = np.asarray(kernel, dtype=float)
    expect = tuple(pmf.size(g) for g in given)
    if kernel.ndim != len(given) + 1 or kernel.shape[:-1] != expect:
        raise ValueError(f"kernel shape {kernel.shape} does not fit conditioning sizes {expect}")
    if np.any(kernel < 0) or np.any(np.abs(kernel.sum(axis=-1) - 1.0) > NORM_TOL):
        raise ValueError("kernel rows must be probability vectors")
    # broadcast the kernel over the full tensor: put its axes at the positions of `given`
    nd = len(pmf.names)
    perm_shape = [1] * nd + [kernel.shape[-1]]
    order = [pmf.axis(g) for g in given]
    k = kernel
    if order:
        # move conditioning axes into ascending pmf-axis order
        sort = np.argsort(order)
        k = np.transpose(kernel, list(sort) + [len(given)])
        for ax in sorted(order):
            perm_shape[ax] = pmf.mass.shape[ax]
    k = k.reshape(perm_shape)
    mass = pmf.mass[..., None] * k
    return JointPmf(pmf.names + (name,), mass)


def markov_check(pmf: JointPmf, chain, tol: float | None = None) -> float:
    """L-infinity deviation from the chain A - B - C.

    Returns max |p(a|b,c) - p(a|b)| over cells with p(b,c) > 0. ``tol`` is
    accepted for call-site readability and not used here.
    """
    a, b, c = (_as_names(x) for x in chain)
    if not a or not c:
        raise ValueError("outer groups of a chain must be nonempty")
    if set(a) & set(b) or set(a) & set(c) or set(b) & set(c):
        raise ValueError("chain groups overlap")
    p = pmf.marginal_mass(a + b + c)
    sa = int(np.prod([pmf.size(x) for x in a]))
    sb = int(np.prod([pmf.size(x) for x in b]))
    sc = int(np.prod([pmf.size(x) for x in c]))
    p = p.reshape(sa, sb, sc)
    p_bc = p.sum(axis=0)
    p_ab = p.sum(axis=2)
    p_b = p_ab.sum(axis=0)
    live = p_bc > ZERO_MASS
    if not live.any():
        return 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        cond_bc = np.where(live[None], p / np.where(live, p_bc, 1.0)[None], 0.0)
        cond_b = np.where(p_b > ZERO_MASS, p_ab / np.where(p_b > ZERO_MASS, p_b, 1.0), 0.0)
    dev = np.abs(cond_bc - cond_b[:, :, None])
    return float(dev[:, live].max())


@dataclass(frozen=True, eq=False)
class DistortionMatrix:
    """Per-letter distortion d[x, xhat] between a source and its reconstruction."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.size == 0:
            raise ValueError("distortion matrix must be 2-D and nonempty")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("distortions must be finite and nonnegative")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def hamming(cls, k: int) -> "DistortionMatrix":
        return cls(1.0 - np.eye(k))

    @property
    def source_size(self) -> int:
        return self.values.shape[0]

    @property
    def recon_size(self) -> int:
        return self.values.shape[1]


def expected_distortion(pmf: JointPmf, d: DistortionMatrix, source: str | None = None,
                        recon: str | None = None) -> float:
    """E d(source, recon). Defaults to the two variables of a bivariate pmf."""
    if source is None or recon is None:
        if len(pmf.names) != 2:
            raise ValueError("name the source and reconstruction variables")
        source, recon = pmf.names
    p = pmf.marginal_mass((source, recon))
    if p.shape != d.values.shape:
        raise ValueError(f"alphabet sizes {p.shape} do not match distortion matrix {d.values.shape}")
    return float(np.sum(p * d.values))


def optimal_reconstruction(pmf: JointPmf, source: str, observed, d: DistortionMatrix):
    """Best deterministic reconstruction of ``source`` from ``observed``.

    The cell-wise argmin is the exact optimum over all deterministic maps;
    ties go to the smallest reconstruction symbol. Returns ``(table, distortion)``
    where ``table`` is indexed by the observed symbols.
    """
    observed = _as_names(observed)
    if pmf.size(source) != d.source_size:
        raise ValueError("distortion matrix does not match the source alphabet")
    p = pmf.marginal_mass(observed + (source,))
    cost = p @ d.values  # expected cost per observed cell and candidate
    table = np.argmin(cost, axis=-1)
    dist = float(np.take_along_axis(cost, table[..., None], axis=-1).sum())
    return table, dist


def binary_entropy(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"binary entropy needs p in [0, 1], got {p}")
    return float(h2(p))


def h2(p):
    """Vectorized binary entropy without range checks."""
    p = np.asarray(p, dtype=float)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
        t2 = np.where(q > 0, -q * np.log2(np.where(q > 0, q, 1.0)), 0.0)
    return t1 + t2


# text format -----------------------------------------------------------------

def parse_pmf(text: str) -> JointPmf:
    """Read the pmf text format.

    First non-comment line: ``NAME:SIZE`` tokens. Following lines: zero-based
    indices then a probability. Unlisted cells are zero; ``#`` starts a comment.
    """
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValueError("empty pmf file")
    names, sizes = [], []
    for tok in lines[0].split():
        try:
            nm, sz = tok.split(":")
            names.append(nm)
            sizes.append(int(sz))
        except ValueError:
            raise ValueError(f"bad header token {tok!r}; expected NAME:SIZE") from None
    if any(s < 1 for s in sizes):
        raise ValueError("alphabet sizes must be positive")
    mass = np.zeros(sizes)
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if len(parts) != len(sizes) + 1:
            raise ValueError(f"line {lineno}: expected {len(sizes)} indices and a probability")
        idx = tuple(int(x) for x in parts[:-1])
        if any(not 0 <= i < s for i, s in zip(idx, sizes)):
            raise ValueError(f"line {lineno}: index out of range")
        mass[idx] += float(parts[-1])
    total = mass.sum()
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {total!r}, not 1")
    return JointPmf(tuple(names), mass / total)


def format_pmf(pmf: JointPmf) -> str:
    out = [" ".join(f"{n}:{s}" for n, s in pmf.variables)]
    for idx in zip(*np.nonzero(pmf.mass)):
        out.append(" ".join(str(i) for i in idx) + f" {pmf.mass[idx]:.17g}")
    return "\n".join(out) + "\n"


def read_pmf(path) -> JointPmf:
    with open(path) as fh:
        return parse_pmf(fh.read())
