"""Independent reference computations used by the tests."""
import itertools

import numpy as np


def simplex_grid(k: int, step: float) -> np.ndarray:
    m = int(round(1 / step))
    pts = [c for c in itertools.product(range(m + 1), repeat=k - 1) if sum(c) <= m]
    return np.array([list(c) + [m - sum(c)] for c in pts], dtype=float) / m


def _plogp(x):
    return np.where(x > 0, x * np.log2(np.where(x > 0, x, 1)), 0.0)


def grid_conditional_rd(q: np.ndarray, d: np.ndarray, D: float, card: int = 3, step: float = 0.02) -> float:
    """min I(X2;U|X1) s.t. min_g E d(X2, g(X1,U)) <= D over a kernel grid.

    ``q[x1, x2]`` is the joint pmf. The objective and the distortion split over
    X1, so each X1 branch is gridded separately (rows for every X2 value on the
    grid) and the branches are merged exactly through their rate/distortion
    staircases.
    """
    grid = simplex_grid(card, step)
    branches = []
    for x1 in range(q.shape[0]):
        px = q[x1]
        rows = [grid] * q.shape[1]
        combos = np.stack(np.meshgrid(*[np.arange(len(grid))] * q.shape[1], indexing="ij"), -1).reshape(-1, q.shape[1])
        K = np.stack([grid[combos[:, x2]] for x2 in range(q.shape[1])], axis=1)  # (N, x2, u)
        joint = px[None, :, None] * K  # p(x1, x2, u)
        pu = joint.sum(axis=1)
        tot = px.sum()
        # I(X2;U|X1=x1) weighted by p(x1): sum p log p(x2,u) - p log p(u) - p log p(x2) ... with p(x1) scaling
        mi = (_plogp(joint).sum(axis=(1, 2)) - _plogp(pu).sum(axis=1) - _plogp(px).sum()
              + _plogp(np.array([tot])).sum())
        cost = np.einsum("nxu,xy->nuy", joint, d)
        dist = cost.min(axis=2).sum(axis=1)
        order = np.argsort(dist, kind="stable")
        dd, rr = dist[order], np.minimum.accumulate(mi[order])
        branches.append((dd, rr))
    # merge the staircases
    best_d, best_r = branches[0]
    for dd, rr in branches[1:]:
        # for each candidate of the running merge keep points on a shared grid of budgets
        cand_d, cand_r = [], []
        for da, ra in zip(*_thin(best_d, best_r)):
            idx = np.searchsorted(dd, D - da + 1e-12, side="right") - 1
            if idx >= 0:
                cand_d.append(da + dd[idx])
                cand_r.append(ra + rr[idx])
        best_d, best_r = np.array(cand_d), np.array(cand_r)
    ok = best_d <= D + 1e-12
    return float(best_r[ok].min())


def _thin(d, r):
    keep = np.r_[True, np.diff(r) < 0]
    return d[keep], r[keep]


def H(p: np.ndarray, axes) -> float:
    """Entropy in bits of the marginal of ``p`` on ``axes``, by direct summation."""
    axes = tuple(sorted(set(axes)))
    if not axes:
        return 0.0
    drop = tuple(a for a in range(p.ndim) if a not in axes)
    m = p.sum(axis=drop).ravel()
    return float(-_plogp(m).sum())


def cmi(p: np.ndarray, a, b, c=()) -> float:
    """I(A;B|C) from four raw-array entropies."""
    a, b, c = set(a), set(b), set(c)
    return H(p, a | c) + H(p, b | c) - H(p, a | b | c) - H(p, c)


def attach(p: np.ndarray, kernel: np.ndarray, given) -> np.ndarray:
    """Append a new last axis distributed by ``kernel[given..., new]``."""
    given = list(given)
    letters = "abcdefghijklmnopqrstuvwxyz"
    src = letters[:p.ndim]
    ker = "".join(src[g] for g in given) + letters[p.ndim]
    return np.einsum(f"{src},{ker}->{src}{letters[p.ndim]}", p, kernel)


def wilson_upper(k: int, n: int, z: float = 1.959963984540054) -> float:
    ph = k / n
    centre = ph + z * z / (2 * n)
    rad = z * np.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n))
    return float((centre + rad) / (1 + z * z / n))
