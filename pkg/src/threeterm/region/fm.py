"""Fourier-Motzkin projection of linear inequality systems."""
from __future__ import annotations

import warnings
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linprog

from .constraints import RateConstraint

_TOL = 1e-12


def _to_matrix(constraints: Sequence[RateConstraint], names: list[str]):
    A = np.zeros((len(constraints), len(names)))
    b = np.zeros(len(constraints))
    col = {n: j for j, n in enumerate(names)}
    for i, c in enumerate(constraints):
        for v, a in c.coeffs.items():
            A[i, col[v]] = a
        b[i] = c.bound
    return A, b


def fm_project(constraints: Iterable[RateConstraint], eliminate: Iterable[str],
               prune: str = "dominance") -> list[RateConstraint]:
    """Project a system ``A v >= b`` by eliminating ``eliminate`` one at a time.

    ``prune`` selects redundancy removal after each step: ``"none"``,
    ``"dominance"`` (parallel constraints keep the tightest bound) or ``"lp"``
    (dominance plus exact implication checks).
    """
    constraints = list(constraints)
    names: list[str] = []
    for c in constraints:
        for v in c.coeffs:
            if v not in names:
                names.append(v)
    A, b = _to_matrix(constraints, names)
    labels = [c.label for c in constraints]
    for v in eliminate:
        if v not in names:
            warnings.warn(f"eliminating {v!r}, which appears in no constraint", stacklevel=2)
            continue
        j = names.index(v)
        col = A[:, j]
        pos, neg = np.flatnonzero(col > _TOL), np.flatnonzero(col < -_TOL)
        zero = np.flatnonzero(np.abs(col) <= _TOL)
        rows = [A[zero]]
        rhs = [b[zero]]
        new_labels = [labels[k] for k in zero]
        if len(pos) and len(neg):
            P = A[pos] / col[pos, None]
            N = A[neg] / -col[neg, None]
            bp = b[pos] / col[pos]
            bn = b[neg] / -col[neg]
            rows.append((P[:, None, :] + N[None, :, :]).reshape(-1, A.shape[1]))
            rhs.append((bp[:, None] + bn[None, :]).ravel())
            new_labels += [f"{labels[p]}+{labels[n]}" for p in pos for n in neg]
        A = np.delete(np.vstack(rows), j, axis=1)
        b = np.concatenate(rhs)
        A[np.abs(A) <= _TOL] = 0.0
        names.pop(j)
        labels = new_labels
        if prune != "none":
            A, b, labels = _prune_with_labels(A, b, labels, prune)
    out = []
    for row, bound, lab in zip(A, b, labels):
        coeffs = {n: a for n, a in zip(names, row) if a != 0}
        if not coeffs:
            if bound <= 1e-9:
                continue
            coeffs = {}
        out.append(_constraint(coeffs, bound, lab))
    return out


def _constraint(coeffs, bound, label):
    c = RateConstraint.__new__(RateConstraint)
    object.__setattr__(c, "coeffs", {k: float(v) for k, v in coeffs.items()})
    object.__setattr__(c, "bound", float(bound))
    object.__setattr__(c, "label", label)
    return c


def _prune_with_labels(A, b, labels, mode):
    """Normalize rows, keep the tightest per direction, optionally drop LP-implied rows."""
    coef, bb = A.copy(), b.copy()
    keep: dict[tuple, int] = {}
    contradiction = None
    for i in range(len(bb)):
        scale = np.abs(coef[i]).max() if coef.shape[1] else 0.0
        if scale <= _TOL:
            if bb[i] > 1e-9:
                contradiction = i
            continue
        coef[i] /= scale
        bb[i] /= scale
        key = tuple(np.round(coef[i], 12))
        j = keep.get(key)
        if j is None or bb[i] > bb[j]:
            keep[key] = i
    rows = sorted(keep.values())
    if contradiction is not None:
        rows.append(contradiction)
    coef, bb = coef[rows], bb[rows]
    labels = [labels[r] for r in rows]
    if mode == "lp" and len(bb) > 1 and coef.shape[1]:
        active = list(range(len(bb)))
        for i in range(len(bb)):
            others = [j for j in active if j != i]
            if not others or np.abs(coef[i]).max() <= _TOL:
                continue
            res = linprog(coef[i], A_ub=-coef[others], b_ub=-bb[others],
                          bounds=[(None, None)] * coef.shape[1], method="highs")
            if res.status == 0 and res.fun >= bb[i] - 1e-9:
                active = others
        coef, bb = coef[active], bb[active]
        labels = [labels[r] for r in active]
    return coef, bb, labels
