"""Per-round rate bounds of the K-round interactive inner bound."""
from __future__ import annotations

from typing import Mapping

import numpy as np

from ..info import DistortionMatrix, JointPmf, mutual_info, optimal_reconstruction
from .constraints import TOTALS, RateConstraint, RateRegion
from .fm import fm_project
from .schedule import (COMMON, SOURCES, AuxSchedule, Key, canonical_order, common_history as W,
                       private_history as V, rate_name)


def _c(i: int, l: int) -> Key:
    return (i, COMMON[i], l)


def _p(i: int, j: int, l: int) -> Key:
    return (i, str(j), l)


def bound_terms(l: int):
    """The fifteen bounds of round ``l``.

    Each entry is ``(tag, decoder, lhs keys, target sources, description keys,
    side sources, history keys)`` and reads
    ``sum of rates(lhs) >= I(targets; descriptions | side, history)``.
    """
    return [
        ("c1@2", 2, [_c(1, l)], ["X1"], [_c(1, l)], ["X2"], W(1, l) + V("12", l, 1) + V("23", l - 1, 3)),
        ("c2@3", 3, [_c(2, l)], ["X2"], [_c(2, l)], ["X3"], W(2, l) + V("13", l, 1) + V("23", l, 2)),
        ("c3@1", 1, [_c(3, l)], ["X3"], [_c(3, l)], ["X1"], W(3, l) + V("12", l, 2) + V("13", l, 3)),
        ("c12@3", 3, [_c(1, l), _c(2, l)], ["X1", "X2"], [_c(1, l), _c(2, l)], ["X3"],
         W(1, l) + V("13", l, 1) + V("23", l, 2)),
        ("c23@1", 1, [_c(2, l), _c(3, l)], ["X2", "X3"], [_c(2, l), _c(3, l)], ["X1"],
         W(2, l) + V("12", l, 2) + V("13", l, 3)),
        ("c13@2", 2, [_c(1, l), _c(3, l - 1)], ["X1", "X3"], [_c(1, l), _c(3, l - 1)], ["X2"],
         W(3, l - 1) + V("12", l, 1) + V("23", l - 1, 3)),
        ("p32@2", 2, [_p(3, 2, l - 1)], ["X3"], [_p(3, 2, l - 1)], ["X2"],
         W(2, l) + V("23", l - 1, 3) + V("12", l, 2)),
        ("p12@2", 2, [_p(1, 2, l)], ["X1"], [_p(1, 2, l)], ["X2"], W(2, l) + V("23", l, 2) + V("12", l, 1)),
        ("p12+p32@2", 2, [_p(1, 2, l), _p(3, 2, l - 1)], ["X1", "X3"], [_p(1, 2, l), _p(3, 2, l - 1)], ["X2"],
         W(2, l) + V("23", l - 1, 3) + V("12", l, 1)),
        ("p13@3", 3, [_p(1, 3, l)], ["X1"], [_p(1, 3, l)], ["X3"], W(3, l) + V("23", l, 3) + V("13", l, 1)),
        ("p23@3", 3, [_p(2, 3, l)], ["X2"], [_p(2, 3, l)], ["X3"], W(3, l) + V("23", l, 2) + V("13", l, 3)),
        ("p13+p23@3", 3, [_p(1, 3, l), _p(2, 3, l)], ["X1", "X2"], [_p(1, 3, l), _p(2, 3, l)], ["X3"],
         W(3, l) + V("23", l, 2) + V("13", l, 1)),
        ("p21@1", 1, [_p(2, 1, l)], ["X2"], [_p(2, 1, l)], ["X1"], W(1, l + 1) + V("12", l, 2) + V("13", l + 1, 1)),
        ("p31@1", 1, [_p(3, 1, l)], ["X3"], [_p(3, 1, l)], ["X1"], W(1, l + 1) + V("12", l + 1, 1) + V("13", l, 3)),
        ("p21+p31@1", 1, [_p(2, 1, l), _p(3, 1, l)], ["X2", "X3"], [_p(2, 1, l), _p(3, 1, l)], ["X1"],
         W(1, l + 1) + V("12", l, 2) + V("13", l, 3)),
    ]


def _in_range(key: Key, K: int) -> bool:
    return 1 <= key[2] <= K


def theorem1_bounds(joint: JointPmf, schedule: AuxSchedule) -> list[RateConstraint]:
    """Per-description lower bounds evaluated on the extended joint.

    Constant descriptions carry no bits, so their rates are fixed at zero and
    left out of every constraint.
    """
    K = schedule.K
    active = set(schedule.active())
    out = []
    for l in range(1, K + 2):
        for tag, _dec, lhs, targets, descr, side, hist in bound_terms(l):
            lhs = [k for k in lhs if _in_range(k, K) and k in active]
            if not lhs:
                continue
            descr_names = schedule.present(descr)
            given = tuple(side) + tuple(n for n in dict.fromkeys(schedule.present(hist)) if n not in descr_names)
            value = mutual_info(joint, targets, descr_names, given)
            out.append(RateConstraint({rate_name(k): 1.0 for k in lhs}, value, f"{tag}/l{l}"))
    return out


def decompositions(K: int, active=None) -> list[RateConstraint]:
    """Total rate of each node (and each pair) covers its per-description rates."""
    keys = [k for k in canonical_order(K) if active is None or k in active]
    out = []
    for group in ((1,), (2,), (3,), (1, 2), (1, 3), (2, 3)):
        coeffs = {f"R{i}": 1.0 for i in group}
        for k in keys:
            if k[0] in group:
                coeffs[rate_name(k)] = -1.0
        out.append(RateConstraint(coeffs, 0.0, "sum:" + "+".join(f"R{i}" for i in group)))
    return out


def table_distortion(joint: JointPmf, source: str, inputs, table: np.ndarray, d: DistortionMatrix) -> float:
    p = joint.marginal_mass(tuple(inputs) + (source,))
    cost = p @ d.values
    table = np.asarray(table, dtype=int)
    if table.shape != cost.shape[:-1]:
        raise ValueError(f"reconstruction table shape {table.shape} does not match inputs {cost.shape[:-1]}")
    return float(np.take_along_axis(cost, table[..., None], axis=-1).sum())


def eval_theorem1(pmf: JointPmf, schedule: AuxSchedule,
                  d: Mapping[str, DistortionMatrix] | DistortionMatrix | None = None,
                  pairs=None) -> RateRegion:
    """Evaluate every bound of the inner bound for a fixed schedule.

    The region is over the per-description rates and ``R1, R2, R3``. When a
    distortion measure is given, each reconstruction in ``pairs`` (default: all
    ordered pairs) is evaluated with the schedule's table, or with the best
    deterministic table when the schedule has none.
    """
    for s in SOURCES:
        pmf.axis(s)
    joint = schedule.extend(pmf)
    cons = theorem1_bounds(joint, schedule)
    active = schedule.active()
    cons += [RateConstraint({rate_name(k): 1.0}, 0.0, f"nonneg/{rate_name(k)}") for k in active]
    cons += decompositions(schedule.K, set(active))
    region = RateRegion(cons, info={"K": schedule.K})
    if d is not None:
        pairs = pairs if pairs is not None else [(i, j) for i in (1, 2, 3) for j in (1, 2, 3) if i != j]
        for i, j in pairs:
            dm = d[SOURCES[j - 1]] if isinstance(d, Mapping) else d
            inputs = schedule.recon_inputs(i, j)
            if (i, j) in schedule.recon:
                dist = table_distortion(joint, SOURCES[j - 1], inputs, schedule.recon[(i, j)], dm)
            else:
                _, dist = optimal_reconstruction(joint, SOURCES[j - 1], inputs, dm)
            region.distortions[f"D{i}{j}"] = dist
    return region


def total_rates(region: RateRegion) -> RateRegion:
    """Project a per-description region onto ``R1, R2, R3``."""
    eliminate = [v for v in region.variables if v not in TOTALS]
    cons = fm_project(region.constraints, eliminate, prune="lp")
    return RateRegion(cons, distortions=dict(region.distortions), info=dict(region.info))
