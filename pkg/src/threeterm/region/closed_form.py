"""Single-letter regions for the cooperative special cases and the lossless case."""
from __future__ import annotations

from typing import Mapping

import numpy as np

from ..info import DistortionMatrix, JointPmf, entropy, marginalize, markov_check, mutual_info
from .constraints import RateConstraint, RateRegion
from .optimize import (AuxProblem, AuxResult, InfeasibleDistortion, InfeasibleWithinBudget, Reconstruction,
                       SearchParams, Slot, optimize_aux)

MARKOV_TOL = 1e-9


def _dm(d, source: str) -> DistortionMatrix:
    return d[source] if isinstance(d, Mapping) else d


def _cap(bound: int, cap: int | None) -> int:
    return bound if cap is None else max(1, min(bound, cap))


def _floor_distortion(pmf: JointPmf, source: str, d: DistortionMatrix) -> float:
    """Distortion when the decoder knows the source exactly."""
    p = pmf.marginal_mass((source,))
    return float(np.sum(p * d.values.min(axis=1)))


def _check_targets(pmf: JointPmf, items) -> None:
    for label, source, d, target in items:
        if target is None:
            continue
        if target < 0:
            raise ValueError(f"{label} must be nonnegative")
        floor = _floor_distortion(pmf, source, d)
        if target < floor - 1e-12:
            raise InfeasibleDistortion(f"{label}={target} is below the smallest achievable value {floor:.12g}")


def _solve(problem: AuxProblem, weights, params, initial=()) -> AuxResult:
    res = optimize_aux(problem, weights, params, initial)
    if not res.feasible:
        raise InfeasibleWithinBudget(f"no kernel met the distortion targets after {res.starts} starts")
    return res


def _sample(res: AuxResult, rate_keys: Mapping[str, str]):
    return ({k: res.rates[v] for k, v in rate_keys.items()}, dict(res.distortions))


# t2: target D32 ------------------------------------------------------------

def theorem2_problem(pmf: JointPmf, d: DistortionMatrix, D32: float | None, max_card: int | None = None):
    base = marginalize(pmf, ("X1", "X2"))
    card = _cap(base.size("X1") * base.size("X2") + 1, max_card)

    def rates(j):
        extra = mutual_info(j, "X2", "U", "X1")
        return {"R1": entropy(j, "X1", "X2"), "R2": extra, "R1+R2": entropy(j, "X1") + extra}

    return AuxProblem(base, [Slot("U", card, ("X1", "X2"))], rates,
                      [Reconstruction("D32", "X2", ("X1", "U"), _dm(d, "X2"), D32)])


def region_theorem2(pmf: JointPmf, d, D32: float, params: SearchParams | None = None,
                    max_card: int | None = None, initial=()) -> RateRegion:
    """Node 1 lossless to node 2, node 2 lossy to node 3 with node 1's help."""
    _check_targets(pmf, [("D32", "X2", _dm(d, "X2"), D32)])
    prob = theorem2_problem(pmf, d, D32, max_card)
    res = _solve(prob, {"R2": 1.0}, params, initial)
    r = res.rates
    cons = [RateConstraint({"R1": 1}, r["R1"], "R1"),
            RateConstraint({"R2": 1}, r["R2"], "R2"),
            RateConstraint({"R1": 1, "R2": 1}, r["R1+R2"], "R1+R2")]
    return RateRegion(cons, [_sample(res, {"R1": "R1", "R2": "R2", "sum": "R1+R2"})],
                      dict(res.distortions), {"search": {"R2": res}})


# t3: targets D12, D32 ------------------------------------------------------

def theorem3_problem(pmf: JointPmf, d, D12, D32, max_card: int | None = None):
    base = marginalize(pmf, ("X1", "X2", "X3"))
    n12 = base.size("X1") * base.size("X2")
    c13 = _cap(n12 + 2, max_card)
    c3 = _cap(n12 * c13 + 1, max_card)
    dm = _dm(d, "X2")

    def rates(j):
        return {"R1": entropy(j, "X1", "X2"),
                "R2": mutual_info(j, "U2>13", "X2", "X1") + mutual_info(j, "U2>3", "X2", ("U2>13", "X1", "X3")),
                "R1+R2": entropy(j, "X1", "X3") + mutual_info(j, ("U2>13", "U2>3"), "X2", ("X1", "X3"))}

    return AuxProblem(base, [Slot("U2>13", c13, ("X1", "X2")), Slot("U2>3", c3, ("X1", "X2", "U2>13"))], rates,
                      [Reconstruction("D12", "X2", ("X1", "U2>13"), dm, D12),
                       Reconstruction("D32", "X2", ("X1", "X3", "U2>13", "U2>3"), dm, D32)])


def region_theorem3(pmf: JointPmf, d, D12: float, D32: float, params: SearchParams | None = None,
                    max_card: int | None = 3, initial=()) -> RateRegion:
    """Node 2 describes its source to node 1 (common layer) and node 3 (both layers).

    The R2 and sum-rate constraints are minimized separately; each is a
    supporting line of the (convex) region.
    """
    dm = _dm(d, "X2")
    _check_targets(pmf, [("D12", "X2", dm, D12), ("D32", "X2", dm, D32)])
    prob = theorem3_problem(pmf, d, D12, D32, max_card)
    r2 = _solve(prob, {"R2": 1.0}, params, initial)
    rs = _solve(prob, {"R1+R2": 1.0}, params, list(initial) + [r2.kernels])
    cons = [RateConstraint({"R1": 1}, r2.rates["R1"], "R1"),
            RateConstraint({"R2": 1}, r2.rates["R2"], "R2"),
            RateConstraint({"R1": 1, "R2": 1}, rs.rates["R1+R2"], "R1+R2")]
    keys = {"R1": "R1", "R2": "R2", "sum": "R1+R2"}
    return RateRegion(cons, [_sample(r2, keys), _sample(rs, keys)], dict(r2.distortions),
                      {"search": {"R2": r2, "R1+R2": rs}})


# t4: targets D31, D12 ------------------------------------------------------

def theorem4_problem(pmf: JointPmf, d, D31, D12, max_card: int | None = None):
    base = marginalize(pmf, ("X1", "X2", "X3"))
    card = _cap(base.size("X1") * base.size("X2") + 3, max_card)

    def rates(j):
        return {"R1": entropy(j, "X1", "X2"),
                "R2": mutual_info(j, "U2>13", "X2", "X1") + entropy(j, "X2", ("U2>13", "X1", "X3")),
                "R1+R2": entropy(j, ("X1", "X2"), "X3")}

    return AuxProblem(base, [Slot("U2>13", card, ("X1", "X2"))], rates,
                      [Reconstruction("D31", "X1", ("X2", "X3", "U2>13"), _dm(d, "X1"), D31),
                       Reconstruction("D12", "X2", ("X1", "U2>13"), _dm(d, "X2"), D12)])


def region_theorem4(pmf: JointPmf, d, D31: float, D12: float, params: SearchParams | None = None,
                    max_card: int | None = 4, initial=()) -> RateRegion:
    """Lossless X1 to node 2 and X2 to node 3, lossy X1 at node 3 and X2 at node 1."""
    _check_targets(pmf, [("D31", "X1", _dm(d, "X1"), D31), ("D12", "X2", _dm(d, "X2"), D12)])
    prob = theorem4_problem(pmf, d, D31, D12, max_card)
    res = _solve(prob, {"R2": 1.0}, params, initial)
    r = res.rates
    cons = [RateConstraint({"R1": 1}, r["R1"], "R1"),
            RateConstraint({"R2": 1}, r["R2"], "R2"),
            RateConstraint({"R1": 1, "R2": 1}, r["R1+R2"], "R1+R2")]
    return RateRegion(cons, [_sample(res, {"R1": "R1", "R2": "R2", "sum": "R1+R2"})],
                      dict(res.distortions), {"search": {"R2": res}})


# t5: K rounds, X1-X3-X2 ----------------------------------------------------

def theorem5_problem(pmf: JointPmf, d, D: Mapping[str, float | None], K: int, max_card: int | None = None):
    base = marginalize(pmf, ("X1", "X2", "X3"))
    s1, s2, s3 = (base.size(x) for x in ("X1", "X2", "X3"))
    slots: list[Slot] = []
    history: list[str] = []
    past = 1
    for l in range(1, K + 1):
        a, b = f"U1>23_{l}", f"U2>13_{l}"
        ca = _cap(s1 * s3 * past + 1, max_card)
        slots.append(Slot(a, ca, ("X1", "X3") + tuple(history)))
        cb = _cap(s2 * ca * past + 1, max_card)
        slots.append(Slot(b, cb, ("X2",) + tuple(history) + (a,)))
        if l == K:
            # the final private description depends on the history before node 2 speaks in round K
            w2k = tuple(history) + (a,)
        history += [a, b]
        past *= ca * cb
    priv = Slot(f"U1>3_{K}", _cap(s1 * s3 * past + 3, max_card), ("X1", "X3") + w2k)
    # generated right after the last common description of node 1 in generation order;
    # position does not matter for the joint because its conditioning set is already available
    slots.append(priv)
    W = tuple(history)
    u = priv.name

    def rates(j):
        return {"R1": mutual_info(j, W, ("X1", "X3"), "X2") + mutual_info(j, u, "X1", W + ("X3",)),
                "R2": mutual_info(j, W, "X2", "X3")}

    d1, d2 = _dm(d, "X1"), _dm(d, "X2")
    recon = [Reconstruction("D12", "X2", ("X1", "X3", u) + W, d2, D.get("D12")),
             Reconstruction("D21", "X1", ("X2",) + W, d1, D.get("D21")),
             Reconstruction("D31", "X1", ("X3",) + W + (u,), d1, D.get("D31")),
             Reconstruction("D32", "X2", ("X3",) + W + (u,), d2, D.get("D32"))]
    return AuxProblem(base, slots, rates, recon)


def embed_rounds(kernels: Mapping[str, np.ndarray], pmf: JointPmf, d, D, K_from: int, K_to: int,
                 max_card=None) -> dict:
    """Lift a K_from-round solution to K_to rounds by appending constant rounds."""
    target = theorem5_problem(pmf, d, D, K_to, max_card)
    out = {}
    for s, shape in zip(target.slots, target.shapes()):
        k = np.zeros(shape)
        k[..., 0] = 1.0
        out[s.name] = k
    src = theorem5_problem(pmf, d, D, K_from, max_card)
    for s, shape in zip(src.slots, src.shapes()):
        name = s.name if not s.name.startswith("U1>3_") else f"U1>3_{K_to}"
        tgt_shape = dict(zip([t.name for t in target.slots], target.shapes()))[name]
        kern = np.asarray(kernels[s.name])
        if kern.shape[-1] > tgt_shape[-1]:
            raise ValueError("cannot embed: target cardinality too small")
        # pad the output alphabet, then broadcast over conditioning variables that
        # the longer schedule adds (all of them are constants of the added rounds)
        padded = np.zeros(kern.shape[:-1] + (tgt_shape[-1],))
        padded[..., :kern.shape[-1]] = kern
        extra = len(tgt_shape) - len(kern.shape)
        if extra:
            padded = _insert_axes(padded, s, [t for t in target.slots if t.name == name][0], tgt_shape)
        out[name] = padded
    return out


def _insert_axes(kern, src_slot: Slot, tgt_slot: Slot, tgt_shape):
    """Broadcast ``kern`` over conditioning variables present only in ``tgt_slot``."""
    idx = [tgt_slot.given.index(g) for g in src_slot.given]
    shape = [1] * len(tgt_slot.given) + [tgt_shape[-1]]
    for pos, g in zip(idx, src_slot.given):
        shape[pos] = kern.shape[src_slot.given.index(g)]
    order = np.argsort(idx)
    k = np.transpose(kern, list(order) + [len(idx)]).reshape(shape)
    return np.broadcast_to(k, tgt_shape).copy()


def region_theorem5(pmf: JointPmf, d, D: Mapping[str, float | None], K: int = 1,
                    params: SearchParams | None = None, max_card: int | None = 3,
                    nested: bool = True, initial=()) -> RateRegion:
    """Two cooperating encoders, degraded side information X1 - X3 - X2 at node 3."""
    if K < 1:
        raise ValueError("K must be at least 1")
    dev = markov_check(pmf, ("X1", "X3", "X2"))
    if dev > MARKOV_TOL:
        raise ValueError(f"sources violate X1 - X3 - X2 (deviation {dev:.3g}); the closed form does not apply")
    d1, d2 = _dm(d, "X1"), _dm(d, "X2")
    _check_targets(pmf, [("D12", "X2", d2, D.get("D12")), ("D21", "X1", d1, D.get("D21")),
                         ("D31", "X1", d1, D.get("D31")), ("D32", "X2", d2, D.get("D32"))])
    prob = theorem5_problem(pmf, d, D, K, max_card)
    seeds = list(initial)
    if nested and K > 1:
        prev = region_theorem5(pmf, d, D, K - 1, params, max_card, nested)
        for res in prev.info["search"].values():
            seeds.append(embed_rounds(res.kernels, pmf, d, D, K - 1, K, max_card))
    r1 = _solve(prob, {"R1": 1.0}, params, seeds)
    r2 = _solve(prob, {"R2": 1.0}, params, seeds + [r1.kernels])
    cons = [RateConstraint({"R1": 1}, r1.rates["R1"], "R1"),
            RateConstraint({"R2": 1}, r2.rates["R2"], "R2")]
    keys = {"R1": "R1", "R2": "R2"}
    return RateRegion(cons, [_sample(r1, keys), _sample(r2, keys)], dict(r1.distortions),
                      {"search": {"R1": r1, "R2": r2}, "K": K})


# t7: lossless --------------------------------------------------------------

def region_lossless(pmf: JointPmf) -> RateRegion:
    """Every node recovers both other sources exactly."""
    cons = []
    for i in (1, 2, 3):
        others = tuple(f"X{j}" for j in (1, 2, 3) if j != i)
        cons.append(RateConstraint({f"R{i}": 1}, entropy(pmf, f"X{i}", others), f"R{i}"))
    for i, j in ((1, 2), (1, 3), (2, 3)):
        k = 6 - i - j
        cons.append(RateConstraint({f"R{i}": 1, f"R{j}": 1}, entropy(pmf, (f"X{i}", f"X{j}"), f"X{k}"),
                                   f"R{i}+R{j}"))
    return RateRegion(cons)
