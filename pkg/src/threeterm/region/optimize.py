"""Search over auxiliary kernels.

A problem is a base pmf, a list of kernel slots (each a new variable drawn
given named variables), a map from the extended joint to named rate
expressions and a list of distortion constraints. The search minimizes a
weighted sum of the rate expressions.

Local steps run SLSQP on row-wise softmax parameters; starts are the constant
kernel, copy kernels, caller-provided kernels and random Dirichlet draws. Every
reported value is recomputed exactly at the returned kernels.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from ..info import DistortionMatrix, JointPmf, extend_with_kernel, optimal_reconstruction

DEFAULT_SEED = 20240601
FEAS_TOL = 1e-12


class InfeasibleDistortion(ValueError):
    """No auxiliary choice can meet the distortion targets."""


class InfeasibleWithinBudget(RuntimeError):
    """The search found no feasible kernel; feasibility is not ruled out."""


@dataclass(frozen=True)
class Slot:
    name: str
    cardinality: int
    given: tuple[str, ...]


@dataclass(frozen=True)
class Reconstruction:
    label: str
    source: str
    observed: tuple[str, ...]
    d: DistortionMatrix
    target: float | None


@dataclass
class AuxProblem:
    base: JointPmf
    slots: list[Slot]
    expressions: Callable[[JointPmf], dict[str, float]]
    reconstructions: list[Reconstruction] = field(default_factory=list)
    # optional extra seeds; each is a dict slot name -> kernel
    seeds: list[dict] = field(default_factory=list)

    def shapes(self) -> list[tuple[int, ...]]:
        sizes = dict(self.base.sizes)
        out = []
        for s in self.slots:
            out.append(tuple(sizes[g] for g in s.given) + (s.cardinality,))
            sizes[s.name] = s.cardinality
        return out

    def joint(self, kernels: Mapping[str, np.ndarray], check: bool = True) -> JointPmf:
        if check:
            j = self.base
            for s in self.slots:
                j = extend_with_kernel(j, s.name, kernels[s.name], s.given)
            return j
        # search-internal kernels are valid by construction; skip per-slot validation
        names = list(self.base.names)
        mass = np.asarray(self.base.mass)
        for s in self.slots:
            nd = mass.ndim
            axes = [names.index(g) for g in s.given]
            mass = np.einsum(mass, list(range(nd)), np.asarray(kernels[s.name]), axes + [nd], list(range(nd + 1)))
            names.append(s.name)
        return JointPmf(tuple(names), mass)

    def evaluate(self, kernels, check: bool = True):
        j = self.joint(kernels, check)
        dist = {}
        for r in self.reconstructions:
            _, dist[r.label] = optimal_reconstruction(j, r.source, r.observed, r.d)
        return self.expressions(j), dist

    def excess(self, dist: Mapping[str, float]) -> float:
        """Largest distortion overshoot (<= 0 when every target is met)."""
        worst = -np.inf
        for r in self.reconstructions:
            if r.target is not None:
                worst = max(worst, dist[r.label] - r.target)
        return worst


@dataclass
class SearchParams:
    restarts: int = 6
    iterations: int = 150
    seed: int = DEFAULT_SEED
    snap: float = 1e-7


@dataclass
class AuxResult:
    kernels: dict[str, np.ndarray]
    rates: dict[str, float]
    distortions: dict[str, float]
    objective: float
    feasible: bool
    status: str
    starts: int = 0

    def recon_tables(self, problem: AuxProblem) -> dict[str, np.ndarray]:
        j = problem.joint(self.kernels)
        return {r.label: optimal_reconstruction(j, r.source, r.observed, r.d)[0] for r in problem.reconstructions}


def _objective(rates: Mapping[str, float], weights: Mapping[str, float]) -> float:
    return float(sum(w * rates[k] for k, w in weights.items() if w))


def _constant_kernels(problem: AuxProblem) -> dict:
    out = {}
    for s, shape in zip(problem.slots, problem.shapes()):
        k = np.zeros(shape)
        k[..., 0] = 1.0
        out[s.name] = k
    return out


def _copy_kernels(problem: AuxProblem, which: str) -> dict | None:
    """Copy the first conditioning variable (``"first"``) or all of them (``"all"``)."""
    out = {}
    for s, shape in zip(problem.slots, problem.shapes()):
        cond = shape[:-1]
        k = np.zeros(shape)
        if which == "first" and cond and cond[0] <= s.cardinality:
            idx = np.indices(cond)[0]
        elif which == "all" and int(np.prod(cond)) <= s.cardinality:
            idx = np.ravel_multi_index(np.indices(cond), cond) if cond else np.zeros((), int)
        else:
            idx = np.zeros(cond, dtype=int)
        np.put_along_axis(k, np.asarray(idx)[..., None], 1.0, axis=-1)
        out[s.name] = k
    return out


class _Search:
    def __init__(self, problem: AuxProblem, weights: Mapping[str, float], params: SearchParams):
        self.p = problem
        self.w = dict(weights)
        self.params = params
        self.shapes = problem.shapes()
        self.best = None  # (objective, flat, kernels, rates, dist)
        self.best_infeasible = None
        self.slot_names = {s.name for s in problem.slots}

    # bookkeeping -----------------------------------------------------------
    def consider(self, kernels):
        rates, dist = self.p.evaluate(kernels)
        obj = _objective(rates, self.w)
        feas = self.p.excess(dist) <= FEAS_TOL
        flat = tuple(np.concatenate([kernels[s.name].ravel() for s in self.p.slots]).round(12))
        rec = (obj, flat, kernels, rates, dist)
        if feas:
            if self.best is None or obj < self.best[0] - 1e-12 or (abs(obj - self.best[0]) <= 1e-12 and flat < self.best[1]):
                self.best = rec
        else:
            score = self.p.excess(dist)
            if self.best_infeasible is None or score < self.best_infeasible[0]:
                self.best_infeasible = (score,) + rec
        return obj, feas

    # parametrization -------------------------------------------------------
    def unpack(self, theta):
        out, pos = {}, 0
        for s, shape in zip(self.p.slots, self.shapes):
            n = int(np.prod(shape))
            z = theta[pos:pos + n].reshape(shape)
            pos += n
            z = z - z.max(axis=-1, keepdims=True)
            e = np.exp(z)
            out[s.name] = e / e.sum(axis=-1, keepdims=True)
        return out

    def pack(self, kernels, smooth=1e-3):
        parts = []
        for s in self.p.slots:
            k = kernels[s.name]
            k = (1 - smooth) * k + smooth / k.shape[-1]
            parts.append(np.log(k).ravel())
        return np.concatenate(parts)

    def tables(self, kernels, mode: str):
        """Reconstruction tables to hold fixed during a local step."""
        j = self.p.joint(kernels)
        out = {}
        for r in self.p.reconstructions:
            table, _ = optimal_reconstruction(j, r.source, r.observed, r.d)
            if mode == "label":
                slot_vars = [v for v in r.observed if v in self.slot_names]
                if slot_vars:
                    ax = r.observed.index(slot_vars[-1])
                    sizes = [j.size(v) for v in r.observed]
                    table = np.indices(sizes)[ax] % r.d.recon_size
            out[r.label] = table
        return out

    def local(self, kernels, mode: str = "optimal"):
        """Alternate kernel steps under fixed tables with exact table updates."""
        tables = self.tables(kernels, mode)
        theta = self.pack(kernels)
        for _ in range(4):
            theta = self._kernel_step(theta, tables)
            new = self.tables(self.unpack(theta), "optimal")
            if all(np.array_equal(new[k], tables[k]) for k in tables):
                break
            tables = new
        return self.unpack(theta)

    def _kernel_step(self, theta0, tables):
        def f(theta):
            rates = self.p.expressions(self.p.joint(self.unpack(theta), check=False))
            return _objective(rates, self.w)

        targeted = [r for r in self.p.reconstructions if r.target is not None]

        def g(theta):
            j = self.p.joint(self.unpack(theta), check=False)
            out = np.empty(len(targeted))
            for i, r in enumerate(targeted):
                cost = j.marginal_mass(r.observed + (r.source,)) @ r.d.values
                out[i] = r.target - np.take_along_axis(cost, tables[r.label][..., None], axis=-1).sum()
            return out

        cons = [{"type": "ineq", "fun": g}] if targeted else []
        res = minimize(f, theta0, method="SLSQP", constraints=cons,
                       options={"maxiter": self.params.iterations, "ftol": 1e-12})
        return res.x

    def snap(self, kernels):
        out = {}
        for name, k in kernels.items():
            k = np.where(k < self.params.snap, 0.0, k)
            out[name] = k / k.sum(axis=-1, keepdims=True)
        return out

    def repair(self, kernels):
        """Mix toward the best feasible kernels until the targets hold."""
        if self.best is None:
            return None
        anchor = self.best[2]

        def mix(t):
            return {n: (1 - t) * kernels[n] + t * anchor[n] for n in kernels}

        lo, hi = 0.0, 1.0
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            _, dist = self.p.evaluate(mix(mid))
            if self.p.excess(dist) <= FEAS_TOL:
                hi = mid
            else:
                lo = mid
        return mix(hi)

    def refine(self, kernels, mode="optimal"):
        k = self.local(kernels, mode)
        for cand in (k, self.snap(k)):
            _, feas = self.consider(cand)
            if not feas:
                fixed = self.repair(cand)
                if fixed is not None:
                    self.consider(fixed)


def optimize_aux(problem: AuxProblem, weights: Mapping[str, float],
                 params: SearchParams | None = None,
                 initial: Sequence[Mapping[str, np.ndarray]] = ()) -> AuxResult:
    """Minimize ``sum(weights[k] * rates[k])`` subject to the distortion targets."""
    params = params or SearchParams()
    if params.restarts < 0 or params.iterations < 1:
        raise ValueError("search parameters must be positive")
    search = _Search(problem, weights, params)
    seeds = [_constant_kernels(problem), _copy_kernels(problem, "first"), _copy_kernels(problem, "all")]
    seeds += [dict(s) for s in problem.seeds] + [dict(s) for s in initial]
    for s in seeds:
        search.consider(s)
    starts = list(seeds[1:])
    for idx in range(params.restarts):
        rng = np.random.default_rng(np.random.SeedSequence([params.seed, idx]))
        starts.append({s.name: rng.dirichlet(np.ones(shape[-1]), size=shape[:-1])
                       for s, shape in zip(problem.slots, search.shapes)})
    for idx, s in enumerate(starts):
        search.refine(s, "label" if idx % 2 else "optimal")
    n = len(seeds) + len(starts)
    if search.best is None:
        _, obj, _, kern, rates, dist = search.best_infeasible
        return AuxResult(kern, rates, dist, obj, False, "infeasible-within-budget", n)
    obj, _, kern, rates, dist = search.best
    return AuxResult(kern, rates, dist, obj, True, "ok", n)
