"""Simulation instances shared by the simulator tests and the acceptance script.

Runs are cached per process so each Monte Carlo experiment executes once.
"""
from functools import lru_cache

import numpy as np

from threeterm.info import JointPmf, entropy
from threeterm.region.schedule import AuxSchedule
from threeterm.sim.cbt import CbtConfig, CbtRates, copy_kernels
from threeterm.sim.harness import estimate_error
from threeterm.sim.interactive import InteractiveConfig, suggest_rates
from threeterm.sim.report import SimParams

SEED = 7
TRIALS = 200
PARAMS = SimParams(delta=30.0)


def erasure_pmf(x3: bool = True) -> JointPmf:
    """X1 a uniform bit, X2 = X1 or erased (symbol 2) with probability 1/2, X3 the erasure flag."""
    m = np.zeros((2, 3, 2 if x3 else 1))
    for x in (0, 1):
        m[x, x, 0] = 0.25
        m[x, 2, 1 if x3 else 0] = 0.25
    return JointPmf(("X1", "X2", "X3"), m)


def cbt_bounds(pmf: JointPmf) -> tuple[float, float, float]:
    return (entropy(pmf, "X1", "X2"), entropy(pmf, "X2", ("X1", "X3")),
            entropy(pmf, ("X1", "X2"), "X3"))


def cbt_rates_above(margin: float, cover: float = 0.1) -> CbtRates:
    """Each bound met with ``margin`` to spare; codebook rates ``cover`` above covering."""
    pmf = erasure_pmf()
    b1, b2, bs = cbt_bounds(pmf)
    r1 = b1 + margin
    r2 = max(b2 + margin, bs + margin - r1)
    return CbtRates(r1, r2, entropy(pmf, "X1") + cover, entropy(pmf, "X2", "X1") + cover)


def cbt_rates_below(gap: float = 0.2) -> CbtRates:
    """Sum rate ``gap`` below the sum bound, single-rate bounds still met."""
    pmf = erasure_pmf()
    b1, _, bs = cbt_bounds(pmf)
    r1 = b1 + 0.1
    return CbtRates(r1, bs - gap - r1, entropy(pmf, "X1") + 0.1, entropy(pmf, "X2", "X1") + 0.1)


def cbt_config(rates: CbtRates, n: int) -> CbtConfig:
    pmf = erasure_pmf()
    k1, k2 = copy_kernels(pmf)
    return CbtConfig(pmf, k1, k2, rates, n, PARAMS)


@lru_cache(maxsize=None)
def cbt_failure(kind: str, value: float, n: int, trials: int = TRIALS) -> float:
    rates = cbt_rates_above(value) if kind == "above" else cbt_rates_below(value)
    return estimate_error(cbt_config(rates, n), trials, SEED).p_hat("failure")


def kaspi_schedule() -> AuxSchedule:
    """One round: node 1 sends X1 to node 2 and node 2 answers with X2, both as plain copies."""
    s = AuxSchedule(1)
    s.add(1, "2", 1, 2, np.eye(2))
    s.add(2, "1", 1, 3, np.broadcast_to(np.eye(3)[:, None, :], (3, 2, 3)).copy())
    return s


def kaspi_config(n: int, margin: float = 0.2, cover: float = 0.1) -> InteractiveConfig:
    pmf = erasure_pmf(x3=False)
    sched = kaspi_schedule()
    return InteractiveConfig(pmf, sched, suggest_rates(pmf, sched, margin, cover), n, PARAMS)


@lru_cache(maxsize=None)
def kaspi_success(n: int, trials: int = TRIALS) -> float:
    return 1.0 - estimate_error(kaspi_config(n), trials, SEED).p_hat("failure")
