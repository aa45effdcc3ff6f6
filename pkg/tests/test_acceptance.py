"""Acceptance criteria 1-9, one PASS/FAIL line each.

Run under pytest or directly with ``python3 tests/test_acceptance.py``. Simulation
runs are cached per process and shared with the simulator tests.
"""
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import numpy as np
import pytest

import scenarios
from conftest import random_kernel, random_pmf
import test_gm as gm_tests
import test_region as region_tests
import test_sim as sim_tests
from threeterm.gaussian_mixture import GmSource, compare_curves, default_grid, gm_r2
from threeterm.info import entropy, extend_with_kernel, markov_check, mutual_info
from threeterm.sim.cbt import run_cbt_trial


def c1():
    assert abs(gm_r2(gm_tests.S2, 0.25) - 0.6) <= 1e-9
    assert abs(gm_r2(gm_tests.S2, 0.6) - 0.020752) <= 1e-6
    assert gm_r2(gm_tests.S2, 0.65) == 0.0


def c2():
    gm_tests.TestCurves().test_scenarios()


def c3():
    src = GmSource(0.1, 2.0, 2.0)
    for r in compare_curves(src, default_grid(src, 50)):
        assert abs(r["coop_R2"] - r["noncoop_R2"]) < 1e-8


def c4():
    region_tests.TestLossless().test_random_ternary_against_direct_entropies()


def c5():
    for q, D in region_tests.ORACLE_INSTANCES:
        region_tests.TestOptimizer().test_matches_grid(q, D)


def c6():
    t = region_tests.TestSpecializations()
    t.test_wyner_ziv()
    t.test_berger_tung()
    t.test_heegard_berger()
    t.test_kaspi(1)
    t.test_kaspi(2)
    t.test_helper()


def c7():
    region_tests.TestFourierMotzkin().test_soundness_single_elimination("lp")
    region_tests.TestFourierMotzkin().test_soundness_chain_elimination()
    for seed in range(5):
        region_tests.TestPrivateSubsystem().test_hatted_rates_eliminate_to_private_bounds(seed)


def c8():
    cfg = scenarios.cbt_config(scenarios.cbt_rates_above(0.4), 8)
    for t in range(5):
        assert run_cbt_trial(cfg, scenarios.SEED, t).to_dict() == run_cbt_trial(cfg, scenarios.SEED, t).to_dict()
    sim_tests.TestCbt().test_failure_shrinks_with_block_length()
    sim_tests.TestCbt().test_sum_rate_below_bound_fails()
    sim_tests.TestTypicalCheck().test_joint_implies_marginal()


def c9():
    rng = np.random.default_rng(9)
    for _ in range(1000):
        sizes = tuple(int(s) for s in rng.integers(1, 5, size=3))
        p = random_pmf(rng, sizes)
        x1, x2, x3 = p.names
        for a, b, c in ((x1, x2, x3), (x2, x3, x1), (x3, x1, x2)):
            assert entropy(p, a) >= -1e-12 and entropy(p, a, b) >= -1e-12
            assert entropy(p, a) >= entropy(p, a, b) - 1e-12
            assert mutual_info(p, a, b) >= -1e-10 and mutual_info(p, a, b, c) >= -1e-10
        chain = entropy(p, x1) + entropy(p, x2, x1) + entropy(p, x3, (x1, x2))
        assert abs(entropy(p, (x1, x2, x3)) - chain) <= 1e-12
        q = extend_with_kernel(p, "Y", random_kernel(rng, (sizes[1], int(rng.integers(1, 5)))), x2)
        assert markov_check(q, (x1, x2, "Y")) < 1e-12
        assert mutual_info(q, x1, "Y") <= mutual_info(q, x1, x2) + 1e-10


# (number, title, runtime limit in seconds or None, check)
CRITERIA = [
    (1, "gaussian-mixture spot values", 1, c1),
    (2, "cooperative gain in both mixture scenarios", 10, c2),
    (3, "no gain for equal component variances", None, c3),
    (4, "lossless region equals conditional entropies", None, c4),
    (5, "auxiliary optimizer against exhaustive grid", 60, c5),
    (6, "specialization identities", None, c6),
    (7, "Fourier-Motzkin soundness and private-rate elimination", None, c7),
    (8, "simulator properties", 300, c8),
    (9, "information identities on 1000 pmfs", 30, c9),
]


def evaluate(number, title, limit, check):
    start = time.perf_counter()
    err = None
    try:
        check()
    except AssertionError as e:
        err = f"assertion failed {e}".strip()
    elapsed = time.perf_counter() - start
    if err is None and limit is not None and elapsed > limit:
        err = f"took {elapsed:.1f} s, limit {limit} s"
    status = "PASS" if err is None else "FAIL"
    line = f"criterion {number} {status} ({elapsed:.2f} s) {title}" + ("" if err is None else f": {err}")
    return err is None, line


@pytest.mark.parametrize("number,title,limit,check", CRITERIA, ids=[f"criterion_{c[0]}" for c in CRITERIA])
def test_criterion(number, title, limit, check, capsys):
    ok, line = evaluate(number, title, limit, check)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [evaluate(*c) for c in CRITERIA]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
