import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chisquare

import scenarios
from conftest import random_pmf
from oracles import wilson_upper
from threeterm.info import DistortionMatrix, JointPmf, optimal_reconstruction
from threeterm.region.schedule import AuxSchedule
from threeterm.region.theorem1 import theorem1_bounds
from threeterm.sim.cbt import CbtConfig, CbtRates, copy_kernels, distinct_rows, run_cbt_trial
from threeterm.sim.codebook import (Binning, draw_binning, draw_codebook, draw_superbinning, index_count, stream,
                                    typical_sampler)
from threeterm.sim.harness import aggregate, estimate_error, estimates_csv, wilson
from threeterm.sim.interactive import (InteractiveConfig, InteractiveTrial, run_interactive_trial,
                                       suggest_rates)
from threeterm.sim.report import SimParams, TrialReport
from threeterm.sim.typicality import (IntractableEnumeration, TypicalSetSampler, sample_conditional_typical,
                                      typical_check, typical_many)

BSC_JOINT = 0.5 * np.array([[0.8, 0.2], [0.2, 0.8]])


# --- typicality -------------------------------------------------------------

class TestTypicalCheck:
    def test_point_mass(self):
        pmf = JointPmf(("X",), np.array([0.0, 1.0, 0.0]))
        for delta in (1e-6, 1.0):
            assert typical_check({"X": np.ones(20, int)}, pmf, delta)

    def test_zero_mass_symbol(self):
        pmf = JointPmf(("X",), np.array([0.5, 0.5, 0.0]))
        seq = np.array([0, 1] * 10)
        assert typical_check({"X": seq}, pmf, 100.0)
        seq[3] = 2
        assert not typical_check({"X": seq}, pmf, 100.0)

    def test_frequency_count(self):
        pmf = JointPmf(("X",), np.array([0.5, 0.5]))
        seq = np.array([1, 1, 1, 1, 0, 0, 0, 0, 0, 0])
        assert typical_check({"X": seq}, pmf, 0.25)
        assert not typical_check({"X": seq}, pmf, 0.15)

    def test_positional_sequences(self):
        pmf = JointPmf(("X", "Y"), BSC_JOINT)
        x = np.array([0, 0, 1, 1, 0, 1, 0, 1, 0, 1])
        assert typical_check([x, x.copy()], pmf, 1.0) == typical_check({"X": x, "Y": x}, pmf, 1.0)

    def test_length_mismatch(self):
        pmf = JointPmf(("X", "Y"), BSC_JOINT)
        with pytest.raises(ValueError):
            typical_check({"X": np.zeros(4, int), "Y": np.zeros(5, int)}, pmf, 1.0)

    def test_symbol_outside_alphabet(self):
        pmf = JointPmf(("X",), np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            typical_check({"X": np.array([0, 2])}, pmf, 1.0)

    def test_batch_agrees_with_single(self, rng):
        pmf = random_pmf(rng, (2, 3))
        x = rng.integers(0, 2, 12)
        ys = rng.integers(0, 3, (50, 12))
        batch = typical_many(pmf, {"X1": x}, {"X2": ys}, 1.5)
        single = [typical_check({"X1": x, "X2": y}, pmf, 1.5) for y in ys]
        assert batch.tolist() == single

    def test_joint_implies_marginal(self):
        """Joint typicality of a pair forces typicality of each component at the same delta."""
        rng = np.random.default_rng(99)
        pmf = random_pmf(rng, (2, 3))
        other = random_pmf(rng, (2, 3))
        joint_hits = 0
        for t in range(10_000):
            src = pmf if t % 2 else other
            flat = rng.choice(6, size=30, p=src.mass.ravel())
            x, y = np.unravel_index(flat, (2, 3))
            if typical_check({"X1": x, "X2": y}, pmf, 1.0):
                joint_hits += 1
                assert typical_check({"X1": x}, pmf, 1.0)
                assert typical_check({"X2": y}, pmf, 1.0)
        assert joint_hits > 1000


class TestSampler:
    def test_deterministic_kernel(self, rng):
        joint = np.array([[0.5, 0.0], [0.0, 0.5]])
        cond = np.array([0, 1, 1, 0, 1, 0, 0, 1])
        d = sample_conditional_typical(joint, cond, 0.5, rng, count=5)
        assert not d.fallback.any()
        assert (d.seqs == cond).all()

    def test_single_symbol_uniform(self, rng):
        d = sample_conditional_typical(np.array([[0.5, 0.5]]), np.zeros(1, int), 1.0, rng, count=10_000)
        counts = np.bincount(d.seqs[:, 0], minlength=2)
        assert chisquare(counts).pvalue > 0.001

    def test_uniform_over_typical_set(self, rng):
        cond = np.array([0, 0, 0, 0, 1, 1, 1, 1])
        delta = 0.6
        typical = [u for u in itertools.product((0, 1), repeat=8)
                   if typical_check({"W": cond, "U": np.array(u)}, JointPmf(("W", "U"), BSC_JOINT), delta)]
        d = sample_conditional_typical(BSC_JOINT, cond, delta, rng, count=100_000, mode="exact")
        assert d.mode == "exact" and not d.fallback.any()
        seen, counts = np.unique(d.seqs, axis=0, return_counts=True)
        assert sorted(map(tuple, seen)) == sorted(typical)
        assert chisquare(counts).pvalue > 0.001

    def test_rejection_draws_are_typical(self, rng):
        cond = np.tile([0, 1], 20)
        d = sample_conditional_typical(BSC_JOINT, cond, 1.0, rng, count=50, mode="rejection")
        assert d.mode == "rejection" and not d.fallback.any()
        pmf = JointPmf(("W", "U"), BSC_JOINT)
        assert all(typical_check({"W": cond, "U": u}, pmf, 1.0) for u in d.seqs)

    def test_empty_set_flagged(self, rng):
        # only one conditioning symbol occurs although both carry mass
        d = sample_conditional_typical(BSC_JOINT, np.zeros(8, int), 0.2, rng, count=3, mode="exact")
        assert d.empty and d.fallback.all()

    def test_forced_exact_too_large(self):
        with pytest.raises(IntractableEnumeration):
            TypicalSetSampler(np.full((1, 3), 1 / 3), np.zeros(1000, int), 1.0, mode="exact")

    def test_auto_mode_switches(self):
        assert TypicalSetSampler(BSC_JOINT, np.zeros(8, int), 1.0).mode == "exact"
        assert TypicalSetSampler(np.full((1, 3), 1 / 3), np.zeros(1000, int), 1.0).mode == "rejection"


# --- codebooks and bins -----------------------------------------------------

class TestCodebooks:
    def test_counts(self):
        assert index_count(8, 0.5) == 16
        assert index_count(8, 0.0) == 1
        assert index_count(3, 0.4) == 3
        with pytest.raises(ValueError):
            index_count(8, -0.1)

    def test_lazy_codewords_are_stable(self):
        pmf = JointPmf(("W", "U"), BSC_JOINT)
        cond = {"W": np.array([0, 1] * 5)}
        a = draw_codebook(5, "U", ("t",), 10, 0.8, typical_sampler(pmf, "U", cond, 10, 1.0))
        b = draw_codebook(5, "U", ("t",), 10, 0.8, typical_sampler(pmf, "U", cond, 10, 1.0))
        assert a.count == 256
        assert np.array_equal(a[np.arange(a.count)][37], b[37])
        assert np.array_equal(a[[3, 200]], np.stack([b[3], b[200]]))
        c = draw_codebook(6, "U", ("t",), 10, 0.8, typical_sampler(pmf, "U", cond, 10, 1.0))
        assert not np.array_equal(a[np.arange(50)], c[np.arange(50)])

    def test_index_out_of_range(self):
        pmf = JointPmf(("W", "U"), BSC_JOINT)
        book = draw_codebook(5, "U", (), 4, 0.5, typical_sampler(pmf, "U", {"W": np.zeros(4, int)}, 4, 2.0))
        with pytest.raises(IndexError):
            book[book.count]

    def test_bins_cover_all_indices(self):
        b = draw_binning(3, "U", (), 1000, 4, 1.0)
        assert b.bin_count == 16
        a = b.assignment
        assert a.min() >= 1 and a.max() <= 16
        assert sum(len(b.members(k)) for k in range(1, 17)) == 1000

    @pytest.mark.parametrize("parent", [0, 1, 17, 4096])
    def test_superbin_uniform(self, parent):
        sb = draw_superbinning(11, "U2", ("t",), 10_000, 4, 1.0)
        counts = np.bincount(sb.row(parent) - 1, minlength=sb.bin_count)
        assert chisquare(counts).pvalue > 0.001
        assert sum(len(sb.members(parent, k)) for k in range(1, sb.bin_count + 1)) == 10_000

    def test_plain_bin_uniform(self):
        b = Binning(12345, 10_000, 32)
        assert chisquare(np.bincount(b.assignment - 1, minlength=32)).pvalue > 0.001

    def test_streams_are_named(self):
        assert stream(1, "source", 0).random() == stream(1, "source", 0).random()
        assert stream(1, "source", 0).random() != stream(1, "source", 1).random()

    def test_distinct_rows(self):
        assert distinct_rows(np.zeros((0, 3))) == 0
        assert distinct_rows(np.array([[1, 2], [1, 2], [0, 2]])) == 2


# --- cooperative Berger-Tung ------------------------------------------------

class TestCbt:
    def test_degenerate_constant_sources(self):
        pmf = JointPmf(("X1", "X2", "X3"), np.ones((1, 1, 1)))
        k1, k2 = copy_kernels(pmf)
        cfg = CbtConfig(pmf, k1, k2, CbtRates(0.1, 0.1, 0.1, 0.1), 8, SimParams(1.0))
        for t in range(10):
            r = run_cbt_trial(cfg, 3, t)
            assert not r.any_event and not r.failed

    def test_seed_determinism(self):
        cfg = scenarios.cbt_config(scenarios.cbt_rates_above(0.4), 8)
        for t in range(3):
            assert run_cbt_trial(cfg, 7, t).to_dict() == run_cbt_trial(cfg, 7, t).to_dict()
        assert any(run_cbt_trial(cfg, 7, t).to_dict() != run_cbt_trial(cfg, 8, t).to_dict() for t in range(3))

    def test_unique_typical_index_is_returned(self):
        cfg = scenarios.cbt_config(scenarios.cbt_rates_above(0.4), 8)
        checked = 0
        for t in range(40):
            r = run_cbt_trial(cfg, 21, t)
            if not (r.events["E3"] or r.events["E4"]):
                assert r.recovered_indices_correct["node2"]
                checked += 1
            if r.recovered_indices_correct["node2"] and not (r.events["E6"] or r.events["E7"]):
                assert r.recovered_indices_correct["node3"]
        assert checked > 5

    def test_event_flags(self):
        r = run_cbt_trial(scenarios.cbt_config(scenarios.cbt_rates_above(0.4), 8), 7, 0)
        assert set(r.events) == {"E1", "E2", "E3", "E4", "E5", "E6", "E7", "E"}
        assert set(r.recovered_indices_correct) == {"node2", "node3"}

    def test_invalid(self):
        with pytest.raises(ValueError):
            CbtRates(0.0, 1.0, 1.0, 1.0)
        pmf = scenarios.erasure_pmf()
        k1, k2 = copy_kernels(pmf)
        with pytest.raises(ValueError):
            CbtConfig(pmf, k1, k2, CbtRates(1, 1, 1, 1), 0)

    def test_failure_shrinks_with_block_length(self):
        f = [scenarios.cbt_failure("above", 0.4, n) for n in (8, 12, 16)]
        assert f[1] <= f[0] + 0.1 and f[2] <= f[1] + 0.1
        assert f[2] <= f[0] + 0.1

    def test_sum_rate_below_bound_fails(self):
        assert scenarios.cbt_failure("below", 0.2, 12) > 0.5

    @pytest.mark.xfail(reason="pilot runs give a failure rate near 0.84 at this margin and block length", strict=True)
    def test_small_margin_low_failure(self):
        assert scenarios.cbt_failure("above", 0.2, 12) < 0.3


# --- interactive scheme -----------------------------------------------------

def constant_config(pmf, n=8):
    return InteractiveConfig(pmf, AuxSchedule(1), {}, n, SimParams(2.0))


class TestInteractive:
    def test_constant_descriptions(self, rng):
        pmf = random_pmf(rng, (2, 3, 2))
        for t in range(3):
            trial = InteractiveTrial(constant_config(pmf), 5, t)
            r = trial.run()
            assert not r.failed and not r.any_event
            for i, j in itertools.permutations((1, 2, 3), 2):
                table, _ = optimal_reconstruction(pmf, f"X{j}", (f"X{i}",), _ham(pmf.size(f"X{j}")))
                xhat = table[trial.src[f"X{i}"]]
                want = float(np.mean(xhat != trial.src[f"X{j}"]))
                assert r.empirical_distortions[f"D{i}{j}"] == pytest.approx(want, abs=1e-15)

    def test_seed_determinism(self):
        cfg = scenarios.kaspi_config(8)
        assert run_interactive_trial(cfg, 7, 2).to_dict() == run_interactive_trial(cfg, 7, 2).to_dict()

    def test_recovered_indices_give_offline_reconstructions(self):
        cfg = scenarios.kaspi_config(8)
        joint = cfg.schedule.extend(cfg.pmf)
        seen = 0
        for t in range(30):
            trial = InteractiveTrial(cfg, 7, t)
            r = trial.run()
            if r.failed:
                continue
            seen += 1
            for (i, j), xhat in trial.reconstructions.items():
                inputs = cfg.schedule.recon_inputs(i, j)
                table, _ = optimal_reconstruction(joint, f"X{j}", inputs, _ham(cfg.pmf.size(f"X{j}")))
                seqs = [trial.src[v] if v.startswith("X") else trial.sent_words[v] for v in inputs]
                assert np.array_equal(xhat, table[tuple(seqs)])
        assert seen > 0

    def test_full_two_round_schedule_runs(self, rng):
        pmf = random_pmf(rng, (2, 2, 2))
        sched = AuxSchedule(2)
        for l in (1, 2):
            for i, d in [(1, "23"), (1, "2"), (1, "3"), (2, "13"), (2, "1"), (2, "3"), (3, "12"), (3, "1"), (3, "2")]:
                sched.add(i, d, l, 2)
        sched.fill_random(pmf.sizes, rng)
        rates = suggest_rates(pmf, sched, 0.2, 0.1)
        r = run_interactive_trial(InteractiveConfig(pmf, sched, rates, 5, SimParams(30.0)), 1)
        assert sum(k.startswith("enc:") for k in r.events) == 18
        assert set(r.recovered_indices_correct) <= {k for k in r.events if k.startswith("dec")}
        assert set(r.empirical_distortions) == {f"D{i}{j}" for i, j in itertools.permutations((1, 2, 3), 2)}

    def test_suggested_rates_clear_every_bound(self, rng):
        pmf = random_pmf(rng, (2, 3, 2))
        sched = AuxSchedule(1)
        for i, d in [(1, "23"), (1, "3"), (2, "13"), (2, "3"), (3, "1")]:
            sched.add(i, d, 1, 2)
        sched.fill_random(pmf.sizes, rng)
        rates = suggest_rates(pmf, sched, 0.15, 0.05)
        bin_rate = {f"R{n[1:]}": r for n, (r, _) in rates.items()}
        for c in theorem1_bounds(sched.extend(pmf), sched):
            assert sum(a * bin_rate[v] for v, a in c.coeffs.items()) >= c.bound + 0.15 - 1e-12
        assert all(r >= 0.15 and rh >= 0.05 for r, rh in rates.values())

    def test_missing_rates(self):
        pmf = scenarios.erasure_pmf(x3=False)
        with pytest.raises(ValueError):
            InteractiveConfig(pmf, scenarios.kaspi_schedule(), {}, 8)

    def test_success_grows_with_block_length(self):
        s = [scenarios.kaspi_success(n) for n in (8, 12, 16)]
        assert s[0] < s[1] < s[2]

    @pytest.mark.xfail(reason="pilot runs give a success rate near 0.38 at this block length", strict=True)
    def test_majority_success_at_twelve(self):
        assert scenarios.kaspi_success(12) >= 0.5


def _ham(k):
    return DistortionMatrix.hamming(k)


# --- harness ----------------------------------------------------------------

class TestHarness:
    def test_wilson_zero(self):
        lo, hi = wilson(0, 100)
        assert lo == 0.0
        assert hi == pytest.approx(wilson_upper(0, 100), abs=1e-12)
        assert hi == pytest.approx(0.036993, abs=1e-6)

    def test_wilson_all(self):
        lo, hi = wilson(50, 50)
        assert hi == 1.0 and lo < 1.0

    @given(st.integers(1, 400), st.data())
    def test_wilson_brackets_estimate(self, n, data):
        k = data.draw(st.integers(0, n))
        lo, hi = wilson(k, n)
        assert lo - 1e-12 <= k / n <= hi + 1e-12
        assert hi == pytest.approx(wilson_upper(k, n), abs=1e-9)

    def test_all_failures(self):
        est = aggregate([TrialReport({"E1": True}, {"node2": False}) for _ in range(7)], 8)
        assert est.p_hat("failure") == 1.0 and est.p_hat("E1") == 1.0
        assert est.interval("failure")[1] == 1.0

    def test_no_failures(self):
        est = aggregate([TrialReport({"E1": False}, {"node2": True}) for _ in range(100)], 8)
        assert est.p_hat("failure") == 0.0
        assert est.interval("failure")[1] == pytest.approx(0.036993, abs=1e-6)

    def test_deterministic_and_worker_independent(self):
        cfg = scenarios.cbt_config(scenarios.cbt_rates_above(0.4), 8)
        a = estimate_error(cfg, 12, 3)
        b = estimate_error(cfg, 12, 3)
        c = estimate_error(cfg, 12, 3, workers=2)
        assert a.to_dict() == b.to_dict()
        assert a.counts == c.counts

    def test_csv(self):
        cfg = scenarios.cbt_config(scenarios.cbt_rates_above(0.4), 8)
        text = estimates_csv([estimate_error(cfg, 4, 3)])
        lines = text.splitlines()
        assert lines[0] == "n,event,count,trials,p_hat,ci_lo,ci_hi"
        assert lines[1].startswith("8,failure,")

    def test_needs_trials(self):
        with pytest.raises(ValueError):
            estimate_error(scenarios.cbt_config(scenarios.cbt_rates_above(0.4), 8), 0, 1)
