"""Repeated trials with per-event frequencies and Wilson intervals."""
from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from .cbt import CbtConfig, run_cbt_trial
from .interactive import InteractiveConfig, run_interactive_trial
from .report import TrialReport

FAILURE = "failure"
ANY_EVENT = "any_event"


def wilson(count: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    ci = binomtest(count, trials).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def run_trial(config, seed: int, trial: int) -> TrialReport:
    if isinstance(config, CbtConfig):
        return run_cbt_trial(config, seed, trial)
    if isinstance(config, InteractiveConfig):
        return run_interactive_trial(config, seed, trial)
    raise TypeError(f"unsupported configuration {type(config).__name__}")


def _batch(args) -> list[TrialReport]:
    config, seed, ids = args
    return [run_trial(config, seed, t) for t in ids]


@dataclass
class ErrorEstimate:
    n: int
    trials: int
    counts: dict[str, int]
    distortions: dict[str, float] = field(default_factory=dict)
    fallbacks: int = 0

    def p_hat(self, event: str) -> float:
        return self.counts[event] / self.trials

    def interval(self, event: str) -> tuple[float, float]:
        return wilson(self.counts[event], self.trials)

    def rows(self) -> list[dict]:
        out = []
        for ev, c in self.counts.items():
            lo, hi = self.interval(ev)
            out.append({"n": self.n, "event": ev, "count": c, "trials": self.trials,
                        "p_hat": c / self.trials, "ci_lo": lo, "ci_hi": hi})
        return out

    def to_dict(self) -> dict:
        return {"n": self.n, "trials": self.trials, "fallbacks": self.fallbacks,
                "mean_distortions": dict(self.distortions),
                "events": {r["event"]: {k: r[k] for k in ("count", "p_hat", "ci_lo", "ci_hi")} for r in self.rows()}}


def aggregate(reports: list[TrialReport], n: int) -> ErrorEstimate:
    counts: dict[str, int] = {FAILURE: 0, ANY_EVENT: 0}
    dist: dict[str, list[float]] = {}
    fb = 0
    for r in reports:
        counts[FAILURE] += r.failed
        counts[ANY_EVENT] += r.any_event
        for ev, hit in r.events.items():
            counts[ev] = counts.get(ev, 0) + int(hit)
        for k, v in r.empirical_distortions.items():
            dist.setdefault(k, []).append(v)
        fb += r.fallbacks
    return ErrorEstimate(n, len(reports), counts, {k: float(np.mean(v)) for k, v in dist.items()}, fb)


def estimate_error(config, trials: int, seed: int, workers: int = 1) -> ErrorEstimate:
    """Run ``trials`` independent trials; trial ``t`` draws every stream from ``(seed, t)``."""
    if trials < 1:
        raise ValueError("need at least one trial")
    if workers <= 1:
        reports = _batch((config, seed, range(trials)))
    else:
        chunks = [(config, seed, list(range(w, trials, workers))) for w in range(workers)]
        with ProcessPoolExecutor(workers) as pool:
            reports = [r for part in pool.map(_batch, chunks) for r in part]
    return aggregate(reports, config.n)


def estimates_csv(estimates: list[ErrorEstimate]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "event", "count", "trials", "p_hat", "ci_lo", "ci_hi"])
    for e in estimates:
        for r in e.rows():
            w.writerow([r["n"], r["event"], r["count"], r["trials"],
                        f"{r['p_hat']:.12g}", f"{r['ci_lo']:.12g}", f"{r['ci_hi']:.12g}"])
    return buf.getvalue()
