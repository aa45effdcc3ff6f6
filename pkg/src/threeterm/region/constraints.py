"""Linear rate constraints and regions."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

TOTALS = ("R1", "R2", "R3")


@dataclass(frozen=True)
class RateConstraint:
    """``sum(coeffs[v] * v) >= bound``."""

    coeffs: Mapping[str, float]
    bound: float
    label: str = ""

    def __post_init__(self):
        c = {k: float(v) for k, v in self.coeffs.items() if v != 0}
        if not np.isfinite(self.bound):
            raise ValueError("constraint bound must be finite")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "bound", float(self.bound))

    @classmethod
    def le(cls, coeffs: Mapping[str, float], bound: float, label: str = "") -> "RateConstraint":
        """Build ``sum(coeffs * v) <= bound`` in the canonical >= form."""
        return cls({k: -v for k, v in coeffs.items()}, -bound, label)

    @property
    def variables(self) -> set[str]:
        return set(self.coeffs)

    def slack(self, point: Mapping[str, float]) -> float:
        return sum(c * point.get(v, 0.0) for v, c in self.coeffs.items()) - self.bound

    def __str__(self) -> str:
        lhs = " + ".join(f"{'' if c == 1 else f'{c:g}*'}{v}" for v, c in sorted(self.coeffs.items()))
        return f"{lhs or '0'} >= {self.bound:.12g}"


@dataclass
class RateRegion:
    constraints: list[RateConstraint]
    boundary_samples: list[tuple[dict, dict]] = field(default_factory=list)
    distortions: dict[str, float] = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    @property
    def variables(self) -> list[str]:
        seen: dict[str, None] = {}
        for c in self.constraints:
            for v in c.coeffs:
                seen.setdefault(v, None)
        return list(seen)

    def bound(self, coeffs: Mapping[str, float]) -> float | None:
        """Largest bound among constraints whose coefficients equal ``coeffs``."""
        want = {k: float(v) for k, v in coeffs.items() if v}
        hits = [c.bound for c in self.constraints if c.coeffs == want]
        return max(hits) if hits else None

    def to_csv(self) -> str:
        return region_csv(self)


def region_contains(region: RateRegion, point: Mapping[str, float]) -> tuple[bool, float]:
    """Membership test returning the worst (smallest) constraint slack."""
    names = set(region.variables)
    if set(point) != names:
        missing, extra = names - set(point), set(point) - names
        raise ValueError(f"point does not match region variables (missing {sorted(missing)}, extra {sorted(extra)})")
    if not region.constraints:
        return True, 0.0
    worst = min(c.slack(point) for c in region.constraints)
    return worst >= -1e-12, worst


def fmt(x: float) -> str:
    return f"{x:.12g}"


def region_csv(region: RateRegion, columns: Iterable[str] = TOTALS) -> str:
    """CSV with one row per constraint over the total-rate columns."""
    cols = list(columns)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["constraint_id"] + [f"coeff_{c}" for c in cols] + ["bound_bits"])
    for i, c in enumerate(region.constraints):
        extra = set(c.coeffs) - set(cols)
        if extra:
            raise ValueError(f"constraint {c.label or i} uses non-total variables {sorted(extra)}")
        w.writerow([c.label or f"c{i}"] + [fmt(c.coeffs.get(v, 0.0)) for v in cols] + [fmt(c.bound)])
    return buf.getvalue()
