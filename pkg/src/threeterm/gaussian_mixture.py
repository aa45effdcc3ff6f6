"""Mixed discrete/continuous source: X1 ~ Bern(alpha) selects the variance of X2.

X2 given X1 = i is a zero-mean Gaussian with variance ``sigma{i}_sq``. Node 1
knows X1, node 2 knows X2 and node 3 wants X2 under mean-square error.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, optimize, stats

from .info import binary_entropy, h2


class _Unbounded:
    """Marker for an infinite test-channel noise variance."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "UNBOUNDED"


UNBOUNDED = _Unbounded()


@dataclass(frozen=True)
class GmSource:
    alpha: float
    sigma0_sq: float
    sigma1_sq: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not 0.0 < self.sigma0_sq <= self.sigma1_sq:
            raise ValueError("need 0 < sigma0_sq <= sigma1_sq")

    @property
    def variance(self) -> float:
        return self.alpha * self.sigma1_sq + (1 - self.alpha) * self.sigma0_sq


@dataclass(frozen=True)
class GmRegionPoint:
    D: float
    r1: float
    r2: float
    rsum: float


def gm_posterior(x2, src: GmSource):
    """P(X1 = 1 | X2 = x2)."""
    a = src.alpha
    x = np.asarray(x2, dtype=float)
    if a == 0.0:
        return np.zeros_like(x)[()] if x.ndim else 0.0
    if a == 1.0:
        return np.ones_like(x)[()] if x.ndim else 1.0
    # log-likelihood ratio keeps the tails finite
    llr = (math.log(a / (1 - a)) + 0.5 * math.log(src.sigma0_sq / src.sigma1_sq)
           + 0.5 * x * x * (1 / src.sigma0_sq - 1 / src.sigma1_sq))
    out = 1.0 / (1.0 + np.exp(-llr))
    return out[()] if out.ndim == 0 else out


def _crossings(src: GmSource) -> list[float]:
    """Points where the posterior equals one half (kinks of interest for quadrature)."""
    a = src.alpha
    gap = 1 / src.sigma0_sq - 1 / src.sigma1_sq
    if gap <= 0 or a in (0.0, 1.0):
        return []
    rhs = 2 * (math.log((1 - a) / a) - 0.5 * math.log(src.sigma0_sq / src.sigma1_sq)) / gap
    return [math.sqrt(rhs)] if rhs > 0 else []


def gm_r1(src: GmSource, epsabs: float = 1e-12, epsrel: float = 1e-10, limit: int = 200) -> float:
    """E[H2(P(X1=1|X2))], the conditional entropy of X1 given X2, in bits."""
    a = src.alpha
    if a in (0.0, 1.0):
        return 0.0
    if src.sigma0_sq == src.sigma1_sq:
        return binary_entropy(a)
    s0, s1 = math.sqrt(src.sigma0_sq), math.sqrt(src.sigma1_sq)
    L = 8 * max(s0, s1)

    def f(x):
        dens = (1 - a) * stats.norm.pdf(x, scale=s0) + a * stats.norm.pdf(x, scale=s1)
        return dens * h2(gm_posterior(x, src))

    # the integrand is even; integrate [0, L] and double
    pts = sorted({p for p in _crossings(src) + [s0, 2 * s0, 4 * s0] if 0 < p < L})
    total, err = 0.0, 0.0
    edges = [0.0] + pts + [L]
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, e = integrate.quad(f, lo, hi, epsabs=epsabs, epsrel=epsrel, limit=limit)
        total += val
        err += e
    if err > 1e-8:
        raise ArithmeticError(f"quadrature error estimate {err:.2e} too large")
    # beyond L the posterior is frozen near its limit; bound the tail by H2 at L
    tail = 2 * h2(gm_posterior(L, src)) * ((1 - a) * stats.norm.sf(L, scale=s0) + a * stats.norm.sf(L, scale=s1))
    return float(min(2 * total + tail, binary_entropy(a)))


def gm_r2(src: GmSource, D: float) -> float:
    """Smallest rate from node 2 given that node 1's X1 reaches node 3 losslessly."""
    if D <= 0:
        raise ValueError("distortion must be positive")
    a, v0, v1 = src.alpha, src.sigma0_sq, src.sigma1_sq
    if D >= src.variance:
        return 0.0
    if D <= v0:
        return max(0.0, 0.5 * ((1 - a) * math.log2(v0) + a * math.log2(v1) - math.log2(D)))
    rest = D - (1 - a) * v0
    if a == 0.0 or rest >= a * v1:
        return 0.0
    return max(0.0, 0.5 * a * math.log2(a * v1 / rest))


def gm_region_point(src: GmSource, D: float, r1: float | None = None) -> GmRegionPoint:
    r1 = gm_r1(src) if r1 is None else r1
    r2 = gm_r2(src, D)
    return GmRegionPoint(D, r1, r2, binary_entropy(src.alpha) + r2)


def gm_achievability_params(src: GmSource, D: float):
    """Noise variances of the additive test channels U = X2 + Z_i used when X1 = i."""
    if D <= 0:
        raise ValueError("distortion must be positive")
    a, v0, v1 = src.alpha, src.sigma0_sq, src.sigma1_sq
    if D <= v0:
        z0 = UNBOUNDED if D == v0 else D * v0 / (v0 - D)
        z1 = UNBOUNDED if D == v1 else D * v1 / (v1 - D)
        return z0, z1
    rest = D - (1 - a) * v0
    if rest >= a * v1:
        return UNBOUNDED, UNBOUNDED
    return UNBOUNDED, rest * v1 / (a * v1 - rest)


def gm_scheme_performance(src: GmSource, D: float) -> tuple[float, float]:
    """Rate I(X2;U|X1) and MMSE of the additive test channels at their design point."""
    rate, mse = 0.0, 0.0
    z0, z1 = gm_achievability_params(src, D)
    for w, v, z in ((1 - src.alpha, src.sigma0_sq, z0), (src.alpha, src.sigma1_sq, z1)):
        if w == 0:
            continue
        if z is UNBOUNDED:
            mse += w * v
        else:
            rate += w * 0.5 * math.log2((v + z) / z)
            mse += w * v * z / (v + z)
    return rate, mse


def _noncoop_distortion(w: float, src: GmSource) -> float:
    a, v0, v1 = src.alpha, src.sigma0_sq, src.sigma1_sq
    return (1 - a) * w * v0 / (v0 + w) + a * w * v1 / (v1 + w)


def noncoop_noise(src: GmSource, D: float) -> float:
    """Noise variance of a single additive test channel meeting D without knowing X1."""
    if D <= 0:
        raise ValueError("distortion must be positive")
    if D >= src.variance:
        raise ValueError("distortion at or above the source variance needs no description")
    lo, hi = 1e-12 * src.sigma1_sq, 1e12 * src.sigma1_sq
    f = lambda w: _noncoop_distortion(w, src) - D  # noqa: E731
    if f(lo) > 0:
        raise ValueError("distortion below the solvable range")
    return optimize.brentq(f, lo, hi, xtol=1e-300, rtol=1e-10, maxiter=1000)


def noncoop_r2(src: GmSource, D: float) -> float:
    """Rate of node 2 when its encoder cannot use X1."""
    if D <= 0:
        raise ValueError("distortion must be positive")
    if D >= src.variance:
        return 0.0
    w = noncoop_noise(src, D)
    a, v0, v1 = src.alpha, src.sigma0_sq, src.sigma1_sq
    return (1 - a) / 2 * math.log2((v0 + w) / w) + a / 2 * math.log2((v1 + w) / w)


def compare_curves(src: GmSource, D_grid: Sequence[float], R1_fixed: float | None = None) -> list[dict]:
    """Node 2's rate requirement with and without cooperation for a fixed R1.

    Each entry is max(I, H2(alpha) + I - R1) for the respective I.
    ``R1_fixed`` defaults to H2(alpha), where both terms coincide.
    """
    h = binary_entropy(src.alpha)
    r1 = h if R1_fixed is None else R1_fixed
    if r1 < 0:
        raise ValueError("R1 must be nonnegative")
    if len(D_grid) == 0:
        raise ValueError("empty distortion grid")
    rows = []
    for D in D_grid:
        ic, inc = gm_r2(src, D), noncoop_r2(src, D)
        rows.append({"D": float(D), "coop_R2": max(ic, h + ic - r1), "noncoop_R2": max(inc, h + inc - r1),
                     "coop_sum": h + ic, "H2_alpha": h})
    return rows


CURVE_COLUMNS = ("D", "coop_R2", "noncoop_R2", "coop_sum", "H2_alpha")


def curves_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_COLUMNS)
    for r in rows:
        w.writerow([f"{r[c]:.12g}" for c in CURVE_COLUMNS])
    return buf.getvalue()


def default_grid(src: GmSource, steps: int = 50, spacing: str = "log", lo_frac: float = 1e-3) -> np.ndarray:
    """Distortions from ``lo_frac * variance`` up to the source variance.

    Log spacing resolves the low-distortion regime, where the two schemes differ
    the most for a narrow low-variance component.
    """
    if steps < 1:
        raise ValueError("steps must be positive")
    v = src.variance
    if spacing == "log":
        return np.geomspace(lo_frac * v, v, steps)
    if spacing == "linear":
        return np.linspace(lo_frac * v, v, steps)
    raise ValueError(f"unknown spacing {spacing!r}")
