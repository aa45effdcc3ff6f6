"""Monte Carlo runs of the cooperative two-encoder scheme on the erasure source.

With rates comfortably above the bounds the failure frequency falls as the
block grows; with the sum rate below its bound decoding nearly always fails.
Block lengths this short cannot show the asymptotic behaviour, only the trend.
"""
import numpy as np

from threeterm.info import JointPmf
from threeterm.sim.cbt import CbtConfig, CbtRates, copy_kernels
from threeterm.sim.harness import estimate_error
from threeterm.sim.report import SimParams

m = np.zeros((2, 3, 2))
for x in (0, 1):
    m[x, x, 0] = m[x, 2, 1] = 0.25
pmf = JointPmf(("X1", "X2", "X3"), m)
k1, k2 = copy_kernels(pmf)
params = SimParams(delta=30.0)
trials = 60

for label, rates, lengths in [("above the bounds", CbtRates(0.9, 0.5, 1.1, 1.1), (8, 12, 16)),
                              ("sum rate short by 0.2", CbtRates(0.6, 0.2, 1.1, 0.6), (8,))]:
    print(label)
    for n in lengths:
        est = estimate_error(CbtConfig(pmf, k1, k2, rates, n, params), trials, seed=7)
        lo, hi = est.interval("failure")
        print(f"   n = {n:2d}  failure {est.p_hat('failure'):.2f}  95% interval [{lo:.2f}, {hi:.2f}]")
