"""Rate regions for a few small sources.

The lossless region is exact. The lossy region comes from a numerical search
over the auxiliary description and is compared with the reverse water-filling
value for an independent uniform pair.
"""
import numpy as np

from threeterm.info import DistortionMatrix, JointPmf, binary_entropy
from threeterm.region.closed_form import region_lossless, region_theorem2
from threeterm.region.constraints import TOTALS, region_csv
from threeterm.region.optimize import SearchParams

indep = JointPmf(("X1", "X2", "X3"), np.full((2, 2, 2), 0.125))
print("lossless region, independent bits:")
print(region_csv(region_lossless(indep), TOTALS))

erasure = np.zeros((2, 3, 2))
for x in (0, 1):
    erasure[x, x, 0] = erasure[x, 2, 1] = 0.25
print("lossless region, erasure source:")
print(region_csv(region_lossless(JointPmf(("X1", "X2", "X3"), erasure)), TOTALS))

pair = JointPmf(("X1", "X2"), np.full((2, 2), 0.25))
region = region_theorem2(pair, DistortionMatrix.hamming(2), 0.25, SearchParams(restarts=3))
print(f"node 2 rate at Hamming distortion 0.25: {region.bound({'R2': 1}):.6f}"
      f" (water-filling value {1 - binary_entropy(0.25):.6f})")
