"""
Gaussian divisibility two ways
==============================

The eigenvalues of H(t) follow Dyson Brownian motion started from the
spectrum of H.  Integrating the SDE and diagonalising H(t) directly should
give the same law for lambda_1.
"""

import numpy as np

from edgelab import EnsembleParams, eigen_decompose, sample, sample_goe
from edgelab.ensemble import dbm_evolve, gaussian_divisible
from edgelab.stats import ks_two_sample

N, t, reps = 40, 0.2, 300
params = EnsembleParams(N, q=N**0.3)

start = np.empty((reps, N))
direct = np.empty(reps)
for r in range(reps):
    H = sample(params, r)
    start[r] = eigen_decompose(H).eigenvalues
    direct[r] = eigen_decompose(gaussian_divisible(H, sample_goe(N, 10_000 + r), t)).eigenvalues[0]

evolved = dbm_evolve(start, t, 400, seed=3)
print(f"mean lambda_1: direct {direct.mean():.4f}, DBM {evolved[:, 0].mean():.4f}")
print(f"KS distance between the two samples: {ks_two_sample(direct, evolved[:, 0]):.3f}")
