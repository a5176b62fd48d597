"""
The random edge of a sparse Erdos-Renyi matrix
==============================================

A sparse ER matrix has a top eigenvalue that sits measurably away from the
semicircle edge 2.  The sample itself tells us where: a few forest statistics
of the entries give a random correction polynomial Q, and the measure defined
by 1 + z m + m^2 + Q(m) = 0 has a right edge L that tracks lambda_1.
"""

import numpy as np

from edgelab import EnsembleParams, build_correction, eigen_decompose, find_edge, sample

N = 1000
params = EnsembleParams(N, q=N**0.3)
print(f"N = {N}, q = {params.q:.3f}, p = {params.p:.4f}")

# one sample, its correction polynomial and the corrected edge
H = sample(params, seed=1)
Q = build_correction(H)
M = find_edge(Q)
lam = eigen_decompose(H).eigenvalues
print(f"a_2 = {Q[2]:+.5f}   a_4 = {Q[4]:+.5f}")
print(f"lambda_1 = {lam[0]:.5f}, corrected edge L = {M.edge:.5f}, semicircle edge = 2")

# the rescaled distances to both edges, over a handful of samples
rows = []
for seed in range(20):
    H = sample(params, seed)
    L = find_edge(build_correction(H)).edge
    l1 = eigen_decompose(H).eigenvalues[0]
    rows.append((N ** (2 / 3) * (l1 - L), N ** (2 / 3) * (l1 - 2)))
rows = np.array(rows)
print("N^(2/3)(lambda_1 - L): mean %.3f, sd %.3f" % (rows[:, 0].mean(), rows[:, 0].std()))
print("N^(2/3)(lambda_1 - 2): mean %.3f, sd %.3f" % (rows[:, 1].mean(), rows[:, 1].std()))

# classical locations of the corrected measure against the ordered spectrum
gamma = M.classical_locations(N)
lam = eigen_decompose(sample(params, 1)).eigenvalues
for k in (1, 2, 5, N // 4, N // 2):
    print(f"k = {k:4d}: lambda_k = {lam[k - 1]:+.5f}, gamma_k = {gamma[k - 1]:+.5f}")
