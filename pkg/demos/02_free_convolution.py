"""
Evolving the corrected measure under free convolution
=====================================================

Adding an independent GOE component, H(t) = e^{-t/2} H + sqrt(1 - e^{-t}) W,
pushes the corrected measure toward the semicircle.  Algebraically this only
rescales the correction, Q_t(m) = Q(e^{-t/2} m), so the edge relaxes to 2 at
a rate set by Q_t'(zeta_t).
"""

import numpy as np

from edgelab import CorrectionPolynomial, edge_t, edge_velocity
from edgelab.freeconv import subordination_check

Q = CorrectionPolynomial.from_powers({4: 0.01})

print("   t      L_t - 2     0.01 e^{-2t}   dL/dt")
for t in (0.0, 0.25, 0.5, 1.0, 2.0, 4.0):
    ev = edge_t(Q, t)
    print(f"{t:5.2f}   {ev.edge - 2:.6f}    {0.01 * np.exp(-2 * t):.6f}     {edge_velocity(Q, t):+.6f}")

# the time-t transform is the time-0 transform seen through the subordination map
z = np.array([0.5 + 0.1j, 1.9 + 0.01j, 2.3 + 0.05j, -1.0 + 1.0j])
print("max subordination residual at t = 0.7:", float(np.max(subordination_check(z, Q, 0.7))))
