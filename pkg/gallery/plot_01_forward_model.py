"""
The tri-layer phase curve
=========================

What the measured phase looks like for the two truth settings, and how the
five parameters move it. Nothing here is random.
"""

import numpy as np

from bondgauge import BOUNDARY_THETA, DEFAULT_BOX, DEFAULT_GRID, TYPICAL_THETA, jacobian, phase_response

hz = DEFAULT_GRID.hz
typical = phase_response(TYPICAL_THETA)
boundary = phase_response(BOUNDARY_THETA)

print(f"{DEFAULT_GRID.n} frequencies from {hz[0] / 1e6:.2f} to {hz[-1] / 1e6:.2f} MHz")
for i in range(0, DEFAULT_GRID.n, 11):
    print(f"  {hz[i] / 1e6:6.2f} MHz   typical {typical[i]:8.2f} deg   boundary {boundary[i]:8.2f} deg")

# The affine pair (a, b) adds a*omega + b with omega in rad/s, so the
# curve minus that line depends only on the three physical parameters.
zeroed = TYPICAL_THETA.replace(a=0.0, b=0.0)
gap = typical - phase_response(zeroed)
line = TYPICAL_THETA.a * DEFAULT_GRID.omegas + TYPICAL_THETA.b
print("largest departure from the affine identity:", np.max(np.abs(gap - line)))

# Sensitivities, scaled by the box width so the columns are comparable.
# Once the affine pair is allowed to absorb any straight-line part, what is
# left of the log_k0 column is what identifies the stiffness.
k = jacobian(TYPICAL_THETA)
scaled = k * DEFAULT_BOX.width
for name, col in zip(("log_k0", "alpha0", "a", "b", "l_bl"), scaled.T):
    print(f"  {name:7s} rms sensitivity over the box: {np.sqrt(np.mean(col ** 2)):9.2f} deg")
affine = scaled[:, 2:4]
coef, *_ = np.linalg.lstsq(affine, scaled[:, 0], rcond=None)
left = scaled[:, 0] - affine @ coef
print(f"log_k0 column after removing its best straight line: rms {np.sqrt(np.mean(left ** 2)):.2f} deg")
