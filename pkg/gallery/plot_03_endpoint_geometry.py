"""
Where the endpoints come from
=============================

The strict-bounds endpoints are the extremes of the quantity of interest
over an ellipsoid cut by the box. In two dimensions that can be checked by
looking at a grid.
"""

import numpy as np

from bondgauge import LinearizedModel, ParameterBox, QoiSelector, box_constrained_minimum, ssb_endpoints

rng = np.random.default_rng(3)

# Two free coordinates; the other three are pinned at zero by the box.
k = np.zeros((6, 5))
k[:, :2] = rng.normal(size=(6, 2))
truth = np.array([0.4, -0.3, 0, 0, 0])
y = k @ truth + 0.3 * rng.normal(size=6)
lin = LinearizedModel(k, np.zeros(6), y, truth)
box = ParameterBox(np.array([-1.0, -0.5, 0, 0, 0]), np.array([1.0, 0.5, 0, 0, 0]))

s_min, _ = box_constrained_minimum(lin, box)
q = s_min + 2.0
print(f"smallest residual on the box {s_min:.4f}; set radius q = {q:.4f}")

for coord in (0, 1):
    ci = ssb_endpoints(lin, box, q, QoiSelector.coordinate(coord))
    print(f"theta[{coord}] ranges over [{ci.lower:+.4f}, {ci.upper:+.4f}]")

# Same answer from brute force on a fine grid.
g0 = np.linspace(-1, 1, 801)
g1 = np.linspace(-0.5, 0.5, 401)
t0, t1 = np.meshgrid(g0, g1, indexing="ij")
res = y[None, None, :] - t0[..., None] * k[:, 0] - t1[..., None] * k[:, 1]
inside = np.einsum("ijk,ijk->ij", res, res) <= q
print(f"grid: theta[0] in [{t0[inside].min():+.4f}, {t0[inside].max():+.4f}],"
      f" theta[1] in [{t1[inside].min():+.4f}, {t1[inside].max():+.4f}]")

# A coarse picture of the feasible set ('#') inside the box.
for row in inside[::80, ::20].T[::-1]:
    print("   " + "".join("#" if v else "." for v in row))
