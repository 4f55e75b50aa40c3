"""How accurate are the curvature identities, and what does a gauge change do?

Part 1 measures the Gauss-equation residual against the outer finite-difference
step, with and without Richardson extrapolation; the observed orders are 2 and 4.
The jet pipeline (exact truncated Taylor arithmetic) gives the same curvature
with no step at all.

Part 2 replaces the radical field xi by alpha * xi and checks the transformation
laws B* = alpha B and tau - tau* = d log alpha.
"""

import numpy as np

from halflight import fixtures, gauge_rescale, induced_curvature, prop31_residuals

fx = fixtures.get("ruled")
u = fx.point_array[0]

print("Gauss equation residual vs outer step H")
print("%8s %14s %14s" % ("H", "plain", "Richardson"))
rows = []
for H in (0.08, 0.04, 0.02, 0.01):
    r = [prop31_residuals(induced_curvature(fx.spec, u, H=np.full(fx.spec.m, H), richardson=rich))["item1_gauss"].value
         for rich in (False, True)]
    rows.append(r)
    print("%8.3f %14.3e %14.3e" % (H, *r))
rows = np.array(rows)
orders = np.log2(rows[:-1] / rows[1:])
print("observed orders: plain", np.round(orders[:, 0], 3), " Richardson", np.round(orders[:, 1], 3))

jet = induced_curvature(fx.spec, u, route="jet")
fd = induced_curvature(fx.spec, u, route="fd")
print("max |Rm_jet - Rm_fd| = %.2e" % np.max(np.abs(jet.Rm - fd.Rm)))
print("Gauss residual on the jet route: %.2e" % prop31_residuals(jet)["item1_gauss"].value)

print("\nGauge change xi -> alpha xi on the Example-1 immersion")
spec = fixtures.get("example1").spec
for alpha in ("2", "x1", "1 + x3^2"):
    worst_B = worst_tau = 0.0
    for p in fixtures.get("example1").point_array:
        rep = gauge_rescale(spec, alpha, p)
        worst_B, worst_tau = max(worst_B, rep.B_rel_residual), max(worst_tau, rep.tau_residual)
    print("  alpha = %-9s  |B* - alpha B| / |alpha B| = %.1e   |tau - tau* - dlog alpha| = %.1e"
          % (alpha, worst_B, worst_tau))
