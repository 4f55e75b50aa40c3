"""A walk through the pipeline for a single immersion.

We take the three-dimensional graph

    (v1, v2, v3) -> (v1, v2, v3, sqrt(v1^2 - v2^2), sqrt(1 + v3^2))

in Minkowski space R^5_1, build the null frame at one point, compute the
induced second fundamental forms and look at the screen shape operator.
"""

import numpy as np

from halflight import build_frame, classify, fixtures, induced_objects, inner
from halflight.classify import fit_screen_conformal, principal_curvatures

np.set_printoptions(precision=6, suppress=True)

fx = fixtures.get("example1")
spec = fx.spec
u = np.array([2.0, 1.0, 1.0])

# -- the frame ---------------------------------------------------------------------
# The induced metric on the tangent space has rank 2; its kernel is the null
# radical direction xi.  N is the unique null transversal with <xi, N> = 1.
fp = build_frame(spec, u)
print("immersion f(u) =", fp.f)
print("radical xi     =", fp.xi)
print("transversal N  =", fp.N)
print("co-screen L    =", fp.L)
print("<xi, xi> = %.1e   <xi, N> = %.6f   <L, L> = %.6f" % (
    inner(fp.xi, fp.xi, spec.ambient), inner(fp.xi, fp.N, spec.ambient), inner(fp.L, fp.L, spec.ambient)))

# -- induced objects ----------------------------------------------------------------
# Everything below is expressed in the quasi-orthonormal frame {xi, W1, W2}.
o = induced_objects(spec, u)
fr = o.in_frame()
print("\nB (second form along N):\n", fr["B"])
print("C (screen form along xi), columns W1, W2:\n", fr["C"])
print("D (second form along L):\n", fr["D"])
print("tau =", fr["tau"], " rho =", fr["rho"])

# C is a constant multiple of B on the screen: the screen is homothetic.
fit = fit_screen_conformal(fr["B"][:, 1:], fr["C"])
print("\nscreen-conformal fit: phi = %.10f, residual %.1e (%s)" % (fit.phi, fit.residual, fit.verdict))

# The screen principal curvatures are the eigenvalues of the screen block of
# A*_xi; here they are 0 and -1/v1.
pc = principal_curvatures(o.Astar_screen)
print("screen principal curvatures:", pc.values, " expected", [0.0, -1.0 / float(u[0])])

# -- classification over several points ------------------------------------------------
report = classify(spec, fx.point_array)
print("\nflags over %d sample points:" % len(fx.points))
for name, flag in report.flags.items():
    print("  %-26s %-6s %s" % (name, flag.value, flag.verdict))
print("two-eigenvalue theorem:", report.two_eigenvalue.verdict)
