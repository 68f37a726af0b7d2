"""L_f(lambda) on the cube, its truncation to B_u, and a manifold term."""
import math

import numpy as np

from gaussmax import LaplaceIntegrand, ManifoldChart, laplace_cube, laplace_manifold, laplace_truncated

quartic = LaplaceIntegrand.power_sum([(0, 0.5, 4.0)], [-1.0], [1.0])
for lam in (1e2, 1e4, 1e6):
    L = laplace_cube(quartic, lam)
    # L * (lam c)^(1/beta) -> 2 Gamma(1 + 1/beta)
    print(f"lambda={lam:.0e}  L={L:.6e}  scaled={L * (lam * 0.5) ** 0.25:.8f}")
print("2 Gamma(5/4) =", 2 * math.gamma(1.25))

r = laplace_truncated(quartic, 10.0)
print(f"truncated to B_u at u=10: {r.value:.8e}, full {r.full:.8e}, rel dev {r.deviation:.2e}")

seg = ManifoldChart.affine((0.0, 0.0), [[1.0, 0.0]], (-1.0,), (1.0,), "K0", "axis")
f = lambda X: 0.5 * np.atleast_2d(X)[:, 0] ** 4
u = 4.0
print("segment term:", laplace_manifold(seg, f, u, 1 / math.sqrt(math.pi), [1 / u]))
