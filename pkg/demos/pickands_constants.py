"""Pickands H_alpha and Piterbarg P by simulation of the tangent field chi(t)."""
import math

from gaussmax import ChiFieldSpec, pickands_H, pickands_H_limit, piterbarg_P_limit

REPS = 20_000

# alpha = 2: chi is rank one, H(T) has a closed form and H = 1/sqrt(pi)
spec = ChiFieldSpec.power([2.0])
for T in (1.0, 3.0):
    e = pickands_H(spec, T, 0.01, REPS, seed=1)
    print(f"H_2(T={T}) = {e.estimate:.4f} +- {e.stderr:.4f}")

lim = pickands_H_limit(spec, [2, 4, 6, 8], 0.01, REPS, seed=2)
print(f"H_2 limit {lim.estimate:.5f} +- {lim.stderr:.1e}  (1/sqrt(pi) = {1 / math.sqrt(math.pi):.5f})")

# Brownian case: the lattice bias at delta = 0.01 is visible
lim = pickands_H_limit(ChiFieldSpec.power([1.0]), [2, 4, 6, 8], 0.01, REPS, seed=3)
print(f"H_1 limit {lim.estimate:.4f} +- {lim.stderr:.4f}  (continuous value 1)")

# penalty h1(t) = t^2: P = sqrt(2)
P = piterbarg_P_limit(ChiFieldSpec.power([2.0], h1=lambda x: x[:, 0] ** 2), [3, 4, 6], 0.01, REPS, seed=4)
print(f"P = {P.estimate:.4f} +- {P.stderr:.4f} (sqrt 2 = {math.sqrt(2):.4f}), ladder agrees: {P.fit['agree_2se']}")
