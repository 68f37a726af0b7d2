"""Scaling q(u) and the local limits h, h1 for a few covariance/variance pairs."""
import numpy as np

from gaussmax import SlowlyVarying, eval_h, eval_h1, solve_q
from gaussmax import CoordinateGroup, FieldModel, PowerSumVariance, PowerTerm, StructuredCovariance

# q(u) solves u^2 q^alpha l(q) = 1; a log factor shifts it off u^(-2/alpha)
for u in (3.0, 10.0, 100.0):
    plain = solve_q(u, 1.5)
    logged = solve_q(u, 1.5, SlowlyVarying.logpower(1.0))
    print(f"u={u:6.1f}  q={plain:.6e}  u^(-2/a)={u ** (-2 / 1.5):.6e}  with log: {logged:.6e}")

cov = StructuredCovariance((CoordinateGroup((0,), 1.0), CoordinateGroup((1,), 2.0)))
var = PowerSumVariance((PowerTerm(0, 1.0, 1.0), PowerTerm(1, 1.0, 3.0)))
model = FieldModel(cov, var, (-1.0, -1.0), (1.0, 1.0))

t = np.array([0.5, 0.5])
print("h(t) =", eval_h(model, t))  # |t1| + t2^2
for axis in ([0.7, 0.0], [0.0, 0.7]):
    p = eval_h1(model, axis)
    print(f"h1{tuple(axis)}: {p.verdict.value:8s} value={p.h1}  ladder={np.round(p.values, 4)}")
