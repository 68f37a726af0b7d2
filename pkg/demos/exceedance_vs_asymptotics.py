"""Monte Carlo P(max X > u) next to the leading-order formula in three regimes."""
import math

from gaussmax import (ChiFieldSpec, Constants, CoordinateGroup, FieldModel, GridSpec, MCConfig, ManifoldChart,
                      PowerSumVariance, PowerTerm, StructuredCovariance, classify_field, compare, piterbarg_P_limit)

REPS = 200_000
grid = GridSpec.regular([-1.0], [1.0], 0.01)


def model(beta, on="variance"):
    cov = StructuredCovariance((CoordinateGroup((0,), 2.0),))
    return FieldModel(cov, PowerSumVariance((PowerTerm(0, 1.0, beta),), on=on), (-1.0,), (1.0,))


def halves(target):
    return [ManifoldChart.affine((0.0,), [[1.0]], (0.01,), (1.0,), target, "pos"),
            ManifoldChart.affine((0.0,), [[1.0]], (-1.0,), (-0.01,), target, "neg")]


cases = [
    ("sigma = 1 - |t|", model(1.0, "std"), halves("Kinf"), Constants()),
    ("sigma^2 = 1 - t^4", model(4.0), [ManifoldChart.affine((0.0,), [[1.0]], (-1.0,), (1.0,), "K0", "all")],
     Constants(H=1 / math.sqrt(math.pi))),
]
m = model(2.0)
P = piterbarg_P_limit(ChiFieldSpec.from_model(m, with_h1=True), [3, 4, 6], 0.01, 50_000, seed=9)
cases.append(("sigma^2 = 1 - t^2", m, halves("Kc"), Constants(P=P)))

for label, m, charts, consts in cases:
    rep = classify_field(m, charts)
    tab = compare(m, rep, [3.0, 3.5], MCConfig(grid, REPS, seed=5), consts)
    print(f"{label:18s} {rep.regime}")
    for r in tab.rows:
        print(f"    u={r.u}  mc={r.p_mc:.3e} [{r.ci_lo:.3e}, {r.ci_hi:.3e}]  asym={r.p_asym:.3e}  ratio={r.ratio:.3f}")
