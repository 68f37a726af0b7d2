"""Exact field samples: factorized covariance against circulant embedding."""
import numpy as np

from gaussmax import CirculantSampler, CoordinateGroup, DenseSampler, FieldModel, GridSpec, PowerSumVariance
from gaussmax import PowerTerm, StructuredCovariance

cov = StructuredCovariance((CoordinateGroup((0,), 2.0),))
model = FieldModel(cov, PowerSumVariance((PowerTerm(0, 1.0, 2.0),)), (-1.0,), (1.0,))
grid = GridSpec.regular([-1.0], [1.0], 0.01)

dense = DenseSampler(model, grid)
circ = CirculantSampler(model, grid)
print("dense:", dense.info)
print("circulant:", circ.info)

a = dense.sample(20_000, seed=1).values
b = circ.sample(20_000, seed=1).values
target = model.sigma(grid.points) ** 2
print("max |var - sigma^2|: dense %.3f  circulant %.3f" % (np.abs(a.var(0) - target).max(), np.abs(b.var(0) - target).max()))

# same seed, any worker count: identical draws
same = np.array_equal(circ.sample(5000, 7, workers=1).values, circ.sample(5000, 7, workers=3).values)
print("worker-count invariant:", same)
