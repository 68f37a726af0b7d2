import math

from gaussmax import CoordinateGroup, FieldModel, PowerSumVariance, PowerTerm, StructuredCovariance


def power_model(alphas, betas=(), lo=None, hi=None, c=1.0, on="variance", coefs=None):
    """Unrotated SumThenExp model with ``sigma^2 = 1 - sum c |t_i|^beta_i``."""
    d = len(alphas)
    coefs = coefs or [1.0] * d
    cov = StructuredCovariance(tuple(CoordinateGroup((i,), float(a), coef=float(k))
                                     for i, (a, k) in enumerate(zip(alphas, coefs))))
    terms = tuple(PowerTerm(i, c, float(b)) for i, b in enumerate(betas) if b is not None)
    lo = tuple(lo) if lo is not None else (-1.0,) * d
    hi = tuple(hi) if hi is not None else (1.0,) * d
    return FieldModel(cov, PowerSumVariance(terms, on=on), lo, hi)


H2 = 1.0 / math.sqrt(math.pi)



import pathlib

import pytest


@pytest.fixture
def repo_root():
    return pathlib.Path(__file__).resolve().parents[1]
