"""Tail asymptotics of Gaussian field maxima near a unique variance maximum.

The package evaluates ``P(max_S X > u)`` for ``X = sigma(t) X0(t)`` in the
four regimes set by the local behaviour of ``1 - sigma^2`` against
``1 - r`` and checks the formulas against exact simulation.
"""
from .asymptotics import AsymptoticResult, ComparisonRow, Constants, ConstantValue, MCConfig, asymptotic_P, compare
from .classify import ManifoldChart, Regime, RegimeReport, classify_field, classify_point, stationary_report
from .constants import (
    ChiFieldSpec,
    ConstantEstimate,
    pickands_H,
    pickands_H_limit,
    piterbarg_P,
    piterbarg_P_limit,
    simulate_chi,
)
from .errors import (
    BracketError,
    ConfigError,
    EmbeddingError,
    ExtrapolationError,
    FactorizationError,
    GaussMaxError,
    LimitError,
    MembershipError,
    MissingConstantError,
    ModelError,
    NumericalError,
    OverflowGuardError,
    QuadratureError,
)
from .laplace import LaplaceIntegrand, laplace_cube, laplace_manifold, laplace_truncated
from .mc import (
    ExceedanceEstimate,
    borell_tis_upper,
    clopper_pearson,
    dmitrovsky_upper,
    extraction_set,
    mc_exceedance,
)
from .model import (
    CallableVariance,
    CoordinateGroup,
    FieldModel,
    GentleExpVariance,
    PowerSumVariance,
    PowerTerm,
    RatioFormVariance,
    SlowlyVarying,
    StructuredCovariance,
    eval_r,
    eval_sigma2,
    gaussian_tail,
    log_gaussian_tail,
    one_minus_r,
    one_minus_sigma2,
    unit_variance,
    validate_model,
)
from .regvar import NormalizationProfile, Verdict, direction_alpha, eval_h, eval_h1, solve_q
from .simulate import (
    CirculantSampler,
    DenseSampler,
    GridSpec,
    SampleBatch,
    apply_variance,
    circulant_sample_1d,
    circulant_sample_2d,
    dense_sample,
)

__version__ = "0.1.0"
