"""Covariance germs, variance profiles and the standard normal tail.

A :class:`FieldModel` describes ``X(t) = sigma(t) X0(t)`` where ``X0`` is a
homogeneous field with structured covariance

    1 - r(t) ~ sum_j c_j |t'^j|^alpha_j l_j(|t'^j|),   t' = U t,

``t'^j`` being coordinate group ``j`` of the rotated (working) point. Every
evaluator accepts a single point of shape ``(d,)`` (returns a float) or a
batch of shape ``(n, d)`` (returns an array of length ``n``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special

from ._linalg import pivoted_cholesky
from .errors import FactorizationError, ModelError

T_MIN = 1e-10
SIGMA2_MIN = 1e-6
_E_INV = math.exp(-1.0)

FORMS = ("sum_then_exp", "one_minus_sum")


def as_points(t, d):
    """Return ``(points (n, d), was_single)``; rejects non-finite input."""
    arr = np.asarray(t, dtype=float)
    single = arr.ndim <= 1
    if d == 1 and arr.ndim == 1 and arr.shape != (1,):
        # a flat vector in d=1 is a batch of scalars
        arr, single = arr[:, None], False
    pts = np.atleast_2d(arr).reshape(-1, d) if arr.size else np.zeros((0, d))
    if pts.shape[1] != d:
        raise ModelError(f"expected points of dimension {d}, got shape {arr.shape}")
    if not np.all(np.isfinite(pts)):
        raise ModelError("point has non-finite coordinates")
    return pts, single


def _out(values, single):
    return float(values[0]) if single else values


# -- slowly varying factors -------------------------------------------------


@dataclass(frozen=True)
class SlowlyVarying:
    """Slowly varying factor ``l(t)`` on ``(0, 1]``.

    ``constant``: ``l = c``. ``logpower``: ``l = log(1/t)**a`` for
    ``t <= 1/e`` and ``1`` above (continuous, strictly positive).
    ``product``: product of ``factors``. Arguments below ``t_min`` are
    frozen at ``t_min``.
    """

    kind: str = "constant"
    c: float = 1.0
    a: float = 0.0
    factors: tuple = ()
    t_min: float = T_MIN

    def __post_init__(self):
        if self.kind not in ("constant", "logpower", "product"):
            raise ModelError(f"unknown slowly varying kind {self.kind!r}")
        if self.kind == "constant" and not self.c > 0:
            raise ModelError("constant slowly varying factor must be positive")
        if not self.t_min > 0:
            raise ModelError("t_min must be positive")
        object.__setattr__(self, "factors", tuple(self.factors))

    @classmethod
    def constant(cls, c=1.0):
        return cls("constant", c=float(c))

    @classmethod
    def logpower(cls, a):
        return cls("logpower", a=float(a))

    @classmethod
    def product(cls, *factors):
        return cls("product", factors=tuple(factors))

    @property
    def is_constant(self):
        if self.kind == "product":
            return all(f.is_constant for f in self.factors)
        return self.kind == "constant" or self.a == 0.0

    @property
    def constant_value(self):
        """Value of a constant factor (raises for non-constant ones)."""
        if not self.is_constant:
            raise ModelError("factor is not constant")
        return float(self(0.5))

    def __call__(self, t):
        tt = np.maximum(np.abs(np.asarray(t, dtype=float)), self.t_min)
        if self.kind == "constant":
            out = np.full_like(tt, self.c)
        elif self.kind == "logpower":
            out = np.log(1.0 / np.minimum(tt, _E_INV)) ** self.a
        else:
            out = np.ones_like(tt)
            for fac in self.factors:
                out = out * fac(tt)
        return float(out) if out.ndim == 0 else out


ONE = SlowlyVarying()


# -- covariance ---------------------------------------------------------------


@dataclass(frozen=True)
class CoordinateGroup:
    """One block ``c |t'^j|^alpha l(|t'^j|)`` of the covariance germ (0-based coords)."""

    coords: tuple
    alpha: float
    sv: SlowlyVarying = ONE
    coef: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(int(i) for i in self.coords))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "coef", float(self.coef))


@dataclass(frozen=True)
class StructuredCovariance:
    groups: tuple
    rotation: tuple | None = None
    form: str = "sum_then_exp"

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        if self.form not in FORMS:
            raise ModelError(f"unknown covariance form {self.form!r}")
        if self.rotation is not None:
            U = np.asarray(self.rotation, dtype=float)
            d = self.dimension
            if U.shape != (d, d):
                raise ModelError(f"rotation must be {d}x{d}")
            object.__setattr__(self, "rotation", tuple(tuple(float(x) for x in row) for row in U))

    @property
    def dimension(self):
        return sum(len(g.coords) for g in self.groups)

    @property
    def rotation_matrix(self):
        d = self.dimension
        return np.eye(d) if self.rotation is None else np.array(self.rotation)

    @property
    def is_rotated(self):
        return self.rotation is not None and not np.array_equal(self.rotation_matrix, np.eye(self.dimension))

    @property
    def is_power(self):
        """True when every slowly varying factor is constant."""
        return all(g.sv.is_constant for g in self.groups)

    def to_working(self, pts):
        return pts if self.rotation is None else pts @ self.rotation_matrix.T

    def from_working(self, pts):
        return pts if self.rotation is None else pts @ self.rotation_matrix

    def group_for(self, coord):
        for g in self.groups:
            if coord in g.coords:
                return g
        raise ModelError(f"coordinate {coord} belongs to no group")

    def germ(self, pts, working=False):
        """``sum_j c_j |t'^j|^alpha_j l_j(|t'^j|)`` for a batch of points."""
        w = pts if working else self.to_working(pts)
        x = np.zeros(w.shape[0])
        for g in self.groups:
            norm = np.linalg.norm(w[:, list(g.coords)], axis=1)
            x += g.coef * norm**g.alpha * g.sv(norm)
        return x

    def one_minus_r(self, pts, working=False):
        x = self.germ(pts, working)
        if self.form == "sum_then_exp":
            return -np.expm1(-x)
        return np.minimum(x, 1.0)

    def r(self, pts, working=False):
        x = self.germ(pts, working)
        if self.form == "sum_then_exp":
            return np.exp(-x)
        return np.maximum(0.0, 1.0 - x)


# -- variance -------------------------------------------------------------------


class VarianceSpec:
    """Base class: subclasses implement :meth:`raw_deficit` = ``1 - sigma^2`` unclamped."""

    kind = "abstract"
    sigma2_min = SIGMA2_MIN

    def raw_deficit(self, pts, covariance):
        raise NotImplementedError

    def deficit(self, pts, covariance):
        """``1 - sigma^2(t)`` clamped to ``[0, 1 - sigma2_min]``."""
        return np.clip(self.raw_deficit(pts, covariance), 0.0, 1.0 - self.sigma2_min)

    @property
    def is_stationary(self):
        return False


@dataclass(frozen=True)
class PowerTerm:
    coord: int
    c: float
    beta: float
    sv: SlowlyVarying = ONE


@dataclass(frozen=True)
class PowerSumVariance(VarianceSpec):
    """``g(t) = sum_i c_i |t_i|^beta_i l_i(|t_i|)``.

    With ``on="variance"`` the model is ``sigma^2 = 1 - g``; with
    ``on="std"`` it is ``sigma = 1 - g``. No terms means ``sigma == 1``.
    """

    terms: tuple = ()
    on: str = "variance"
    sigma2_min: float = SIGMA2_MIN
    kind = "power_sum"

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if self.on not in ("variance", "std"):
            raise ModelError("PowerSumVariance.on must be 'variance' or 'std'")

    @property
    def is_stationary(self):
        return all(term.c == 0 for term in self.terms)

    def g(self, pts):
        out = np.zeros(pts.shape[0])
        for term in self.terms:
            a = np.abs(pts[:, term.coord])
            out += term.c * a**term.beta * term.sv(a)
        return out

    def raw_deficit(self, pts, covariance=None):
        g = self.g(pts)
        if self.on == "variance":
            return g
        g = np.minimum(g, 1.0)
        return g * (2.0 - g)


@dataclass(frozen=True)
class GentleExpVariance(VarianceSpec):
    """``1 - sigma^2 = exp(-|t|^(-beta(e)))`` with ``beta(e) = sum_i beta_i e_i^2``
    (a scalar ``beta`` means the same exponent in every direction)."""

    beta: object = 1.0
    sigma2_min: float = SIGMA2_MIN
    kind = "gentle_exp"

    def __post_init__(self):
        b = self.beta
        if not np.isscalar(b):
            object.__setattr__(self, "beta", tuple(float(x) for x in b))

    def raw_deficit(self, pts, covariance=None):
        rad = np.linalg.norm(pts, axis=1)
        out = np.zeros(pts.shape[0])
        nz = rad > 0
        if np.isscalar(self.beta):
            beta = np.full(nz.sum(), float(self.beta))
        else:
            e = pts[nz] / rad[nz, None]
            beta = (e**2) @ np.asarray(self.beta)
        with np.errstate(over="ignore"):
            out[nz] = np.exp(-rad[nz] ** (-beta))
        return out


@dataclass(frozen=True)
class RatioFormVariance(VarianceSpec):
    """``1 - sigma^2(t) = (1 - r(t)) l(|t|)``."""

    sv: SlowlyVarying = ONE
    sigma2_min: float = SIGMA2_MIN
    kind = "ratio_form"

    def raw_deficit(self, pts, covariance):
        return covariance.one_minus_r(pts) * self.sv(np.linalg.norm(pts, axis=1))


@dataclass(frozen=True)
class CallableVariance(VarianceSpec):
    """Black-box ``sigma^2`` evaluator on batches of points (not serializable)."""

    fn: Callable = None
    smoothness: int = 2
    sigma2_min: float = SIGMA2_MIN
    kind = "callable"

    def raw_deficit(self, pts, covariance=None):
        return 1.0 - np.asarray(self.fn(pts), dtype=float).reshape(-1)


def unit_variance():
    """``sigma == 1``: the homogeneous case."""
    return PowerSumVariance(())


# -- the field model --------------------------------------------------------------------


@dataclass(frozen=True)
class FieldModel:
    covariance: StructuredCovariance
    variance: VarianceSpec = field(default_factory=unit_variance)
    lo: tuple = (-1.0,)
    hi: tuple = (1.0,)

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(x) for x in np.atleast_1d(self.lo)))
        object.__setattr__(self, "hi", tuple(float(x) for x in np.atleast_1d(self.hi)))
        d = self.covariance.dimension
        if len(self.lo) != d or len(self.hi) != d:
            raise ModelError(f"domain bounds must have {d} entries")

    @property
    def dimension(self):
        return self.covariance.dimension

    @property
    def is_stationary(self):
        return self.variance.is_stationary

    @property
    def volume(self):
        return float(np.prod(np.subtract(self.hi, self.lo)))

    def contains(self, pts, tol=1e-12):
        pts = np.atleast_2d(pts)
        return np.all((pts >= np.array(self.lo) - tol) & (pts <= np.array(self.hi) + tol), axis=1)

    # batch evaluators (no domain checks)
    def r(self, pts):
        return self.covariance.r(pts)

    def one_minus_r(self, pts):
        return self.covariance.one_minus_r(pts)

    def one_minus_sigma2(self, pts):
        return self.variance.deficit(pts, self.covariance)

    def sigma2(self, pts):
        return 1.0 - self.one_minus_sigma2(pts)

    def sigma(self, pts):
        return np.sqrt(self.sigma2(pts))

    def covariance_matrix(self, pts):
        """Full covariance ``R(s, t) = sigma(s) sigma(t) r(t - s)`` on a point set."""
        pts = np.asarray(pts, dtype=float)
        n, d = pts.shape
        diff = (pts[None, :, :] - pts[:, None, :]).reshape(-1, d)
        Rm = self.r(diff).reshape(n, n)
        s = self.sigma(pts)
        Rm = s[:, None] * Rm * s[None, :]
        return 0.5 * (Rm + Rm.T)


def eval_r(model, t):
    """Correlation ``r(t)`` of the homogeneous part; ``r(0) == 1`` exactly."""
    pts, single = as_points(t, model.dimension)
    return _out(model.r(pts), single)


def one_minus_r(model, t):
    """``1 - r(t)`` without cancellation (uses ``expm1`` on the germ)."""
    pts, single = as_points(t, model.dimension)
    return _out(model.one_minus_r(pts), single)


def eval_sigma2(model, t):
    """Variance ``sigma^2(t)``; rejects points outside the domain."""
    pts, single = as_points(t, model.dimension)
    if not np.all(model.contains(pts)):
        raise ModelError("point outside the model domain")
    return _out(model.sigma2(pts), single)


def one_minus_sigma2(model, t):
    pts, single = as_points(t, model.dimension)
    return _out(model.one_minus_sigma2(pts), single)


def gaussian_tail(u):
    """Standard normal tail ``P(N(0,1) > u)`` via ``erfc`` (no ``1 - cdf``).

    Float64 underflows for ``u`` beyond about 38.5; use
    :func:`log_gaussian_tail` there.
    """
    u = np.asarray(u, dtype=float)
    out = 0.5 * special.erfc(u / math.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


def log_gaussian_tail(u):
    out = special.log_ndtr(-np.asarray(u, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


# -- validation ----------------------------------------------------------------------


@dataclass
class ValidationReport:
    ok: bool
    failures: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    smallest_pivot: float | None = None

    def __bool__(self):
        return self.ok

    def names(self):
        return [name for name, _ in self.failures]

    def to_dict(self):
        return {
            "ok": self.ok,
            "failures": [{"invariant": n, "detail": m} for n, m in self.failures],
            "notes": list(self.notes),
            "smallest_pivot": self.smallest_pivot,
        }


def validate_model(model, seed=0, n_probe=2000, n_config=12):
    """Check the model invariants; never raises for an invalid model."""
    fails = []
    notes = []
    cov = model.covariance
    d = model.dimension
    rng = np.random.default_rng(seed)
    lo, hi = np.array(model.lo), np.array(model.hi)

    seen = sorted(i for g in cov.groups for i in g.coords)
    if seen != list(range(d)):
        fails.append(("groups do not partition coordinates", f"coords={seen}"))
    bad_alpha = [g.alpha for g in cov.groups if not 0 < g.alpha <= 2]
    if bad_alpha:
        fails.append(("alpha outside (0, 2]", f"alphas={bad_alpha}"))
    U = cov.rotation_matrix
    dev = np.max(np.abs(U @ U.T - np.eye(d)))
    if dev > 1e-12:
        fails.append(("rotation not orthogonal", f"max |U U^T - I| = {dev:.3g}"))
    if not np.all((lo < 0) & (hi > 0)):
        fails.append(("origin not interior to domain", f"lo={model.lo}, hi={model.hi}"))
    if fails:
        return ValidationReport(False, fails, notes)

    zero = np.zeros((1, d))
    if model.r(zero)[0] != 1.0:
        fails.append(("r(0) != 1", str(model.r(zero)[0])))
    span = hi - lo
    corners = np.array(np.meshgrid(*[[-s, s] for s in span])).reshape(d, -1).T
    diffs = np.vstack([corners, rng.uniform(-span, span, size=(n_probe, d))])
    diffs = diffs[np.linalg.norm(diffs, axis=1) > 0]
    if cov.form == "one_minus_sum":
        raw = 1.0 - cov.germ(diffs)
        if raw.min() < -1.0:
            fails.append(("r below -1", f"min 1 - sum = {raw.min():.4g}"))
    if np.any(model.r(diffs) >= 1.0):
        fails.append(("r(t) >= 1 for some t != 0", ""))

    s2_0 = model.sigma2(zero)[0]
    if s2_0 != 1.0:
        fails.append(("sigma(0) != 1", str(s2_0)))
    pts = rng.uniform(lo, hi, size=(n_probe, d))
    s2 = model.sigma2(pts)
    if np.any(s2 <= 0) or np.any(s2 > 1):
        fails.append(("sigma^2 outside (0, 1]", f"range [{s2.min()}, {s2.max()}]"))
    if model.is_stationary:
        notes.append("sigma == 1: homogeneous field, variance maximum not unique")
    elif np.any(s2[np.linalg.norm(pts, axis=1) > 0] >= 1.0):
        fails.append(("variance maximum not unique", "sigma(t) = 1 at some t != 0"))

    config = np.vstack([zero, rng.uniform(lo, hi, size=(n_config - 1, d))])
    pivot = None
    try:
        fac = pivoted_cholesky(model.covariance_matrix(config))
        pivot = fac.smallest_pivot
    except FactorizationError as exc:
        pivot = exc.smallest_pivot
        fails.append(("covariance not positive semidefinite", str(exc)))
    return ValidationReport(not fails, fails, notes, pivot)
