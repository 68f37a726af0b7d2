"""Decomposition into K0 / Kc / Kinf and selection of the asymptotic regime."""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import LimitError, MembershipError, ModelError
from .regvar import DEFAULT_LADDER, NormalizationProfile, Verdict, eval_h1

KSETS = ("K0", "Kc", "Kinf")
_VERDICT_TO_K = {Verdict.ZERO: "K0", Verdict.FINITE: "Kc", Verdict.INFINITE: "Kinf"}


class Regime(str, enum.Enum):
    STATIONARY_LIKE_FULL = "StationaryLikeFull"
    MIXED_MANIFOLD = "MixedManifold"
    TRANSITION = "Transition"
    TALAGRAND = "Talagrand"


def regime_from_dims(dims, d):
    """Regime of the maximum as a function of ``(dim K0, dim Kc, dim Kinf)``."""
    k0, kc, _ = dims
    if k0 == d:
        return Regime.STATIONARY_LIKE_FULL
    if 1 <= k0 <= d - 1:
        return Regime.MIXED_MANIFOLD
    if kc > 0:
        return Regime.TRANSITION
    return Regime.TALAGRAND


@dataclass
class ManifoldChart:
    """Parametrized piece ``phi: box in R^k -> R^d`` (working basis) of a K-set.

    ``spec`` keeps a serializable description for the affine and circle
    factories; arbitrary charts pass ``phi`` (and optionally ``jac``).
    """

    phi: Callable
    lo: tuple
    hi: tuple
    target: str
    jac: Callable | None = None
    name: str = "chart"
    spec: dict | None = None

    def __post_init__(self):
        self.lo = tuple(float(x) for x in np.atleast_1d(self.lo))
        self.hi = tuple(float(x) for x in np.atleast_1d(self.hi))
        if self.target not in KSETS:
            raise ModelError(f"target must be one of {KSETS}")
        if len(self.lo) != len(self.hi):
            raise ModelError("parameter box bounds differ in length")

    @property
    def k(self):
        return len(self.lo)

    @property
    def degenerate(self):
        return any(h <= l for l, h in zip(self.lo, self.hi))

    @classmethod
    def affine(cls, origin, basis, lo, hi, target, name="affine"):
        origin = np.asarray(origin, dtype=float)
        B = np.atleast_2d(np.asarray(basis, dtype=float))
        spec = {"kind": "affine", "origin": origin.tolist(), "basis": B.tolist(),
                "lo": list(np.atleast_1d(lo)), "hi": list(np.atleast_1d(hi))}
        return cls(lambda p: origin + np.asarray(p) @ B, lo, hi, target,
                   jac=lambda p: B.T.copy(), name=name, spec=spec)

    @classmethod
    def circle(cls, center, radius, target, lo=0.0, hi=2 * math.pi, name="circle"):
        c = np.asarray(center, dtype=float)
        spec = {"kind": "circle", "center": c.tolist(), "radius": float(radius), "lo": [lo], "hi": [hi]}

        def phi(p):
            a = np.asarray(p)[..., 0]
            return c + radius * np.stack([np.cos(a), np.sin(a)], axis=-1)

        def jac(p):
            a = float(np.asarray(p).reshape(-1)[0])
            return radius * np.array([[-math.sin(a)], [math.cos(a)]])

        return cls(phi, (lo,), (hi,), target, jac=jac, name=name, spec=spec)

    @classmethod
    def from_dict(cls, d):
        kind = d["kind"]
        target = d["target"]
        name = d.get("name", kind)
        if kind == "affine":
            return cls.affine(d["origin"], d["basis"], d["lo"], d["hi"], target, name)
        if kind == "circle":
            return cls.circle(d["center"], d["radius"], target, d.get("lo", [0.0])[0],
                              d.get("hi", [2 * math.pi])[0], name)
        raise ModelError(f"unknown chart kind {kind!r}")

    def to_dict(self):
        if self.spec is None:
            raise ModelError("chart was built from a callable and has no file form")
        return dict(self.spec, target=self.target, name=self.name)

    def __call__(self, p):
        return np.asarray(self.phi(np.asarray(p, dtype=float)), dtype=float)

    def jacobian(self, p, step=1e-6):
        """``d x k`` derivative; central differences when no analytic one is given."""
        p = np.asarray(p, dtype=float).reshape(-1)
        if self.jac is not None:
            return np.asarray(self.jac(p), dtype=float).reshape(-1, self.k)
        cols = []
        for i in range(self.k):
            e = np.zeros(self.k)
            e[i] = step
            cols.append((self(p + e) - self(p - e)) / (2 * step))
        return np.stack(cols, axis=1)

    def gram_det(self, p):
        J = self.jacobian(p)
        return float(np.linalg.det(J.T @ J))

    def grid(self, n):
        """Cell-midpoint grid with ``n`` points per parameter axis."""
        axes = [l + (np.arange(n) + 0.5) * (h - l) / n for l, h in zip(self.lo, self.hi)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.k)

    def check_smooth(self, n=10, tol=1e-12):
        """Gram determinant of the derivative stays above ``tol`` on the test grid."""
        for p in self.grid(n):
            if self.gram_det(p) < tol:
                raise MembershipError(f"chart {self.name}: singular derivative", self.name, tuple(p))

    def check_injective(self, n_pairs=200, seed=0):
        rng = np.random.default_rng(seed)
        lo, hi = np.array(self.lo), np.array(self.hi)
        a = rng.uniform(lo, hi, size=(n_pairs, self.k))
        b = rng.uniform(lo, hi, size=(n_pairs, self.k))
        for p, q in zip(a, b):
            if np.linalg.norm(p - q) > 1e-6 and np.linalg.norm(self(p) - self(q)) == 0.0:
                raise MembershipError(f"chart {self.name} is not injective", self.name, tuple(p))


@dataclass
class PointVerdict:
    t: tuple
    kset: str
    h1: float
    probe: object

    def to_dict(self):
        return {"t": list(self.t), "kset": self.kset, "h1": _json_float(self.h1), "probe": self.probe.to_dict()}


def _json_float(x):
    if x is None:
        return None
    return "inf" if math.isinf(x) else x


def classify_point(model, t, ladder=DEFAULT_LADDER, profile=None):
    """K-set membership of ``t != 0`` (working basis) from the ``h1`` ladder.

    Raises
    ------
    LimitError
        If the limit is indeterminate.
    """
    probe = eval_h1(model, t, ladder, profile=profile)
    if probe.verdict is Verdict.INDETERMINATE:
        raise LimitError(f"h1 indeterminate at t={tuple(np.ravel(t))}", ladder, probe.values)
    return PointVerdict(tuple(float(x) for x in np.ravel(t)), _VERDICT_TO_K[probe.verdict], probe.h1, probe)


@dataclass
class ChartStatus:
    name: str
    target: str
    k: int
    verified: bool
    n_points: int

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class RegimeReport:
    dims: tuple
    regime: Regime
    charts: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)
    dimension: int = 1
    manifolds: list = field(default_factory=list, repr=False)

    def to_dict(self, include_verdicts=False):
        out = {
            "dimension": self.dimension,
            "dims": {"K0": self.dims[0], "Kc": self.dims[1], "Kinf": self.dims[2]},
            "dims_triple": list(self.dims),
            "regime": self.regime.value,
            "charts": [c.to_dict() for c in self.charts],
        }
        if include_verdicts:
            out["verdicts"] = [v.to_dict() for v in self.verdicts]
        return out

    def to_json(self, **kw):
        return json.dumps(self.to_dict(**kw), indent=2, sort_keys=True)


def _check_disjoint(charts, n):
    clouds = [c(c.grid(n)).reshape(-1, c(c.grid(1)).shape[-1]) if not c.degenerate else None for c in charts]
    for i in range(len(charts)):
        for j in range(i + 1, len(charts)):
            if clouds[i] is None or clouds[j] is None:
                continue
            dist = np.min(np.linalg.norm(clouds[i][:, None, :] - clouds[j][None, :, :], axis=-1))
            if dist < 1e-12:
                raise MembershipError(
                    f"charts {charts[i].name} and {charts[j].name} intersect", charts[i].name
                )


def classify_field(model, manifolds, n=10, ladder=DEFAULT_LADDER):
    """Verify declared charts point by point and select the regime.

    Every chart is probed on an ``n^k`` midpoint grid; all verdicts must match
    its declared K-set. Dimensions are maxima over verified charts, with the
    empty set counted as dimension 0.

    Raises
    ------
    MembershipError
        Naming the chart and parameter point whose verdict differs.
    """
    d = model.dimension
    charts = list(manifolds)
    _check_disjoint(charts, min(n, 6))
    prof = NormalizationProfile.from_model(model)
    dims = {k: 0 for k in KSETS}
    statuses, verdicts = [], []
    for chart in charts:
        if chart.degenerate:
            statuses.append(ChartStatus(chart.name, chart.target, chart.k, True, 0))
            continue
        chart.check_injective()
        chart.check_smooth(n)
        count = 0
        for p in chart.grid(n):
            t = chart(p)
            if not np.any(t):
                continue
            field_pt = model.covariance.from_working(t[None, :])
            if not model.contains(field_pt)[0]:
                raise MembershipError(f"chart {chart.name} leaves the domain", chart.name, tuple(p))
            v = classify_point(model, t, ladder, prof)
            if v.kset != chart.target:
                raise MembershipError(
                    f"chart {chart.name}: point {tuple(t)} is in {v.kset}, declared {chart.target}",
                    chart.name, tuple(p),
                )
            verdicts.append(v)
            count += 1
        statuses.append(ChartStatus(chart.name, chart.target, chart.k, True, count))
        dims[chart.target] = max(dims[chart.target], chart.k)
    triple = (dims["K0"], dims["Kc"], dims["Kinf"])
    return RegimeReport(triple, regime_from_dims(triple, d), statuses, verdicts, d, charts)


def stationary_report(model):
    """Report for ``sigma == 1``: every point is in K0."""
    d = model.dimension
    return RegimeReport((d, 0, 0), Regime.STATIONARY_LIKE_FULL, [], [], d, [])


def classify_power_box(model, n=12, ladder=DEFAULT_LADDER):
    """Classify the verdict at every point of a midpoint grid over the domain.

    A quick survey used to suggest charts; it does not assign dimensions.
    """
    lo, hi = np.array(model.lo), np.array(model.hi)
    axes = [l + (np.arange(n) + 0.5) * (h - l) / n for l, h in zip(lo, hi)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, model.dimension)
    prof = NormalizationProfile.from_model(model)
    return [classify_point(model, model.covariance.to_working(p[None, :])[0], ladder, prof) for p in pts]
