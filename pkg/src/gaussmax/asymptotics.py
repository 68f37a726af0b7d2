"""Leading-order asymptotics of ``P(max_S X > u)`` per regime, and the MC comparison harness."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .classify import Regime
from .constants import ConstantEstimate
from .errors import MissingConstantError, ModelError
from .laplace import LaplaceIntegrand, laplace_cube, laplace_manifold
from .mc import check_grid_rule, mc_exceedance
from .model import gaussian_tail
from .regvar import NormalizationProfile

DOMINANCE_TOL = 0.25  # slack in the local u-exponent for a summand to count as dominant


@dataclass(frozen=True)
class ConstantValue:
    value: float
    stderr: float = 0.0
    source: str = "analytic"

    def to_dict(self):
        return {"value": self.value, "stderr": self.stderr, "source": self.source}


def as_constant(x):
    if x is None or isinstance(x, ConstantValue):
        return x
    if isinstance(x, ConstantEstimate):
        return ConstantValue(x.estimate, x.stderr, f"estimate ({x.target}, reps={x.reps}, seed={x.seed})")
    if isinstance(x, dict):
        return ConstantValue(float(x["value"]), float(x.get("stderr", 0.0)), x.get("source", "analytic"))
    return ConstantValue(float(x))


@dataclass
class Constants:
    """Constants available to the formulas.

    ``H`` is the Pickands-type constant of the full tangent field, ``P`` the
    Piterbarg-type one. ``H_alpha`` maps an index ``alpha`` to the 1-d
    constant and is used for products over separable coordinates. ``chart``
    maps a chart name to ``{"H": ..., "q": ...}`` overrides.
    """

    H: object = None
    P: object = None
    H_alpha: dict = field(default_factory=dict)
    chart: dict = field(default_factory=dict)

    def __post_init__(self):
        self.H = as_constant(self.H)
        self.P = as_constant(self.P)
        self.H_alpha = {float(k): as_constant(v) for k, v in self.H_alpha.items()}

    def full_H(self, model):
        if self.H is not None:
            return self.H
        cov = model.covariance
        if all(len(g.coords) == 1 for g in cov.groups) and all(g.alpha in self.H_alpha for g in cov.groups):
            vals = [self.H_alpha[g.alpha] for g in cov.groups]
            v = float(np.prod([c.value for c in vals]))
            se = v * math.sqrt(sum((c.stderr / c.value) ** 2 for c in vals))
            return ConstantValue(v, se, "product of 1-d constants")
        raise MissingConstantError("H: run `constants` (pickands_H_limit) for the full tangent field")


@dataclass
class AsymptoticResult:
    u: float
    regime: str
    value: float
    factors: dict
    terms: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def reconstruct(self):
        """Value rebuilt from the recorded factors (or the dominant manifold terms)."""
        if self.terms:
            return float(sum(t["value"] for t in self.terms if t["dominant"]))
        return float(np.prod(list(self.factors.values())))

    def to_dict(self):
        return {"u": self.u, "regime": self.regime, "value": self.value, "factors": self.factors,
                "terms": self.terms, "provenance": self.provenance}


def _chart_factors(model, chart, u, constants, prof):
    over = constants.chart.get(chart.name, {})
    if "H" in over and "q" in over:
        H = over["H"]
        H = H if callable(H) else as_constant(H).value
        return H, over["q"], {"H": "chart override"}
    if chart.spec is None or chart.spec.get("kind") != "affine" or model.covariance.is_rotated:
        raise MissingConstantError(
            f"chart {chart.name}: supply constants.chart[{chart.name!r}] with 'H' and 'q'")
    basis = np.atleast_2d(chart.spec["basis"])
    qs, Hs, prov = [], [], {}
    q_all = prof(u)
    for b in basis:
        nz = np.flatnonzero(b)
        if nz.size != 1:
            raise MissingConstantError(f"chart {chart.name}: tangent direction {b.tolist()} is not a coordinate axis")
        i = int(nz[0])
        g = model.covariance.group_for(i)
        if len(g.coords) != 1:
            raise MissingConstantError(f"chart {chart.name}: coordinate {i} sits in a multi-coordinate group")
        if g.alpha not in constants.H_alpha:
            raise MissingConstantError(f"H for alpha={g.alpha}: run `constants` with alpha={g.alpha}")
        c = constants.H_alpha[g.alpha]
        Hs.append(c.value)
        prov[f"H_alpha={g.alpha}"] = c.to_dict()
        # a non-unit basis vector rescales the tangent coordinate
        qs.append(q_all[i] / abs(b[i]))
    return float(np.prod(Hs)), qs, prov


def _manifold_term(model, chart, u, constants, prof, f):
    H, q, prov = _chart_factors(model, chart, u, constants, prof)
    integral_with = laplace_manifold(chart, f, u, H, q)
    return integral_with, prov, H, q


def asymptotic_P(model, report, u, constants=None, rtol=1e-8):
    """Leading-order ``P(S; u)`` for the regime in ``report``.

    Raises
    ------
    MissingConstantError
        Naming the estimate that has to be run first.
    """
    constants = constants or Constants()
    u = float(u)
    psi = float(gaussian_tail(u))
    prof = NormalizationProfile.from_model(model)
    regime = Regime(report.regime)
    if model.is_stationary:
        Hc = constants.full_H(model)
        inv_q = float(1.0 / np.prod(prof(u)))
        factors = {"H": Hc.value, "volume": model.volume, "prod_q_inv": inv_q, "Psi": psi}
        res = AsymptoticResult(u, "Stationary", 0.0, factors, provenance={"H": Hc.to_dict()})
    elif regime is Regime.TALAGRAND:
        res = AsymptoticResult(u, regime.value, 0.0, {"Psi": psi})
    elif regime is Regime.TRANSITION:
        if constants.P is None:
            raise MissingConstantError("P: run `constants` (piterbarg_P_limit) for the penalized field")
        res = AsymptoticResult(u, regime.value, 0.0, {"P": constants.P.value, "Psi": psi},
                               provenance={"P": constants.P.to_dict()})
    elif regime is Regime.STATIONARY_LIKE_FULL:
        Hc = constants.full_H(model)
        L = laplace_cube(LaplaceIntegrand.from_model(model), u * u, rtol)
        inv_q = float(1.0 / np.prod(prof(u)))
        factors = {"H": Hc.value, "L_f": L, "prod_q_inv": inv_q, "Psi": psi}
        res = AsymptoticResult(u, regime.value, 0.0, factors, provenance={"H": Hc.to_dict()})
    elif regime is Regime.MIXED_MANIFOLD:
        f = lambda X: 0.5 * model.one_minus_sigma2(model.covariance.from_working(np.atleast_2d(X)))
        terms = []
        for chart in report.manifolds:
            if chart.target != "K0" or chart.degenerate:
                continue
            val, prov, H, q = _manifold_term(model, chart, u, constants, prof, f)
            up = u * 1.05
            val_up = _manifold_term(model, chart, up, constants, prof, f)[0]
            # local exponent of the summand in u (the common Psi(u) factor excluded)
            expo = math.log(val_up / val) / math.log(1.05) if val > 0 and val_up > 0 else -math.inf
            terms.append({"chart": chart.name, "k": chart.k, "integral": val,
                          "H": H if not callable(H) else None,
                          "q": list(map(float, q)) if not callable(q) else None,
                          "value": val * psi, "exponent": expo, "provenance": prov})
        if not terms:
            raise ModelError("mixed regime needs at least one K0 chart")
        top = max(t["exponent"] for t in terms)
        for t in terms:
            t["dominant"] = bool(t["exponent"] >= top - DOMINANCE_TOL)
        res = AsymptoticResult(u, regime.value, 0.0, {"Psi": psi}, terms)
    else:
        raise ModelError(f"no formula for regime {regime}")
    res.value = res.reconstruct()
    return res


# -- comparison harness -----------------------------------------------------


@dataclass
class MCConfig:
    grid: object
    reps: int
    seed: int
    method: str = "auto"
    workers: int = 1
    enforce_grid_rule: bool = True


@dataclass
class ComparisonRow:
    u: float
    p_asym: float
    p_mc: float
    ci_lo: float
    ci_hi: float
    ratio: float
    delta: list
    reps: int
    hits: int
    asymptotic: AsymptoticResult = field(repr=False, default=None)

    def csv_row(self):
        return {"u": self.u, "p_asym": self.p_asym, "p_mc": self.p_mc, "ci_lo": self.ci_lo,
                "ci_hi": self.ci_hi, "ratio": self.ratio}

    def to_dict(self):
        d = self.csv_row()
        d.update(delta=self.delta, reps=self.reps, hits=self.hits,
                 asymptotic=self.asymptotic.to_dict() if self.asymptotic else None)
        return d


@dataclass
class ComparisonTable:
    rows: list
    trend: dict

    def to_csv(self):
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=["u", "p_asym", "p_mc", "ci_lo", "ci_hi", "ratio"], lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: repr(v) for k, v in r.csv_row().items()})
        return buf.getvalue()

    def to_dict(self):
        return {"rows": [r.to_dict() for r in self.rows], "trend": self.trend}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def trend_summary(rows):
    dev = [abs(r.ratio - 1.0) for r in rows]
    return {
        "abs_dev": dev,
        "nonincreasing": all(b <= a for a, b in zip(dev, dev[1:])),
        "ratios": [r.ratio for r in rows],
    }


def compare(model, report, u_list, mc_config, constants=None, masks=None):
    """Join ``asymptotic_P`` with a shared-batch MC estimate at each ``u``."""
    u_list = [float(u) for u in u_list]
    if any(b <= a for a, b in zip(u_list, u_list[1:])):
        raise ModelError("u list must be strictly increasing")
    grid = mc_config.grid
    check_grid_rule(model, grid, max(u_list), mc_config.enforce_grid_rule)
    ests = mc_exceedance(model, grid, u_list, mc_config.reps, mc_config.seed, mc_config.method,
                         workers=mc_config.workers, enforce_grid_rule=mc_config.enforce_grid_rule)
    rows = []
    for e in ests:
        a = asymptotic_P(model, report, e.u, constants)
        ratio = e.p_hat / a.value if a.value > 0 else math.nan
        rows.append(ComparisonRow(e.u, a.value, e.p_hat, e.ci_lo, e.ci_hi, ratio, list(grid.steps),
                                  e.reps, e.hits, a))
    return ComparisonTable(rows, trend_summary(rows))
