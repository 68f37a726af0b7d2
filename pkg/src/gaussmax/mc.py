"""Monte Carlo exceedance probabilities, the Dmitrovsky and Borell-TIS bounds, and ``B_u``."""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from .errors import ModelError
from .model import PowerSumVariance, gaussian_tail
from .regvar import NormalizationProfile
from .simulate import make_sampler

CSV_FIELDS = ("u", "hits", "reps", "p_hat", "ci_lo", "ci_hi", "seed")


class InsufficientRepsWarning(UserWarning):
    """No replication exceeded the level; the interval is one-sided."""


def clopper_pearson(hits, reps, level=0.95):
    """Exact binomial interval; with zero hits the upper end is one-sided at ``level``."""
    hits, reps = int(hits), int(reps)
    a = 1.0 - level
    if hits == 0:
        return 0.0, float(1.0 - a ** (1.0 / reps))
    lo = float(stats.beta.ppf(a / 2, hits, reps - hits + 1))
    hi = 1.0 if hits == reps else float(stats.beta.ppf(1 - a / 2, hits + 1, reps - hits))
    return lo, hi


@dataclass
class ExceedanceEstimate:
    u: float
    hits: int
    reps: int
    p_hat: float
    ci_lo: float
    ci_hi: float
    seed: int
    grid: dict = field(default_factory=dict)
    region: str = "S"
    warning: str | None = None

    def csv_row(self):
        return {k: getattr(self, k) for k in CSV_FIELDS}

    def to_dict(self):
        return dict(self.csv_row(), grid=self.grid, region=self.region, warning=self.warning)


def grid_rule_limit(model, u):
    """Largest admissible step per working axis, ``q_i(u) / 10``."""
    return NormalizationProfile.from_model(model)(u) / 10.0


def check_grid_rule(model, grid, u, enforce=True):
    """Steps must satisfy ``delta_i <= q_i(u) / 10``; returns the limits.

    Raises
    ------
    ModelError
        When violated and ``enforce`` is true.
    """
    lim = grid_rule_limit(model, u)
    steps = np.array([s if s > 0 else 0.0 for s in grid.steps])
    bad = steps > lim * (1 + 1e-9)
    if np.any(bad) and enforce:
        raise ModelError(f"grid steps {steps.tolist()} exceed q(u)/10 = {lim.tolist()} at u = {u}")
    return lim


def exceedance_counts(sampler, u_list, reps, seed, masks=None, workers=1, stream=0):
    """Hit counts ``(n_masks, n_u)`` from one shared batch; masks select grid points."""
    u = np.asarray(u_list, dtype=float)
    n = sampler.grid.size
    if masks is None:
        masks = {"S": np.ones(n, dtype=bool)}
    names = list(masks)
    mats = [np.asarray(masks[k], dtype=bool).reshape(-1) for k in names]
    if any(m.size != n for m in mats):
        raise ModelError("mask size differs from the grid")
    hits = np.zeros((len(names), u.size), dtype=np.int64)
    for _, block in sampler.blocks(reps, seed, stream=stream, workers=workers):
        for k, m in enumerate(mats):
            if not m.any():
                continue
            top = block[:, m].max(axis=1)
            hits[k] += (top[:, None] > u[None, :]).sum(axis=0)
    return names, hits


def mc_exceedance(model, grid, u, reps, seed, method="auto", masks=None, workers=1,
                  enforce_grid_rule=True, sampler=None):
    """``P(max_grid X > u)`` with Clopper-Pearson intervals.

    A list of levels shares one simulated batch. With several masks the
    result is a dict of lists keyed by mask name.

    Warns
    -----
    InsufficientRepsWarning
        When some level has no hits.
    """
    if reps < 10_000:
        raise ModelError("reps must be >= 1e4")
    scalar = np.isscalar(u)
    u_list = [float(u)] if scalar else [float(x) for x in u]
    umax = max(u_list)
    if umax >= 2:
        check_grid_rule(model, grid, umax, enforce_grid_rule)
    sampler = sampler or make_sampler(model, grid, method)
    names, hits = exceedance_counts(sampler, u_list, reps, seed, masks, workers)
    gdesc = {"shape": list(grid.shape), "steps": list(grid.steps), "method": sampler.method}
    gdesc.update({k: v for k, v in sampler.info.items() if k in ("clipping_mass", "doublings", "kronecker")})
    out = {}
    for k, name in enumerate(names):
        rows = []
        for j, uu in enumerate(u_list):
            h = int(hits[k, j])
            lo, hi = clopper_pearson(h, reps)
            msg = None
            if h == 0:
                msg = f"no exceedances of u={uu} in {reps} reps; upper bound is one-sided"
                warnings.warn(msg, InsufficientRepsWarning, stacklevel=2)
            rows.append(ExceedanceEstimate(uu, h, int(reps), h / reps, lo, hi, int(seed), gdesc, name, msg))
        out[name] = rows
    if masks is None:
        rows = out["S"]
        return rows[0] if scalar else rows
    return out


def estimates_to_csv(rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.csv_row().items()})
    return buf.getvalue()


def estimates_to_json(rows):
    return json.dumps([r.to_dict() for r in rows], indent=2, sort_keys=True)


# -- bounds -----------------------------------------------------------------


def dmitrovsky_upper(u, sigma_sup, gamma=0.0):
    """``min(1, exp(-u^2 / (2 sigma_sup^2) + u gamma))``."""
    if not 0 < sigma_sup <= 1:
        raise ModelError("sigma_sup must lie in (0, 1]")
    if gamma < 0:
        raise ModelError("gamma must be >= 0")
    return float(min(1.0, math.exp(min(0.0, -u * u / (2.0 * sigma_sup**2) + u * gamma))))


def borell_tis_upper(u, sigma_eps):
    """``2 Psi(2u / (1 + sigma_eps))``."""
    if not 0 < sigma_eps < 1:
        raise ModelError("sigma_eps must lie in (0, 1)")
    return float(2.0 * gaussian_tail(2.0 * u / (1.0 + sigma_eps)))


# -- extraction set ---------------------------------------------------------


@dataclass
class ExtractionSet:
    """``B_u = {t : 1 - sigma^2(t) <= 2 gamma1(u) / u}`` with its bounding half-widths."""

    u: float
    gamma: float
    gamma1: float
    threshold: float
    bounds: tuple
    method: str
    model: object = field(repr=False, default=None)
    disclaimer: str | None = None

    def contains(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return self.model.one_minus_sigma2(pts) <= self.threshold

    def to_dict(self):
        return {"u": self.u, "gamma": self.gamma, "gamma1": self.gamma1, "threshold": self.threshold,
                "bounds": list(self.bounds), "method": self.method, "disclaimer": self.disclaimer}


def _ray_sup(model, i, sign, tau):
    """``sup{s >= 0 : 1 - sigma^2(sign s e_i) <= tau}`` within the domain."""
    d = model.dimension
    reach = model.hi[i] if sign > 0 else -model.lo[i]
    if reach <= 0:
        return 0.0

    def g(s):
        p = np.zeros((1, d))
        p[0, i] = sign * s
        return float(model.one_minus_sigma2(p)[0]) - tau

    if g(reach) <= 0:
        return reach
    return optimize.brentq(g, 0.0, reach, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def extraction_set(model, u, gamma=0.0, scan_n=None):
    """``B_u`` and ``T_i(u) = sup{|t_i| : t in B_u}``.

    Unrotated power-sum variances are monotone along each axis and the
    extreme is on the axis itself, so ``T_i`` is found by bisection; other
    variances fall back to a grid scan whose resolution is stated in the
    result.
    """
    if not u >= 2:
        raise ModelError("u must be >= 2")
    g1 = gamma + math.log(u) ** 2 / u
    tau = 2.0 * g1 / u
    d = model.dimension
    var = model.variance
    if model.is_stationary:
        bounds = tuple(max(-lo, hi) for lo, hi in zip(model.lo, model.hi))
        return ExtractionSet(u, gamma, g1, tau, bounds, "trivial", model)
    if isinstance(var, PowerSumVariance) and all(t.c >= 0 for t in var.terms):
        bounds = tuple(max(_ray_sup(model, i, +1, tau), _ray_sup(model, i, -1, tau)) for i in range(d))
        return ExtractionSet(u, gamma, g1, tau, bounds, "bisection", model)
    n = scan_n or {1: 20001, 2: 801}.get(d, 41)
    axes = [np.linspace(lo, hi, n) for lo, hi in zip(model.lo, model.hi)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    inside = model.one_minus_sigma2(pts) <= tau
    bounds = tuple(float(np.abs(pts[inside, i]).max()) if inside.any() else 0.0 for i in range(d))
    res = [float((hi - lo) / (n - 1)) for lo, hi in zip(model.lo, model.hi)]
    note = f"grid scan with {n} points per axis; bounds resolved to within {res}"
    return ExtractionSet(u, gamma, g1, tau, bounds, "grid-scan", model, note)
