"""Pickands-type ``H`` and Piterbarg-type ``P`` constants by simulating the tangent field.

The tangent field ``chi`` has ``chi(0) = 0``, mean ``-h(t)`` and covariance
``h(s) + h(t) - h(t - s)``. It is sampled exactly on a lattice from the
pivoted Cholesky factor of that covariance.

Two estimators of ``H(T) = E exp(max_T chi)`` are offered. ``direct`` is
the plain sample mean. ``shift`` averages, over every lattice shift ``s`` of
the box, ``max_{T-s} e^chi / sum_{T-s} e^chi``; it has the same expectation
on the lattice but bounded per-replication values, which matters because
``exp(max chi)`` is heavy tailed enough to stall the plain mean long before
``T = 8``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ._linalg import pivoted_cholesky
from .errors import ExtrapolationError, ModelError, OverflowGuardError
from .regvar import eval_h1
from .simulate import DENSE_MAX, block_rng, block_sizes

OVERFLOW = 700.0
ESTIMATORS = ("shift", "direct")


@dataclass
class ChiFieldSpec:
    """Tangent-field description in the working basis.

    Parameters
    ----------
    h : callable
        Vectorized ``h`` on ``(n, d)`` points.
    dim : int
    h1 : callable, optional
        Penalty for ``P``; ``inf`` entries mark K_inf points, where the
        penalized field is taken as 0.
    groups : tuple, optional
        ``((coords, h_j), ...)`` when ``h = sum_j h_j(t^j)`` over disjoint
        coordinate blocks; ``chi`` is then a sum of independent fields.
    """

    h: object
    dim: int
    h1: object = None
    groups: tuple | None = None

    @classmethod
    def power(cls, alphas, coefs=None, h1=None):
        """``h(t) = sum c_i |t_i|^alpha_i`` with one coordinate per group."""
        alphas = tuple(float(a) for a in alphas)
        coefs = tuple(1.0 for _ in alphas) if coefs is None else tuple(float(c) for c in coefs)
        groups = tuple(
            ((i,), (lambda pts, a=a, c=c: c * np.abs(pts[:, 0]) ** a)) for i, (a, c) in enumerate(zip(alphas, coefs))
        )

        def h(pts):
            pts = np.atleast_2d(pts)
            return sum(c * np.abs(pts[:, i]) ** a for i, (a, c) in enumerate(zip(alphas, coefs)))

        return cls(h, len(alphas), h1, groups)

    @classmethod
    def from_model(cls, model, with_h1=False):
        """``h = sum_j c_j |t^j|^alpha_j`` from the covariance groups; ``h1`` from the u-ladder."""
        cov = model.covariance
        groups = []
        for g in cov.groups:
            groups.append((tuple(g.coords), (lambda pts, g=g: g.coef * np.linalg.norm(pts, axis=1) ** g.alpha)))

        def h(pts):
            pts = np.atleast_2d(pts)
            return sum(fn(pts[:, list(c)]) for c, fn in groups)

        h1 = None
        if with_h1:
            def h1(pts):
                pts = np.atleast_2d(pts)
                out = np.zeros(pts.shape[0])
                for k, p in enumerate(pts):
                    if np.any(p):
                        out[k] = eval_h1(model, p).h1
                return out

        return cls(h, cov.dimension, h1, tuple(groups))

    def covariance(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        hv = self.h(pts)
        diff = (pts[None, :, :] - pts[:, None, :]).reshape(-1, pts.shape[1])
        C = hv[:, None] + hv[None, :] - self.h(diff).reshape(pts.shape[0], pts.shape[0])
        return 0.5 * (C + C.T)

    @property
    def separable(self):
        return self.groups is not None and len(self.groups) > 1


class ChiSampler:
    """Exact ``chi`` on a point set; the factor is computed once and shared."""

    def __init__(self, h, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if pts.shape[0] > DENSE_MAX:
            raise ModelError(f"chi grid has {pts.shape[0]} points, limit is {DENSE_MAX}")
        self.pts = pts
        self.drift = -h(pts)
        C = ChiFieldSpec(h, pts.shape[1]).covariance(pts)
        self.factor = pivoted_cholesky(C)

    def block(self, rng, n):
        F = self.factor.F
        return rng.standard_normal((n, F.shape[1])) @ F.T + self.drift


def simulate_chi(spec, pts, reps, seed, stream=0):
    """``reps`` exact samples of ``chi`` at ``pts``; row ``k`` is one path."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if pts.shape[1] != spec.dim:
        raise ModelError("points have the wrong dimension")
    s = ChiSampler(spec.h, pts)
    blocks = [s.block(block_rng(seed, b, stream), n) for b, n in enumerate(block_sizes(reps))]
    return np.concatenate(blocks, axis=0)


# -- lattice helpers --------------------------------------------------------


def _axis(lo, hi, step):
    k0 = math.ceil(lo / step - 1e-9)
    k1 = math.floor(hi / step + 1e-9)
    return step * np.arange(k0, k1 + 1)


def _box_points(axes):
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))


def _sliding(x, w, axis, kind):
    """Valid sliding-window max or sum of width ``w`` along ``axis``."""
    n = x.shape[axis]
    if kind == "max":
        y = ndimage.maximum_filter1d(x, size=w, axis=axis, mode="nearest")
        return np.take(y, np.arange(w // 2, w // 2 + n - w + 1), axis=axis)
    c = np.cumsum(x, axis=axis)
    zero = np.zeros_like(np.take(c, [0], axis=axis))
    c = np.concatenate([zero, c], axis=axis)
    return np.take(c, np.arange(w, n + 1), axis=axis) - np.take(c, np.arange(0, n - w + 1), axis=axis)


def shift_values(chi, shape, widths):
    """Per-replication shift estimator from paths on ``[-T, T]``-type lattices.

    ``chi`` has shape ``(reps, prod(shape))``; ``widths`` are the window point
    counts per axis (box ``[0, T]`` has ``N + 1`` points for ``T = N step``).
    The grid must extend ``N`` points on each side of the origin.
    """
    reps = chi.shape[0]
    x = chi.reshape((reps,) + tuple(shape))
    m = x.reshape(reps, -1).max(axis=1)
    e = np.exp(x - m.reshape((reps,) + (1,) * len(shape)))
    mx, sm = e, e
    for ax, w in enumerate(widths):
        mx = _sliding(mx, w, ax + 1, "max")
        sm = _sliding(sm, w, ax + 1, "sum")
    return (mx / sm).reshape(reps, -1).sum(axis=1)


# -- estimates --------------------------------------------------------------


@dataclass
class ConstantEstimate:
    """Point estimate with replication-level standard error."""

    target: str
    estimate: float
    stderr: float
    reps: int
    delta: float
    seed: int
    T: object = None
    estimator: str = "shift"
    ladder: list = field(default_factory=list)
    fit: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "target": self.target, "estimate": self.estimate, "stderr": self.stderr, "reps": self.reps,
            "delta": self.delta, "seed": self.seed, "T": self.T, "estimator": self.estimator,
            "ladder": self.ladder, "fit": self.fit, "notes": self.notes,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _box(T, dim):
    T = np.broadcast_to(np.atleast_1d(np.asarray(T, dtype=float)), (dim,))
    if np.any(T < 0):
        raise ModelError("box sides must be nonnegative")
    return T


def _guard(chi):
    top = chi.max()
    if top > OVERFLOW:
        raise OverflowGuardError(f"max chi = {top:.1f} exceeds {OVERFLOW}; batch aborted")


def _group_parts(spec):
    if spec.separable:
        return [(list(c), fn) for c, fn in spec.groups]
    return [(list(range(spec.dim)), spec.h)]


def _per_rep_H(spec, Ts, delta, reps, seed, estimator):
    """Per-replication values, shape ``(len(Ts), reps)``, for boxes ``[0, T]^d``."""
    Ts = [_box(T, spec.dim) for T in Ts]
    out = np.ones((len(Ts), reps))
    for stream, (coords, hfn) in enumerate(_group_parts(spec)):
        Tmax = np.max([T[coords] for T in Ts], axis=0)
        if estimator == "direct":
            axes = [_axis(0.0, t, delta) for t in Tmax]
        else:
            axes = [_axis(-t, t, delta) for t in Tmax]
        pts = _box_points(axes)
        sampler = ChiSampler(hfn, pts)
        vals = np.empty((len(Ts), reps))
        start = 0
        for b, n in enumerate(block_sizes(reps)):
            chi = sampler.block(block_rng(seed, b, stream), n)
            _guard(chi)
            x = chi.reshape((n,) + tuple(a.size for a in axes))
            for k, T in enumerate(Ts):
                counts = [int(round(t / delta)) for t in T[coords]]
                if estimator == "direct":
                    sub = x[(slice(None),) + tuple(slice(0, c + 1) for c in counts)]
                    vals[k, start:start + n] = np.exp(sub.reshape(n, -1).max(axis=1))
                else:
                    centre = [int(round(t / delta)) for t in Tmax]
                    sl = tuple(slice(c0 - c, c0 + c + 1) for c0, c in zip(centre, counts))
                    sub = x[(slice(None),) + sl].reshape(n, -1)
                    vals[k, start:start + n] = shift_values(sub, [2 * c + 1 for c in counts], [c + 1 for c in counts])
            start += n
        out *= vals
    return out


def _check(reps, estimator, delta):
    if reps < 10_000:
        raise ModelError("reps must be >= 1e4")
    if estimator not in ESTIMATORS:
        raise ModelError(f"estimator must be one of {ESTIMATORS}")
    if not delta > 0:
        raise ModelError("delta must be positive")


def pickands_H(spec, T, delta, reps, seed, estimator="shift"):
    """``H(T) = E exp(max_{[0,T]^d} chi)`` on the lattice of step ``delta``.

    The lattice value is a lower bound for the continuous one; halve
    ``delta`` to monitor the gap.
    """
    _check(reps, estimator, delta)
    Tb = _box(T, spec.dim)
    if not np.any(Tb):
        return ConstantEstimate("H(T)", 1.0, 0.0, int(reps), delta, int(seed), Tb.tolist(), estimator)
    v = _per_rep_H(spec, [Tb], delta, reps, seed, estimator)[0]
    return ConstantEstimate("H(T)", float(v.mean()), float(v.std(ddof=1) / math.sqrt(reps)), int(reps),
                            delta, int(seed), Tb.tolist(), estimator)


def _design(Ts, d):
    """Polynomial basis ``T^d, ..., T^0`` (affine in ``d = 1``), trimmed to the ladder length."""
    Ts = np.asarray(Ts, dtype=float)
    powers = list(range(d, -1, -1))
    if len(Ts) <= d + 1:
        powers = [d, 0]
    return np.stack([Ts**p for p in powers], axis=1), powers


def pickands_H_limit(spec, T_ladder, delta, reps, seed, estimator="shift"):
    """``H = lim H([0,T]^d) / T^d`` from one simulation on the largest box.

    Fits ``H(T)`` on a polynomial in ``T`` whose leading ``T^d`` coefficient
    is the rate; the standard error comes from the same linear combination
    applied per replication.

    Raises
    ------
    ExtrapolationError
        If the fitted rate is not positive.
    """
    if len(T_ladder) < 4:
        raise ModelError("T ladder needs at least 4 entries")
    _check(reps, estimator, delta)
    Ts = sorted(float(t) for t in T_ladder)
    vals = _per_rep_H(spec, Ts, delta, reps, seed, estimator)
    X, powers = _design(Ts, spec.dim)
    pinv = np.linalg.pinv(X)
    means = vals.mean(axis=1)
    coef = pinv @ means
    resid = means - X @ coef
    per_rep = pinv[0] @ vals
    est = float(coef[0])
    se = float(per_rep.std(ddof=1) / math.sqrt(reps))
    ladder = [{"T": t, "H": float(m), "stderr": float(vals[k].std(ddof=1) / math.sqrt(reps))}
              for k, (t, m) in enumerate(zip(Ts, means))]
    out = ConstantEstimate("H limit", est, se, int(reps), delta, int(seed), Ts[-1], estimator, ladder,
                           {"powers": powers, "coef": coef.tolist(), "residual": resid.tolist(),
                            "rms_residual": float(np.sqrt(np.mean(resid**2)))})
    if est <= 0:
        raise ExtrapolationError(f"fitted rate {est:.4g} <= 0; refine delta or raise reps")
    return out


def _penalized(spec, pts):
    h1 = spec.h1(pts) if spec.h1 is not None else np.zeros(pts.shape[0])
    h1 = np.asarray(h1, dtype=float)
    if np.any(h1 < 0):
        raise ModelError("h1 must be nonnegative")
    return np.isinf(h1), np.where(np.isinf(h1), 0.0, h1)


def piterbarg_P(spec, K, delta, reps, seed):
    """``P([-K, K]^d) = E max exp(chi - h1)`` on the lattice.

    K_inf points (``h1 = inf``) contribute ``exp(0) = 1``; points on a
    boundary between K_c and K_inf follow whatever ``h1`` reports there.
    """
    _check(reps, "direct", delta)
    Kb = _box(K, spec.dim)
    if not np.any(Kb):
        return ConstantEstimate("P(T)", 1.0, 0.0, int(reps), delta, int(seed), Kb.tolist(), "direct")
    v = _per_rep_P(spec, [Kb], delta, reps, seed)[0]
    return ConstantEstimate("P(T)", float(v.mean()), float(v.std(ddof=1) / math.sqrt(reps)), int(reps),
                            delta, int(seed), Kb.tolist(), "direct")


def _per_rep_P(spec, Ks, delta, reps, seed):
    Ks = [_box(K, spec.dim) for K in Ks]
    Kmax = np.max(Ks, axis=0)
    axes = [_axis(-k, k, delta) for k in Kmax]
    pts = _box_points(axes)
    inf_mask, pen = _penalized(spec, pts)
    sampler = ChiSampler(spec.h, pts)
    centre = [int(round(k / delta)) for k in Kmax]
    shape = tuple(a.size for a in axes)
    masks = []
    for K in Ks:
        counts = [int(round(k / delta)) for k in K]
        m = np.zeros(shape, dtype=bool)
        m[tuple(slice(c0 - c, c0 + c + 1) for c0, c in zip(centre, counts))] = True
        masks.append(m.reshape(-1))
    vals = np.empty((len(Ks), reps))
    start = 0
    for b, n in enumerate(block_sizes(reps)):
        chi = sampler.block(block_rng(seed, b, 0), n)
        _guard(chi)
        chi1 = np.where(inf_mask, 0.0, chi - pen)
        for k, m in enumerate(masks):
            vals[k, start:start + n] = np.exp(chi1[:, m].max(axis=1))
        start += n
    return vals


def piterbarg_P_limit(spec, K_ladder, delta, reps, seed):
    """``P = lim_K P([-K, K]^d)`` from one simulation on the largest box.

    Reports the value at the largest ``K`` and flags whether consecutive
    ladder values agree within 2 joint standard errors (differences taken
    per replication).
    """
    if len(K_ladder) < 2:
        raise ModelError("K ladder needs at least 2 entries")
    _check(reps, "direct", delta)
    Ks = sorted(float(k) for k in K_ladder)
    vals = _per_rep_P(spec, Ks, delta, reps, seed)
    means = vals.mean(axis=1)
    ses = vals.std(axis=1, ddof=1) / math.sqrt(reps)
    agree, paired = [], []
    for a in range(len(Ks) - 1):
        gap = abs(means[a + 1] - means[a])
        agree.append(bool(gap <= 2 * math.hypot(ses[a], ses[a + 1])))
        diff = vals[a + 1] - vals[a]
        paired.append(float(diff.std(ddof=1) / math.sqrt(reps)))
    ladder = [{"K": k, "P": float(m), "stderr": float(s)} for k, m, s in zip(Ks, means, ses)]
    return ConstantEstimate("P limit", float(means[-1]), float(ses[-1]), int(reps), delta, int(seed), Ks[-1],
                            "direct", ladder, {"agree_2se": agree, "paired_stderr": paired, "converged": all(agree)})
