"""Laplace-type integrals ``L_f(lambda) = int exp(-lambda f(t)) dt`` over boxes and charts."""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .errors import ModelError, QuadratureError
from .model import PowerSumVariance

CUTOFF = 40.0  # exp(-40) ~ 4e-18
MAX_LEVEL = 20

_G8 = np.polynomial.legendre.leggauss(8)
_G16 = np.polynomial.legendre.leggauss(16)


@dataclass
class CubatureResult:
    value: float
    error: float
    cells: int


def _tensor_rule(rule, lo, hi):
    x, w = rule
    k = len(lo)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = [mid[i] + half[i] * x for i in range(k)]
    grid = np.stack(np.meshgrid(*nodes, indexing="ij"), axis=-1).reshape(-1, k)
    wt = np.ones(1)
    for i in range(k):
        wt = np.multiply.outer(wt, w * half[i]).reshape(-1)
    return grid, wt


def _cell(fn, lo, hi):
    p16, w16 = _tensor_rule(_G16, lo, hi)
    p8, w8 = _tensor_rule(_G8, lo, hi)
    v16 = float(np.dot(w16, fn(p16)))
    v8 = float(np.dot(w8, fn(p8)))
    return v16, abs(v16 - v8)


def cubature(fn, lo, hi, rtol=1e-8, atol=0.0, max_level=MAX_LEVEL, split_at=None, grade=0):
    """Globally adaptive tensor Gauss-Legendre cubature (16-point rule, 8-point error).

    The worst cell is bisected along every axis until the summed error
    estimate meets ``max(rtol * |value|, atol)``.

    Parameters
    ----------
    fn : callable
        Vectorized integrand on ``(n, k)`` arrays.
    split_at : array_like, optional
        Initial cut point (e.g. the origin) so a kink falls on cell faces.
    grade : int
        Extra geometric cuts at distances ``2^-j`` (relative) from
        ``split_at``, ``j = 1..grade``, for integrands peaked there.

    Raises
    ------
    QuadratureError
        If cells at ``max_level`` still carry too much error.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(hi <= lo):
        return CubatureResult(0.0, 0.0, 0)
    k = lo.shape[0]
    starts = [(lo, hi)]
    if split_at is not None:
        c = np.asarray(split_at, dtype=float)
        cuts = []
        for i in range(k):
            pts = {lo[i], hi[i]}
            if lo[i] < c[i] < hi[i]:
                pts.add(c[i])
            for j in range(1, grade + 1):
                for edge in (lo[i], hi[i]):
                    x = c[i] + (edge - c[i]) * 2.0**-j
                    if lo[i] < x < hi[i] and x != c[i]:
                        pts.add(x)
            cuts.append(sorted(pts))
        starts = []
        for idx in itertools.product(*[range(len(cu) - 1) for cu in cuts]):
            a = np.array([cuts[i][j] for i, j in enumerate(idx)])
            b = np.array([cuts[i][j + 1] for i, j in enumerate(idx)])
            starts.append((a, b))
    heap, frozen_v, frozen_e = [], 0.0, 0.0
    total_v, total_e, counter = 0.0, 0.0, 0
    for a, b in starts:
        v, e = _cell(fn, a, b)
        heapq.heappush(heap, (-e, counter, 0, a, b, v))
        counter += 1
        total_v += v
        total_e += e
    ncell = len(starts)
    while heap:
        if total_e <= max(rtol * abs(total_v), atol):
            break
        neg_e, _, level, a, b, v = heapq.heappop(heap)
        if level >= max_level:
            frozen_v += v
            frozen_e += -neg_e
            if frozen_e > max(rtol * abs(total_v), atol):
                raise QuadratureError("refinement did not converge", total_v, total_e)
            continue
        total_v -= v
        total_e += neg_e
        m = 0.5 * (a + b)
        for corner in itertools.product((0, 1), repeat=k):
            ca = np.where(np.array(corner) == 0, a, m)
            cb = np.where(np.array(corner) == 0, m, b)
            cv, ce = _cell(fn, ca, cb)
            heapq.heappush(heap, (-ce, counter, level + 1, ca, cb, cv))
            counter += 1
            total_v += cv
            total_e += ce
            ncell += 1
    if total_e > max(rtol * abs(total_v), atol):
        raise QuadratureError("refinement did not converge", total_v, total_e)
    return CubatureResult(total_v, total_e, ncell)


@dataclass(frozen=True)
class PowerPart:
    coord: int
    c: float
    beta: float


class LaplaceIntegrand:
    """``f(t) = (1 - sigma^2(t)) / 2`` on a box inside the unit cube.

    Parameters
    ----------
    f : callable
        Vectorized ``(n, d) -> (n,)``.
    lo, hi : sequence of float
        Integration box (default the unit cube ``[-1, 1]^d``).
    power : tuple of PowerPart, optional
        Marks ``f = sum c_i |t_i|^beta_i`` and enables the incomplete-gamma path.
    """

    def __init__(self, f, lo, hi, power=None):
        self.f = f
        self.lo = tuple(float(x) for x in lo)
        self.hi = tuple(float(x) for x in hi)
        if len(self.lo) != len(self.hi):
            raise ModelError("box bounds differ in length")
        self.power = power

    @property
    def dimension(self):
        return len(self.lo)

    @classmethod
    def power_sum(cls, parts, lo, hi):
        """Separable ``f = sum c_i |t_i|^beta_i`` given as ``(coord, c, beta)`` triples."""
        parts = tuple(PowerPart(int(i), float(c), float(b)) for i, c, b in parts)

        def f(pts):
            pts = np.atleast_2d(pts)
            out = np.zeros(pts.shape[0])
            for p in parts:
                out += p.c * np.abs(pts[:, p.coord]) ** p.beta
            return out

        return cls(f, lo, hi, parts)

    @classmethod
    def constant(cls, value, lo, hi):
        return cls(lambda pts: np.full(np.atleast_2d(pts).shape[0], float(value)), lo, hi)

    @classmethod
    def from_model(cls, model, lo=None, hi=None):
        """Integrand over the unit cube intersected with the model domain.

        Unrotated power-sum variances with constant slowly varying factors use
        the unclamped power form whenever it never reaches the variance floor
        on the box.
        """
        d = model.dimension
        lo = np.maximum(model.lo, -1.0) if lo is None else np.asarray(lo, dtype=float)
        hi = np.minimum(model.hi, 1.0) if hi is None else np.asarray(hi, dtype=float)
        var = model.variance
        if (isinstance(var, PowerSumVariance) and var.on == "variance"
                and not model.covariance.is_rotated and all(t.sv.is_constant for t in var.terms)):
            reach = np.maximum(np.abs(lo), np.abs(hi))
            peak = sum(t.c * t.sv.constant_value * reach[t.coord] ** t.beta for t in var.terms)
            if peak <= 1.0 - var.sigma2_min:
                parts = [(t.coord, 0.5 * t.c * t.sv.constant_value, t.beta) for t in var.terms if t.c != 0]
                return cls.power_sum(parts, lo, hi)
        if d != len(lo):
            raise ModelError("box dimension mismatch")
        return cls(lambda pts: 0.5 * model.one_minus_sigma2(np.atleast_2d(pts)), lo, hi)

    def __call__(self, pts):
        return self.f(np.atleast_2d(np.asarray(pts, dtype=float)))


def _half_line(k, beta, b):
    """``int_0^b exp(-k t^beta) dt`` by the regularized lower incomplete gamma."""
    if b <= 0:
        return 0.0
    if k == 0:
        return b
    s = 1.0 / beta
    return k ** (-s) * math.gamma(1.0 + s) * special.gammainc(s, k * b**beta)


def _segment(k, beta, a, b):
    if a >= 0:
        return _half_line(k, beta, b) - _half_line(k, beta, a)
    if b <= 0:
        return _half_line(k, beta, -a) - _half_line(k, beta, -b)
    return _half_line(k, beta, -a) + _half_line(k, beta, b)


def _power_closed(integrand, lam):
    by_coord = {}
    for p in integrand.power:
        by_coord.setdefault(p.coord, []).append(p)
    val = 1.0
    for i, (a, b) in enumerate(zip(integrand.lo, integrand.hi)):
        parts = by_coord.get(i, [])
        if not parts:
            val *= b - a
        elif len(parts) == 1:
            val *= _segment(lam * parts[0].c, parts[0].beta, a, b)
        else:
            g = lambda x, ps=parts: sum(p.c * np.abs(x[:, 0]) ** p.beta for p in ps)
            val *= laplace_cube(LaplaceIntegrand(g, [a], [b]), lam)
    return val


def laplace_cube(integrand, lam, rtol=1e-8):
    """``L_f(lambda)`` over the integrand's box.

    Separable power sums multiply 1-d incomplete-gamma factors; everything
    else goes through adaptive cubature started from the orthant split.
    """
    if not lam > 0:
        raise ModelError("lambda must be positive")
    if integrand.power is not None:
        return _power_closed(integrand, lam)
    f = integrand.f
    res = cubature(lambda x: np.exp(-lam * f(x)), integrand.lo, integrand.hi, rtol=rtol,
                   split_at=np.zeros(integrand.dimension), grade=_grade(f, integrand.lo, integrand.hi, lam))
    return res.value


def _grade(f, lo, hi, lam, center=None, limit=60):
    """Geometric depth at which ``lambda f`` drops below 1 toward the origin in every orthant.

    Without it the Gauss nodes of a coarse cell can all miss a peak much
    narrower than the cell and report a converged zero.
    """
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    c = np.zeros(lo.shape[0]) if center is None else np.asarray(center, dtype=float)
    corners = np.array(list(itertools.product(*zip(lo, hi))))
    for j in range(limit):
        if np.all(lam * f(c + (corners - c) * 2.0**-j) <= 1.0):
            return j + 3
    return limit


@dataclass
class TruncatedResult:
    value: float
    full: float
    deviation: float
    threshold: float
    bound: float


def gamma1(u, gamma=0.0):
    """``gamma(u) + log(u)^2 / u``."""
    return gamma + math.log(u) ** 2 / u


def _level_crossings(fn, a, b, tau, n=257):
    """Subintervals of ``[a, b]`` where the 1-d ``fn <= tau``, edges located by brentq."""
    x = np.linspace(a, b, n)
    y = fn(x) - tau
    inside = y <= 0
    pieces, start = [], a if inside[0] else None
    for i in range(1, n):
        if inside[i] != inside[i - 1]:
            root = optimize.brentq(lambda s: float(fn(np.array([s]))[0] - tau), x[i - 1], x[i], xtol=1e-15)
            if inside[i]:
                start = root
            else:
                pieces.append((start, root))
                start = None
    if start is not None:
        pieces.append((start, b))
    return pieces


def laplace_truncated(integrand, u, gamma=0.0, rtol=1e-8):
    """Laplace integral at ``lambda = u^2`` restricted to ``{f <= 2 gamma1(u) / u}``.

    Returns the restricted value, the full integral, their relative deviation
    and the reference size ``exp(-2 log^2 u)``.
    """
    if not u >= 2:
        raise ModelError("u must be >= 2")
    lam = u * u
    tau = 2.0 * gamma1(u, gamma) / u
    full = laplace_cube(integrand, lam, rtol)
    f = integrand.f
    if integrand.dimension == 1:
        g = lambda x: f(np.asarray(x).reshape(-1, 1))
        val = 0.0
        for a, b in _level_crossings(g, integrand.lo[0], integrand.hi[0], tau):
            val += cubature(lambda x: np.exp(-lam * f(x)), [a], [b], rtol=rtol, split_at=[0.0],
                            grade=_grade(f, integrand.lo, integrand.hi, lam)).value
    else:
        def masked(x):
            fx = f(x)
            return np.where(fx <= tau, np.exp(-lam * fx), 0.0)

        val = cubature(masked, integrand.lo, integrand.hi, rtol=max(rtol, 1e-6), atol=1e-10 * full,
                       split_at=np.zeros(integrand.dimension), grade=_grade(f, integrand.lo, integrand.hi, lam)).value
    val = min(val, full)
    dev = (full - val) / full if full > 0 else 0.0
    return TruncatedResult(val, full, dev, tau, math.exp(-2.0 * math.log(u) ** 2))


def laplace_manifold(chart, f, u, H, q, rtol=1e-8):
    """Chart integral of ``H * prod_j q_j^{-1} * exp(-u^2 f)`` against the k-volume.

    Parameters
    ----------
    chart : ManifoldChart
    f : callable
        Vectorized ``f`` on ``(n, d)`` points in the working basis.
    H : float or callable
        Pickands-type constant; a callable takes the chart point.
    q : sequence of float or callable
        Tangent-direction scalings ``q_j(u)``, ``j = 1..k``. A sequence is
        hoisted out of the integral (linear charts); a callable
        ``q(u, x)`` is evaluated per node.

    Raises
    ------
    QuadratureError
        When the chart's Gram determinant falls below 1e-12 at a node.
    """
    if chart.degenerate:
        return 0.0
    lam = u * u
    affine = chart.spec is not None and chart.spec.get("kind") == "affine"
    if affine:
        J = chart.jacobian(np.array(chart.lo))
        g0 = float(np.linalg.det(J.T @ J))
        if g0 < 1e-12:
            raise QuadratureError(f"Gram determinant {g0:.3g} below 1e-12 at node {chart.lo}", 0.0, math.inf)
        vol = lambda P: np.full(P.shape[0], math.sqrt(g0))
    else:
        def vol(P):
            out = np.empty(P.shape[0])
            for n, p in enumerate(P):
                g = chart.gram_det(p)
                if g < 1e-12:
                    raise QuadratureError(f"Gram determinant {g:.3g} below 1e-12 at node {tuple(p)}", 0.0, math.inf)
                out[n] = math.sqrt(g)
            return out

    hoisted = not callable(H) and not callable(q)
    if hoisted:
        pref = float(H) / float(np.prod(q))

        def integrand(P):
            return np.exp(-lam * f(chart(P))) * vol(P)
    else:
        pref = 1.0

        def integrand(P):
            X = chart(P)
            Hx = np.array([H(x) for x in X]) if callable(H) else float(H)
            qx = np.array([np.prod(q(u, x)) for x in X]) if callable(q) else float(np.prod(q))
            return Hx / qx * np.exp(-lam * f(X)) * vol(P)

    mid = 0.5 * (np.array(chart.lo) + np.array(chart.hi))
    fc = lambda P: f(chart(P))
    res = cubature(integrand, chart.lo, chart.hi, rtol=rtol, split_at=mid,
                   grade=_grade(fc, chart.lo, chart.hi, lam, mid))
    return pref * res.value
