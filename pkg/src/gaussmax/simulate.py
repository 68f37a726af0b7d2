"""Exact sampling of ``X(t) = sigma(t) X0(t)`` on grids.

Two generators share one block/seed scheme: dense pivoted Cholesky (any
model, Kronecker-factored when the covariance separates over axes) and FFT
circulant embedding for the stationary part on regular 1-d and 2-d grids.
Replications are produced in fixed-size blocks, each drawing from its own
``SeedSequence(seed, spawn_key=(stream, block))``, so results do not depend on
how blocks are spread over workers.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._linalg import pivoted_cholesky
from .errors import EmbeddingError, ModelError

DENSE_MAX = 20_000
CIRCULANT_MAX = 2**22
BLOCK = 2048
MAX_DOUBLINGS = 4
CLIP_TOL = 1e-8
CHUNK_CELLS = 1 << 22  # complex cells per FFT call


def block_rng(seed, block, stream=0):
    """Generator for one replication block; independent of the worker layout."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(block)))
    return np.random.Generator(np.random.PCG64(ss))


def block_sizes(reps, block=BLOCK):
    full, rest = divmod(int(reps), block)
    return [block] * full + ([rest] if rest else [])


# -- grids ------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Tensor grid given by its per-axis coordinates."""

    axes: tuple

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float).reshape(-1) for a in self.axes)
        for a in axes:
            if a.size == 0 or np.any(np.diff(a) <= 0):
                raise ModelError("grid axes must be nonempty and strictly increasing")
            if a[0] <= 0 <= a[-1] and not np.any(a == 0):
                raise ModelError("grid range contains 0 but 0 is not a grid point")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def regular(cls, lo, hi, step):
        """Axes ``k * step`` anchored at 0 (or at ``lo`` if 0 is outside the range)."""
        lo, hi = np.atleast_1d(lo).astype(float), np.atleast_1d(hi).astype(float)
        step = np.broadcast_to(np.atleast_1d(step).astype(float), lo.shape)
        axes = []
        for a, b, h in zip(lo, hi, step):
            if not h > 0:
                raise ModelError("grid step must be positive")
            anchor = 0.0 if a <= 0 <= b else a
            k0 = math.ceil((a - anchor) / h - 1e-9)
            k1 = math.floor((b - anchor) / h + 1e-9)
            axes.append(anchor + h * np.arange(k0, k1 + 1))
        return cls(tuple(axes))

    @classmethod
    def from_counts(cls, lo, hi, counts):
        lo, hi = np.atleast_1d(lo).astype(float), np.atleast_1d(hi).astype(float)
        counts = np.broadcast_to(np.atleast_1d(counts), lo.shape)
        axes = [np.linspace(a, b, int(n)) if n > 1 else np.array([a]) for a, b, n in zip(lo, hi, counts)]
        for ax in axes:
            # snap roundoff so that 0 is an exact point when it lies on the lattice
            ax[np.abs(ax) < 1e-12 * max(1.0, np.abs(ax).max())] = 0.0
        return cls(tuple(axes))

    @classmethod
    def single(cls, point):
        return cls(tuple(np.array([float(x)]) for x in np.atleast_1d(point)))

    @property
    def dimension(self):
        return len(self.axes)

    @property
    def shape(self):
        return tuple(a.size for a in self.axes)

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def steps(self):
        return tuple(float(np.diff(a).mean()) if a.size > 1 else 0.0 for a in self.axes)

    @property
    def is_regular(self):
        return all(a.size < 3 or np.ptp(np.diff(a)) <= 1e-9 * (a[-1] - a[0]) for a in self.axes)

    @property
    def points(self):
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1).reshape(-1, self.dimension)

    def index_of(self, point, tol=1e-12):
        idx = []
        for a, x in zip(self.axes, np.atleast_1d(point)):
            hit = np.flatnonzero(np.abs(a - x) <= tol)
            if hit.size == 0:
                return None
            idx.append(int(hit[0]))
        return int(np.ravel_multi_index(tuple(idx), self.shape))

    @property
    def origin_index(self):
        return self.index_of(np.zeros(self.dimension))

    def to_dict(self):
        return {"axes": [a.tolist() for a in self.axes], "shape": list(self.shape), "steps": list(self.steps)}


# -- batches ----------------------------------------------------------------


@dataclass
class SampleBatch:
    values: np.ndarray
    grid: GridSpec
    seed: int
    method: str
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != self.grid.size:
            raise ModelError("batch shape must be reps x grid points")

    @property
    def reps(self):
        return self.values.shape[0]

    def sidecar(self):
        return {"reps": self.reps, "points": self.grid.size, "dtype": "<f8", "order": "row-major",
                "seed": self.seed, "method": self.method, "grid": self.grid.to_dict(),
                "info": {k: v for k, v in self.info.items() if isinstance(v, (int, float, str, bool))}}

    def dump(self, path):
        """Raw little-endian float64 values plus ``path + '.json'`` sidecar."""
        np.ascontiguousarray(self.values, dtype="<f8").tofile(path)
        with open(str(path) + ".json", "w") as fh:
            json.dump(self.sidecar(), fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(str(path) + ".json") as fh:
            meta = json.load(fh)
        vals = np.fromfile(path, dtype="<f8").reshape(meta["reps"], meta["points"])
        grid = GridSpec(tuple(np.array(a) for a in meta["grid"]["axes"]))
        return cls(vals, grid, meta["seed"], meta["method"], meta.get("info", {}))


# -- samplers ---------------------------------------------------------------


class _Sampler:
    method = "abstract"

    def __init__(self, model, grid):
        if grid.dimension != model.dimension:
            raise ModelError("grid dimension differs from model dimension")
        pts = grid.points
        if not np.all(model.contains(pts)):
            raise ModelError("grid leaves the model domain")
        self.model = model
        self.grid = grid
        self.info = {}

    def _block(self, rng, n):
        raise NotImplementedError

    def _one(self, seed, stream, b, n, antithetic):
        rng = block_rng(seed, b, stream)
        if not antithetic:
            return self._block(rng, n)
        # the second half of the block reuses the negated normals of the first
        v = self._block(rng, (n + 1) // 2)
        return np.concatenate([v, -v], axis=0)[:n]

    def blocks(self, reps, seed, stream=0, workers=1, antithetic=False):
        """Yield ``(block_index, values)`` in block order."""
        sizes = block_sizes(reps)
        if workers <= 1 or len(sizes) <= 1:
            for b, n in enumerate(sizes):
                yield b, self._one(seed, stream, b, n, antithetic)
            return
        with ThreadPoolExecutor(max_workers=workers) as pool:
            window = 2 * workers
            for start in range(0, len(sizes), window):
                chunk = range(start, min(start + window, len(sizes)))
                futs = [pool.submit(self._one, seed, stream, b, sizes[b], antithetic) for b in chunk]
                for b, fut in zip(chunk, futs):
                    yield b, fut.result()

    def sample(self, reps, seed, stream=0, workers=1, antithetic=False):
        vals = np.concatenate([v for _, v in self.blocks(reps, seed, stream, workers, antithetic)], axis=0)
        return SampleBatch(vals, self.grid, int(seed), self.method, dict(self.info))


def _kronecker_ok(model):
    cov = model.covariance
    return (cov.form == "sum_then_exp" and not cov.is_rotated
            and all(len(g.coords) == 1 for g in cov.groups))


class DenseSampler(_Sampler):
    """Exact sampler from the factorized grid covariance.

    When ``r`` factors over axes (sum-then-exp, unrotated, one coordinate
    per group) the factor is the Kronecker product of per-axis factors,
    which is the same covariance at a fraction of the cost; ``sigma`` is then
    applied pointwise.
    """

    method = "Dense"

    def __init__(self, model, grid, kronecker="auto"):
        super().__init__(model, grid)
        if grid.size > DENSE_MAX:
            raise ModelError(f"dense sampling is limited to {DENSE_MAX} grid points, got {grid.size}")
        use_kron = _kronecker_ok(model) and grid.dimension > 1 if kronecker == "auto" else bool(kronecker)
        d = model.dimension
        if use_kron:
            self.factors = []
            for i, ax in enumerate(grid.axes):
                diff = np.zeros((ax.size * ax.size, d))
                diff[:, i] = (ax[None, :] - ax[:, None]).reshape(-1)
                R = model.covariance.r(diff).reshape(ax.size, ax.size)
                fac = pivoted_cholesky(0.5 * (R + R.T))
                self.factors.append(fac.F)
            self.sigma = model.sigma(grid.points)
            self.info.update(kronecker=True, rank=int(np.prod([F.shape[1] for F in self.factors])))
            self.F = None
        else:
            fac = pivoted_cholesky(model.covariance_matrix(grid.points))
            self.F = fac.F
            self.info.update(kronecker=False, rank=fac.rank, jitter=fac.jitter,
                             smallest_pivot=fac.smallest_pivot)

    def _block(self, rng, n):
        if self.F is not None:
            return rng.standard_normal((n, self.F.shape[1])) @ self.F.T
        ranks = tuple(F.shape[1] for F in self.factors)
        x = rng.standard_normal((n,) + ranks)
        for F in self.factors:
            # contract the leading rank index; the grid index is appended last
            x = np.tensordot(x, F, axes=([1], [1]))
        return x.reshape(n, -1) * self.sigma


def _lag_axis(m, h):
    k = np.arange(m)
    return np.where(k <= m // 2, k, k - m) * h


def _embed_eigs(model, steps, shape, doublings):
    """Eigenvalues of the (block-)circulant embedding after ``doublings`` doublings."""
    d = len(shape)
    sizes = [max(2 * (n - 1), 1) * 2**doublings for n in shape]
    lags = np.meshgrid(*[_lag_axis(m, h) for m, h in zip(sizes, steps)], indexing="ij")
    base = model.covariance.r(np.stack(lags, axis=-1).reshape(-1, d)).reshape(sizes)
    eig = np.real(np.fft.fftn(base))
    return eig, base, sizes


class CirculantSampler(_Sampler):
    """FFT circulant embedding for the stationary part on a regular 1-d or 2-d grid.

    Negative eigenvalues at the roundoff level of the FFT are zeroed without
    being counted. Any larger negativity doubles the embedding, up to four
    times; what then remains is clipped when it is within ``1e-8`` of the
    largest eigenvalue (recorded as ``clipping_mass``) and is an error
    otherwise.
    """

    method = "Circulant"

    def __init__(self, model, grid, apply_sigma=True):
        super().__init__(model, grid)
        if grid.dimension not in (1, 2):
            raise ModelError("circulant embedding supports d = 1 and d = 2 only")
        if grid.size > CIRCULANT_MAX:
            raise ModelError(f"circulant sampling is limited to {CIRCULANT_MAX} points")
        if not grid.is_regular:
            raise ModelError("circulant embedding needs a regular grid")
        steps = [s if s > 0 else 1.0 for s in grid.steps]
        eps = np.finfo(float).eps
        worst = None
        for j in range(MAX_DOUBLINGS + 1):
            eig, base, sizes = _embed_eigs(model, steps, grid.shape, j)
            big = eig.max()
            floor = 4.0 * math.log2(max(eig.size, 2)) * eps * np.abs(base).sum()
            worst = eig.min()
            if worst >= -floor:
                break
        else:
            if worst < -CLIP_TOL * big:
                raise EmbeddingError(
                    f"embedding not nonnegative after {MAX_DOUBLINGS} doublings "
                    f"(min eigenvalue {worst:.3g}, max {big:.3g})", float(worst))
        neg = eig < -floor
        mass = float(-eig[neg].sum() / eig[eig > 0].sum()) if neg.any() else 0.0
        eig = np.where(eig > 0, eig, 0.0)
        self.sizes = sizes
        self.sqrt_eig = np.sqrt(eig / eig.size)
        self.apply_sigma = apply_sigma
        self.sigma = model.sigma(grid.points) if apply_sigma and not model.is_stationary else None
        self.info.update(doublings=j, embedding=list(sizes), clipping_mass=mass,
                         min_eigenvalue=float(worst), roundoff_floor=float(floor))

    def _block(self, rng, n):
        # each complex draw gives two independent real samples
        half = (n + 1) // 2
        axes = tuple(range(1, 1 + len(self.sizes)))
        sl = (slice(None),) + tuple(slice(0, k) for k in self.grid.shape)
        step = max(1, CHUNK_CELLS // int(np.prod(self.sizes)))
        re, im = [], []
        for a in range(0, half, step):
            z = rng.standard_normal((2, min(step, half - a)) + tuple(self.sizes))
            w = (z[0] + 1j * z[1]) * self.sqrt_eig
            y = np.fft.fftn(w, axes=axes)[sl].reshape(w.shape[0], -1)
            re.append(y.real)
            im.append(y.imag)
        out = np.concatenate(re + im, axis=0)[:n]
        if self.sigma is not None:
            out = out * self.sigma
        return out


# -- functional front ends --------------------------------------------------


def dense_sample(model, grid, reps, seed, workers=1, antithetic=False):
    """``reps`` exact samples of ``X`` on ``grid`` from the factorized covariance."""
    return DenseSampler(model, grid).sample(reps, seed, workers=workers, antithetic=antithetic)


def circulant_sample_1d(model, grid, reps, seed, workers=1, antithetic=False):
    """Samples of the stationary part ``X0`` on a regular 1-d grid (``sigma`` not applied)."""
    if grid.dimension != 1:
        raise ModelError("expected a 1-d grid")
    return CirculantSampler(model, grid, apply_sigma=False).sample(reps, seed, workers=workers,
                                                                   antithetic=antithetic)


def circulant_sample_2d(model, grid, reps, seed, workers=1, antithetic=False):
    """Samples of ``X0`` on a regular 2-d grid by block-circulant embedding."""
    if grid.dimension != 2:
        raise ModelError("expected a 2-d grid")
    return CirculantSampler(model, grid, apply_sigma=False).sample(reps, seed, workers=workers,
                                                                   antithetic=antithetic)


def apply_variance(batch, model):
    """Multiply each grid value by ``sigma(t)``; exact since ``X = sigma X0``."""
    s = model.sigma(batch.grid.points)
    info = dict(batch.info, sigma_applied=True)
    return SampleBatch(batch.values * s, batch.grid, batch.seed, batch.method, info)


def make_sampler(model, grid, method="auto"):
    """Circulant for regular 1-d/2-d grids beyond the dense bound or when asked, else dense."""
    if method == "dense":
        return DenseSampler(model, grid)
    if method == "circulant":
        return CirculantSampler(model, grid)
    if method != "auto":
        raise ModelError(f"unknown sampling method {method!r}")
    if grid.dimension <= 2 and grid.is_regular and grid.size > 2000 and not _kronecker_ok(model):
        return CirculantSampler(model, grid)
    if grid.dimension == 1 and grid.is_regular and grid.size > 512:
        return CirculantSampler(model, grid)
    return DenseSampler(model, grid)
