"""Penalized distances on product spaces and the Talagrand-type tail bound.

A base space carries a penalty h (nonnegative, zero on the diagonal) and a
probability vector.  On the N-fold product the penalized distance from x to
a set A is f(A, x) = min over y in A of sum_i h(x_i, y_i).
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import FinitePQSpace, InvalidSpaceError, validate

MAX_PRODUCT_POINTS = 4096
MAX_TABLE_CELLS = 1 << 16
SAMPLE_CHUNK = 1 << 14


@dataclass(frozen=True, eq=False)
class BasePenalty:
    h: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        h, mu = self.h, self.mu
        if h.ndim != 2 or h.shape[0] != h.shape[1] or mu.shape != (h.shape[0],):
            raise ValueError("penalty must be square and match the measure")
        if (h.astype(np.float64) < 0).any():
            raise ValueError("penalty must be nonnegative")
        if any(h[i, i] != 0 for i in range(h.shape[0])):
            raise ValueError("penalty must vanish on the diagonal")
        m = mu.astype(np.float64)
        if (m <= 0).any():
            raise ValueError("base measure must have full support")
        if abs(m.sum() - 1) > 1e-9:
            raise ValueError("base measure must sum to 1")

    @property
    def omega_size(self) -> int:
        return self.h.shape[0]

    @classmethod
    def from_lists(cls, h, mu=None) -> "BasePenalty":
        h = np.asarray(h, dtype=np.float64)
        mu = np.full(h.shape[0], 1.0 / h.shape[0]) if mu is None else np.asarray(mu, dtype=np.float64)
        return cls(h, mu)

    @classmethod
    def from_space(cls, space: FinitePQSpace) -> "BasePenalty":
        return cls(space.float_q(), space.float_mu())


@dataclass(frozen=True)
class PenaltyNorms:
    sup_norm: float
    l2_norm: float


def penalty_norms(base: BasePenalty) -> PenaltyNorms:
    h = base.h.astype(np.float64)
    mu = base.mu.astype(np.float64)
    return PenaltyNorms(float(h.max()), math.sqrt(float(mu @ (h * h) @ mu)))


def talagrand_bound(pA, u, N: int, norms: PenaltyNorms) -> float:
    """(1/pA) exp(-min(u^2 / (8 N |h|_2^2), u / (2 |h|_inf))); zero-norm terms drop out."""
    pA = float(pA)
    if not 0 < pA <= 1:
        raise ValueError("pA must be in (0, 1]")
    if u < 0 or N < 1:
        raise ValueError("u must be nonnegative and N positive")
    u = float(u)
    terms = []
    if norms.l2_norm > 0:
        # ratio first: squaring a tiny norm would underflow to zero
        r = u / norms.l2_norm
        terms.append(r * r / (8 * N) if r < 1e150 else math.inf)
    if norms.sup_norm > 0:
        terms.append(u / (2 * norms.sup_norm))
    return math.exp(-min(terms)) / pA if terms else 1.0 / pA


def corollary_alpha_bound(base: FinitePQSpace, N: int, eps) -> float:
    """Upper bound for both one-sided concentration functions of the N-fold l1 product."""
    report = validate(base)
    if not report.is_quasimetric:
        raise InvalidSpaceError(report)
    return talagrand_bound(0.5, eps, N, penalty_norms(BasePenalty.from_space(base)))


def product_space(base: FinitePQSpace, N: int) -> FinitePQSpace:
    """Materialized product with q(x, y) = sum_i q(x_i, y_i) and the product measure."""
    k = base.n
    if k**N > MAX_PRODUCT_POINTS:
        raise ValueError(f"{k}^{N} points exceeds {MAX_PRODUCT_POINTS}")
    cells = list(itertools.product(range(k), repeat=N))
    idx = np.array(cells, dtype=np.intp).reshape(len(cells), N)
    q = np.zeros((len(cells), len(cells)), dtype=base.q.dtype)
    mu = np.ones(len(cells), dtype=base.mu.dtype)
    if base.exact:
        q[:] = Fraction(0)
        mu[:] = Fraction(1)
    for i in range(N):
        q = q + base.q[np.ix_(idx[:, i], idx[:, i])]
        mu = mu * base.mu[idx[:, i]]
    labels = tuple("".join(base.labels[j] for j in c) if all(len(l) == 1 for l in base.labels) else "|".join(base.labels[j] for j in c) for c in cells)
    return FinitePQSpace(labels, q, mu)


# ---------------------------------------------------------------------------
# Frozen sets of positive measure


@dataclass(frozen=True, eq=False)
class ProductSet:
    """A = C x Omega^(N - K) with C an explicit set of points of Omega^K.

    f(A, x) then only depends on the first K coordinates, and mu(A) = mu^K(C)
    is exact.  K = 0 gives the whole product (f = 0).
    """

    points: np.ndarray  # (m, K) base indices
    N: int
    mass: float

    @property
    def dims(self) -> int:
        return self.points.shape[1]

    @classmethod
    def whole(cls, N: int) -> "ProductSet":
        return cls(np.zeros((1, 0), dtype=np.intp), N, 1.0)

    def distance(self, base: BasePenalty, x: np.ndarray) -> np.ndarray:
        """f(A, x) for rows x over (at least) the first K coordinates."""
        K = self.dims
        out = np.empty(len(x))
        if K == 0:
            out[:] = 0.0
            return out
        h = base.h.astype(np.float64)
        for s in range(0, len(x), 1024):
            xs = x[s : s + 1024, :K]
            acc = np.zeros((len(xs), len(self.points)))
            for i in range(K):
                acc += h[np.ix_(xs[:, i], self.points[:, i])]
            out[s : s + len(xs)] = acc.min(axis=1)
        return out

    def distance_table(self, base: BasePenalty) -> np.ndarray | None:
        """f on every cell of Omega^K in mixed-radix order, or None when too many cells."""
        k = base.omega_size
        if k**self.dims > MAX_TABLE_CELLS:
            return None
        cells = np.array(list(itertools.product(range(k), repeat=self.dims)), dtype=np.intp)
        return self.distance(base, cells.reshape(k**self.dims, self.dims))


def sample_product_set(base: BasePenalty, N: int, target_mass: float, seed: int, dims: int | None = None) -> ProductSet:
    """Freeze a set by drawing points of Omega^K from mu^K until their exact mass reaches the target."""
    if not 0 < target_mass <= 1:
        raise ValueError("target_mass must be in (0, 1]")
    K = min(N, 10) if dims is None else dims
    if not 0 <= K <= N:
        raise ValueError("dims must be between 0 and N")
    if K == 0:
        return ProductSet.whole(N)
    rng = np.random.default_rng(seed)
    mu = base.mu.astype(np.float64)
    chosen: dict[tuple, float] = {}
    mass = 0.0
    while mass < target_mass - 1e-12:
        pts = rng.choice(base.omega_size, size=(256, K), p=mu)
        for row in map(tuple, pts.tolist()):
            if row not in chosen:
                chosen[row] = float(np.prod(mu[list(row)]))
                mass = math.fsum(chosen.values())
                if mass >= target_mass - 1e-12:
                    break
    points = np.array(sorted(chosen), dtype=np.intp).reshape(-1, K)
    return ProductSet(points, N, mass)


@dataclass(frozen=True)
class TailRow:
    u: float
    empirical: float
    stderr: float
    bound: float

    @property
    def dominated(self) -> bool:
        return self.empirical <= self.bound + 4 * self.stderr


def _cell_index(x: np.ndarray, k: int) -> np.ndarray:
    idx = np.zeros(len(x), dtype=np.int64)
    for i in range(x.shape[1]):
        idx = idx * k + x[:, i]
    return idx


def product_tail_monte_carlo(
    base: BasePenalty,
    N: int,
    A: ProductSet,
    u_grid: Sequence[float],
    samples: int,
    seed: int,
    threads: int | None = 1,
) -> list[TailRow]:
    """Empirical P(f(A, x) >= u) for x ~ mu^N against the tail bound with pA = mu(A).

    Only the first K coordinates of x affect f, so only those are drawn.
    Chunk c draws from the generator seeded by (seed, c); counts are summed,
    so ``threads`` does not change the result.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    if len(A.points) == 0:
        raise ValueError("A is empty")
    mu = base.mu.astype(np.float64)
    u = np.asarray(u_grid, dtype=np.float64)
    table = A.distance_table(base)

    def chunk(job):
        c, size = job
        rng = np.random.default_rng([seed, c])
        x = rng.choice(base.omega_size, size=(size, A.dims), p=mu)
        f = table[_cell_index(x, base.omega_size)] if table is not None else A.distance(base, x)
        return (f[:, None] >= u[None, :] - 1e-12).sum(axis=0)

    jobs = [(c, min(SAMPLE_CHUNK, samples - start)) for c, start in enumerate(range(0, samples, SAMPLE_CHUNK))]
    if threads == 1 or len(jobs) == 1:
        parts = [chunk(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(chunk, jobs))
    hits = np.sum(parts, axis=0)
    norms = penalty_norms(base)
    rows = []
    for ui, h in zip(u.tolist(), hits.tolist()):
        p = h / samples
        rows.append(TailRow(ui, p, math.sqrt(p * (1 - p) / samples), talagrand_bound(A.mass, ui, N, norms)))
    return rows


__all__ = [
    "BasePenalty",
    "PenaltyNorms",
    "ProductSet",
    "TailRow",
    "penalty_norms",
    "talagrand_bound",
    "corollary_alpha_bound",
    "product_space",
    "sample_product_set",
    "product_tail_monte_carlo",
]
