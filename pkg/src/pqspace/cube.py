"""Hamming cube and asymmetric Hamming cube.

Points are bit strings, printed most significant bit first.  The metric cube
uses the normalised Hamming distance; the asymmetric cube uses
q(s, t) = #{i : s_i = 0 and t_i = 1} / n.  Small cubes are materialized as
dense spaces; large-n questions go through closed forms (binomial laws) or
packed-bit Monte Carlo.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import stats
from scipy.special import gammaln, logsumexp

from .concentration.alpha import ConcentrationCurve, alpha_curve
from .core import FinitePQSpace, as_fraction, normalize_side

VARIANTS = ("metric", "asymmetric")
MAX_MATERIALIZE = 12
MAX_EXACT_MATERIALIZE = 6
MAX_CUBE_ALPHA = 4
EXACT_CONVOLUTION_MAX = 64
FLOAT_CONVOLUTION_MAX = 4096
MC_CHUNK = 1 << 16


@dataclass(frozen=True)
class CubeSpec:
    n: int
    variant: str = "metric"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("cube dimension must be at least 1")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")


def labels(n: int) -> tuple[str, ...]:
    return tuple(format(v, f"0{n}b") for v in range(1 << n))


def _counts(spec: CubeSpec) -> np.ndarray:
    v = np.arange(1 << spec.n, dtype=np.uint64)
    s, t = v[:, None], v[None, :]
    if spec.variant == "metric":
        return np.bitwise_count(s ^ t).astype(np.int64)
    return np.bitwise_count(~s & t & np.uint64((1 << spec.n) - 1)).astype(np.int64)


def materialize(spec: CubeSpec, exact: bool | None = None) -> FinitePQSpace:
    """Dense space on all 2^n strings with the uniform measure (n <= 12)."""
    if spec.n > MAX_MATERIALIZE:
        raise ValueError(
            f"n={spec.n} exceeds the materialization cap {MAX_MATERIALIZE}; "
            "use gamma_law_exact, majority-set closed forms or the samplers"
        )
    exact = spec.n <= MAX_EXACT_MATERIALIZE if exact is None else exact
    c = _counts(spec)
    size = 1 << spec.n
    if exact:
        table = np.array([Fraction(k, spec.n) for k in range(spec.n + 1)], dtype=object)
        q = table[c]
        mu = np.array([Fraction(1, size)] * size, dtype=object)
    else:
        q = c / spec.n
        mu = np.full(size, 1.0 / size)
    return FinitePQSpace(labels(spec.n), q, mu)


# ---------------------------------------------------------------------------
# Exact concentration on tiny cubes


@dataclass(frozen=True)
class BoundRow:
    eps: object
    value: object
    bound: float

    @property
    def ok(self) -> bool:
        return float(self.value) <= self.bound

    @property
    def margin(self) -> float:
        return self.bound - float(self.value)


@dataclass(frozen=True)
class BoundReport:
    name: str
    rows: tuple[BoundRow, ...]

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.rows)

    @property
    def violations(self) -> list[BoundRow]:
        return [r for r in self.rows if not r.ok]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "ok": self.ok,
            "rows": [{"eps": r.eps, "value": r.value, "bound": r.bound, "margin": r.margin, "ok": r.ok} for r in self.rows],
        }


def hamming_bound(eps, n: int) -> float:
    return math.exp(-2.0 * float(eps) ** 2 * n)


def cube_alpha_exact(spec: CubeSpec, eps_grid=None, side: str = "associated") -> tuple[ConcentrationCurve, BoundReport]:
    """Exact curves on the materialized cube (n <= 4) and alpha <= exp(-2 eps^2 n) per positive eps.

    The automatic grid holds every breakpoint, and between breakpoints alpha
    is constant while the bound decreases, so the check is exhaustive.
    """
    if spec.n > MAX_CUBE_ALPHA:
        raise ValueError(f"exact cube alpha is capped at n={MAX_CUBE_ALPHA}")
    curve = alpha_curve(materialize(spec, exact=True), eps_grid)
    side = normalize_side(side)
    rows = tuple(
        BoundRow(e, v, hamming_bound(e, spec.n)) for e, v in zip(curve.epsilons, curve.values[side]) if e > 0
    )
    return curve, BoundReport(f"hamming[{spec.variant},{side}]", rows)


# ---------------------------------------------------------------------------
# Law of the asymmetry on the asymmetric cube


@dataclass(frozen=True)
class GammaLaw:
    """pmf[k] = P(Gamma_n = k / n), k = 0..n."""

    n: int
    pmf: tuple
    exact: bool

    def tail(self, eps):
        """P(Gamma_n >= eps)."""
        k0 = max(0, _ceil_mul(eps, self.n))
        if k0 > self.n:
            return Fraction(0) if self.exact else 0.0
        if self.exact:
            return sum(self.pmf[k0:], Fraction(0))
        return math.fsum(self.pmf[k0:])

    def support(self) -> list:
        return [Fraction(k, self.n) for k in range(self.n + 1)]

    def to_rows(self):
        return [[Fraction(k, self.n), p] for k, p in enumerate(self.pmf)]


def _ceil_mul(eps, n: int) -> int:
    """ceil(eps * n) computed exactly."""
    t = as_fraction(eps) * n
    return -((-t.numerator) // t.denominator)


def trinomial_counts(n: int) -> list[int]:
    """Integer counts of sum delta_i = j - n over 4^n equally likely pairs, j = 0..2n."""
    c = [1]
    for _ in range(n):
        padded = [0, 0] + c + [0, 0]
        c = [padded[j] + 2 * padded[j + 1] + padded[j + 2] for j in range(len(c) + 2)]
    return c


def _fold(p, n):
    out = [p[n]]
    for k in range(1, n + 1):
        out.append(p[n + k] + p[n - k])
    return out


def gamma_law_exact(n: int) -> GammaLaw:
    """Law of |sum delta_i| / n with delta_i in {-1, 0, 1} w.p. 1/4, 1/2, 1/4.

    Rational convolution up to n = 64, float convolution up to 4096; beyond
    that the identity sum delta_i + n ~ Binomial(2n, 1/2) is evaluated with
    scipy (the convolution would cost O(n^2)).
    """
    if n < 1 or n > 10**6:
        raise ValueError("n must be in [1, 10^6]")
    if n <= EXACT_CONVOLUTION_MAX:
        c = trinomial_counts(n)
        total = 4**n
        return GammaLaw(n, tuple(Fraction(v, total) for v in _fold(c, n)), True)
    if n <= FLOAT_CONVOLUTION_MAX:
        p = np.array([1.0])
        for _ in range(n):
            q = np.zeros(len(p) + 2)
            q[:-2] += 0.25 * p
            q[1:-1] += 0.5 * p
            q[2:] += 0.25 * p
            p = q
    else:
        p = stats.binom.pmf(np.arange(2 * n + 1), 2 * n, 0.5)
    return GammaLaw(n, tuple(float(v) for v in _fold(p, n)), False)


def gamma_bound(eps, n: int) -> float:
    return 2.0 * math.exp(-n * float(eps) ** 2 / 2.0)


def default_gamma_grid() -> list[Fraction]:
    return [Fraction(k, 20) for k in range(1, 21)]


def check_gamma_bound(law: GammaLaw, eps_grid=None, exhaustive: bool = False) -> BoundReport:
    """P(Gamma_n >= eps) <= 2 exp(-n eps^2 / 2) per grid eps.

    ``exhaustive`` adds every k/n; the tail only jumps there, so this covers
    all eps > 0.
    """
    grid = list(eps_grid) if eps_grid is not None else default_gamma_grid()
    if exhaustive:
        grid = sorted(set(as_fraction(e) for e in grid) | {Fraction(k, law.n) for k in range(1, law.n + 1)})
    rows = tuple(BoundRow(e, law.tail(e), gamma_bound(e, law.n)) for e in grid)
    return BoundReport(f"gamma[n={law.n}]", rows)


def gamma_pairs_exhaustive(n: int) -> GammaLaw:
    """Oracle: the law from all 4^n string pairs (n <= 8)."""
    if n > 8:
        raise ValueError("exhaustive pair enumeration is capped at n=8")
    spec = CubeSpec(n, "asymmetric")
    c = _counts(spec)
    g = np.abs(c - c.T).reshape(-1)
    counts = np.bincount(g, minlength=n + 1)
    total = 4**n
    return GammaLaw(n, tuple(Fraction(int(v), total) for v in counts), True)


@dataclass(frozen=True)
class TailEstimate:
    eps: object
    estimate: float
    stderr: float
    hits: int
    samples: int


def _random_words(rng: np.random.Generator, size: int, n: int) -> np.ndarray:
    words = (n + 63) // 64
    out = rng.integers(0, 2**64, size=(size, words), dtype=np.uint64, endpoint=False)
    rem = n % 64
    if rem:
        out[:, -1] &= np.uint64((1 << rem) - 1)
    return out


def _gamma_chunk(n: int, size: int, seed: int, chunk: int, thresholds: np.ndarray) -> np.ndarray:
    rng = np.random.default_rng([seed, chunk])
    s = _random_words(rng, size, n)
    t = _random_words(rng, size, n)
    up = np.bitwise_count(~s & t).sum(axis=1, dtype=np.int64)  # 0 -> 1 positions
    down = np.bitwise_count(s & ~t).sum(axis=1, dtype=np.int64)  # 1 -> 0 positions
    g = np.abs(up - down)
    return (g[:, None] >= thresholds[None, :]).sum(axis=0)


def _chunks(samples: int):
    return [(i, min(MC_CHUNK, samples - i * MC_CHUNK)) for i in range((samples + MC_CHUNK - 1) // MC_CHUNK)]


def _run_chunks(fn, samples: int, threads: int | None):
    jobs = _chunks(samples)
    if threads == 1 or len(jobs) == 1:
        return [fn(i, size) for i, size in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def gamma_monte_carlo(
    n: int, samples: int, seed: int, eps_grid=None, threads: int | None = 1
) -> list[TailEstimate]:
    """Empirical P(Gamma_n >= eps) from uniform string pairs.

    Chunk c uses the generator seeded by (seed, c), and hit counts are summed,
    so output does not depend on ``threads``.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    grid = list(eps_grid) if eps_grid is not None else default_gamma_grid()
    thresholds = np.array([_ceil_mul(e, n) for e in grid], dtype=np.int64)
    parts = _run_chunks(lambda i, size: _gamma_chunk(n, size, seed, i, thresholds), samples, threads)
    hits = np.sum(parts, axis=0)
    out = []
    for e, h in zip(grid, hits.tolist()):
        p = h / samples
        out.append(TailEstimate(e, p, math.sqrt(p * (1 - p) / samples), int(h), samples))
    return out


def z_score(estimate: TailEstimate, exact: float) -> float:
    """|estimate - exact| in standard errors of the exact Bernoulli law."""
    sd = math.sqrt(exact * (1 - exact) / estimate.samples)
    diff = abs(estimate.estimate - exact)
    if sd == 0:
        return 0.0 if diff == 0 else math.inf
    return diff / sd


# ---------------------------------------------------------------------------
# Law of large numbers


@dataclass(frozen=True)
class LLNRow:
    N: int
    t: object
    tail: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.tail <= self.bound


def lln_bound(N: int, t) -> float:
    return 2.0 * math.exp(-2.0 * float(t) ** 2 / N)


def lln_tails(N: int) -> tuple[np.ndarray, np.ndarray]:
    """Distinct values d of |k - N/2| (ascending) and log P(|B_N - N/2| >= d)."""
    if N < 1 or N > 10**6:
        raise ValueError("N must be in [1, 10^6]")
    k = np.arange(N + 1)
    logp = gammaln(N + 1) - gammaln(k + 1) - gammaln(N - k + 1) - N * math.log(2)
    d2 = np.abs(2 * k - N)  # twice the deviation, integral
    order = np.argsort(-d2, kind="stable")
    cum = np.logaddexp.accumulate(logp[order])
    dist = d2[order]
    last = np.r_[dist[1:] != dist[:-1], True]
    ds, tails = dist[last][::-1], cum[last][::-1]
    return ds / 2.0, tails


def lln_tail(N: int, t) -> float:
    ds, logt = lln_tails(N)
    j = np.searchsorted(ds, float(t), side="left")
    return 0.0 if j >= len(ds) else float(np.exp(logt[j]))


def lln_tail_exact(N: int, t) -> Fraction:
    """Oracle: exact sum of C(N, k) / 2^N over |k - N/2| >= t."""
    t2 = as_fraction(t) * 2
    s = sum(math.comb(N, k) for k in range(N + 1) if abs(2 * k - N) >= t2)
    return Fraction(s, 2**N)


def lln_check(N_grid: Sequence[int], t_grid: Sequence | None = None) -> list[LLNRow]:
    """P(|B_N - N/2| >= t) <= 2 exp(-2 t^2 / N).

    Without ``t_grid`` every distinct deviation |k - N/2| is checked; the tail
    only changes there and the bound decreases in t, so that is exhaustive.
    """
    rows = []
    for N in N_grid:
        ds, logt = lln_tails(N)
        if t_grid is None:
            pts = [(float(d), float(np.exp(lt))) for d, lt in zip(ds, logt)]
        else:
            pts = [(t, lln_tail(N, t)) for t in t_grid]
        rows.extend(LLNRow(N, t, p, lln_bound(N, t)) for t, p in pts)
    return rows


# ---------------------------------------------------------------------------
# Threshold (majority) sets with closed-form neighbourhoods


@dataclass(frozen=True)
class ThresholdSet:
    """{s : |s| <= k} (``at_most``) or {s : |s| >= k} (``at_least``), |s| = number of ones."""

    kind: str
    k: int

    def __post_init__(self):
        if self.kind not in ("at_most", "at_least"):
            raise ValueError("kind must be 'at_most' or 'at_least'")

    @classmethod
    def majority(cls, n: int) -> "ThresholdSet":
        return cls("at_most", n // 2)

    def contains(self, weight):
        w = np.asarray(weight)
        return w <= self.k if self.kind == "at_most" else w >= self.k

    def distance_units(self, weight, variant: str, side: str):
        """n times the set distance, from the weight of the point alone."""
        side = normalize_side(side)
        w = np.asarray(weight, dtype=np.int64)
        excess = np.maximum(0, w - self.k) if self.kind == "at_most" else np.maximum(0, self.k - w)
        if variant == "metric" or side == "associated":
            return excess
        # asymmetric cube: an at_most set reaches x from the left by dropping
        # x's extra ones, and x reaches it from the right for free
        moving_up = (self.kind == "at_most") == (side == "left")
        return excess if moving_up else np.zeros_like(excess)

    def mass(self, n: int) -> Fraction:
        ws = range(0, min(self.k, n) + 1) if self.kind == "at_most" else range(max(self.k, 0), n + 1)
        return Fraction(sum(math.comb(n, w) for w in ws), 2**n)


def threshold_deficit(n: int, A: ThresholdSet, eps, variant: str = "metric", side: str = "left") -> Fraction:
    """Exact 1 - mu(A_eps) from the binomial law of the weight."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    t = _ceil_mul(eps, n)  # distance < eps  iff  units <= t - 1
    w = np.arange(n + 1)
    far = A.distance_units(w, variant, side) >= t
    return Fraction(sum(math.comb(n, int(v)) for v in w[far]), 2**n)


def majority_bound_report(n: int, variant: str = "metric", side: str = "left") -> BoundReport:
    """Majority-set deficit against exp(-2 eps^2 n) at every eps = j/n (exhaustive)."""
    A = ThresholdSet.majority(n)
    rows = tuple(
        BoundRow(Fraction(j, n), threshold_deficit(n, A, Fraction(j, n), variant, side), hamming_bound(Fraction(j, n), n))
        for j in range(1, n + 1)
    )
    return BoundReport(f"majority[n={n},{variant},{side}]", rows)


class UnsupportedSetError(ValueError):
    pass


def cube_neighborhood_sampler(
    spec: CubeSpec, A, eps, side: str, samples: int, seed: int, threads: int | None = 1
) -> TailEstimate:
    """Monte Carlo estimate of 1 - mu(A_eps) for a threshold set A."""
    if not isinstance(A, ThresholdSet):
        raise UnsupportedSetError("only threshold sets have a closed-form set distance")
    if samples < 1:
        raise ValueError("samples must be at least 1")
    if 2 * A.mass(spec.n) < 1:
        raise ValueError("the set must carry at least half the mass")
    if not eps > 0:
        raise ValueError("eps must be positive")
    t = _ceil_mul(eps, spec.n)
    side = normalize_side(side)

    def chunk(i, size):
        rng = np.random.default_rng([seed, i])
        w = np.bitwise_count(_random_words(rng, size, spec.n)).sum(axis=1, dtype=np.int64)
        return int((A.distance_units(w, spec.variant, side) >= t).sum())

    hits = sum(_run_chunks(chunk, samples, threads))
    p = hits / samples
    return TailEstimate(eps, p, math.sqrt(p * (1 - p) / samples), hits, samples)


def associated_cube_counts(n: int) -> tuple[np.ndarray, np.ndarray]:
    """(n * associated metric of the asymmetric cube, n * Hamming distance)."""
    c = _counts(CubeSpec(n, "asymmetric"))
    return np.maximum(c, c.T), c + c.T


__all__ = [
    "CubeSpec",
    "GammaLaw",
    "BoundRow",
    "BoundReport",
    "LLNRow",
    "TailEstimate",
    "ThresholdSet",
    "UnsupportedSetError",
    "materialize",
    "cube_alpha_exact",
    "hamming_bound",
    "gamma_law_exact",
    "gamma_bound",
    "gamma_pairs_exhaustive",
    "check_gamma_bound",
    "gamma_monte_carlo",
    "trinomial_counts",
    "z_score",
    "lln_bound",
    "lln_tail",
    "lln_tail_exact",
    "lln_tails",
    "lln_check",
    "threshold_deficit",
    "majority_bound_report",
    "cube_neighborhood_sampler",
    "associated_cube_counts",
    "labels",
]
