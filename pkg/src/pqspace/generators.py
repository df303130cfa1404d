"""Reference spaces and random instance generators used by tests and the CLI."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .core import FinitePQSpace, validate


def two_point_space(n: int) -> FinitePQSpace:
    """Points a, b with mu(a)=2/3, q(a,b)=1 and q(b,a)=1/n (exact)."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    q = [[Fraction(0), Fraction(1)], [Fraction(1, n), Fraction(0)]]
    return FinitePQSpace.from_lists(q, [Fraction(2, 3), Fraction(1, 3)], ["a", "b"], exact=True)


def two_point_family(n_max: int) -> list[FinitePQSpace]:
    return [two_point_space(n) for n in range(1, n_max + 1)]


def shortest_path_closure(d: np.ndarray) -> np.ndarray:
    """Min-plus closure; the result satisfies the triangle inequality."""
    d = d.copy()
    for k in range(d.shape[0]):
        d = np.minimum(d, d[:, k : k + 1] + d[k : k + 1, :])
    return d


def random_space(
    rng: np.random.Generator,
    n: int,
    *,
    max_dist: int = 10,
    zero_prob: float = 0.15,
    zero_mass_prob: float = 0.1,
    exact: bool = True,
) -> FinitePQSpace:
    """Random valid pq-space with integer distances and rational masses.

    Some off-diagonal entries are zero in one direction so that boundary
    cases of separation and strict neighbourhoods get exercised.  Zeros only
    point forward in a random order, so zero paths never close a cycle.
    """
    while True:
        d = rng.integers(1, max_dist + 1, size=(n, n)).astype(np.int64)
        rank = rng.permutation(n)
        forward = rank[:, None] < rank[None, :]
        d[(rng.random((n, n)) < zero_prob) & forward] = 0
        np.fill_diagonal(d, 0)
        d = shortest_path_closure(d)
        w = rng.integers(1, 6, size=n)
        w[rng.random(n) < zero_mass_prob] = 0
        if w.sum() == 0:
            continue
        total = int(w.sum())
        mu = [Fraction(int(x), total) for x in w]
        q = [[Fraction(int(v)) for v in row] for row in d]
        if validate(q, mu).is_quasimetric:
            space = FinitePQSpace.from_lists(q, mu, exact=True)
            return space if exact else space.to_float()


def random_integer_quasimetric(rng: np.random.Generator, n: int, max_dist: int = 4, zero_prob: float = 0.2) -> np.ndarray:
    """Integer quasi-metric matrix (triangle and separation hold exactly)."""
    while True:
        d = rng.integers(1, max_dist + 1, size=(n, n)).astype(np.int64)
        d[rng.random((n, n)) < zero_prob] = 0
        np.fill_diagonal(d, 0)
        d = shortest_path_closure(d)
        zero = (d == 0) & (d.T == 0)
        if zero.sum() == n:
            return d


def random_score_matrix(rng: np.random.Generator, symbols=("0", "1"), symmetric: bool = False, max_self: int = 4):
    """Score matrix passing the three score conditions, with positive self scores.

    Asymmetric: S(a,b) = w(a) - q(a,b) for a random quasi-metric q.
    Symmetric: S(a,b) = min(w(a), w(b)) - d(a,b) for a random metric d.
    """
    from .seqsim import ScoreMatrix

    k = len(symbols)
    w = rng.integers(1, max_self + 1, size=k)
    q = random_integer_quasimetric(rng, k)
    if symmetric:
        d = np.maximum(q, q.T)
        S = np.minimum(w[:, None], w[None, :]) - d
    else:
        S = w[:, None] - q
    return ScoreMatrix.from_rows(symbols, S.astype(np.float64))
