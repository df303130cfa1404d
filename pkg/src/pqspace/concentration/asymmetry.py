"""Law of the asymmetry Gamma(x, y) = |q(x, y) - q(y, x)| under mu x mu."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..core import FinitePQSpace, as_fraction
from .alpha import ConcentrationCurve
from .deviation import DeviationReport, _Kernel, _pair_units, _single, mass_at_least


@dataclass(frozen=True)
class AsymmetryDistribution:
    support: tuple
    pmf: tuple
    method: str = "exact"
    sample_count: int | None = None

    def tail(self, eps):
        """P(Gamma >= eps)."""
        return sum((p for v, p in zip(self.support, self.pmf) if v >= eps), 0 * self.pmf[0])

    def stderr(self, eps) -> float:
        if self.sample_count is None:
            return 0.0
        p = float(self.tail(eps))
        return float(np.sqrt(p * (1 - p) / self.sample_count))

    def to_rows(self):
        return [[v, p] for v, p in zip(self.support, self.pmf)]


def gamma_matrix(space: FinitePQSpace) -> np.ndarray:
    q = space.q
    d = q - q.T
    return np.abs(d)


def asymmetry_distribution(space: FinitePQSpace) -> AsymmetryDistribution:
    """Exact pmf of Gamma over all n^2 ordered pairs."""
    g = gamma_matrix(space)
    w = np.outer(space.mu, space.mu)
    acc: dict = {}
    for v, p in zip(g.reshape(-1).tolist(), w.reshape(-1).tolist()):
        if p:
            acc[v] = acc.get(v, 0) + p
    support = tuple(sorted(acc))
    return AsymmetryDistribution(support, tuple(acc[v] for v in support))


def asymmetry_distribution_sampled(space: FinitePQSpace, samples: int, seed: int) -> AsymmetryDistribution:
    """Empirical law of Gamma from i.i.d. pairs drawn from mu x mu."""
    if samples < 1:
        raise ValueError("samples must be at least 1")
    rng = np.random.default_rng(seed)
    mu = space.float_mu()
    x = rng.choice(space.n, size=samples, p=mu / mu.sum())
    y = rng.choice(space.n, size=samples, p=mu / mu.sum())
    g = gamma_matrix(space.to_float())[x, y]
    vals, counts = np.unique(g, return_counts=True)
    return AsymmetryDistribution(
        tuple(vals.tolist()), tuple((counts / samples).tolist()), method="sampled", sample_count=samples
    )


def check_asymmetry_bound(space: FinitePQSpace, curve: ConcentrationCurve) -> DeviationReport:
    """P(Gamma >= eps) against alpha^L(eps/2) + alpha^R(eps/2).

    Checked at the curve grid, every support value of Gamma and twice every
    breakpoint, which covers all eps > 0.
    """
    k = _Kernel(space, curve, [])
    if k.exact:
        factor = k.scale // k.num.dist_scale
        g = np.abs(k.num.dist - k.num.dist.T).astype(k.w.dtype) * factor
    else:
        g = np.abs(k.num.dist - k.num.dist.T)
    G = g.reshape(1, -1)
    ww = np.outer(k.w, k.w).reshape(-1)
    E = np.unique(np.concatenate([k.grid_with(G), 2 * k.B]))
    E = E[E > 0]
    lhs, rhs = _pair_units(k, G, ww, E)
    return _single(k, E, lhs[0], rhs, "asymmetry", denom_factor=k.T)


def tail_mass(space: FinitePQSpace, eps) -> object:
    """P(Gamma >= eps) by direct double sum."""
    g = gamma_matrix(space)
    eps = as_fraction(eps) if space.exact else float(eps)
    hit = np.outer(space.mu, space.mu)[g >= eps]
    if hit.size == 0:
        return Fraction(0) if space.exact else 0.0
    return hit.sum()


__all__ = [
    "AsymmetryDistribution",
    "asymmetry_distribution",
    "asymmetry_distribution_sampled",
    "check_asymmetry_bound",
    "gamma_matrix",
    "tail_mass",
]
