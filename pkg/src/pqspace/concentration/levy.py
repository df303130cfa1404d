"""Levy-family diagnostics for an ordered family of small spaces."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from ..core import SIDES, FinitePQSpace, as_fraction, normalize_side
from .alpha import ConcentrationCurve, alpha_curve


@dataclass(frozen=True)
class ExpFit:
    """alpha_n(eps) <= C1 exp(-C2 eps^2 n), fitted on log alpha by least squares.

    ``c1_envelope`` is the smallest C1 making the fitted C2 violation free.
    """

    c1: float | None
    c2: float | None
    c1_envelope: float | None
    violations: int
    points: int
    r2: float | None


@dataclass(frozen=True)
class SideDiagnostics:
    side: str
    sequences: dict  # eps -> tuple of alpha_n(eps)
    converging: dict  # eps -> bool
    fit: ExpFit

    @property
    def verdict(self) -> str:
        return "converging" if all(self.converging.values()) else "stuck"


@dataclass(frozen=True)
class LevyReport:
    sizes: tuple
    epsilons: tuple
    sides: dict = field(default_factory=dict)

    def verdicts(self) -> dict[str, str]:
        return {s: d.verdict for s, d in self.sides.items()}

    def to_dict(self) -> dict:
        return {
            "sizes": list(self.sizes),
            "epsilons": [float(e) for e in self.epsilons],
            "sides": {
                s: {
                    "verdict": d.verdict,
                    "alpha": {str(e): [float(v) for v in seq] for e, seq in d.sequences.items()},
                    "converging": {str(e): ok for e, ok in d.converging.items()},
                    "fit": d.fit.__dict__,
                }
                for s, d in self.sides.items()
            },
        }


def _converging(seq: Sequence) -> bool:
    # decreasing towards zero across the family: ends lower than it starts, or at zero
    return seq[-1] == 0 or seq[-1] < seq[0]


def fit_normal_levy(rows: Sequence[tuple[float, float, float]]) -> ExpFit:
    """Fit over (eps, n, alpha) rows; rows with alpha = 0 only count for violations."""
    pos = [(e * e * n, math.log(a)) for e, n, a in rows if a > 0]
    if len(pos) < 2 or len({x for x, _ in pos}) < 2:
        return ExpFit(None, None, None, 0, len(rows), None)
    x = np.array([p[0] for p in pos])
    y = np.array([p[1] for p in pos])
    slope, intercept = np.polyfit(x, y, 1)
    c2 = -float(slope)
    c1 = float(math.exp(intercept))
    pred = intercept + slope * x
    ss_res = float(((y - pred) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    envelope = max(a * math.exp(c2 * e * e * n) for e, n, a in rows if a > 0)
    violations = sum(1 for e, n, a in rows if a > c1 * math.exp(-c2 * e * e * n) * (1 + 1e-12))
    return ExpFit(c1, c2, float(envelope), violations, len(rows), r2)


def default_levy_grid(spaces: Sequence[FinitePQSpace]) -> list:
    diam = max(s.diameter for s in spaces)
    diam = as_fraction(diam) if all(s.exact for s in spaces) else float(diam)
    return [diam * Fraction(k, 8) if isinstance(diam, Fraction) else diam * k / 8 for k in (4, 5, 6, 7, 8)]


def levy_diagnostics(
    spaces: Sequence[FinitePQSpace],
    eps_grid: Sequence | None = None,
    sizes: Sequence[int] | None = None,
    sides: Sequence[str] = SIDES,
    curves: Sequence[ConcentrationCurve] | None = None,
) -> LevyReport:
    """Per side and eps, the sequence alpha_n(eps) along the family.

    ``sizes`` is the family parameter n used in the exponential fit
    (default 1, 2, ...).
    """
    if len(spaces) < 3:
        raise ValueError(f"need at least 3 spaces, got {len(spaces)}")
    sizes = tuple(sizes) if sizes is not None else tuple(range(1, len(spaces) + 1))
    if len(sizes) != len(spaces):
        raise ValueError("sizes and spaces differ in length")
    grid = list(eps_grid) if eps_grid is not None else default_levy_grid(spaces)
    grid = sorted({as_fraction(e) if all(s.exact for s in spaces) else float(e) for e in grid})
    if grid and grid[0] <= 0:
        raise ValueError("Levy grids need positive eps")
    sides = tuple(normalize_side(s) for s in sides)
    curves = list(curves) if curves is not None else [alpha_curve(s, None, sides) for s in spaces]
    out = {}
    for side in sides:
        seqs = {e: tuple(c.value_at(e, side) for c in curves) for e in grid}
        conv = {e: _converging(seq) for e, seq in seqs.items()}
        rows = [(float(e), n, float(a)) for e, seq in seqs.items() for n, a in zip(sizes, seq)]
        out[side] = SideDiagnostics(side, seqs, conv, fit_normal_levy(rows))
    return LevyReport(sizes, tuple(grid), out)


__all__ = ["ExpFit", "LevyReport", "SideDiagnostics", "fit_normal_levy", "levy_diagnostics", "default_levy_grid"]
