"""Left, right and associated concentration functions.

Exact values enumerate every subset of the space as a bitmask.  Tables over
the subset lattice are built by doubling: the entry for ``A | (1 << i)`` with
``i`` above every bit of ``A`` combines the entry for ``A`` with point ``i``.
That gives subset masses as sums and neighbourhoods as OR-reductions of
per-point reach masks, all vectorized.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from ..core import SIDES, FinitePQSpace, Numeric, as_fraction, normalize_side

MAX_EXACT_POINTS = 22


class TooLargeError(ValueError):
    """Raised when exhaustive enumeration is requested beyond its cap."""


def _check_size(space: FinitePQSpace, cap: int = MAX_EXACT_POINTS) -> None:
    if space.n > cap:
        raise TooLargeError(
            f"{space.n} points is over the exact-enumeration cap of {cap}; "
            "use the monte_carlo estimator instead"
        )


def kernel_side_matrix(num: Numeric, side: str) -> np.ndarray:
    side = normalize_side(side)
    if side == "left":
        return num.dist
    if side == "right":
        return num.dist.T
    return np.maximum(num.dist, num.dist.T)


def doubling_sums(values: np.ndarray) -> np.ndarray:
    out = np.zeros(1, dtype=values.dtype)
    for v in values:
        out = np.concatenate([out, out + v])
    return out


def doubling_unions(masks: np.ndarray) -> np.ndarray:
    out = np.zeros(1, dtype=np.int64)
    for m in masks:
        out = np.concatenate([out, out | m])
    return out


class SubsetTables:
    """Subset-lattice tables for one space, reused across epsilons."""

    def __init__(self, space: FinitePQSpace):
        _check_size(space)
        self.space = space
        self.num = space.numeric
        self.n = space.n
        self.mass = doubling_sums(self.num.weights)
        self.eligible = np.flatnonzero(self.num.half_mass(self.mass))
        self._bits = np.left_shift(np.int64(1), np.arange(self.n, dtype=np.int64))
        self._side = {s: kernel_side_matrix(self.num, s) for s in SIDES}

    def reach_masks(self, eps, side: str) -> np.ndarray:
        """Bitmask per point a of the points x with D[a, x] < eps."""
        d = self._side[normalize_side(side)]
        hit = self.num.lt(d, self.num.scale_eps(eps))
        return (hit * self._bits[None, :]).sum(axis=1).astype(np.int64)

    def deficiency(self, eps, side: str) -> tuple[object, int | None]:
        """Max of total - mass(neighbourhood) over half-mass subsets, in weight units."""
        if self.n == 0 or self.eligible.size == 0:
            return 0, None
        nb = doubling_unions(self.reach_masks(eps, side))
        deficit = self.num.total - self.mass[nb[self.eligible]]
        k = int(np.argmax(deficit))
        return deficit[k], int(self.eligible[k])


class AlphaValue(NamedTuple):
    value: Fraction | float
    witness: int | None


def alpha_exact(space: FinitePQSpace, eps, side: str, tables: SubsetTables | None = None) -> AlphaValue:
    """Exact concentration function value at ``eps > 0``.

    The witness is the lowest bitmask attaining the supremum.
    """
    if not eps > 0:
        raise ValueError("eps must be positive; alpha(0) = 1/2 by definition")
    tables = tables or SubsetTables(space)
    deficit, witness = tables.deficiency(eps, side)
    return AlphaValue(tables.num.mass_value(deficit), witness)


def auto_grid(space: FinitePQSpace) -> list:
    """0, distinct positive distances, midpoints between consecutive ones, diameter + 1."""
    values = _distinct_distances(space)
    zero = Fraction(0) if space.exact else 0.0
    pts = [zero]
    prev = zero
    for v in values:
        pts.append((prev + v) / 2)
        pts.append(v)
        prev = v
    pts.append(prev + 1)
    return sorted(set(pts))


def _distinct_distances(space: FinitePQSpace) -> list:
    flat = space.q.reshape(-1).tolist()
    vals = sorted({v for v in flat if v > 0})
    return vals


@dataclass(frozen=True, eq=False)
class ConcentrationCurve:
    epsilons: tuple
    values: dict
    witnesses: dict
    method: str
    breakpoints: tuple | None
    exact: bool
    _units: dict = field(default_factory=dict, repr=False)

    @property
    def alpha_left(self):
        return self.values.get("left")

    @property
    def alpha_right(self):
        return self.values.get("right")

    @property
    def alpha_assoc(self):
        return self.values.get("associated")

    @property
    def sides(self) -> tuple[str, ...]:
        return tuple(s for s in SIDES if s in self.values)

    def _key(self, eps):
        return as_fraction(eps) if self.exact else float(eps)

    def locate(self, eps) -> int | None:
        """Grid index holding alpha(eps); ``None`` means alpha(eps) = 0.

        Between consecutive breakpoints the step function is constant and
        takes its value at the right endpoint, so any grid containing all
        breakpoints answers every query.
        """
        key = self._key(eps)
        index = self._index()
        if key in index:
            return index[key]
        if key <= 0:
            raise KeyError("alpha(0) is not stored on this grid")
        if self.breakpoints is None:
            raise KeyError(f"eps={eps} is not on this {self.method} grid")
        j = bisect.bisect_left(self.breakpoints, key)
        if j == len(self.breakpoints):
            return None
        b = self.breakpoints[j]
        if b not in index:
            raise KeyError(f"breakpoint {b} needed for eps={eps} is not on the grid")
        return index[b]

    def _index(self) -> dict:
        if "index" not in self._units:
            self._units["index"] = {e: i for i, e in enumerate(self.epsilons)}
        return self._units["index"]

    def value_at(self, eps, side: str):
        side = normalize_side(side)
        if self._key(eps) == 0:
            return Fraction(1, 2) if self.exact else 0.5
        i = self.locate(eps)
        if i is None:
            return Fraction(0) if self.exact else 0.0
        return self.values[side][i]

    def units(self, num: Numeric, side: str) -> np.ndarray:
        """Curve values converted once into the kernel's probability units."""
        side = normalize_side(side)
        key = ("units", side, num.exact, num.total)
        if key not in self._units:
            arr = [num.units_from_value(v) for v in self.values[side]]
            self._units[key] = np.array(arr, dtype=np.int64 if num.exact else np.float64)
        return self._units[key]

    def units_at(self, num: Numeric, eps_values: Sequence, side: str) -> np.ndarray:
        """Vector of alpha values (in kernel units) at arbitrary epsilons."""
        base = self.units(num, side)
        out = np.zeros(len(eps_values), dtype=base.dtype)
        half = num.units_from_value(Fraction(1, 2) if num.exact else 0.5)
        for k, e in enumerate(eps_values):
            if self._key(e) == 0:
                out[k] = half
                continue
            i = self.locate(e)
            out[k] = 0 if i is None else base[i]
        return out

    def to_rows(self):
        """Rows for CSV export: eps, three alphas and hex witnesses."""
        rows = []
        for i, e in enumerate(self.epsilons):
            def w(side):
                ws = self.witnesses.get(side)
                return "" if ws is None or ws[i] is None else hex(ws[i])

            rows.append(
                [
                    e,
                    *(self.values[s][i] if s in self.values else None for s in SIDES),
                    w("left"),
                    w("right"),
                ]
            )
        return rows

    CSV_HEADER = ["eps", "alpha_left", "alpha_right", "alpha_assoc", "witness_left", "witness_right"]


def _half(exact: bool):
    return Fraction(1, 2) if exact else 0.5


def alpha_curve(
    space: FinitePQSpace,
    eps_grid: Iterable | None = None,
    sides: Iterable[str] = SIDES,
    tables: SubsetTables | None = None,
) -> ConcentrationCurve:
    """Exact concentration curves on ``eps_grid`` (``None`` = automatic grid)."""
    sides = tuple(normalize_side(s) for s in sides)
    tables = tables or SubsetTables(space)
    grid = _prepare_grid(space, eps_grid)
    exact = tables.num.exact
    values: dict = {s: [] for s in sides}
    witnesses: dict = {s: [] for s in sides}
    for e in grid:
        for s in sides:
            if e == 0:
                values[s].append(_half(exact))
                witnesses[s].append(None)
            else:
                v, w = alpha_exact(space, e, s, tables)
                values[s].append(v)
                witnesses[s].append(w)
    return ConcentrationCurve(
        epsilons=tuple(grid),
        values={s: tuple(v) for s, v in values.items()},
        witnesses={s: tuple(w) for s, w in witnesses.items()},
        method="exact",
        breakpoints=tuple(_distinct_distances(space)),
        exact=exact,
    )


def _prepare_grid(space: FinitePQSpace, eps_grid) -> list:
    if eps_grid is None or eps_grid == "auto":
        return auto_grid(space)
    conv = as_fraction if space.exact else float
    grid = sorted({conv(e) for e in eps_grid})
    if grid and grid[0] < 0:
        raise ValueError("epsilon grid must be nonnegative")
    return grid


# ---------------------------------------------------------------------------
# Monte Carlo lower bound for spaces beyond the enumeration cap.


def sample_candidate_sets(space: FinitePQSpace, samples: int, seed: int, side: str) -> list[np.ndarray]:
    """Half-mass sublevel sets of distance-to-anchor functions.

    Anchors are random points or random small subsets; each set is grown
    from the anchors in order of distance until it carries half the mass.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    num = Numeric(False, space.float_q(), 1, space.float_mu(), 1.0)
    d = kernel_side_matrix(num, side)
    rng = np.random.default_rng(seed)
    n = space.n
    w = num.weights
    total = w.sum()
    sets = []
    for k in range(samples):
        size = 1 if k % 2 == 0 else int(rng.integers(1, max(2, n // 4) + 1))
        anchors = rng.choice(n, size=size, replace=False)
        dist = d[anchors, :].min(axis=0)
        order = np.argsort(dist, kind="stable")
        cum = np.cumsum(w[order])
        cut = int(np.searchsorted(cum, 0.5 * total - 1e-12))
        t = dist[order[min(cut, n - 1)]]
        sets.append(np.flatnonzero(dist <= t))
    return sets


def alpha_monte_carlo_curve(
    space: FinitePQSpace,
    eps_grid: Iterable,
    sides: Iterable[str] = SIDES,
    samples: int = 256,
    seed: int = 0,
) -> ConcentrationCurve:
    """Certified lower bounds for alpha from sampled half-mass sets."""
    sides = tuple(normalize_side(s) for s in sides)
    grid = sorted({float(e) for e in eps_grid})
    mu = space.float_mu()
    total = mu.sum()
    num = Numeric(False, space.float_q(), 1, mu, 1.0)
    values: dict = {s: [] for s in sides}
    witnesses: dict = {s: [] for s in sides}
    for s in sides:
        d = kernel_side_matrix(num, s)
        sets = sample_candidate_sets(space, samples, seed, s)
        dmins = [d[A, :].min(axis=0) for A in sets]
        for e in grid:
            if e == 0:
                values[s].append(0.5)
                witnesses[s].append(None)
                continue
            best, arg = -1.0, None
            for A, dm in zip(sets, dmins):
                deficit = total - mu[dm < e].sum()
                if deficit > best:
                    best, arg = deficit, A
            values[s].append(float(max(best, 0.0)))
            witnesses[s].append(sum(1 << int(i) for i in arg) if arg is not None else None)
    return ConcentrationCurve(
        epsilons=tuple(grid),
        values={s: tuple(v) for s, v in values.items()},
        witnesses={s: tuple(w) for s, w in witnesses.items()},
        method="monte_carlo",
        breakpoints=None,
        exact=False,
    )


# ---------------------------------------------------------------------------
# Sandwich between the one-sided and associated curves


@dataclass(frozen=True)
class SandwichRow:
    eps: object
    lower_margin: object  # alpha - max(alpha^L, alpha^R)
    upper_margin: object  # alpha^L + alpha^R - alpha


@dataclass(frozen=True)
class SandwichReport:
    rows: tuple[SandwichRow, ...]

    @property
    def violations(self) -> list[SandwichRow]:
        return [r for r in self.rows if r.lower_margin < 0 or r.upper_margin < 0]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "rows": [
                {"eps": r.eps, "lower_margin": r.lower_margin, "upper_margin": r.upper_margin}
                for r in self.rows
            ],
        }


def check_sandwich(curve: ConcentrationCurve, slack: float = 1e-12) -> SandwichReport:
    """max(alpha^L, alpha^R) <= alpha <= alpha^L + alpha^R at every grid eps.

    On an automatic grid every breakpoint is present, so this covers all eps.
    """
    missing = [s for s in SIDES if s not in curve.values]
    if missing:
        raise ValueError(f"curve lacks sides {missing}")
    rows = []
    for e, l, r, a in zip(curve.epsilons, curve.alpha_left, curve.alpha_right, curve.alpha_assoc):
        lo, hi = a - max(l, r), l + r - a
        if not curve.exact:
            # float curves: rounding-level negatives are not violations
            lo, hi = (0.0 if -slack < v < 0 else v for v in (lo, hi))
        rows.append(SandwichRow(e, lo, hi))
    return SandwichReport(tuple(rows))
