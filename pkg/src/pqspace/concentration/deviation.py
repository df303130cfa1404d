"""Lipschitz functions, medians and deviation inequalities.

Bound checks run in integer units on exact spaces.  Function values and
epsilons share one scale (an LCM of denominators), probabilities are kept as
integer weight sums, and nothing is rounded.  Every check grid is extended
with the critical points of its left-hand side and with the curve's
breakpoints, so a pass means the inequality holds for all eps > 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from ..core import FinitePQSpace, as_fraction, normalize_side
from .alpha import (
    MAX_EXACT_POINTS,
    AlphaValue,
    ConcentrationCurve,
    SubsetTables,
    _check_size,
    _distinct_distances,
    _prepare_grid,
    doubling_sums,
    kernel_side_matrix,
)

FLOAT_SLACK = 1e-9
LIP_SIDES = ("left", "right", "both")


class NotLipschitzError(ValueError):
    def __init__(self, pair, excess, side):
        self.pair = pair
        self.excess = excess
        super().__init__(f"not {side} 1-Lipschitz: pair {pair} exceeds by {excess}")


# ---------------------------------------------------------------------------
# Lipschitz verification


@dataclass(frozen=True)
class LipschitzCheck:
    ok: bool
    worst_pair: tuple[int, int] | None
    excess: object

    def __bool__(self):
        return self.ok


def _lip_excess(q: np.ndarray, f: np.ndarray, K, side: str) -> np.ndarray:
    left = f[:, None] - f[None, :] - K * q
    if side == "left":
        return left
    right = f[None, :] - f[:, None] - K * q
    if side == "right":
        return right
    return np.maximum(left, right)


def verify_lipschitz(space: FinitePQSpace, values, K=1, side: str = "left", tol: float = 1e-9) -> LipschitzCheck:
    """Exhaustive pair check of ``f(x) - f(y) <= K q(x, y)`` (left) or the mirrored form (right).

    ``worst_pair`` is the pair with the largest excess whether or not it
    violates; ``excess`` is that largest value (<= 0 when ok).
    """
    if side not in LIP_SIDES:
        raise ValueError(f"side must be one of {LIP_SIDES}")
    n = space.n
    if n == 0:
        return LipschitzCheck(True, None, 0)
    if space.exact:
        f = np.array([as_fraction(v) for v in values], dtype=object)
        K = as_fraction(K)
        tol = 0
    else:
        f = np.asarray(values, dtype=np.float64)
    if f.shape != (n,):
        raise ValueError(f"function has {f.shape[0]} values for {n} points")
    ex = _lip_excess(space.q, f, K, side)
    flat = int(np.argmax(ex.astype(np.float64))) if ex.dtype != object else max(
        range(n * n), key=lambda k: ex.flat[k]
    )
    i, j = divmod(flat, n)
    worst = ex[i, j]
    return LipschitzCheck(bool(worst <= tol), (i, j), worst)


@dataclass(frozen=True)
class LipschitzFunction:
    values: tuple
    side: str
    K: object

    @classmethod
    def verified(cls, space: FinitePQSpace, values, K=1, side: str = "left") -> "LipschitzFunction":
        check = verify_lipschitz(space, values, K, side)
        if not check.ok:
            raise NotLipschitzError(check.worst_pair, check.excess, side)
        return cls(tuple(values), side, K)


def set_distance_witnesses(space: FinitePQSpace, A: Iterable[int]) -> dict[str, tuple[np.ndarray, str]]:
    """The four signed set-distance functions of A with their Lipschitz side.

    ``-q(A,.)`` and ``q(.,A)`` are left 1-Lipschitz; ``q(A,.)`` and
    ``-q(.,A)`` are right 1-Lipschitz.
    """
    idx = sorted(set(A))
    into = space.q[idx, :].min(axis=0)
    out = space.q[:, idx].min(axis=1)
    return {
        "-q(A,.)": (-into, "left"),
        "q(.,A)": (out, "left"),
        "q(A,.)": (into, "right"),
        "-q(.,A)": (-out, "right"),
    }


# ---------------------------------------------------------------------------
# Medians


def median(values, mu, which: str = "low"):
    """A median of f under mu.

    ``low`` is the smallest value t with mu{f <= t} >= 1/2 (the canonical
    choice); ``high`` is the largest t with mu{f >= t} >= 1/2.  Both median
    conditions are asserted on the result.
    """
    if which not in ("low", "high"):
        raise ValueError("which must be 'low' or 'high'")
    pairs = list(zip(values, mu))
    if not pairs:
        raise ValueError("median of an empty function")
    exact = all(isinstance(v, (Fraction, int)) for v, _ in pairs) and all(
        isinstance(m, (Fraction, int)) for _, m in pairs
    )
    slack = 0 if exact else 1e-12
    total = sum(m for _, m in pairs)
    half = total / 2 - slack
    cands = sorted({v for v, _ in pairs}, reverse=which == "high")
    for t in cands:
        below = sum(m for v, m in pairs if v <= t)
        above = sum(m for v, m in pairs if v >= t)
        if (below if which == "low" else above) >= half:
            assert below >= half and above >= half, "median conditions failed"
            return t
    raise AssertionError("no median found; measure is empty")


# ---------------------------------------------------------------------------
# Integer kernel shared by the bound checks


def _lcm_all(values) -> int:
    out = 1
    for v in values:
        out = math.lcm(out, as_fraction(v).denominator)
    return out


class _Kernel:
    """Space, curve and functions on one common integer scale."""

    def __init__(self, space: FinitePQSpace, curve: ConcentrationCurve, funcs: Sequence, extra_eps=()):
        if curve.breakpoints is None:
            raise ValueError(f"bound checks need an exact curve, got method={curve.method}")
        num = space.numeric
        self.num = num
        self.exact = num.exact
        if self.exact:
            flat = [v for f in funcs for v in f]
            scale = math.lcm(num.dist_scale, _lcm_all(flat), _lcm_all(extra_eps), _lcm_all(curve.epsilons))
            self.scale = scale
            F = np.array([[as_fraction(v) * scale for v in f] for f in funcs], dtype=object)
            big = max((abs(int(v)) for v in F.reshape(-1)), default=0)
            dtype = np.int64 if big < 2**40 and num.total < 2**20 else object
            self.F = np.array([[int(v) for v in row] for row in F], dtype=dtype).reshape(len(funcs), space.n)
            self.B = np.array([int(b * scale) for b in curve.breakpoints], dtype=dtype)
            self.grid = np.array([int(as_fraction(e) * scale) for e in curve.epsilons], dtype=dtype)
            self.w = num.weights.astype(dtype)
        else:
            self.scale = 1
            self.F = np.asarray([[float(v) for v in f] for f in funcs], dtype=np.float64).reshape(len(funcs), space.n)
            self.B = np.asarray([float(b) for b in curve.breakpoints], dtype=np.float64)
            self.grid = np.asarray([float(e) for e in curve.epsilons], dtype=np.float64)
            self.w = num.weights
        self.T = num.total
        self.curve = curve
        self.alpha = {s: curve.units_at(num, list(curve.breakpoints), s) for s in ("left", "right")}
        if self.exact and self.F.dtype == object:
            self.alpha = {s: a.astype(object) for s, a in self.alpha.items()}

    def eps_value(self, e):
        return Fraction(int(e), self.scale) if self.exact else float(e)

    def prob(self, units, denom_factor=1):
        """Kernel units back to probabilities (``denom_factor`` T for pair masses)."""
        if self.exact:
            return Fraction(int(units), 2 * self.T * denom_factor)
        return float(units)

    def alpha_units(self, side: str, E: np.ndarray, divisor: int = 1) -> np.ndarray:
        """alpha_side(E / divisor) for positive E, by left-continuous lookup."""
        B = self.B * divisor
        j = np.searchsorted(B, E, side="left")
        vals = self.alpha[side]
        out = np.zeros(len(E), dtype=vals.dtype)
        inside = j < len(B)
        out[inside] = vals[j[inside]]
        return out

    def weights_to_units(self, s):
        return 2 * s if self.exact else s / self.T

    def grid_with(self, crit) -> np.ndarray:
        pts = np.concatenate([self.grid, self.B, np.asarray(crit, dtype=self.grid.dtype).reshape(-1)])
        pts = np.unique(pts)
        return pts[pts > 0]


def mass_at_least(V: np.ndarray, W: np.ndarray, E: np.ndarray) -> np.ndarray:
    """(m, G) array of sum_k W[k] * [V[r, k] >= E[g]].

    ``W`` is shared by all rows.  Integer inputs use one global searchsorted
    over row-offset keys; other dtypes fall back to a row loop.
    """
    m, k = V.shape
    order = np.argsort(V, axis=1, kind="stable")
    Vs = np.take_along_axis(V, order, axis=1)
    Ws = W[order]
    suffix = np.concatenate([np.cumsum(Ws[:, ::-1], axis=1)[:, ::-1], np.zeros((m, 1), dtype=Ws.dtype)], axis=1)
    if m == 0 or len(E) == 0:
        return np.zeros((m, len(E)), dtype=suffix.dtype)
    if V.dtype.kind == "i" and E.dtype.kind == "i":
        lo = min(int(Vs[:, 0].min()), int(E.min()))
        span = max(int(Vs[:, -1].max()), int(E.max())) - lo + 1
        if span * m < 2**62:
            rows = np.arange(m, dtype=np.int64)[:, None] * span
            keys = (Vs - lo + rows).reshape(-1)
            queries = (E[None, :] - lo + rows).reshape(-1)
            pos = np.searchsorted(keys, queries, side="left").reshape(m, len(E)) - np.arange(m)[:, None] * k
            return np.take_along_axis(suffix, pos, axis=1)
    out = np.empty((m, len(E)), dtype=suffix.dtype)
    for r in range(m):
        out[r] = suffix[r, np.searchsorted(Vs[r], E, side="left")]
    return out


def _medians(F: np.ndarray, w: np.ndarray, total, which: str, exact: bool) -> np.ndarray:
    order = np.argsort(F, axis=1, kind="stable")
    Fs = np.take_along_axis(F, order, axis=1)
    Ws = w[order]
    if which == "high":
        Fs, Ws = Fs[:, ::-1], Ws[:, ::-1]
    cum = np.cumsum(Ws, axis=1)
    reached = 2 * cum >= total if exact else cum >= 0.5 * total - 1e-12
    return Fs[np.arange(F.shape[0]), np.argmax(reached, axis=1)]


# ---------------------------------------------------------------------------
# Reports


@dataclass(frozen=True)
class DeviationReport:
    """Per-eps left and right sides of one inequality; ``rhs - lhs`` is the margin."""

    kind: str
    epsilons: tuple
    lhs: tuple
    rhs: tuple
    median: object = None

    @property
    def margins(self) -> tuple:
        return tuple(r - l for l, r in zip(self.lhs, self.rhs))

    @property
    def violations(self) -> list[int]:
        slack = 0 if all(isinstance(v, Fraction) for v in self.lhs) else FLOAT_SLACK
        return [i for i, m in enumerate(self.margins) if m < -slack]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "ok": self.ok,
            "median": self.median,
            "rows": [
                {"eps": e, "lhs": l, "rhs": r, "margin": r - l}
                for e, l, r in zip(self.epsilons, self.lhs, self.rhs)
            ],
        }


def _single(kernel: _Kernel, E, lhs, rhs, kind, med=None, denom_factor=1) -> DeviationReport:
    return DeviationReport(
        kind=kind,
        epsilons=tuple(kernel.eps_value(e) for e in E),
        lhs=tuple(kernel.prob(v, denom_factor) for v in lhs),
        rhs=tuple(kernel.prob(v, denom_factor) for v in rhs),
        median=None if med is None else kernel.eps_value(med),
    )


def _lip_sides(side: str) -> tuple[str, str]:
    """(lower-tail alpha side, upper-tail alpha side) for an f Lipschitz on ``side``."""
    side = normalize_side(side)
    if side == "left":
        return "left", "right"
    if side == "right":
        return "right", "left"
    raise ValueError("deviation checks take a left or right Lipschitz function")


def _require_lipschitz(space, f, side):
    check = verify_lipschitz(space, f, 1, side)
    if not check.ok:
        raise NotLipschitzError(check.worst_pair, check.excess, side)


def _tails(kernel: _Kernel, F, which):
    med = _medians(F, kernel.w, kernel.T, which, kernel.exact)
    below = med[:, None] - F  # f <= m - eps  iff  m - f >= eps
    above = F - med[:, None]
    return med, below, above


def check_median_deviation(
    space: FinitePQSpace, curve: ConcentrationCurve, f, side: str = "left", which: str = "low"
) -> tuple[DeviationReport, DeviationReport]:
    """mu{f <= m - eps} <= alpha^L(eps) and mu{f >= m + eps} <= alpha^R(eps).

    For a right 1-Lipschitz ``f`` the two alpha sides swap.  Returns the
    lower-tail and upper-tail reports.
    """
    lo_side, hi_side = _lip_sides(side)
    _require_lipschitz(space, f, side)
    k = _Kernel(space, curve, [f])
    med, below, above = _tails(k, k.F, which)
    reports = []
    for name, D, a_side in (("lower", below, lo_side), ("upper", above, hi_side)):
        E = k.grid_with(D)
        lhs = k.weights_to_units(mass_at_least(D, k.w, E)[0])
        rhs = k.alpha_units(a_side, E)
        reports.append(_single(k, E, lhs, rhs, f"median_{name}", med[0]))
    return tuple(reports)


def check_abs_deviation(
    space: FinitePQSpace, curve: ConcentrationCurve, f, side: str = "left", which: str = "low"
) -> DeviationReport:
    """mu{|f - m| >= eps} <= alpha^L(eps) + alpha^R(eps)."""
    _lip_sides(side)
    _require_lipschitz(space, f, side)
    k = _Kernel(space, curve, [f])
    med, _, above = _tails(k, k.F, which)
    D = np.abs(above)
    E = k.grid_with(D)
    lhs = k.weights_to_units(mass_at_least(D, k.w, E)[0])
    rhs = k.alpha_units("left", E) + k.alpha_units("right", E)
    return _single(k, E, lhs, rhs, "abs", med[0])


def _pair_diffs(F: np.ndarray) -> np.ndarray:
    m, n = F.shape
    return (F[:, :, None] - F[:, None, :]).reshape(m, n * n)


def check_pair_deviation(space: FinitePQSpace, curve: ConcentrationCurve, f, side: str = "left") -> DeviationReport:
    """(mu x mu){f(x) - f(y) >= eps} <= alpha^L(eps/2) + alpha^R(eps/2)."""
    _lip_sides(side)
    _require_lipschitz(space, f, side)
    k = _Kernel(space, curve, [f])
    D = _pair_diffs(k.F)
    ww = np.outer(k.w, k.w).reshape(-1)
    E = np.unique(np.concatenate([k.grid_with(D), 2 * k.B]))
    E = E[E > 0]
    lhs, rhs = _pair_units(k, D, ww, E)
    return _single(k, E, lhs[0], rhs, "pair", denom_factor=k.T)


def _pair_units(k: _Kernel, D, ww, E):
    """Pair mass and bound in units of 1/(2 T^2) (exact) or probabilities (float)."""
    s = mass_at_least(D, ww, E)
    bound = k.alpha_units("left", E, 2) + k.alpha_units("right", E, 2)
    if k.exact:
        return 2 * s, bound * k.T
    return s / (k.T * k.T), bound


# ---------------------------------------------------------------------------
# Batch sweep over witness families


@dataclass(frozen=True)
class SweepResult:
    """Counts from checking many Lipschitz functions against one curve."""

    functions: int
    checks: int
    violations: int
    lipschitz_failures: int
    first_violation: dict | None = None

    @property
    def ok(self) -> bool:
        return self.violations == 0 and self.lipschitz_failures == 0


def deviation_sweep(
    space: FinitePQSpace,
    curve: ConcentrationCurve,
    functions: Sequence[tuple[Sequence, str]],
    medians: Sequence[str] = ("low", "high"),
) -> SweepResult:
    """Run all four deviation inequalities on every (values, side) pair at once.

    Functions failing their claimed Lipschitz side are counted and skipped.
    """
    by_side: dict[str, list] = {"left": [], "right": []}
    lip_fail = 0
    for vals, side in functions:
        side = normalize_side(side)
        if not verify_lipschitz(space, vals, 1, side).ok:
            lip_fail += 1
            continue
        by_side[side].append(vals)
    checks = violations = 0
    first = None

    def record(kind, side, ok_mat, E, k):
        nonlocal checks, violations, first
        checks += ok_mat.size
        bad = np.argwhere(~ok_mat)
        violations += len(bad)
        if len(bad) and first is None:
            r, g = bad[0]
            first = {"kind": kind, "side": side, "function": int(r), "eps": k.eps_value(E[g])}

    for side, funcs in by_side.items():
        if not funcs:
            continue
        lo_side, hi_side = _lip_sides(side)
        k = _Kernel(space, curve, funcs)
        slack = 0 if k.exact else FLOAT_SLACK
        for which in medians:
            _, below, above = _tails(k, k.F, which)
            for kind, D, rhs_fn in (
                ("median_lower", below, lambda E: k.alpha_units(lo_side, E)),
                ("median_upper", above, lambda E: k.alpha_units(hi_side, E)),
                ("abs", np.abs(above), lambda E: k.alpha_units("left", E) + k.alpha_units("right", E)),
            ):
                E = k.grid_with(D)
                lhs = k.weights_to_units(mass_at_least(D, k.w, E))
                record(f"{kind}[{which}]", side, lhs <= rhs_fn(E)[None, :] + slack, E, k)
        D = _pair_diffs(k.F)
        ww = np.outer(k.w, k.w).reshape(-1)
        E = np.unique(np.concatenate([k.grid_with(D), 2 * k.B]))
        E = E[E > 0]
        lhs, rhs = _pair_units(k, D, ww, E)
        record("pair", side, lhs <= rhs[None, :] + slack, E, k)
    return SweepResult(len(functions), checks, violations, lip_fail, first)


def witness_family(space: FinitePQSpace) -> list[tuple[np.ndarray, str]]:
    """All signed set-distance functions of half-mass subsets (n <= 22)."""
    _check_size(space)
    tables = SubsetTables(space)
    out = []
    for mask in tables.eligible.tolist():
        A = [i for i in range(space.n) if mask >> i & 1]
        out.extend(set_distance_witnesses(space, A).values())
    return out


# ---------------------------------------------------------------------------
# alpha recovered from the Lipschitz witnesses


def _witness_side_matrix(num, side):
    # Rows a of this matrix give q(a, .) for the left family and q(., a) for the right one.
    if side == "right":
        return num.dist.T
    return kernel_side_matrix(num, side)


def _block_set_distances(D: np.ndarray, bits: int, inf) -> np.ndarray:
    """Row ``mask`` holds min over a in mask of D[a, :], for masks < 2**bits."""
    out = np.full((1, D.shape[1]), inf, dtype=D.dtype)
    for a in range(bits):
        out = np.concatenate([out, np.minimum(out, D[a])])
    return out


def _via_lipschitz_deficits(space: FinitePQSpace, eps_units: np.ndarray, side: str):
    """Per eps: max deviation mass over the witness family and the lowest attaining mask."""
    _check_size(space)
    side = normalize_side(side)
    num = space.numeric
    D = _witness_side_matrix(num, side)
    n = space.n
    G = len(eps_units)
    best = np.full(G, -1, dtype=np.int64 if num.exact else np.float64)
    arg = np.zeros(G, dtype=np.int64)
    if n == 0:
        return best.clip(0), arg
    inf = np.int64(2**60) if num.exact else np.inf
    lo_bits = min(n, 14)
    low = _block_set_distances(D[:lo_bits], lo_bits, inf)
    high = _block_set_distances(D[lo_bits:], n - lo_bits, inf)
    wlow = doubling_sums(num.weights[:lo_bits])
    whigh = doubling_sums(num.weights[lo_bits:])
    left_family = side != "right"
    for h in range(len(high)):
        dist = np.minimum(low, high[h])  # set distances for masks h << lo_bits | l
        mass = wlow + whigh[h]
        keep = num.half_mass(mass)
        if not keep.any():
            continue
        rows = np.flatnonzero(keep)
        dist = dist[rows]
        if left_family:
            F = -dist  # f = -q(A, .), high median, lower tail
            med = _medians(F, num.weights, num.total, "high", num.exact)
            Dev = med[:, None] - F
        else:
            F = dist  # g = q(., A), low median, upper tail
            med = _medians(F, num.weights, num.total, "low", num.exact)
            Dev = F - med[:, None]
        if num.exact:
            dev_mass = mass_at_least(Dev, num.weights, eps_units)
        else:
            dev_mass = np.stack([(num.weights[None, :] * (Dev >= e)).sum(axis=1) for e in eps_units], axis=1)
        top = dev_mass.argmax(axis=0)
        val = dev_mass[top, np.arange(G)]
        better = val > best
        best[better] = val[better]
        arg[better] = (h << lo_bits) | rows[top[better]]
    return best, arg


def _eps_to_units(num, eps) -> object:
    """Smallest kernel distance d with d >= eps, so that [dev >= eps] == [dev >= it]."""
    if num.exact:
        t = as_fraction(eps) * num.dist_scale
        return -((-t.numerator) // t.denominator)
    return float(eps)


def alpha_via_lipschitz(space: FinitePQSpace, eps, side: str) -> AlphaValue:
    """alpha recovered as the largest median deviation over set-distance witnesses.

    Left: f = -q(A, .), measure of {f <= m_f - eps}.  Right: g = q(., A),
    measure of {g >= m_g + eps}.  A ranges over subsets with mu(A) >= 1/2.
    """
    if not eps > 0:
        raise ValueError("eps must be positive; alpha(0) = 1/2 by definition")
    num = space.numeric
    e = np.array([_eps_to_units(num, eps)], dtype=np.int64 if num.exact else np.float64)
    best, arg = _via_lipschitz_deficits(space, e, side)
    if best[0] < 0:
        return AlphaValue(num.mass_value(0), None)
    return AlphaValue(num.mass_value(best[0]), int(arg[0]))


def alpha_via_lipschitz_curve(space: FinitePQSpace, eps_grid=None, sides=("left", "right")) -> ConcentrationCurve:
    grid = _prepare_grid(space, eps_grid)
    num = space.numeric
    half = Fraction(1, 2) if num.exact else 0.5
    pos = [e for e in grid if e > 0]
    units = np.array([_eps_to_units(num, e) for e in pos], dtype=np.int64 if num.exact else np.float64)
    values, witnesses = {}, {}
    for s in sides:
        s = normalize_side(s)
        best, arg = _via_lipschitz_deficits(space, units, s) if pos else (np.array([]), np.array([]))
        it = iter(zip(best.tolist(), arg.tolist()))
        vals, wits = [], []
        for e in grid:
            if e == 0:
                vals.append(half)
                wits.append(None)
                continue
            b, a = next(it)
            vals.append(num.mass_value(max(b, 0)))
            wits.append(int(a) if b >= 0 else None)
        values[s], witnesses[s] = tuple(vals), tuple(wits)
    return ConcentrationCurve(
        epsilons=tuple(grid),
        values=values,
        witnesses=witnesses,
        method="lipschitz_family",
        breakpoints=tuple(_distinct_distances(space)),
        exact=num.exact,
    )


__all__ = [
    "MAX_EXACT_POINTS",
    "LipschitzCheck",
    "LipschitzFunction",
    "NotLipschitzError",
    "DeviationReport",
    "SweepResult",
    "verify_lipschitz",
    "set_distance_witnesses",
    "median",
    "check_median_deviation",
    "check_abs_deviation",
    "check_pair_deviation",
    "deviation_sweep",
    "witness_family",
    "alpha_via_lipschitz",
    "alpha_via_lipschitz_curve",
    "mass_at_least",
]
