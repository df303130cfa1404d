"""Finite quasi-metric spaces with a probability measure.

A space is a list of labels, a square distance matrix ``q`` (row ``i`` holds
distances *from* point ``i``) and a measure vector ``mu``.  Entries are either
all ``Fraction`` (exact mode) or ``float``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

SIDES = ("left", "right", "associated")
_SIDE_ALIASES = {"l": "left", "r": "right", "a": "associated", "assoc": "associated"}

MAX_DENSE_POINTS = 4096
HALF_MASS_TOL = 1e-12


def normalize_side(side: str) -> str:
    s = _SIDE_ALIASES.get(side, side)
    if s not in SIDES:
        raise ValueError(f"unknown side {side!r}; expected one of {SIDES}")
    return s


def as_fraction(x) -> Fraction:
    """Exact rational for ``x``; floats are read by their decimal repr."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise ValueError(f"cannot convert {x!r} to a fraction")
        return Fraction(repr(float(x)))
    raise TypeError(f"unsupported number type {type(x).__name__}")


def _to_array(values, exact: bool) -> np.ndarray:
    if exact:
        arr = np.array(values, dtype=object)
        flat = arr.reshape(-1)
        for i, v in enumerate(flat):
            flat[i] = as_fraction(v)
        return arr
    return np.array(values, dtype=np.float64)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FinitePQSpace:
    labels: tuple[str, ...]
    q: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        q, mu = self.q, self.mu
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError(f"distance matrix must be square, got shape {q.shape}")
        n = q.shape[0]
        if mu.shape != (n,):
            raise ValueError(f"measure has length {mu.shape[0] if mu.ndim else 0}, expected {n}")
        if len(self.labels) != n:
            raise ValueError(f"{len(self.labels)} labels for {n} points")
        if n > MAX_DENSE_POINTS:
            raise ValueError(f"{n} points exceeds the dense limit of {MAX_DENSE_POINTS}")
        _freeze(q)
        _freeze(mu)

    @classmethod
    def from_lists(cls, q, mu=None, labels: Sequence[str] | None = None, exact: bool | None = None):
        """Build a space from nested lists; ``exact=None`` infers from the entry types."""
        if exact is None:
            exact = _looks_exact(q) and (mu is None or _looks_exact(mu))
        qa = _to_array(q, exact)
        if qa.ndim != 2:
            raise ValueError("distance matrix must be two-dimensional")
        n = qa.shape[0]
        if mu is None:
            mu = [Fraction(1, n)] * n if exact else [1.0 / n] * n
        mua = _to_array(mu, exact)
        if labels is None:
            labels = [str(i) for i in range(n)]
        return cls(tuple(str(s) for s in labels), qa, mua)

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def exact(self) -> bool:
        return self.q.dtype == object and self.mu.dtype == object

    @property
    def diameter(self):
        if self.n == 0:
            return 0
        return self.q.max()

    def float_q(self) -> np.ndarray:
        return self.q.astype(np.float64)

    def float_mu(self) -> np.ndarray:
        return self.mu.astype(np.float64)

    def to_exact(self) -> "FinitePQSpace":
        if self.exact:
            return self
        return FinitePQSpace.from_lists(self.q.tolist(), self.mu.tolist(), self.labels, exact=True)

    def to_float(self) -> "FinitePQSpace":
        return FinitePQSpace(self.labels, self.float_q(), self.float_mu())

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def __eq__(self, other):
        if not isinstance(other, FinitePQSpace):
            return NotImplemented
        return (
            self.labels == other.labels
            and self.q.shape == other.q.shape
            and bool(np.all(self.q == other.q))
            and bool(np.all(self.mu == other.mu))
        )

    __hash__ = object.__hash__

    @cached_property
    def numeric(self) -> "Numeric":
        return Numeric.from_space(self)


def _looks_exact(values) -> bool:
    stack = [values]
    while stack:
        v = stack.pop()
        if isinstance(v, np.ndarray):
            if v.dtype.kind == "f":
                return False
            stack.extend(v.tolist() if v.dtype != object else list(v.reshape(-1)))
        elif isinstance(v, (list, tuple)):
            stack.extend(v)
        elif isinstance(v, (float, np.floating)):
            return False
    return True


# ---------------------------------------------------------------------------
# Numeric view: exact spaces become scaled integers so that vectorized kernels
# stay exact.


@dataclass(frozen=True)
class Numeric:
    """Distances and weights in kernel units.

    Exact mode: ``dist = q * dist_scale`` and ``weights = mu * mass_scale`` are
    int64 arrays.  Float mode: both scales are 1 and arrays are float64.
    """

    exact: bool
    dist: np.ndarray
    dist_scale: int
    weights: np.ndarray
    mass_scale: int | float

    @classmethod
    def from_space(cls, space: FinitePQSpace) -> "Numeric":
        if space.exact:
            dl = _lcm_denominators(space.q.reshape(-1))
            ml = _lcm_denominators(space.mu)
            dist = np.array([[int(v * dl) for v in row] for row in space.q], dtype=object)
            w = np.array([int(v * ml) for v in space.mu], dtype=object)
            if _fits_int64(dist) and _fits_int64(w, headroom=space.n + 2):
                return cls(True, dist.astype(np.int64), dl, w.astype(np.int64), ml)
        return cls(False, space.float_q(), 1, space.float_mu(), 1.0)

    @property
    def total(self):
        return int(self.weights.sum()) if self.exact else float(self.weights.sum())

    def scale_eps(self, eps):
        """Threshold ``eps`` in kernel distance units."""
        if self.exact:
            return as_fraction(eps) * self.dist_scale
        return float(eps)

    def lt(self, values: np.ndarray, t) -> np.ndarray:
        """values < t, with t already in kernel units."""
        if self.exact:
            return values < _ceil(t)
        return values < t

    def le(self, values: np.ndarray, t) -> np.ndarray:
        if self.exact:
            return values <= _floor(t)
        return values <= t

    def ge(self, values: np.ndarray, t) -> np.ndarray:
        return ~self.lt(values, t)

    def half_mass(self, mass) -> np.ndarray:
        if self.exact:
            return 2 * mass >= self.total
        return mass >= 0.5 * self.total - HALF_MASS_TOL

    def mass_value(self, m):
        if self.exact:
            return Fraction(int(m), self.total)
        return float(m) / self.total

    # "units": probabilities as integers over 2*total (exact) or plain floats.
    def units_from_value(self, v):
        if self.exact:
            u = as_fraction(v) * 2 * self.total
            if u.denominator != 1:
                raise ValueError(f"{v} is not a multiple of 1/(2*{self.total})")
            return int(u)
        return float(v)

    def units_from_weights(self, wsum):
        if self.exact:
            return 2 * wsum
        return wsum / self.total

    def value_from_units(self, u):
        if self.exact:
            return Fraction(int(u), 2 * self.total)
        return float(u)


def _ceil(t) -> int:
    return -((-t.numerator) // t.denominator) if isinstance(t, Fraction) else math.ceil(t)


def _floor(t) -> int:
    return t.numerator // t.denominator if isinstance(t, Fraction) else math.floor(t)


def _lcm_denominators(values) -> int:
    out = 1
    for v in values:
        out = math.lcm(out, v.denominator)
    return out


def _fits_int64(arr: np.ndarray, headroom: int = 4) -> bool:
    if arr.size == 0:
        return True
    bound = max(abs(int(v)) for v in arr.reshape(-1))
    return bound * headroom * 4 < 2**62


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class Tolerances:
    triangle: float = 1e-9
    mass: float = 1e-9
    weight: float = 1e-9


@dataclass(frozen=True)
class Violation:
    kind: str
    witness: tuple[int, ...]
    magnitude: float | Fraction


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]
    violation_count: int
    truncated: bool = False

    @property
    def is_quasimetric(self) -> bool:
        return self.violation_count == 0

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for v in self.violations:
            out[v.kind] = out.get(v.kind, 0) + 1
        return out

    def to_dict(self, labels: Sequence[str] | None = None) -> dict:
        def name(i):
            return labels[i] if labels is not None else i

        return {
            "is_quasimetric": self.is_quasimetric,
            "violation_count": self.violation_count,
            "truncated": self.truncated,
            "violations": [
                {"kind": v.kind, "witness": [name(i) for i in v.witness], "magnitude": float(v.magnitude)}
                for v in self.violations
            ],
        }


_KIND_ORDER = {"nonneg": 0, "self_distance": 1, "separation": 2, "triangle": 3, "mass": 4}


def validate(matrix, mu=None, tolerances: Tolerances = Tolerances(), max_witnesses: int = 10_000) -> ValidationReport:
    """Check the quasi-metric axioms and that ``mu`` is a probability vector.

    Problems with the data (negative or NaN entries, broken axioms) are
    reported as violations; only shape mismatches raise.
    """
    if isinstance(matrix, FinitePQSpace):
        matrix, mu = matrix.q, matrix.mu
    if mu is None:
        raise TypeError("validate needs a measure when given a bare matrix")
    q = np.asarray(matrix, dtype=object if _looks_exact(matrix) else np.float64)
    m = np.asarray(mu, dtype=object if _looks_exact(mu) else np.float64)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ValueError(f"distance matrix must be square, got shape {q.shape}")
    n = q.shape[0]
    if m.shape != (n,):
        raise ValueError(f"measure length {m.shape} does not match {n} points")
    if q.dtype == object:
        q = np.vectorize(as_fraction, otypes=[object])(q) if q.size else q
    if m.dtype == object and m.size:
        m = np.array([as_fraction(v) for v in m], dtype=object)

    found: list[Violation] = []
    count = 0

    def add(kind, witness, magnitude):
        nonlocal count
        count += 1
        if len(found) < max_witnesses:
            found.append(Violation(kind, tuple(int(i) for i in witness), magnitude))

    qf = q.astype(np.float64)
    bad = np.isnan(qf) | (qf < 0)
    for i, j in np.argwhere(bad):
        mag = q[i, j]
        add("nonneg", (i, j), float("nan") if np.isnan(qf[i, j]) else -mag)

    for i in range(n):
        v = q[i, i]
        if not (v == 0):
            add("self_distance", (i, i), abs(v) if not np.isnan(qf[i, i]) else float("nan"))

    zero = q == 0
    sep = zero & zero.T
    np.fill_diagonal(sep, False)
    for i, j in np.argwhere(np.triu(sep)):
        add("separation", (i, j), 0)

    tol = tolerances.triangle
    for j in range(n):
        excess = q - (q[:, j : j + 1] + q[j : j + 1, :])
        hits = np.argwhere(excess > tol)
        for i, k in hits:
            add("triangle", (i, j, k), excess[i, k])

    total = m.sum() if n else 0
    if abs(total - 1) > tolerances.mass:
        add("mass", (), abs(total - 1))
    mf = m.astype(np.float64)
    for i in np.argwhere(np.isnan(mf) | (mf < 0)).reshape(-1):
        add("mass", (i,), float("nan") if np.isnan(mf[i]) else -m[i])

    found.sort(key=lambda v: (_KIND_ORDER[v.kind], v.witness))
    return ValidationReport(tuple(found), count, truncated=count > len(found))


def space_from_matrix(matrix, mu=None, labels=None, tolerances: Tolerances = Tolerances()) -> FinitePQSpace:
    """Build a space, raising ``InvalidSpaceError`` if the axioms fail."""
    space = FinitePQSpace.from_lists(matrix, mu, labels)
    report = validate(space.q, space.mu, tolerances)
    if not report.is_quasimetric:
        raise InvalidSpaceError(report)
    return space


class InvalidSpaceError(ValueError):
    def __init__(self, report: ValidationReport):
        self.report = report
        first = report.violations[0] if report.violations else None
        super().__init__(f"not a pq-space: {report.violation_count} violation(s), first {first}")


# ---------------------------------------------------------------------------
# Derived constructions


def conjugate(space: FinitePQSpace) -> FinitePQSpace:
    return FinitePQSpace(space.labels, space.q.T.copy(), space.mu.copy())


def associated_metric(space: FinitePQSpace) -> FinitePQSpace:
    return FinitePQSpace(space.labels, _sym_max(space.q), space.mu.copy())


def _sym_max(q: np.ndarray) -> np.ndarray:
    if q.dtype == object:
        out = q.copy()
        n = q.shape[0]
        for i in range(n):
            for j in range(n):
                if q[j, i] > out[i, j]:
                    out[i, j] = q[j, i]
        return out
    return np.maximum(q, q.T)


@dataclass(frozen=True)
class WeightFunction:
    w: tuple

    def residual(self, space: FinitePQSpace):
        """Largest |q(i,j) + w(i) - q(j,i) - w(j)| over all pairs."""
        w = np.array(self.w, dtype=space.q.dtype)
        d = space.q + w[:, None] - space.q.T - w[None, :]
        return abs(d).max() if d.size else 0


class NoWeightExists(ValueError):
    def __init__(self, pair: tuple[int, int], magnitude):
        self.pair = pair
        self.magnitude = magnitude
        super().__init__(f"no generalised weight: pair {pair} off by {magnitude}")


def recover_weight(space: FinitePQSpace, tolerance: float = 1e-9) -> WeightFunction:
    """Weight with ``w[0] = 0`` such that q(i,j) + w(i) = q(j,i) + w(j).

    Raises ``NoWeightExists`` carrying the worst pair if no weight fits.
    """
    q = space.q
    w = q[0, :] - q[:, 0]
    d = q + w[:, None] - q.T - w[None, :]
    if d.size:
        ad = np.abs(d)
        if ad.dtype == object:
            i, j = max(np.ndindex(ad.shape), key=lambda ij: ad[ij])
        else:
            i, j = divmod(int(np.argmax(ad)), space.n)
        if ad[i, j] > tolerance:
            raise NoWeightExists((int(i), int(j)), ad[i, j])
    return WeightFunction(tuple(w.tolist()))


# ---------------------------------------------------------------------------
# Set distances and neighbourhoods


def _as_index_list(A: Iterable[int], n: int) -> list[int]:
    idx = sorted({int(a) for a in A})
    if not idx:
        raise ValueError("set must be nonempty")
    if idx[0] < 0 or idx[-1] >= n:
        raise IndexError(f"set index out of range for {n} points")
    return idx


def side_matrix(space: FinitePQSpace, side: str) -> np.ndarray:
    """Matrix D with D[a, x] the distance governing whether a reaches x."""
    side = normalize_side(side)
    if side == "left":
        return space.q
    if side == "right":
        return space.q.T
    return _sym_max(space.q)


def set_distances(space: FinitePQSpace, A: Iterable[int], side: str) -> np.ndarray:
    """Distances of every point to A.

    left: inf_a q(a, x); right: inf_a q(x, a); associated: inf_a max of both.
    """
    idx = _as_index_list(A, space.n)
    d = side_matrix(space, side)[idx, :]
    return d.min(axis=0)


def set_distance(space: FinitePQSpace, x: int, A: Iterable[int], side: str):
    return set_distances(space, A, side)[x]


def neighborhood(space: FinitePQSpace, A: Iterable[int], eps, side: str) -> frozenset[int]:
    """Points at distance strictly less than ``eps`` from A."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    d = set_distances(space, A, side)
    return frozenset(int(i) for i in np.flatnonzero(d < eps))


def measure(space: FinitePQSpace, points: Iterable[int]):
    pts = list(points)
    if not pts:
        return Fraction(0) if space.exact else 0.0
    return space.mu[pts].sum()


def mask_to_indices(mask: int) -> list[int]:
    out, i = [], 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def indices_to_mask(indices: Iterable[int]) -> int:
    m = 0
    for i in indices:
        m |= 1 << int(i)
    return m
