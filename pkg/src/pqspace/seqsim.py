"""Similarity scores on sequences and their conversion to quasi-metrics.

The local similarity score of x and y is the best value of
``T(x_A, y_B) - g(gaps in A) - g(gaps in B)`` over equal-size index sets A, B,
where T sums letter scores of aligned pairs and the gaps of A are the
positions between its first and last element that it skips.  The empty
alignment scores 0.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import FinitePQSpace, Tolerances, ValidationReport, validate

BRUTEFORCE_MAX_LEN = 10
GAP_SPAN_MAX = 20


class ParseError(ValueError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class UnsupportedGapError(ValueError):
    pass


class DuplicateSequenceError(ValueError):
    def __init__(self, duplicates: list[str]):
        self.duplicates = duplicates
        super().__init__(f"duplicate sequences: {', '.join(duplicates)}")


# ---------------------------------------------------------------------------
# Types


@dataclass(frozen=True)
class Alphabet:
    symbols: tuple[str, ...]

    def __post_init__(self):
        if not self.symbols:
            raise ValueError("alphabet is empty")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("alphabet has duplicate symbols")
        if any(len(s) != 1 for s in self.symbols):
            raise ValueError("alphabet symbols must be single characters")

    def __len__(self):
        return len(self.symbols)

    @property
    def index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.symbols)}

    def encode(self, seq: str) -> np.ndarray:
        idx = self.index
        try:
            return np.array([idx[c] for c in seq], dtype=np.intp)
        except KeyError as exc:
            raise ValueError(f"symbol {exc.args[0]!r} not in alphabet") from None


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    alphabet: Alphabet
    S: np.ndarray

    def __post_init__(self):
        k = len(self.alphabet)
        if self.S.shape != (k, k):
            raise ValueError(f"score matrix shape {self.S.shape} does not match {k} symbols")
        self.S.setflags(write=False)

    @classmethod
    def from_rows(cls, symbols: Iterable[str], rows) -> "ScoreMatrix":
        return cls(Alphabet(tuple(symbols)), np.array(rows, dtype=np.float64))

    def score(self, a: str, b: str) -> float:
        idx = self.alphabet.index
        return float(self.S[idx[a], idx[b]])

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.S, self.S.T))


@dataclass(frozen=True)
class GapPenalty:
    """g(A) = open * (maximal runs of consecutive positions in A) + gamma * |A|."""

    kind: str = "linear"
    gamma: float = 0.5
    open: float = 0.0

    def __post_init__(self):
        if self.kind not in ("linear", "affine"):
            raise ValueError(f"unknown gap kind {self.kind!r}")
        if self.gamma < 0 or self.open < 0:
            raise ValueError("gap parameters must be nonnegative")
        if self.kind == "linear" and self.open != 0:
            raise ValueError("linear gaps have no open cost")

    @classmethod
    def from_dict(cls, d: dict) -> "GapPenalty":
        return cls(d.get("kind", "linear"), float(d.get("gamma", 0.5)), float(d.get("open", 0.0)))

    def cost(self, positions: Iterable[int]) -> float:
        pos = sorted(set(positions))
        runs = sum(1 for i, p in enumerate(pos) if i == 0 or pos[i - 1] != p - 1)
        return self.open * runs + self.gamma * len(pos)

    def cost_masks(self, masks: np.ndarray) -> np.ndarray:
        """Vectorized g over bitmask-encoded position sets."""
        m = masks.astype(np.uint64)
        size = np.bitwise_count(m).astype(np.float64)
        runs = np.bitwise_count(m & ~(m << np.uint64(1))).astype(np.float64)
        return self.open * runs + self.gamma * size


# ---------------------------------------------------------------------------
# Parsing


def parse_score_matrix(text: str) -> ScoreMatrix:
    """Whitespace-separated substitution matrix: '#' comments, a header of symbols, labelled rows."""
    header = None
    rows: dict[str, list[float]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if header is None:
            if len(set(parts)) != len(parts):
                raise ParseError(lineno, "duplicate symbols in header")
            if any(len(p) != 1 for p in parts):
                raise ParseError(lineno, "header symbols must be single characters")
            header = parts
            continue
        label, cells = parts[0], parts[1:]
        if label not in header:
            raise ParseError(lineno, f"row {label!r} is not a header symbol")
        if label in rows:
            raise ParseError(lineno, f"row {label!r} appears twice")
        if len(cells) != len(header):
            raise ParseError(lineno, f"row {label!r} has {len(cells)} cells, expected {len(header)}")
        try:
            rows[label] = [float(c) for c in cells]
        except ValueError:
            bad = next(c for c in cells if not _is_number(c))
            raise ParseError(lineno, f"row {label!r} has non-numeric cell {bad!r}") from None
    if header is None:
        raise ParseError(0, "no header row")
    missing = [s for s in header if s not in rows]
    if missing:
        raise ParseError(0, f"missing rows for {missing}")
    return ScoreMatrix.from_rows(header, [rows[s] for s in header])


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def load_blosum62() -> ScoreMatrix:
    return parse_score_matrix(resources.files("pqspace.data").joinpath("BLOSUM62").read_text())


def read_fasta(text: str, alphabet: Alphabet | None = None) -> list[tuple[str, str]]:
    """Records as (header, sequence); sequences are uppercased and alphabet-checked."""
    records: list[tuple[str, list[str]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(";"):
            continue
        if line.startswith(">"):
            records.append((line[1:].strip(), []))
        elif not records:
            raise ParseError(lineno, "sequence data before the first '>' header")
        else:
            records[-1][1].append(line.upper())
    out = []
    for head, chunks in records:
        seq = "".join(chunks)
        if alphabet is not None:
            bad = sorted(set(seq) - set(alphabet.symbols))
            if bad:
                raise ValueError(f"record {head!r} has symbols {bad} outside the alphabet")
        out.append((head, seq))
    return out


# ---------------------------------------------------------------------------
# Condition checks


@dataclass(frozen=True)
class ScoreConditionReport:
    cond1_ok: bool
    cond2_ok: bool
    cond3_ok: bool
    violations: dict  # "cond1" -> [(a, b)], "cond2" -> [(a, b)], "cond3" -> [(a, b, c)]

    @property
    def ok(self) -> bool:
        return self.cond1_ok and self.cond2_ok and self.cond3_ok

    def counts(self) -> dict[str, int]:
        return {k: len(v) for k, v in self.violations.items()}

    def to_text(self) -> str:
        lines = [f"cond1_ok={self.cond1_ok} cond2_ok={self.cond2_ok} cond3_ok={self.cond3_ok}"]
        for k, v in self.violations.items():
            lines.append(f"{k} {len(v)}")
            lines.extend(" ".join(w) for w in v)
        return "\n".join(lines) + "\n"


def check_score_conditions(M: ScoreMatrix, tol: float = 0.0) -> ScoreConditionReport:
    """Matrix-level conditions: S(a,a) >= S(a,b); joint equality separation; the S-triangle."""
    S = M.S
    sym = M.alphabet.symbols
    d = np.diag(S)
    c1 = np.argwhere(S > d[:, None] + tol)
    eq = (S == d[:, None]) & (S.T == d[None, :])
    np.fill_diagonal(eq, False)
    c2 = np.argwhere(np.triu(eq))
    lhs = S[:, :, None] + S[None, :, :]  # S(a,b) + S(b,c) at [a, b, c]
    rhs = S[:, None, :] + d[None, :, None]  # S(a,c) + S(b,b)
    c3 = np.argwhere(lhs > rhs + tol)

    def named(idx):
        return [tuple(sym[i] for i in row) for row in idx.tolist()]

    return ScoreConditionReport(
        cond1_ok=len(c1) == 0,
        cond2_ok=len(c2) == 0,
        cond3_ok=len(c3) == 0,
        violations={"cond1": named(c1), "cond2": named(c2), "cond3": named(c3)},
    )


@dataclass(frozen=True)
class PhiTriangleReport:
    violations: list  # (i, j, k) with phi_ij phi_jk > phi_ik phi_jj
    equivalent: bool | None  # agreement with cond3 of the derived scores, when psi is given
    symbols: tuple | None = None

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_text(self) -> str:
        lines = [f"phi_violations {len(self.violations)}", f"equivalent {self.equivalent}"]
        name = (lambda i: self.symbols[i]) if self.symbols else str
        lines.extend(" ".join(name(i) for i in v) for v in self.violations)
        return "\n".join(lines) + "\n"


def scores_from_phi(phi: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """S(i,j) = 2 log2(phi_ij / (2 psi_i psi_j))."""
    return 2.0 * np.log2(phi / (2.0 * np.outer(psi, psi)))


def check_phi_triangle(phi, psi=None, symbols: Sequence[str] | None = None, rtol: float = 1e-12) -> PhiTriangleReport:
    phi = np.asarray(phi, dtype=np.float64)
    if phi.ndim != 2 or phi.shape[0] != phi.shape[1]:
        raise ValueError("phi must be square")
    if not (phi > 0).all():
        raise ValueError("phi entries must be positive")
    d = np.diag(phi)
    lhs = phi[:, :, None] * phi[None, :, :]
    rhs = phi[:, None, :] * d[None, :, None]
    viol = np.argwhere(lhs > rhs * (1 + rtol))
    equivalent = None
    if psi is not None:
        S = scores_from_phi(phi, np.asarray(psi, dtype=np.float64))
        k = phi.shape[0]
        derived = check_score_conditions(ScoreMatrix(Alphabet(tuple(chr(0x100 + i) for i in range(k))), S), tol=1e-9)
        idx = {chr(0x100 + i): i for i in range(k)}
        c3 = {tuple(idx[c] for c in t) for t in derived.violations["cond3"]}
        equivalent = c3 == {tuple(v) for v in viol.tolist()}
    return PhiTriangleReport([tuple(v) for v in viol.tolist()], equivalent, tuple(symbols) if symbols else None)


def back_derive_phi(M: ScoreMatrix) -> np.ndarray:
    """phi up to a constant from scores with uniform background: phi_ij = 2^(S_ij / 2)."""
    return np.exp2(M.S / 2.0)


@dataclass(frozen=True)
class GapMonotoneReport:
    monotone: bool
    violation_count: int
    violations: list  # (A, B) as 1-based position tuples, B = A plus one element


def check_gap_monotone(g: GapPenalty, max_span: int, max_witnesses: int = 1000) -> GapMonotoneReport:
    """Checks g(A) <= g(A + {e}) for every set inside {1..max_span}.

    Covering pairs suffice: a violation A < B forces one on some chain step.
    """
    if not 0 <= max_span <= GAP_SPAN_MAX:
        raise ValueError(f"max_span must be in [0, {GAP_SPAN_MAX}]")
    masks = np.arange(1 << max_span, dtype=np.uint64)
    cost = g.cost_masks(masks)
    count = 0
    found = []
    for e in range(max_span):
        bit = np.uint64(1 << e)
        A = masks[(masks & bit) == 0]
        B = A | bit
        bad = cost[A.astype(np.int64)] > cost[B.astype(np.int64)] + 1e-12
        count += int(bad.sum())
        for a, b in zip(A[bad][: max_witnesses].tolist(), B[bad][: max_witnesses].tolist()):
            if len(found) < max_witnesses:
                found.append((a, b))
    found.sort(key=lambda ab: (ab[1], ab[0]))

    def pos(m):
        return tuple(i + 1 for i in range(max_span) if m >> i & 1)

    return GapMonotoneReport(count == 0, count, [(pos(a), pos(b)) for a, b in found])


# ---------------------------------------------------------------------------
# Local similarity


@lru_cache(maxsize=None)
def _combos(m: int, k: int) -> np.ndarray:
    return np.array(list(itertools.combinations(range(m), k)), dtype=np.intp).reshape(-1, k)


@lru_cache(maxsize=4096)
def _combo_gap_costs(m: int, k: int, g: "GapPenalty") -> np.ndarray:
    return g.cost_masks(_inner_gap_masks(_combos(m, k)))


def _inner_gap_masks(C: np.ndarray) -> np.ndarray:
    """Bitmask of skipped positions between the first and last chosen index."""
    span = np.left_shift(1, C[:, -1] + 1) - np.left_shift(1, C[:, 0])
    chosen = np.bitwise_or.reduce(np.left_shift(1, C), axis=1)
    return (span & ~chosen).astype(np.uint64)


def local_similarity_bruteforce(x: str, y: str, M: ScoreMatrix, g: GapPenalty) -> float:
    """Definitional score by enumerating all equal-size index sets (lengths <= 10)."""
    if len(x) > BRUTEFORCE_MAX_LEN or len(y) > BRUTEFORCE_MAX_LEN:
        raise ValueError(f"brute force is capped at length {BRUTEFORCE_MAX_LEN}")
    sub = M.S[np.ix_(M.alphabet.encode(x), M.alphabet.encode(y))]
    best = 0.0
    for k in range(1, min(len(x), len(y)) + 1):
        A, B = _combos(len(x), k), _combos(len(y), k)
        T = sub[A[:, 0]][:, B[:, 0]]
        for t in range(1, k):
            T = T + sub[A[:, t]][:, B[:, t]]
        T -= _combo_gap_costs(len(x), k, g)[:, None]
        T -= _combo_gap_costs(len(y), k, g)[None, :]
        best = max(best, float(T.max()))
    return best


def _sw(x_idx: np.ndarray, y_idx: np.ndarray, S: np.ndarray, gamma: float, open_: float) -> float:
    """Row-vectorized local alignment with affine gaps (open_ = 0 gives linear)."""
    n = len(y_idx)
    if len(x_idx) == 0 or n == 0:
        return 0.0
    ninf = -np.inf
    gj = gamma * np.arange(n)
    prev_B = np.full(n, ninf)  # best ready-to-match score at row i-1
    prev_M = np.full(n, ninf)
    prev_Agap = np.full(n, ninf)
    best = 0.0
    for xi in x_idx:
        diag = np.empty(n)
        diag[0] = 0.0
        diag[1:] = np.maximum(0.0, prev_B[:-1])
        M = S[xi, y_idx] + diag
        Agap = np.maximum(prev_Agap, prev_M - open_) - gamma  # skip x_i after a match in this column
        A = np.maximum(M, Agap)
        # Bgap[j] = max_{j' < j} A[j'] - open - gamma (j - j')
        shifted = np.empty(n)
        shifted[0] = ninf
        shifted[1:] = np.maximum.accumulate(A[:-1] + gj[:-1])
        Bgap = shifted - open_ - gj
        B = np.maximum(A, Bgap)
        best = max(best, float(M.max()))
        prev_B, prev_M, prev_Agap = B, M, Agap
    return best


def local_similarity_dp(x: str, y: str, M: ScoreMatrix, g: GapPenalty) -> float:
    """Smith-Waterman score with a zero floor; linear gaps only."""
    if g.kind != "linear":
        raise UnsupportedGapError("local_similarity_dp takes linear gaps; use local_similarity_dp_affine")
    return _sw(M.alphabet.encode(x), M.alphabet.encode(y), M.S, g.gamma, 0.0)


def local_similarity_dp_affine(x: str, y: str, M: ScoreMatrix, g: GapPenalty) -> float:
    """Affine-gap variant: each maximal gap run costs open + gamma * length."""
    return _sw(M.alphabet.encode(x), M.alphabet.encode(y), M.S, g.gamma, g.open)


@dataclass(frozen=True)
class Scorer:
    matrix: ScoreMatrix
    gap: GapPenalty = field(default_factory=GapPenalty)
    method: str = "dp"

    def __call__(self, x: str, y: str) -> float:
        if self.method == "bruteforce":
            return local_similarity_bruteforce(x, y, self.matrix, self.gap)
        if self.gap.kind == "affine":
            return local_similarity_dp_affine(x, y, self.matrix, self.gap)
        return local_similarity_dp(x, y, self.matrix, self.gap)


def score_table(seqs: Sequence[str], scorer: Callable[[str, str], float]) -> np.ndarray:
    n = len(seqs)
    s = np.empty((n, n))
    for i, j in itertools.product(range(n), repeat=2):
        s[i, j] = scorer(seqs[i], seqs[j])
    return s


def score_to_pqspace(
    seqs: Sequence[str],
    scorer: Callable[[str, str], float],
    mu=None,
    labels: Sequence[str] | None = None,
    tolerances: Tolerances = Tolerances(),
) -> tuple[FinitePQSpace, ValidationReport]:
    """q(x, y) = s(x, x) - s(x, y), with a validation report rather than an exception."""
    seen: dict[str, int] = {}
    dups = []
    for s in seqs:
        seen[s] = seen.get(s, 0) + 1
        if seen[s] == 2:
            dups.append(s)
    if dups:
        raise DuplicateSequenceError(dups)
    s = score_table(seqs, scorer)
    q = np.diag(s)[:, None] - s
    n = len(seqs)
    mu = np.full(n, 1.0 / n) if mu is None else np.asarray(mu, dtype=np.float64)
    space = FinitePQSpace(tuple(labels) if labels is not None else tuple(seqs), q, mu)
    return space, validate(q, mu, tolerances)


__all__ = [
    "Alphabet",
    "ScoreMatrix",
    "GapPenalty",
    "Scorer",
    "ParseError",
    "UnsupportedGapError",
    "DuplicateSequenceError",
    "ScoreConditionReport",
    "PhiTriangleReport",
    "GapMonotoneReport",
    "parse_score_matrix",
    "load_blosum62",
    "read_fasta",
    "check_score_conditions",
    "check_phi_triangle",
    "scores_from_phi",
    "back_derive_phi",
    "check_gap_monotone",
    "local_similarity_bruteforce",
    "local_similarity_dp",
    "local_similarity_dp_affine",
    "score_table",
    "score_to_pqspace",
]
