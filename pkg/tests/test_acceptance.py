"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines, or
``python -m tests.test_acceptance`` for the plain report.  Criteria whose
claims are false are left red; the detail line carries the counterexample.
"""

from __future__ import annotations

import functools
import itertools
import json
import math
from fractions import Fraction as F
from importlib import resources

import numpy as np
import pytest

from pqspace import NoWeightExists, recover_weight
from pqspace import cube as cubemod
from pqspace import product, seqsim
from pqspace.concentration.alpha import alpha_curve, check_sandwich
from pqspace.concentration.asymmetry import check_asymmetry_bound
from pqspace.concentration.deviation import alpha_via_lipschitz_curve, deviation_sweep, witness_family
from pqspace.generators import random_score_matrix, random_space, two_point_space

from . import oracles

SEED = 20240607


@functools.lru_cache(maxsize=None)
def random_spaces():
    rng = np.random.default_rng(SEED)
    return tuple(random_space(rng, int(rng.integers(1, 11))) for _ in range(200))


def _fmt(x) -> str:
    return str(x) if isinstance(x, F) else f"{float(x):.6g}"


# ---------------------------------------------------------------------------


def criterion_1():
    bad = []
    for n in range(1, 11):
        c = alpha_curve(two_point_space(n))
        probes = [F(0), F(1, 2 * n), F(1, n), F(1, n) + F(1, 100 * n), F(1), F(11, 10), F(3)]
        for e in probes:
            want_l = F(1, 2) if e == 0 else F(1, 3) if e <= 1 else F(0)
            want_r = F(1, 2) if e == 0 else F(1, 3) if e <= F(1, n) else F(0)
            got_l, got_r = c.value_at(e, "left"), c.value_at(e, "right")
            if got_l != want_l or got_r != want_r or not isinstance(got_l, F):
                bad.append((n, e, got_l, got_r))
    return not bad, f"n=1..10, {len(bad)} mismatches" + (f", first {bad[0]}" if bad else "")


def criterion_2():
    lower = upper = 0
    first = None
    for s in random_spaces():
        rep = check_sandwich(alpha_curve(s))
        for r in rep.rows:
            lower += r.lower_margin < 0
            if r.upper_margin < 0:
                upper += 1
                if first is None:
                    first = (s.n, r.eps)
        # oracle cross-check on the small ones
        if s.n <= 6:
            c = alpha_curve(s)
            for e in c.epsilons[1:4]:
                assert c.value_at(e, "left") == oracles.alpha(s.q.tolist(), s.mu.tolist(), e, "left")
    detail = f"200 spaces, lower-half violations {lower}, upper-half violations {upper}"
    if first:
        detail += f" (first: n={first[0]}, eps={_fmt(first[1])})"
    return lower == 0 and upper == 0, detail


def criterion_3():
    spaces = [s for s in random_spaces() if s.n <= 8]
    funcs = checks = viol = lip = mism = 0
    for s in spaces:
        curve = alpha_curve(s)
        res = deviation_sweep(s, curve, witness_family(s))
        funcs += res.functions
        checks += res.checks
        viol += res.violations
        lip += res.lipschitz_failures
        via = alpha_via_lipschitz_curve(s, list(curve.epsilons))
        for side in ("left", "right"):
            mism += sum(a != b for a, b in zip(via.values[side], curve.values[side]))
    ok = viol == 0 and lip == 0 and mism == 0
    return ok, (
        f"{len(spaces)} spaces, {funcs} witnesses, {checks} checks, {viol} violations, "
        f"{lip} Lipschitz failures, {mism} via-Lipschitz mismatches"
    )


def criterion_4():
    bad_spaces = bad_cubes = 0
    first = None
    for s in random_spaces():
        rep = check_asymmetry_bound(s, alpha_curve(s))
        if not rep.ok:
            bad_spaces += 1
            first = first or f"n={s.n}, eps={_fmt(rep.epsilons[rep.violations[0]])}"
    for n in range(1, 5):
        s = cubemod.materialize(cubemod.CubeSpec(n, "asymmetric"), exact=True)
        if not check_asymmetry_bound(s, alpha_curve(s)).ok:
            bad_cubes += 1
    detail = f"violating spaces {bad_spaces}/200, violating asymmetric cubes {bad_cubes}/4"
    if first:
        detail += f" (first: {first})"
    return bad_spaces == 0 and bad_cubes == 0, detail


def criterion_5():
    exact_bad = []
    for n in range(1, 5):
        for variant in cubemod.VARIANTS:
            for side in ("left", "right", "associated"):
                _, rep = cubemod.cube_alpha_exact(cubemod.CubeSpec(n, variant), side=side)
                exact_bad += [(n, variant, side, r.eps, r.value) for r in rep.violations]
    maj_bad = 0
    for n in (64, 256, 1024):
        for side in ("left", "right", "associated"):
            maj_bad += len(cubemod.majority_bound_report(n, "metric", side).violations)
    detail = f"exact cube violations {len(exact_bad)}, majority violations {maj_bad}"
    if exact_bad:
        n, v, side, e, val = exact_bad[0]
        detail += f" (first: n={n} {v} {side} eps={_fmt(e)} alpha={_fmt(val)} > {cubemod.hamming_bound(e, n):.4g})"
    return not exact_bad and maj_bad == 0, detail


def criterion_6():
    bound_bad = 0
    worst_z = 0.0
    for n in (2, 16, 128, 1024):
        law = cubemod.gamma_law_exact(n)
        bound_bad += len(cubemod.check_gamma_bound(law).violations)
        for t in cubemod.gamma_monte_carlo(n, 10**6, seed=SEED + n, threads=None):
            worst_z = max(worst_z, cubemod.z_score(t, float(law.tail(t.eps))))
    return bound_bad == 0 and worst_z <= 4, f"bound violations {bound_bad}, worst MC z {worst_z:.3f}"


def criterion_7():
    rows = cubemod.lln_check([4, 100, 10**4])
    bad = [r for r in rows if not r.ok]
    drift = max(
        abs(r.tail - float(cubemod.lln_tail_exact(r.N, F(r.t)))) / max(float(cubemod.lln_tail_exact(r.N, F(r.t))), 1e-300)
        for r in rows
        if r.N <= 100
    )
    return not bad and drift < 1e-9, f"{len(rows)} (N, t) rows, {len(bad)} violations, max rel. error vs exact sum {drift:.2e}"


def criterion_8():
    strs = ["".join(p) for L in range(7) for p in itertools.product("01", repeat=L)]
    gaps = (seqsim.GapPenalty("linear", 0.25), seqsim.GapPenalty("linear", 0.5), seqsim.GapPenalty("affine", 0.5, 1.0))
    rng = np.random.default_rng(SEED)
    mats = [random_score_matrix(rng, symmetric=bool(i % 2)) for i in range(5)]
    pairs = mism = 0
    for M in mats:
        assert seqsim.check_score_conditions(M).ok
        for g in gaps:
            scorer = seqsim.Scorer(M, g)
            for x, y in itertools.product(strs, repeat=2):
                pairs += 1
                mism += scorer(x, y) != seqsim.local_similarity_bruteforce(x, y, M, g)
    # independent oracle on a slice
    for M, g in itertools.product(mats[:2], gaps):
        for x, y in itertools.product(strs[:31], repeat=2):
            mism += seqsim.local_similarity_bruteforce(x, y, M, g) != oracles.alignment_score(x, y, M.S.tolist(), M.alphabet.index, g.cost)
    return mism == 0 and pairs >= 8000, f"{pairs} pairs (5 matrices x 3 gaps), {mism} mismatches"


def criterion_9():
    rng = np.random.default_rng(SEED)
    trials = 10**4
    invalid = {"symmetric": 0, "asymmetric": 0}
    runs = {"symmetric": 0, "asymmetric": 0}
    no_weight = literal = flipped = 0
    example = None
    for t in range(trials):
        kind = "symmetric" if t % 2 == 0 else "asymmetric"
        symbols = ("0", "1") if rng.random() < 0.7 else ("0", "1", "2")
        M = random_score_matrix(rng, symbols, symmetric=kind == "symmetric")
        g = seqsim.GapPenalty("linear", float(rng.choice([0.25, 0.5, 1.0, 2.0])))
        m = int(rng.integers(1, 7))
        seqs = set()
        while len(seqs) < m:
            L = int(rng.integers(1, 7))
            seqs.add("".join(rng.choice(list(symbols), size=L)))
        seqs = sorted(seqs)
        space, rep = seqsim.score_to_pqspace(seqs, seqsim.Scorer(M, g))
        runs[kind] += 1
        if not rep.is_quasimetric:
            invalid[kind] += 1
            if example is None:
                example = (kind, M.S.tolist(), g.gamma, seqs)
            continue
        if kind == "symmetric":
            try:
                w = np.asarray(recover_weight(space).w, dtype=np.float64)
            except NoWeightExists:
                no_weight += 1
                continue
            self_scores = np.diag(seqsim.score_table(seqs, seqsim.Scorer(M, g)))
            literal += np.ptp(w - self_scores) > 1e-9
            flipped += np.ptp(w + self_scores) > 1e-9
    detail = (
        f"{trials} trials; validation failures symmetric {invalid['symmetric']}/{runs['symmetric']}, "
        f"asymmetric {invalid['asymmetric']}/{runs['asymmetric']}; weight not found {no_weight}; "
        f"w != s(x,x) + c in {literal} symmetric trials, w != -s(x,x) + c in {flipped}"
    )
    if example:
        detail += f"; first failure {example[0]} S={example[1]} gamma={example[2]} seqs={example[3]}"
    return sum(invalid.values()) == 0 and no_weight == 0 and literal == 0, detail


def _blosum_reports() -> str:
    M = seqsim.load_blosum62()
    k = len(M.alphabet)
    cond = seqsim.check_score_conditions(M)
    phi = seqsim.check_phi_triangle(seqsim.back_derive_phi(M), [1 / k] * k, M.alphabet.symbols)
    return cond.to_text() + phi.to_text() + json.dumps(cond.counts(), sort_keys=True)


def criterion_10():
    a, b = _blosum_reports(), _blosum_reports()
    counts = seqsim.check_score_conditions(seqsim.load_blosum62()).counts()
    same = a.encode() == b.encode()
    return same, f"byte-identical={same}, {len(a.encode())} bytes, condition counts {counts}"


def criterion_11():
    worst = math.inf
    rows_total = 0
    for name in ("talagrand_n10.json", "talagrand_n50.json"):
        cfg = json.loads(resources.files("pqspace.data").joinpath(name).read_text())
        base = product.BasePenalty.from_lists(cfg["base"]["h"], cfg["base"].get("mu"))
        A = product.sample_product_set(base, cfg["N"], cfg["target_mass"], cfg["seed"], cfg.get("dims"))
        rows = product.product_tail_monte_carlo(base, cfg["N"], A, cfg["u_grid"], cfg["samples"], cfg["seed"], threads=None)
        rows_total += len(rows)
        worst = min(worst, min((r.bound + 4 * r.stderr - r.empirical) for r in rows))
    rng = np.random.default_rng(SEED)
    bases = [two_point_space(1), two_point_space(3)] + [random_space(rng, k) for k in (2, 2, 3, 4)]
    checked = bad = 0
    for b in bases:
        for N in range(1, 5):
            if b.n**N > 16:
                break
            c = alpha_curve(product.product_space(b, N))
            for side in ("left", "right"):
                for e, v in zip(c.epsilons, c.values[side]):
                    if e > 0:
                        checked += 1
                        bad += float(v) > product.corollary_alpha_bound(b, N, e) + 1e-12
    ok = worst >= 0 and bad == 0
    return ok, f"{rows_total} tail rows, min slack {worst:.4g}; {checked} product alpha checks, {bad} over the corollary bound"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11]


def _line(k: int, ok: bool, detail: str) -> str:
    return f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}"


@pytest.mark.parametrize("k", range(1, len(CRITERIA) + 1))
def test_criterion(k):
    ok, detail = CRITERIA[k - 1]()
    print(_line(k, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    for k, fn in enumerate(CRITERIA, 1):
        print(_line(k, *fn()), flush=True)
