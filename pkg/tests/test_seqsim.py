import itertools

import numpy as np
import pytest

from pqspace import recover_weight
from pqspace.generators import random_score_matrix
from pqspace.seqsim import (
    Alphabet,
    DuplicateSequenceError,
    GapPenalty,
    ParseError,
    ScoreMatrix,
    Scorer,
    UnsupportedGapError,
    back_derive_phi,
    check_gap_monotone,
    check_phi_triangle,
    check_score_conditions,
    load_blosum62,
    local_similarity_bruteforce,
    local_similarity_dp,
    local_similarity_dp_affine,
    parse_score_matrix,
    read_fasta,
    score_to_pqspace,
)

from . import oracles

MATCH = ScoreMatrix.from_rows("01", [[1, -1], [-1, 1]])
LINEAR = GapPenalty("linear", 0.5)


def binary_strings(max_len):
    return ["".join(p) for n in range(1, max_len + 1) for p in itertools.product("01", repeat=n)]


def test_parse_one_letter():
    m = parse_score_matrix("A\nA 1\n")
    assert m.S.tolist() == [[1.0]]


def test_parse_ragged_row_names_row():
    with pytest.raises(ParseError) as err:
        parse_score_matrix("A B\nA 1 2\nB 3\n")
    assert "'B'" in str(err.value) and err.value.line == 3


def test_parse_rejects_unknown_row():
    with pytest.raises(ParseError):
        parse_score_matrix("A B\nA 1 2\nC 3 4\n")


def test_blosum62_fixture():
    m = load_blosum62()
    assert m.S.shape == (24, 24)
    assert m.score("W", "W") == 11
    assert m.is_symmetric


def test_match_mismatch_conditions():
    report = check_score_conditions(MATCH)
    assert report.ok and report.counts() == {"cond1": 0, "cond2": 0, "cond3": 0}


def test_cond2_degenerate_pair():
    m = ScoreMatrix.from_rows("ab", [[2, 2], [2, 2]])
    assert check_score_conditions(m).violations["cond2"] == [("a", "b")]


def test_phi_examples():
    phi = np.full((3, 3), 1.0)
    np.fill_diagonal(phi, 4.0)
    assert check_phi_triangle(phi).ok
    assert check_phi_triangle(np.ones((3, 3))).ok
    bad = np.array([[1.0, 3.0, 1.0], [1.0, 2.0, 3.0], [1.0, 1.0, 1.0]])
    assert (0, 1, 2) in check_phi_triangle(bad).violations


def test_phi_and_cond3_agree_on_blosum62():
    m = load_blosum62()
    k = len(m.alphabet)
    phi = check_phi_triangle(back_derive_phi(m), [1 / k] * k, m.alphabet.symbols)
    assert phi.equivalent
    assert len(phi.violations) == check_score_conditions(m).counts()["cond3"]


def test_gap_monotone_examples():
    assert check_gap_monotone(GapPenalty("linear", 0.5), 10).monotone
    assert check_gap_monotone(GapPenalty("affine", 0.5, 0.0), 8).monotone
    report = check_gap_monotone(GapPenalty("affine", 0.5, 2.0), 4)
    assert not report.monotone
    assert ((1, 3), (1, 2, 3)) in report.violations
    g = GapPenalty("affine", 0.5, 2.0)
    assert g.cost([1, 3]) == 5 and g.cost([1, 2, 3]) == 3.5


def test_gap_cost_masks_match_cost():
    g = GapPenalty("affine", 0.25, 1.5)
    masks = np.arange(1 << 8, dtype=np.uint64)
    got = g.cost_masks(masks)
    for m in range(1 << 8):
        assert got[m] == g.cost([i for i in range(8) if m >> i & 1])


def test_bruteforce_example():
    assert local_similarity_bruteforce("11", "101", MATCH, LINEAR) == 1.5
    assert local_similarity_bruteforce("11", "11", MATCH, LINEAR) == 2
    assert local_similarity_bruteforce("101", "101", MATCH, LINEAR) == 3


def test_bruteforce_matches_definition_oracle():
    rng = np.random.default_rng(7)
    M = random_score_matrix(rng)
    idx = M.alphabet.index
    for g in (GapPenalty("linear", 0.5), GapPenalty("affine", 0.25, 1.0)):
        for x, y in itertools.product(binary_strings(3), repeat=2):
            want = oracles.alignment_score(x, y, M.S.tolist(), idx, g.cost)
            assert local_similarity_bruteforce(x, y, M, g) == want


def test_dp_equals_bruteforce_short():
    rng = np.random.default_rng(8)
    strings = binary_strings(4)
    for M in (MATCH, random_score_matrix(rng), random_score_matrix(rng, symmetric=True)):
        for gamma in (0.25, 0.5, 1.0):
            g = GapPenalty("linear", gamma)
            for x, y in itertools.product(strings, repeat=2):
                assert local_similarity_dp(x, y, M, g) == local_similarity_bruteforce(x, y, M, g)


def test_affine_dp_equals_bruteforce():
    rng = np.random.default_rng(9)
    M = random_score_matrix(rng)
    g = GapPenalty("affine", 0.5, 1.0)
    for x, y in itertools.product(binary_strings(4), repeat=2):
        assert local_similarity_dp_affine(x, y, M, g) == local_similarity_bruteforce(x, y, M, g)


def test_linear_dp_rejects_affine():
    with pytest.raises(UnsupportedGapError):
        local_similarity_dp("1", "1", MATCH, GapPenalty("affine", 0.5, 1.0))


def test_empty_alignment_floor():
    m = ScoreMatrix.from_rows("01", [[1, -3], [-3, 1]])
    assert local_similarity_dp("0", "1", m, LINEAR) == 0


def test_score_to_pqspace_example():
    space, report = score_to_pqspace(["11", "101"], Scorer(MATCH, LINEAR))
    assert report.is_quasimetric
    assert space.q[0, 1] == 0.5 and space.q[1, 0] == 1.5


def test_single_sequence():
    space, report = score_to_pqspace(["10"], Scorer(MATCH, LINEAR))
    assert space.n == 1 and report.is_quasimetric


def test_duplicates_named():
    with pytest.raises(DuplicateSequenceError) as err:
        score_to_pqspace(["11", "10", "11"], Scorer(MATCH, LINEAR))
    assert err.value.duplicates == ["11"]


def test_symmetric_scores_give_weighted_quasimetric():
    rng = np.random.default_rng(10)
    for _ in range(20):
        M = random_score_matrix(rng, symmetric=True)
        seqs = list(rng.choice(binary_strings(4), size=5, replace=False))
        scorer = Scorer(M, GapPenalty("linear", 0.5))
        space, report = score_to_pqspace(seqs, scorer)
        assert report.is_quasimetric
        w = np.array(recover_weight(space).w)
        self_scores = np.array([scorer(x, x) for x in seqs])
        assert np.allclose(w + self_scores, w[0] + self_scores[0])


def test_key_inequality_symmetric_scores():
    # s(x,y) + s(y,z) <= s(x,z) + s(y,y) over all triples of short strings
    rng = np.random.default_rng(11)
    strings = binary_strings(3)
    for _ in range(3):
        M = random_score_matrix(rng, symmetric=True)
        g = GapPenalty("linear", 0.5)
        s = {(x, y): local_similarity_dp(x, y, M, g) for x in strings for y in strings}
        for x, y, z in itertools.product(strings, repeat=3):
            assert s[x, y] + s[y, z] <= s[x, z] + s[y, y] + 1e-12


def test_asymmetric_scores_can_break_triangle():
    M = ScoreMatrix.from_rows("01", [[2, -2], [3, 4]])
    assert check_score_conditions(M).ok
    g = GapPenalty("linear", 0.5)
    s = lambda a, b: local_similarity_dp(a, b, M, g)  # noqa: E731
    assert s("11", "00") + s("00", "0") == 8
    assert s("11", "0") + s("00", "00") == 7
    _, report = score_to_pqspace(["11", "00", "0"], Scorer(M, g))
    assert not report.is_quasimetric


def test_read_fasta():
    recs = read_fasta(">a first\nac\ngt\n\n>b\nAA\n", Alphabet(tuple("ACGT")))
    assert recs == [("a first", "ACGT"), ("b", "AA")]
    with pytest.raises(ParseError):
        read_fasta("AC\n>a\nAC\n")
    with pytest.raises(ValueError):
        read_fasta(">a\nACX\n", Alphabet(tuple("ACGT")))


def test_scorer_methods_agree():
    rng = np.random.default_rng(12)
    M = random_score_matrix(rng)
    g = GapPenalty("linear", 0.25)
    a, b = Scorer(M, g), Scorer(M, g, method="bruteforce")
    for x, y in itertools.product(binary_strings(3), repeat=2):
        assert a(x, y) == b(x, y)


def test_validation_report_sorted_and_stable():
    M = ScoreMatrix.from_rows("01", [[2, -2], [3, 4]])
    seqs = binary_strings(3)
    _, r1 = score_to_pqspace(seqs, Scorer(M, LINEAR))
    _, r2 = score_to_pqspace(seqs, Scorer(M, LINEAR))
    assert r1 == r2
    kinds = [v.kind for v in r1.violations]
    assert kinds == sorted(kinds, key=["nonneg", "self_distance", "separation", "triangle", "mass"].index)
