from fractions import Fraction as F

import numpy as np
import pytest

from pqspace import (
    FinitePQSpace,
    InvalidSpaceError,
    NoWeightExists,
    associated_metric,
    conjugate,
    neighborhood,
    recover_weight,
    set_distance,
    set_distances,
    space_from_matrix,
    validate,
)
from pqspace.core import as_fraction, indices_to_mask, mask_to_indices, measure
from pqspace.generators import random_space, two_point_space

from . import oracles


def test_two_point_validates():
    report = validate([[0, 1], [F(1, 3), 0]], [F(2, 3), F(1, 3)])
    assert report.is_quasimetric
    assert report.violation_count == 0


def test_single_point():
    assert validate([[0]], [1]).is_quasimetric


def test_triangle_witness():
    q = [[0, 1, 5], [1, 0, 1], [5, 1, 0]]
    report = validate(q, [F(1, 3)] * 3)
    tri = [v for v in report.violations if v.kind == "triangle"]
    assert (0, 1, 2) in [v.witness for v in tri]
    assert next(v for v in tri if v.witness == (0, 1, 2)).magnitude == 3


def test_each_axiom_reported():
    q = np.array([[0.5, -1.0], [0.0, 0.0]])
    kinds = validate(q, [0.7, 0.7]).counts()
    assert kinds["nonneg"] == 1 and kinds["self_distance"] == 1 and kinds["mass"] == 1
    sep = validate([[0, 0], [0, 0]], [0.5, 0.5])
    assert [v.kind for v in sep.violations] == ["separation"]


def test_nan_is_a_violation():
    report = validate(np.array([[0, np.nan], [1, 0]]), [0.5, 0.5])
    assert not report.is_quasimetric
    assert report.violations[0].kind == "nonneg"


def test_witness_cap():
    n = 6
    q = np.full((n, n), 10.0)
    np.fill_diagonal(q, 0)
    q[:, 0] = 1
    q[0, :] = 1
    q[0, 0] = 0
    full = validate(q, np.full(n, 1 / n))
    capped = validate(q, np.full(n, 1 / n), max_witnesses=3)
    assert capped.truncated and len(capped.violations) == 3
    assert capped.violation_count == full.violation_count


def test_validate_requires_measure():
    with pytest.raises(TypeError):
        validate([[0]])
    with pytest.raises(ValueError):
        validate([[0, 1]], [1])


def test_space_from_matrix_raises_with_report():
    with pytest.raises(InvalidSpaceError) as err:
        space_from_matrix([[0, 0], [0, 0]], [0.5, 0.5])
    assert err.value.report.violation_count == 1


def test_zero_mass_points_allowed():
    assert validate([[0, 1], [1, 0]], [1, 0]).is_quasimetric


def test_as_fraction_reads_decimals():
    assert as_fraction(0.1) == F(1, 10)
    assert as_fraction("2/3") == F(2, 3)


def test_conjugate_two_point():
    c = conjugate(two_point_space(4))
    assert c.q[0, 1] == F(1, 4) and c.q[1, 0] == 1


def test_conjugate_of_metric_is_identity():
    s = FinitePQSpace.from_lists([[0, 2], [2, 0]])
    assert conjugate(s) == s


def test_associated_metric():
    a = associated_metric(two_point_space(4))
    assert a.q[0, 1] == a.q[1, 0] == 1
    m = FinitePQSpace.from_lists([[0, 3], [3, 0]])
    assert associated_metric(m) == m


def test_associated_metric_of_random_spaces_is_metric():
    rng = np.random.default_rng(3)
    for _ in range(30):
        s = random_space(rng, int(rng.integers(2, 11)))
        a = associated_metric(s)
        assert validate(a).is_quasimetric
        assert np.all(a.q == a.q.T)
        assert associated_metric(conjugate(s)) == a


def test_weight_of_score_space():
    s = np.array([[5.0, 2.0, 1.0], [2.0, 4.0, 0.0], [1.0, 0.0, 3.0]])
    q = np.diag(s)[:, None] - s
    space = FinitePQSpace(("x", "y", "z"), q, np.full(3, 1 / 3))
    w = np.array(recover_weight(space).w)
    # q(x,y) + w(x) = q(y,x) + w(y) pins w to -s(x,x) up to a constant
    assert np.allclose(w + np.diag(s), w[0] + s[0, 0])


def test_weight_of_metric_is_zero():
    s = FinitePQSpace.from_lists([[0, 2, 3], [2, 0, 1], [3, 1, 0]])
    assert all(v == 0 for v in recover_weight(s).w)


def test_weight_two_point():
    s = FinitePQSpace.from_lists([[0, 1], [F(1, 2), 0]])
    w = recover_weight(s)
    assert w.w == (0, F(1, 2))
    assert s.q[0, 1] + w.w[0] == s.q[1, 0] + w.w[1]
    assert w.residual(s) == 0


def test_weight_missing():
    s = FinitePQSpace.from_lists([[0, 1, 1], [0, 0, 1], [0, 0, 0]])
    with pytest.raises(NoWeightExists) as err:
        recover_weight(s)
    assert err.value.magnitude > 0


def test_set_distance_examples():
    s = two_point_space(3)
    assert set_distance(s, 1, [0], "left") == 1
    assert set_distance(s, 1, [0], "right") == F(1, 3)
    for side in ("left", "right", "associated"):
        assert set_distance(s, 0, [0], side) == 0


def test_set_distances_match_explicit_min():
    rng = np.random.default_rng(9)
    s = random_space(rng, 8)
    q = s.q.tolist()
    A = [1, 4, 6]
    for side in ("left", "right", "associated"):
        got = set_distances(s, A, side)
        assert list(got) == [min(oracles.dist(q, a, x, side) for a in A) for x in range(8)]


def test_neighborhood_is_strict():
    s = two_point_space(3)
    assert neighborhood(s, [0], 1, "left") == {0}
    assert neighborhood(s, [0], F(11, 10), "left") == {0, 1}
    assert neighborhood(s, [0], s.diameter + 1, "right") == {0, 1}
    with pytest.raises(ValueError):
        neighborhood(s, [0], 0, "left")


def test_associated_neighbourhood_inside_intersection():
    rng = np.random.default_rng(21)
    for _ in range(40):
        s = random_space(rng, 6)
        for A in ([0], [1, 3], [0, 2, 5]):
            for eps in (1, 2, 3, 5):
                assoc = neighborhood(s, A, eps, "associated")
                both = neighborhood(s, A, eps, "left") & neighborhood(s, A, eps, "right")
                assert assoc <= both
                if len(A) == 1:
                    assert assoc == both


def test_associated_neighbourhood_can_be_strictly_smaller():
    # infima of the left and right distances are attained at different points of A
    q = [[0, 2, 0, 0], [0, 0, 0, 0], [2, 2, 0, 1], [1, 2, 0, 0]]
    s = FinitePQSpace.from_lists(q, [F(3, 10), F(1, 10), F(2, 5), F(1, 5)])
    assert validate(s).is_quasimetric
    A, eps = [1, 2], F(3, 2)
    left = neighborhood(s, A, eps, "left")
    right = neighborhood(s, A, eps, "right")
    assoc = neighborhood(s, A, eps, "associated")
    assert assoc < left & right
    assert 0 in left & right and 0 not in assoc


def test_measure_and_masks():
    s = two_point_space(2)
    assert measure(s, [0, 1]) == 1
    assert measure(s, []) == 0
    assert mask_to_indices(0b1011) == [0, 1, 3]
    assert indices_to_mask([0, 1, 3]) == 0b1011


def test_space_shape_checks():
    with pytest.raises(ValueError):
        FinitePQSpace(("a",), np.zeros((2, 2)), np.ones(2) / 2)
    with pytest.raises(ValueError):
        FinitePQSpace(("a", "b"), np.zeros((2, 2)), np.ones(3) / 3)


def test_float_and_exact_round_trip():
    s = FinitePQSpace.from_lists([[0, 1], [F(1, 4), 0]], [F(3, 4), F(1, 4)])
    assert s.exact and not s.to_float().exact
    assert s.to_float().to_exact() == s
