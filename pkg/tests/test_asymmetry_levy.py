from fractions import Fraction as F

import numpy as np
import pytest

from pqspace import FinitePQSpace
from pqspace.concentration import (
    alpha_curve,
    asymmetry_distribution,
    asymmetry_distribution_sampled,
    check_asymmetry_bound,
    levy_diagnostics,
)
from pqspace.concentration.asymmetry import tail_mass
from pqspace.concentration.levy import fit_normal_levy
from pqspace.cube import CubeSpec, materialize
from pqspace.generators import random_space, two_point_family, two_point_space


def test_metric_space_point_mass():
    s = FinitePQSpace.from_lists([[0, 1], [1, 0]])
    d = asymmetry_distribution(s)
    assert d.support == (0,) and d.pmf == (1,)


def test_two_point_law():
    d = asymmetry_distribution(two_point_space(3))
    assert d.support == (0, F(2, 3))
    assert d.pmf == (F(5, 9), F(4, 9))
    assert d.tail(F(2, 3)) == F(4, 9) == tail_mass(two_point_space(3), F(2, 3))


def test_diagonal_mass_at_zero():
    s = random_space(np.random.default_rng(1), 6)
    d = asymmetry_distribution(s)
    assert d.pmf[0] >= sum(m * m for m in s.mu)
    assert sum(d.pmf) == 1


def test_sampled_law_close():
    s = two_point_space(3)
    d = asymmetry_distribution_sampled(s, 200_000, seed=3)
    p = d.tail(F(2, 3))
    assert abs(p - 4 / 9) < 4 * d.stderr(F(2, 3)) + 1e-12


def test_bound_holds_on_two_point_n3():
    s = two_point_space(3)
    report = check_asymmetry_bound(s, alpha_curve(s))
    i = report.epsilons.index(F(2, 3))
    assert report.lhs[i] == F(4, 9) and report.rhs[i] == F(2, 3)
    assert report.ok


def test_bound_holds_on_metric_space():
    s = FinitePQSpace.from_lists([[0, 1, 2], [1, 0, 1], [2, 1, 0]])
    report = check_asymmetry_bound(s, alpha_curve(s))
    assert all(v == 0 for v in report.lhs) and report.ok


def test_bound_fails_when_gamma_median_is_not_zero():
    # two points, q(a,b)=1, q(b,a)=0, mu=(3/4,1/4): P(Gamma >= 1) = 3/8 > 1/4 + 0
    s = FinitePQSpace.from_lists([[0, 1], [0, 0]], [F(3, 4), F(1, 4)])
    report = check_asymmetry_bound(s, alpha_curve(s))
    i = report.epsilons.index(1)
    assert report.lhs[i] == F(3, 8)
    assert report.rhs[i] == F(1, 4)
    assert not report.ok


def test_bound_fails_on_two_point_n4():
    s = two_point_space(4)
    report = check_asymmetry_bound(s, alpha_curve(s))
    i = report.epsilons.index(F(3, 4))
    assert report.lhs[i] == F(4, 9) and report.rhs[i] == F(1, 3)
    assert i in report.violations


def test_bound_holds_on_small_asymmetric_cubes():
    for n in range(1, 5):
        s = materialize(CubeSpec(n, "asymmetric"), exact=True)
        assert check_asymmetry_bound(s, alpha_curve(s)).ok


def test_levy_two_point_family():
    report = levy_diagnostics(two_point_family(10), sizes=range(1, 11))
    verdicts = report.verdicts()
    assert verdicts["right"] == "converging"
    assert verdicts["left"] == "stuck"
    left = report.sides["left"].sequences
    assert all(v == F(1, 3) for e, seq in left.items() if e <= 1 for v in seq)


def test_levy_needs_three_spaces():
    with pytest.raises(ValueError):
        levy_diagnostics(two_point_family(2))


def test_levy_cube_family_converges():
    spaces = [materialize(CubeSpec(n, "asymmetric"), exact=True) for n in (2, 3, 4)]
    report = levy_diagnostics(spaces, sizes=(2, 3, 4))
    assert set(report.verdicts().values()) == {"converging"}


def test_levy_constant_one_point_family():
    one = FinitePQSpace.from_lists([[0]], [1])
    report = levy_diagnostics([one] * 3, eps_grid=[F(1, 2), 1])
    assert set(report.verdicts().values()) == {"converging"}


def test_fit_recovers_gaussian_decay():
    rows = [(e, n, 0.7 * np.exp(-1.5 * e * e * n)) for e in (0.3, 0.5, 0.7) for n in (2, 4, 8)]
    fit = fit_normal_levy(rows)
    assert fit.c1 == pytest.approx(0.7) and fit.c2 == pytest.approx(1.5)
    assert fit.r2 == pytest.approx(1.0)
