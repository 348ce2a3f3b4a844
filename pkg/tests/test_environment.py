import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from quenchlab.environment import (
    BumpProfile,
    PoissonCloud,
    PoissonEnvironment,
    check_sup_potential_bound,
    eval_potential,
    eval_potential_bruteforce,
    find_empty_ball,
    log_m_epsilon_box_size,
    m_epsilon_box_size,
    packing_centers,
    sample_cloud,
    void_probability,
)
from quenchlab.errors import CoverageError, DomainError, RangeError, SizeError


# ---------------------------------------------------------------- clouds


def test_mean_count_over_seeds():
    # rho (2 box)^d = 400, sd 20
    n = np.array([sample_cloud(2, 1.0, 10.0, s).n for s in range(1000)])
    assert abs(n.mean() - 400) <= 3 * 20 / math.sqrt(1000)


def test_points_lie_in_box_and_seed_determinism():
    a = sample_cloud(3, 0.5, 4.0, 17)
    b = sample_cloud(3, 0.5, 4.0, 17)
    assert a == b
    assert np.all(np.abs(a.points) <= 4.0)
    assert sample_cloud(3, 0.5, 4.0, 18) != a


def test_uniformity_of_positions():
    pts = sample_cloud(1, 1.0, 5000.0, 3).points[:, 0]
    assert stats.kstest(pts, stats.uniform(-5000, 10000).cdf).pvalue > 1e-3


def test_size_cap():
    with pytest.raises(SizeError):
        sample_cloud(3, 1.0, 1000.0, 0)


@pytest.mark.parametrize("d,rho,s", [(1, 1.0, 1.0), (2, 1.0, 0.5), (2, 0.5, 1.0), (3, 1.0, 0.5)])
def test_void_probability(d, rho, s):
    n = 10 ** 4
    empty = sum(sample_cloud(d, rho, s + 0.1, seed).count_in_ball(np.zeros(d), s) == 0 for seed in range(n))
    p = void_probability(d, rho, s)
    assert abs(empty / n - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_void_probability_closed_form():
    assert void_probability(1, 1.0, 1.0) == pytest.approx(math.exp(-2), rel=1e-15)
    assert void_probability(3, 2.0, 1.0) == pytest.approx(math.exp(-8 * math.pi / 3), rel=1e-14)


def test_cloud_bin_and_csv_round_trip(tmp_path):
    c = sample_cloud(2, 1.0, 3.0, 5)
    c.to_bin(tmp_path / "c.bin")
    assert PoissonCloud.from_bin(tmp_path / "c.bin") == c
    c.to_csv(tmp_path / "c.csv")
    assert PoissonCloud.from_csv(tmp_path / "c.csv") == c


def test_bin_rejects_foreign_file(tmp_path):
    (tmp_path / "x.bin").write_bytes(b"NOPE" + b"\0" * 40)
    with pytest.raises(DomainError):
        PoissonCloud.from_bin(tmp_path / "x.bin")


# ---------------------------------------------------------------- profiles


def test_bump_shapes():
    ind = BumpProfile.indicator_ball(2.0, 1.0)
    cone = BumpProfile.cone(3.0, 2.0)
    tab = BumpProfile.table([0.0, 0.5, 1.0], [4.0, 2.0, 1.0])
    assert ind.radial(np.array([0.0, 1.0, 1.0001])).tolist() == [2.0, 2.0, 0.0]
    assert cone.radial(np.array([0.0, 1.0, 2.0, 3.0])).tolist() == [3.0, 1.5, 0.0, 0.0]
    assert tab.radial(np.array([0.25, 0.75, 1.5])).tolist() == [3.0, 1.5, 0.0]
    assert tab.sup == 4.0 and tab.a == 1.0
    assert ind.scaled(3.0).sup == 6.0


def test_bump_rejects_bad_input():
    with pytest.raises(DomainError):
        BumpProfile.indicator_ball(-1.0, 1.0)
    with pytest.raises(DomainError):
        BumpProfile.cone(1.0, 0.0)


# ---------------------------------------------------------------- potential


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("W", [BumpProfile.indicator_ball(1.0, 0.7), BumpProfile.cone(2.0, 1.3),
                               BumpProfile.table([0.0, 0.3, 0.9], [1.0, 0.7, 0.2])])
def test_grid_equals_bruteforce_exactly(d, W):
    c = sample_cloud(d, 2.0, 5.0, 11 + d)
    rng = np.random.default_rng(d)
    xs = rng.uniform(-(5.0 - W.a), 5.0 - W.a, size=(300, d))
    # also probe points sitting exactly on cloud points and cell edges
    xs = np.vstack([xs, c.points[:20], np.zeros((1, d))])
    xs = xs[np.max(np.abs(xs), axis=1) + W.a <= 5.0]
    grid = PoissonEnvironment(c, W).potential(xs)
    brute = eval_potential_bruteforce(c, W, xs)
    assert np.array_equal(grid, brute)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6), a=st.floats(0.05, 2.0))
def test_grid_equals_bruteforce_property(seed, a):
    c = sample_cloud(2, 3.0, 4.0, seed)
    W = BumpProfile.cone(1.0, a)
    xs = np.random.default_rng(seed).uniform(-(4.0 - a), 4.0 - a, size=(50, 2))
    assert np.array_equal(PoissonEnvironment(c, W).potential(xs), eval_potential_bruteforce(c, W, xs))


def test_potential_counts_points_for_indicator():
    c = PoissonCloud(1, 1.0, 10.0, None, np.array([[0.0], [0.5], [0.5], [3.0]]))
    W = BumpProfile.indicator_ball(1.0, 1.0)
    assert eval_potential(c, W, np.array([[0.2]])).tolist() == [3.0]
    assert eval_potential(c, W, np.array([[2.5]])).tolist() == [1.0]


def test_coverage_error():
    c = sample_cloud(1, 1.0, 5.0, 0)
    env = PoissonEnvironment(c, BumpProfile.indicator_ball(1.0, 1.0))
    assert env.coverage_radius() == 4.0
    env.potential(np.array([[4.0]]))
    with pytest.raises(CoverageError):
        env.potential(np.array([[4.01]]))


def test_empty_cloud_gives_zero():
    c = PoissonCloud(2, 1.0, 3.0, None, np.zeros((0, 2)))
    assert eval_potential(c, BumpProfile.cone(1.0, 1.0), np.zeros((4, 2))).tolist() == [0.0] * 4


# ---------------------------------------------------------------- empty balls


def _exhaustive_first_free(cloud, centers, rad):
    for c in centers:
        if np.all(np.linalg.norm(cloud.points - c, axis=1) >= rad):
            return c
    return None


@pytest.mark.parametrize("d,rho,r,a,r_in", [(1, 1.0, 1.0, 0.2, 0.0), (2, 1.0, 0.5, 0.1, 1.0),
                                           (2, 3.0, 0.3, 0.0, 0.5), (3, 0.5, 0.4, 0.1, 0.0)])
def test_find_empty_ball_reverified_exhaustively(d, rho, r, a, r_in):
    for seed in range(5):
        cloud = sample_cloud(d, rho, 6.0, seed)
        found = find_empty_ball(cloud, r, a, r_in)
        expect = _exhaustive_first_free(cloud, packing_centers(d, r, a, 6.0, r_in), r + a)
        if expect is None:
            assert found is None
        else:
            assert np.array_equal(found, expect)
            assert np.all(np.linalg.norm(cloud.points - found, axis=1) >= r + a)


def test_find_empty_ball_adversarial_cover():
    centers = packing_centers(2, 0.5, 0.0, 5.0, 0.0)
    cloud = PoissonCloud(2, 1.0, 5.0, None, centers.copy())
    assert find_empty_ball(cloud, 0.5) is None
    # removing one point opens exactly that ball
    cloud2 = cloud.subset(np.arange(len(centers)) != 7)
    assert np.array_equal(find_empty_ball(cloud2, 0.5), centers[7])


def test_packing_centers_are_disjoint_and_avoid_inner_box():
    c = packing_centers(2, 0.4, 0.1, 5.0, 1.2)
    side = 1.0
    assert np.all(np.abs(c) + side / 2 <= 5.0 + 1e-12)
    assert not np.any(np.all(np.abs(c) - side / 2 <= 1.2, axis=1))
    diffs = np.abs(c[:, None, :] - c[None, :, :]).max(axis=2)
    np.fill_diagonal(diffs, np.inf)
    assert diffs.min() >= side - 1e-12
    norms = np.abs(c).max(axis=1)
    assert np.all(np.diff(norms) >= 0)


def test_find_empty_ball_box_check():
    with pytest.raises(CoverageError):
        find_empty_ball(sample_cloud(1, 1.0, 2.0, 0), 0.5, M=3.0)


# ---------------------------------------------------------------- M^eps


def _m_eps_direct(eps, r, d, rho):
    om = {1: 2.0, 2: math.pi, 3: 4 * math.pi / 3}[d]
    k = om * rho * (1 + eps)
    return (d / k) ** (2 / d + 2) * r ** (-2 * d - 2) * math.exp(k * r ** d / d)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_m_epsilon_matches_direct_arithmetic(d):
    for eps in (0.0, 0.1, 1.0):
        for r in (0.5, 1.0, 2.0, 3.0):
            assert m_epsilon_box_size(eps, r, d, 1.3) == pytest.approx(_m_eps_direct(eps, r, d, 1.3), rel=1e-12)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_m_epsilon_monotone_for_large_r(d):
    # the exponential dominates beyond r^d > (2d+2)/omega_d rho
    rs = np.linspace(3.0, 6.0, 20)
    vals = [log_m_epsilon_box_size(0.1, r, d, 1.0) for r in rs]
    assert np.all(np.diff(vals) > 0)
    eps = [0.0, 0.1, 0.5, 1.0]
    assert np.all(np.diff([log_m_epsilon_box_size(e, 3.0, d, 1.0) for e in eps]) > 0)


def test_m_epsilon_overflow():
    assert math.isfinite(log_m_epsilon_box_size(0.0, 50.0, 3, 1.0))
    with pytest.raises(RangeError, match="r ~"):
        m_epsilon_box_size(0.0, 50.0, 3, 1.0)


# ---------------------------------------------------------------- sup bound


def test_sup_bound_pass_frequency():
    # sup V = max count in a window of length 1; bound 3 log R = 9 at R = e^3
    R = math.exp(3.0)
    W = BumpProfile.indicator_ball(1.0, 0.5)
    passed = [check_sup_potential_bound(sample_cloud(1, 1.0, R + 0.5, s), W, R).passed for s in range(20)]
    # P(some window of length 1 holds 10 points) <= 2R * 4 * P(Poisson(1) >= 10) ~ 1.7e-5
    tail = 2 * R * 4 * stats.poisson.sf(9, 1.0)
    assert tail < 1e-4
    assert all(passed)


def test_sup_bound_large_R():
    R = math.exp(10.0)
    rep = check_sup_potential_bound(sample_cloud(1, 1.0, R + 0.5, 0), BumpProfile.indicator_ball(1.0, 0.5), R)
    assert rep.passed and rep.bound == pytest.approx(30.0)


def test_sup_bound_forced_violation():
    R = 10.0
    c = sample_cloud(1, 1.0, R + 0.5, 0).with_points(np.zeros((25, 1)))
    rep = check_sup_potential_bound(c, BumpProfile.indicator_ball(1.0, 0.5), R)
    assert not rep.passed and rep.sup >= 25


def test_sup_bound_guards():
    c = sample_cloud(1, 1.0, 5.0, 0)
    with pytest.raises(DomainError):
        check_sup_potential_bound(c, BumpProfile.indicator_ball(1.0, 0.5), 1.0)
    with pytest.raises(CoverageError):
        check_sup_potential_bound(c, BumpProfile.indicator_ball(1.0, 0.5), 4.8)
