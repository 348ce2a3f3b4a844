import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quenchlab.errors import DomainError, RejectionCapError, SizeError
from quenchlab.paths import (
    Ball,
    Box,
    IncrementSampler,
    PathSample,
    SamplerConfig,
    exit_time_on_grid,
    positive_stable,
    sample_increment,
    sample_increments,
    sample_path,
    spawn_seeds,
    tail_probability_estimate,
)
from quenchlab.symbols import (
    GaussianPart,
    LevySymbol,
    GeometricStable,
    StableMixture,
    eval_psi,
    layered_profile,
    tempered_profile,
    truncated_profile,
)


def cf_error(symbol, t, n, seed, xis, config=None):
    """max |empirical CF - exp(-t psi)| over the xi grid."""
    x = IncrementSampler(symbol, t, config).draw(np.random.default_rng(seed), n)
    emp = np.exp(1j * (x @ xis.T)).mean(axis=0)
    exact = np.exp(-t * np.asarray(eval_psi(symbol, xis)))
    return float(np.max(np.abs(emp - exact)))


def xi_grid(d, radii=(0.25, 0.5, 1.0, 2.0, 4.0)):
    rng = np.random.default_rng(99)
    dirs = rng.standard_normal((len(radii), d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return np.asarray(radii)[:, None] * dirs


# ---------------------------------------------------------------- building blocks


def test_positive_stable_laplace_transform():
    rng = np.random.default_rng(0)
    for a in (0.3, 0.5, 0.85):
        s = positive_stable(a, 2.0, 10 ** 5, rng)
        assert np.all(s > 0)
        for lam in (0.5, 1.0, 3.0):
            emp = np.exp(-lam * s).mean()
            assert abs(emp - math.exp(-2.0 * lam ** a)) <= 4.5 / math.sqrt(10 ** 5)


def test_positive_stable_half_is_levy():
    # a = 1/2, scale c: S has the Levy law with P(S <= x) = erfc(c / (2 sqrt x))
    from scipy.special import erfc
    s = positive_stable(0.5, 1.0, 10 ** 5, np.random.default_rng(3))
    for x in (0.1, 1.0, 10.0):
        assert abs(np.mean(s <= x) - erfc(1.0 / (2 * math.sqrt(x)))) <= 4.5 / math.sqrt(10 ** 5)


def test_spawn_seeds_distinct_and_stable():
    a = [np.random.default_rng(s).random() for s in spawn_seeds(5, 4)]
    b = [np.random.default_rng(s).random() for s in spawn_seeds(5, 4)]
    assert a == b and len(set(a)) == 4


# ---------------------------------------------------------------- CF checks


N_CF = 2 * 10 ** 4


@pytest.mark.parametrize("symbol,t", [
    (LevySymbol.brownian(1), 1.0),
    (LevySymbol.brownian(3, 0.5), 0.7),
    (LevySymbol(2, GaussianPart.from_matrix([[1.0, 0.3], [0.3, 0.5]])), 1.0),
    (LevySymbol.stable(1, 0.7), 1.0),
    (LevySymbol.stable(2, 1.5), 0.5),
    (LevySymbol.stable(3, 1.0), 1.0),
    (LevySymbol.relativistic(1, 1.0, 1.0), 1.0),
    (LevySymbol.relativistic(2, 1.5, 0.5), 2.0),
    (LevySymbol(1, GaussianPart.none(), StableMixture(((1.0, 0.5), (0.5, 1.5)))), 1.0),
    (LevySymbol(1, GaussianPart.none(), GeometricStable(1.2)), 1.0),
    (LevySymbol(2, GaussianPart.isotropic(0.3), GeometricStable(0.8)), 0.5),
])
def test_characteristic_function(symbol, t):
    assert cf_error(symbol, t, N_CF, 1, xi_grid(symbol.dimension)) <= 4.5 / math.sqrt(N_CF)


def test_cf_layered_compound_poisson():
    sym = LevySymbol.from_profile(layered_profile(1, 1.0, 3.0))
    assert cf_error(sym, 1.0, N_CF, 2, xi_grid(1)) <= 4.5 / math.sqrt(N_CF)


def test_cf_tempered_and_truncated():
    for prof in (tempered_profile(1, 1.2, 1.0, 1.0), truncated_profile(1, 1.0)):
        sym = LevySymbol.from_profile(prof)
        assert cf_error(sym, 1.0, N_CF, 4, xi_grid(1)) <= 4.5 / math.sqrt(N_CF)


def test_cf_epsilon_consistency():
    sym = LevySymbol.from_profile(layered_profile(1, 1.0, 3.0))
    xis = xi_grid(1)
    for eps in (5e-3, 2e-2, 5e-2):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            err = cf_error(sym, 1.0, N_CF, 7, xis, SamplerConfig(epsilon=eps))
        assert err <= 4.5 / math.sqrt(N_CF)


def test_cf_relativistic_large_m_dt_substeps():
    sym = LevySymbol.relativistic(1, 1.0, 4.0)
    assert cf_error(sym, 3.0, N_CF, 8, xi_grid(1)) <= 4.5 / math.sqrt(N_CF)


# ---------------------------------------------------------------- moments and tails


def test_brownian_variance():
    x = sample_increments(LevySymbol.brownian(1, 1.0), 0.1, 10 ** 5, np.random.default_rng(0))
    # psi = a xi^2 gives Var = 2 a t = 0.2
    assert abs(x.var() - 0.2) <= 4 * 0.2 * math.sqrt(2 / 10 ** 5)


def test_second_moment_grows_linearly_along_paths():
    sym = LevySymbol.brownian(2, 0.5)
    ends = np.array([sample_path(sym, [0.0, 0.0], 2.0, 0.05, s).positions for s in range(2000)])
    t = 0.05 * np.arange(ends.shape[1])
    m2 = np.mean(np.sum(ends ** 2, axis=2), axis=0)
    slope = np.polyfit(t, m2, 1)[0]
    # E|X_t|^2 = 2 a d t = 2 t
    assert slope == pytest.approx(2.0, rel=0.06)


def test_stable_tail_slope():
    sym = LevySymbol.stable(1, 1.0)
    rs = np.geomspace(10, 100, 6)
    p = [tail_probability_estimate(sym, 1.0, r, 10 ** 5, 3)[0] for r in rs]
    slope = np.polyfit(np.log(rs), np.log(p), 1)[0]
    assert slope == pytest.approx(-1.0, rel=0.15)


def test_truncated_tail_far_below_stable():
    r = 6.0
    p_st, _ = tail_probability_estimate(LevySymbol.stable(1, 1.0), 1.0, r, 10 ** 4, 5)
    p_tr, _ = tail_probability_estimate(LevySymbol.from_profile(truncated_profile(1, 1.0)), 1.0, r, 10 ** 4, 5)
    assert p_tr < p_st / 10


def test_symmetry():
    x = sample_increments(LevySymbol.stable(2, 1.3), 1.0, 10 ** 5, np.random.default_rng(4))
    assert abs(np.mean(np.sign(x[:, 0]))) <= 4.5 / math.sqrt(10 ** 5)
    assert abs(np.mean(np.sign(x[:, 1]))) <= 4.5 / math.sqrt(10 ** 5)


def test_tail_probability_guards():
    with pytest.raises(DomainError):
        tail_probability_estimate(LevySymbol.brownian(1), 1.0, 1.0, 10, 0)
    assert tail_probability_estimate(LevySymbol.brownian(1), 1.0, 0.0, 1000, 0) == (1.0, 0.0)


# ---------------------------------------------------------------- paths


def test_path_determinism_and_translation():
    sym = LevySymbol.stable(2, 1.5)
    a = sample_path(sym, [0.0, 0.0], 1.0, 0.01, 9)
    b = sample_path(sym, [0.0, 0.0], 1.0, 0.01, 9)
    c = sample_path(sym, [3.0, -1.0], 1.0, 0.01, 9)
    assert np.array_equal(a.positions, b.positions)
    np.testing.assert_allclose(c.positions - a.positions, np.tile([3.0, -1.0], (a.n + 1, 1)), atol=1e-12)
    assert a.n == 100 and a.times[-1] == pytest.approx(1.0)


def test_different_seeds_differ():
    sym = LevySymbol.brownian(1)
    assert not np.array_equal(sample_path(sym, [0.0], 1.0, 0.1, 1).positions,
                              sample_path(sym, [0.0], 1.0, 0.1, 2).positions)


def test_single_increment_shape():
    assert sample_increment(LevySymbol.brownian(3), 1.0, np.random.default_rng(0)).shape == (3,)


def test_exit_time_on_grid():
    pos = np.array([[0.0], [0.5], [0.9], [1.0], [1.2], [0.1]])
    p = PathSample(0.1, pos)
    assert exit_time_on_grid(p, Ball(1.0)) == (4, pytest.approx(0.4))
    assert exit_time_on_grid(p, Box(0.95)) == (3, pytest.approx(0.3))
    assert exit_time_on_grid(p, Ball(2.0)) is None
    assert exit_time_on_grid(p, Ball(0.5, center=[1.0])) == (0, 0.0)


def test_path_bin_round_trip(tmp_path):
    p = sample_path(LevySymbol.brownian(2), [1.0, 2.0], 0.5, 0.1, 0)
    p.to_bin(tmp_path / "p.bin")
    q = PathSample.from_bin(tmp_path / "p.bin")
    assert np.array_equal(p.positions, q.positions) and q.dt == p.dt


def test_step_cap():
    with pytest.raises(SizeError):
        sample_path(LevySymbol.brownian(1), [0.0], 1.0, 1e-9, 0)


def test_rejection_cap_without_substeps():
    sym = LevySymbol.relativistic(1, 1.0, 50.0)
    cfg = SamplerConfig(rejection_cap=5, max_tilt_dt=None)
    with pytest.raises(RejectionCapError):
        IncrementSampler(sym, 1.0, cfg).draw(np.random.default_rng(0), 1000)


def test_small_jump_warning():
    # eta = 0.2: sigma(eps)/eps = sqrt(eps^{-eta}/(2-eta)) stays small
    with pytest.warns(UserWarning, match="sigma"):
        IncrementSampler(LevySymbol.from_profile(layered_profile(1, 0.2, 3.0)), 1.0)


def test_bad_config():
    with pytest.raises(DomainError):
        SamplerConfig(epsilon=2.0)
    with pytest.raises(DomainError):
        IncrementSampler(LevySymbol.brownian(1), 0.0)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), delta=st.floats(0.3, 1.9))
def test_stable_increments_finite(seed, delta):
    x = sample_increments(LevySymbol.stable(2, delta), 0.3, 500, np.random.default_rng(seed))
    assert np.all(np.isfinite(x))
