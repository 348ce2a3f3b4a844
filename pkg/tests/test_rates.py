import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq, minimize_scalar
from scipy.special import jn_zeros

from quenchlab.errors import DomainError, RangeError
from quenchlab.geometry import unit_ball_volume
from quenchlab.rates import (
    RATE_TAGS,
    RateMachine,
    TailProfile,
    annealed_constant,
    asymptotic_h_closed_form,
    eta_closed_form,
    f_value,
    g_value,
    h_value,
    relativistic_limit_constant,
    table1_constants,
    table1_rows,
    table1_theorem_consistency,
    table1_to_csv,
    table1_to_json,
    theorem_constants,
)
from quenchlab.symbols import LevySymbol, check_condition_C

LAMBDA_BM = {1: math.pi ** 2 / 4, 2: float(jn_zeros(0, 1)[0]) ** 2, 3: math.pi ** 2}


def poly_machine(p=2.0, alpha=2.0, d=1, kappa=1.0):
    return RateMachine(alpha, kappa, TailProfile.polynomial(p), d)


def f_oracle(profile_kind, params, alpha, kappa, d, r):
    """Direct evaluation in r, written independently of the log-space code."""
    if profile_kind == "polynomial":
        nlf = params["p"] * math.log(r)
    elif profile_kind == "stretched_exp":
        nlf = params["theta"] * (params.get("c", 1.0) * (r - 1.0)) ** min(params["beta"], 1.0)
    elif profile_kind == "hard_exp":
        nlf = params["c"] * r
    else:
        L = math.log(r)
        nlf = params["theta"] * L ** params["beta"] - d * L + (params["beta"] - 1) * math.log(L)
    term = min(r, max(nlf, 0.0))
    return (term + 0.5 * d * math.log(r)) * (d * math.log(r) / kappa) ** (alpha / d)


# ------------------------------------------------------------------ f


def test_f_vanishes_at_one():
    for prof in (TailProfile.polynomial(1.3), TailProfile.stretched_exp(1, 0.5),
                 TailProfile.hard_exp(2.0), TailProfile.log_decay(1.0, 2.0)):
        assert RateMachine(1.0, 1.0, prof, 1).f(1.0) == 0.0


def test_f_polynomial_at_e():
    assert f_value(poly_machine(), math.e) == pytest.approx(2.5, rel=1e-14)


def test_f_stretched_exp_example():
    m = RateMachine(2.0, 1.0, TailProfile.stretched_exp(1.0, 0.5), 2)
    expected = (math.sqrt(math.e ** 4 - 1.0) + 4.0) * 8.0
    assert expected == pytest.approx(90.5686059431, rel=1e-10)
    assert m.f(math.e ** 4) == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("kind,params", [
    ("polynomial", {"p": 0.7}),
    ("stretched_exp", {"theta": 2.0, "beta": 0.3, "c": 1.5}),
    ("hard_exp", {"c": 0.4}),
    ("log_decay", {"theta": 1.0, "beta": 2.0}),
])
def test_f_matches_direct_evaluation(kind, params):
    prof = {"polynomial": lambda: TailProfile.polynomial(params["p"]),
            "stretched_exp": lambda: TailProfile.stretched_exp(**params),
            "hard_exp": lambda: TailProfile.hard_exp(params["c"]),
            "log_decay": lambda: TailProfile.log_decay(params["theta"], params["beta"], d=1)}[kind]()
    m = RateMachine(1.5, 0.8, prof, 1)
    for r in (1.0001, 1.5, math.e, 10.0, 1e3, 1e8):
        assert m.f(r) == pytest.approx(f_oracle(kind, params, 1.5, 0.8, 1, r), rel=1e-12, abs=1e-300)


def test_f_domain_error():
    with pytest.raises(DomainError):
        poly_machine().f(0.5)


def test_f_strictly_increasing_on_grid():
    for prof in (TailProfile.polynomial(0.5), TailProfile.stretched_exp(1, 0.5),
                 TailProfile.log_decay(0.5, 1.5), TailProfile.hard_exp(3.0)):
        m = RateMachine(1.0, 2.0, prof, 1)
        vals = m.f_log(np.linspace(1e-6, 300, 5000))
        assert np.all(np.diff(vals) > 0)


def test_invalid_profiles_and_machines():
    with pytest.raises(DomainError):
        TailProfile.log_decay(1.0, 1.0)
    with pytest.raises(DomainError):
        TailProfile("gaussian", {})
    with pytest.raises(DomainError):
        RateMachine(2.5, 1.0, TailProfile.polynomial(1), 1)
    with pytest.raises(DomainError):
        RateMachine(1.0, 1.0, TailProfile.log_decay(1, 2, d=1), 2)


# ------------------------------------------------------------------ tail profiles


def test_log_decay_wedge_vanishes_where_F_exceeds_one():
    prof = TailProfile.log_decay(1.0, 2.0, d=1)
    s = np.linspace(1e-3, 0.5, 50)
    assert np.all(prof.neg_log_F_s(s) < 0)
    assert np.all(prof.abs_log_wedge_s(s) == 0)


def test_tail_profiles_decay_and_r_star():
    for prof in (TailProfile.polynomial(0.5), TailProfile.stretched_exp(1, 0.5),
                 TailProfile.log_decay(1.0, 2.0), TailProfile.hard_exp(1.0)):
        rs = prof.r_star()
        r = rs * np.logspace(0, 6, 200)
        F = prof.F(r)
        assert np.all(np.diff(F) <= 1e-15)
        assert F[-1] < 1e-2


@settings(max_examples=40, deadline=None)
@given(theta=st.floats(0.5, 3.0), beta=st.floats(1.05, 3.0), d=st.integers(1, 3))
def test_log_decay_wedge_monotone(theta, beta, d):
    prof = TailProfile.log_decay(theta, beta, d=d)
    s = np.linspace(math.log(prof.r_star()), 60, 3000)
    a = prof.abs_log_wedge_s(s)
    assert np.all(np.diff(a) >= -1e-12 * np.maximum(1, a[1:]))


# ------------------------------------------------------------------ h and g


def test_h_at_zero():
    assert h_value(poly_machine(), 0.0) == 1.0


def test_h_polynomial_closed_form():
    m = poly_machine()
    assert m.h(2.5) == pytest.approx(math.e, rel=1e-12)
    for t in (1.0, 40.0, 1e3):
        assert m.h(t) == pytest.approx(math.exp((t / 2.5) ** (1 / 3)), rel=1e-10)


@pytest.mark.parametrize("t", [1.0, 10.0, 1e3, 1e6])
def test_round_trip(t):
    for m in (poly_machine(), RateMachine(1.2, 0.5, TailProfile.stretched_exp(1, 0.4), 2),
              RateMachine(0.8, 3.0, TailProfile.log_decay(1.0, 1.5, d=3), 3)):
        assert float(m.f_log(m.log_h(t))) == pytest.approx(t, rel=1e-9)
        if m.log_h(t) < 700:
            assert m.f(m.h(t)) == pytest.approx(t, rel=1e-9)


def test_h_agrees_with_brentq():
    m = RateMachine(1.3, 0.7, TailProfile.stretched_exp(2.0, 0.6), 2)
    for t in (3.0, 500.0, 1e5):
        s = brentq(lambda x: f_oracle("stretched_exp", {"theta": 2.0, "beta": 0.6}, 1.3, 0.7, 2,
                                      math.exp(x)) - t, 1e-12, 60, xtol=1e-15, rtol=1e-15)
        assert m.log_h(t) == pytest.approx(s, rel=1e-10)


def test_h_overflow_raises_but_log_h_works():
    m = poly_machine()
    with pytest.raises(RangeError):
        m.h(1e12)
    assert m.log_h(1e12) == pytest.approx((1e12 / 2.5) ** (1 / 3), rel=1e-12)


def test_h_increasing_and_g_relation():
    m = RateMachine(1.0, 1.0, TailProfile.hard_exp(1.0), 1)
    ts = np.logspace(-2, 9, 60)
    s = np.array([m.log_h(t) for t in ts])
    assert np.all(np.diff(s) > 0)
    gs = np.array([g_value(m, t) for t in ts])
    np.testing.assert_allclose(gs * s ** (m.alpha / m.d) / ts, 1.0, rtol=1e-14)


def test_g_needs_positive_t():
    with pytest.raises(DomainError):
        poly_machine().g(0.0)


def test_g_polynomial_limits():
    m = poly_machine()
    t = 1e9
    assert m.g(t) / (2.5 ** (2 / 3) * t ** (1 / 3)) == pytest.approx(1.0, rel=1e-10)
    for alpha, d, kappa in ((1.0, 1, 1.0), (1.5, 2, 0.3), (0.5, 3, 4.0)):
        m = RateMachine(alpha, kappa, TailProfile.polynomial(alpha), d)
        ratio = m.log_h(t) / m.g(t)
        assert ratio == pytest.approx((kappa / d) ** (alpha / d) * 2 / (2 * alpha + d), rel=1e-9)


def test_defining_relation_on_grid():
    for m in (poly_machine(0.5, 1.0, 2, 1.5), RateMachine(2.0, 1.0, TailProfile.log_decay(1, 2, d=1), 1),
              RateMachine(2.0, 1.0, TailProfile.stretched_exp(1, 0.5), 1)):
        for t in np.logspace(0, 9, 19):
            assert m.defining_relation_residual(t) <= 1e-8


@settings(max_examples=100, deadline=None)
@given(kind=st.sampled_from(["polynomial", "log_decay", "stretched_exp", "hard_exp"]),
       alpha=st.floats(0.1, 2.0), kappa=st.floats(0.05, 20.0), d=st.integers(1, 3),
       logt=st.floats(-3.0, 12.0), a=st.floats(0.1, 3.0), b=st.floats(1.05, 3.0))
def test_inverse_property(kind, alpha, kappa, d, logt, a, b):
    prof = {"polynomial": lambda: TailProfile.polynomial(a),
            "log_decay": lambda: TailProfile.log_decay(max(a, 0.5), b, d=d),
            "stretched_exp": lambda: TailProfile.stretched_exp(a, b / 3.0),
            "hard_exp": lambda: TailProfile.hard_exp(a)}[kind]()
    m = RateMachine(alpha, kappa, prof, d)
    t = 10.0 ** logt
    assert abs(float(m.f_log(m.log_h(t))) - t) / t <= 1e-9


# ------------------------------------------------------------------ closed-form asymptotics


def test_polynomial_closed_form_matches():
    for alpha, d, kappa in ((2.0, 1, 1.0), (1.0, 2, 2.0)):
        m = RateMachine(alpha, kappa, TailProfile.polynomial(alpha), d)
        form = asymptotic_h_closed_form(m)
        t = 1e9
        e = d / (d + alpha)
        proof_form = (kappa / d) ** (alpha / (d + alpha)) * (2 / (2 * alpha + d)) ** e * t ** e
        assert form.log_h(t) == pytest.approx(proof_form, rel=1e-12)
        assert form.validate()["error_at_t_max"] < 1e-3


def test_log_decay_closed_form_within_two_percent():
    m = RateMachine(2.0, 1.0, TailProfile.log_decay(1.0, 2.0, d=1), 1)
    rep = asymptotic_h_closed_form(m).validate()
    assert rep["error_at_t_max"] < 0.02
    t = 1e9
    target = t ** 0.5 / (1.0 * 1.0) ** (2 / 4)
    assert m.g(t) / target == pytest.approx(1.0, rel=0.02)


def test_stretched_exp_closed_form_converges_slowly():
    # the leading form has a log log t / log t correction; only the trend is checked here
    m = RateMachine(2.0, 1.0, TailProfile.stretched_exp(1.0, 0.5), 1)
    form = asymptotic_h_closed_form(m)
    r = form.ratios([1e4, 1e9, 1e30, 1e100, 1e300])["g"]
    assert np.all(np.diff(np.abs(r - 1)) < 0)
    assert abs(r[-1] - 1) < 0.2
    rep = form.validate()
    assert rep["refined_error_at_t_max"] < rep["error_at_t_max"]


def test_closed_form_rejects_nothing_in_catalog():
    for prof in (TailProfile.polynomial(1), TailProfile.log_decay(1, 2), TailProfile.stretched_exp(1, 2),
                 TailProfile.hard_exp(1)):
        assert asymptotic_h_closed_form(RateMachine(1.0, 1.0, prof, 1)).description


# ------------------------------------------------------------------ eta


def _row(family, d=1, **kw):
    return table1_constants(family, d, 1.0, 1.0, **kw)


def test_eta_examples():
    assert eta_closed_form(_row("polynomial", alpha=1.0), 16.0) == pytest.approx(4.0, rel=1e-15)
    assert eta_closed_form(_row("stretched_exp", d=2, beta=0.5), math.e ** 2) == pytest.approx(
        math.e ** 2 / 2, rel=1e-15)
    assert eta_closed_form(_row("log_decay", theta=1.0, beta=2.0), 1024.0) == pytest.approx(32.0, rel=1e-15)
    assert eta_closed_form(_row("layered", d=2, delta=3.0), 256.0) == pytest.approx(16.0, rel=1e-15)
    with pytest.raises(DomainError):
        eta_closed_form(_row("brownian"), 2.0)


def test_rate_exponent_decreases_in_alpha():
    ex = [d / (d + a) for d in (1, 2, 3) for a in (0.5, 1.0, 1.5, 2.0)]
    for d in (1, 2, 3):
        vals = [d / (d + a) for a in np.linspace(0.1, 2, 20)]
        assert np.all(np.diff(vals) < 0)
    assert ex


# ------------------------------------------------------------------ table constants


@pytest.mark.parametrize("d", [1, 2, 3])
def test_all_rows_consistent_with_theorems(d):
    rows = table1_rows(d, 1.7, {k: 2.3 for k in
                                ("stable", "layered", "log_decay", "stretched_exp", "exp", "truncated", "brownian")})
    assert [r.rate_tag for r in rows] == [RATE_TAGS[0], RATE_TAGS[1], RATE_TAGS[2]] + [RATE_TAGS[3]] * 4
    assert [r.has_limit for r in rows] == [False] * 3 + [True] * 4
    for r in rows:
        assert r.C1 >= r.C2 > 0
        assert r.has_limit == (r.C1 == r.C2)
        assert table1_theorem_consistency(r) <= 1e-12


def test_log_decay_ratio_two():
    r = table1_constants("log_decay", 2, 0.3, 5.0, theta=1.5, beta=2.5)
    assert r.C1 / r.C2 == 2.0


def test_exp_row_value():
    for d in (1, 2, 3):
        r = table1_constants("stretched_exp", d, 2.0, 3.0, beta=1.5)
        assert r.family == "exp"
        assert r.C1 == r.C2 == pytest.approx((2.0 * unit_ball_volume(d) / d) ** (2 / d) * 3.0, rel=1e-14)


def test_stretched_row_uses_beta():
    r = table1_constants("stretched_exp", 1, 1.0, 1.0, beta=0.5)
    assert r.C2 == pytest.approx((0.5 * 2.0) ** 2, rel=1e-14)


def test_polynomial_row_against_machine():
    # C2 equals alpha * log h(t) / t^(d/(d+alpha)) for F = r^-alpha and kappa = kappa0
    for alpha, d in ((1.0, 1), (0.6, 2), (1.7, 3)):
        rho, lam = 1.3, 2.1
        row = table1_constants("polynomial", d, rho, lam, alpha=alpha)
        lam_a = unit_ball_volume(d) ** (alpha / d) * lam
        kappa0 = rho * lam_a ** (d / alpha)
        m = RateMachine(alpha, kappa0, TailProfile.polynomial(alpha), d)
        t = 1e12
        assert alpha * m.log_h(t) / t ** (d / (d + alpha)) == pytest.approx(row.C2, rel=1e-9)


@pytest.mark.parametrize("family,key", [("polynomial", "alpha"), ("layered", "delta")])
def test_optimized_lower_constant(family, key):
    for d in (1, 2, 3):
        a = 1.2 if family == "polynomial" else 3.5
        rho, lam = 0.8, 1.9
        row = table1_constants(family, d, rho, lam, **{key: a})
        idx = a if family == "polynomial" else 2.0
        wd = unit_ball_volume(d)
        L = lam * (wd * rho / d) ** (idx / d)
        E = lambda x: (L + (a + 4 * d) * x) / x ** (idx / (d + idx))
        res = minimize_scalar(lambda y: E(math.exp(y)), bounds=(-20, 20), method="bounded",
                              options={"xatol": 1e-12})
        assert row.C1_optimized == pytest.approx(res.fun, rel=1e-9)
        assert row.C1_optimized <= row.C1


def test_unsupported_family():
    with pytest.raises(DomainError):
        table1_constants("gamma", 1, 1.0, 1.0)
    with pytest.raises(DomainError):
        table1_constants("layered", 1, 1.0, 1.0, delta=1.5)


def test_theorem_constants_brownian():
    r = table1_constants("brownian", 1, 1.0, LAMBDA_BM[1])
    assert theorem_constants(r) == (r.C1, r.C2)
    assert r.C1 == pytest.approx(math.pi ** 2, rel=1e-14)


def test_table_serialization(tmp_path):
    rows = table1_rows(1, 1.0, {k: 1.0 for k in
                                ("stable", "layered", "log_decay", "stretched_exp", "exp", "truncated", "brownian")})
    table1_to_csv(rows, tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0].startswith("family,params,d,rho,lambda1,rate,C1,C2,has_limit")
    assert len(lines) == 8
    data = json.loads(table1_to_json(rows, tmp_path / "t.json"))
    assert [d["family"] for d in data] == ["polynomial", "layered", "log_decay", "stretched_exp", "exp",
                                           "truncated", "brownian"]
    assert float(lines[1].split(",")[6]) == rows[0].C1


# ------------------------------------------------------------------ relativistic and annealed


def test_relativistic_constant_value():
    assert relativistic_limit_constant(1, 1.0, 1.0, 1.0, LAMBDA_BM[1]) == pytest.approx(
        math.pi ** 2 / 2, rel=1e-14)


def test_relativistic_constant_m_scaling():
    for alpha in (0.5, 1.0, 1.5):
        a = relativistic_limit_constant(2, alpha, 1.0, 1.0, LAMBDA_BM[2])
        b = relativistic_limit_constant(2, alpha, 2.0, 1.0, LAMBDA_BM[2])
        assert b / a == pytest.approx(2.0 ** (1 - 2 / alpha), rel=1e-14)


def test_relativistic_constant_tends_to_brownian_row():
    for d in (1, 2, 3):
        bm = table1_constants("brownian", d, 1.0, LAMBDA_BM[d]).C1
        assert relativistic_limit_constant(d, 2 - 1e-9, 3.0, 1.0, LAMBDA_BM[d]) == pytest.approx(bm, rel=1e-8)


@pytest.mark.parametrize("alpha,m", [(1.0, 1.0), (0.6, 2.0)])
def test_relativistic_constant_via_small_xi_coefficient(alpha, m):
    # the relativistic symbol is c|xi|^2 + o(|xi|^2); its quenched constant is c times the Brownian one
    c = check_condition_C(LevySymbol.relativistic(1, alpha, m))
    assert c.alpha == 2.0
    bm = table1_constants("brownian", 1, 1.0, LAMBDA_BM[1]).C1
    assert relativistic_limit_constant(1, alpha, m, 1.0, LAMBDA_BM[1]) == pytest.approx(
        c.coefficient * bm, rel=1e-10)


def test_annealed_rho_scaling():
    a = annealed_constant(2, 1.2, 1.0, 3.0)
    b = annealed_constant(2, 1.2, 5.0, 3.0)
    assert b / a == pytest.approx(5.0 ** (1.2 / 3.2), rel=1e-14)


def test_annealed_brownian_value_frozen():
    lam2 = unit_ball_volume(1) ** 2 * LAMBDA_BM[1]
    val = annealed_constant(1, 2.0, 1.0, lam2)
    assert val == pytest.approx(2 ** (2 / 3) * 1.5 * (2 * math.pi ** 2) ** (1 / 3), rel=1e-14)
    assert val == pytest.approx(6.4350881913, rel=1e-10)
