"""Gated acceptance checks.

Each ``criterion_k`` returns a :class:`CheckResult` with the measured
numbers; :func:`run_checks` runs a selection and :func:`format_report`
prints one pass/fail line per check.  ``overrides`` lets a caller inject
constants (for example a corrupted eigenvalue) to see the matching check
fail while the others are unaffected.
"""
from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from .environment import (
    BumpProfile,
    PoissonEnvironment,
    eval_potential_bruteforce,
    find_empty_ball,
    packing_centers,
    sample_cloud,
    void_probability,
)
from .feynman_kac import ConstantPotential, _run, estimate_u, quenched_ratio_experiment
from .paths import IncrementSampler, SamplerConfig
from .rates import (
    RATE_TAGS,
    RateMachine,
    TailProfile,
    asymptotic_h_closed_form,
    table1_constants,
    table1_rows,
    table1_theorem_consistency,
)
from .spectral import EigenvalueEstimate, lambda1_bm_closed_form, lambda1_exit_time_mc, lambda1_grid_1d
from .symbols import LevySymbol, eval_psi, layered_profile

__all__ = ["CheckResult", "CRITERIA", "run_checks", "format_report", "default_lambdas",
           "QUENCHED_PIN", "QUENCHED_TIMES"]

# agreement of two estimates: |difference| <= K_SIGMA * combined one-sigma error
K_SIGMA = 2.0


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    measured: dict[str, Any] = field(default_factory=dict)
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} [{self.number}] {self.name}: {self.detail} ({self.seconds:.1f} s)"


def default_lambdas(d: int, alpha: float = 1.0, grid_n: int = 2000,
                    overrides: Mapping[str, float] | None = None) -> dict[str, float]:
    """lambda1 inputs for the seven table rows.

    The polynomial row takes the alpha-stable eigenvalue of B(0,1) (1-d grid
    for d = 1; it must be supplied otherwise).  The remaining rows take the
    Brownian value, i.e. the limiting diffusion normalised to A = Id.
    """
    ov = dict(overrides or {})
    bm = ov.get("lambda1_bm", lambda1_bm_closed_form(d))
    if "lambda1_stable" in ov:
        st = ov["lambda1_stable"]
    elif d == 1:
        st = lambda1_grid_1d(alpha, 1.0, grid_n).value
    else:
        raise KeyError(f"lambda1_stable must be supplied for d = {d}")
    return {"stable": st, "layered": bm, "log_decay": bm, "stretched_exp": bm, "exp": bm,
            "truncated": bm, "brownian": bm}


# ---------------------------------------------------------------------------


def criterion_1(ov: Mapping[str, float]) -> CheckResult:
    rows = table1_rows(1, 1.0, default_lambdas(1))
    want = [RATE_TAGS[0], RATE_TAGS[1], RATE_TAGS[2]] + [RATE_TAGS[3]] * 4
    tags_ok = [r.rate_tag for r in rows] == want and len(rows) == 7
    worst = 0.0
    for d in (1, 2, 3):
        lam = {k: lambda1_bm_closed_form(d) for k in ("stable", "layered", "log_decay", "stretched_exp",
                                                     "exp", "truncated", "brownian")}
        for rho in (0.5, 1.0, 2.0):
            for r in table1_rows(d, rho, lam):
                worst = max(worst, table1_theorem_consistency(r))
    for r in rows:
        worst = max(worst, table1_theorem_consistency(r))
    # the Brownian row against the classical constant (rho omega_d / d)^(2/d) lambda1
    bm = rows[-1]
    classical = 2.0 ** 2 * (math.pi ** 2 / 4)
    bm_rel = abs(bm.C1 - classical) / classical
    ok = tags_ok and worst <= 1e-12 and bm_rel <= 1e-12
    return CheckResult(1, "table1 reproduction", ok,
                       {"tags_ok": tags_ok, "max_consistency_gap": worst, "brownian_row_gap": bm_rel,
                        "rows": [r.as_record() for r in rows]},
                       f"7 rows, tags {'ok' if tags_ok else 'WRONG'}, max rel gap {worst:.2e}, "
                       f"Brownian C1 gap {bm_rel:.2e} (tol 1e-12)")


def criterion_2(ov: Mapping[str, float]) -> CheckResult:
    rng = np.random.default_rng(20240601)
    worst = 0.0
    for _ in range(100):
        kind = rng.choice(["polynomial", "log_decay", "stretched_exp", "hard_exp"])
        d = int(rng.integers(1, 4))
        alpha = float(rng.uniform(0.2, 2.0))
        kappa = float(10 ** rng.uniform(-1, 1))
        t = float(10 ** rng.uniform(-2, 8))
        a, b = float(rng.uniform(0.3, 3.0)), float(rng.uniform(1.1, 3.0))
        prof = {"polynomial": lambda: TailProfile.polynomial(a),
                "log_decay": lambda: TailProfile.log_decay(max(a, 0.5), b, d=d),
                "stretched_exp": lambda: TailProfile.stretched_exp(a, b / 3.0),
                "hard_exp": lambda: TailProfile.hard_exp(a)}[str(kind)]()
        m = RateMachine(alpha, kappa, prof, d)
        worst = max(worst, abs(float(m.f_log(m.log_h(t))) - t) / t)
    res = 0.0
    for prof, d in ((TailProfile.polynomial(2.0), 1), (TailProfile.log_decay(1.0, 2.0, d=2), 2),
                    (TailProfile.stretched_exp(1.0, 0.5), 3), (TailProfile.hard_exp(1.0), 1)):
        m = RateMachine(1.5, 1.0, prof, d)
        for t in np.logspace(-1, 9, 41):
            res = max(res, m.defining_relation_residual(float(t)))
    ok = worst <= 1e-9 and res <= 1e-8
    return CheckResult(2, "rate-machine round trip", ok, {"max_round_trip": worst, "max_residual": res},
                       f"max |f(h(t))-t|/t = {worst:.2e} (tol 1e-9), max residual {res:.2e} (tol 1e-8)")


def criterion_3(ov: Mapping[str, float]) -> CheckResult:
    cases = [
        ("polynomial d=1", RateMachine(2.0, 1.0, TailProfile.polynomial(2.0), 1), 1e-3),
        ("polynomial d=2", RateMachine(1.0, 2.0, TailProfile.polynomial(1.0), 2), 1e-3),
        ("log_decay d=1", RateMachine(2.0, 1.0, TailProfile.log_decay(1.0, 2.0, d=1), 1), 0.02),
        ("stretched_exp d=1", RateMachine(2.0, 1.0, TailProfile.stretched_exp(1.0, 0.5), 1), 0.02),
    ]
    out, parts, ok = {}, [], True
    for name, m, tol in cases:
        rep = asymptotic_h_closed_form(m).validate()
        err = rep["error_at_t_max"]
        out[name] = {"error_at_1e9": err, "tol": tol, "refined": rep.get("refined_error_at_t_max")}
        ok &= err <= tol
        parts.append(f"{name} {err:.2e}{'<=' if err <= tol else '>'}{tol:g}")
    return CheckResult(3, "closed-form asymptotics at t=1e9", ok, out, "; ".join(parts))


def criterion_4(ov: Mapping[str, float]) -> CheckResult:
    closed = ov.get("lambda1_bm", lambda1_bm_closed_form(1))
    exact = closed == math.pi ** 2 / 4
    g2 = lambda1_grid_1d(2.0, 1.0, 2000)
    g1 = lambda1_grid_1d(1.0, 1.0, 2000)
    grid_ok = abs(g2.value / closed - 1) <= 5e-3
    mc2 = lambda1_exit_time_mc(LevySymbol.brownian(1), 1.0, 1e-3, 10 ** 5, 0)
    mc1 = lambda1_exit_time_mc(LevySymbol.stable(1, 1.0), 1.0, 1e-3, 10 ** 5, 0)
    mc_ok = abs(mc2.value / closed - 1) <= 0.1
    agree2 = g2.agrees_with(mc2, K_SIGMA)
    agree1 = g1.agrees_with(mc1, K_SIGMA)
    ok = exact and grid_ok and mc_ok and agree1 and agree2

    def fmt(e: EigenvalueEstimate) -> str:
        return f"{e.value:.4f}+-{e.error:.4f}"

    return CheckResult(
        4, "eigenvalue oracles", ok,
        {"closed_form": closed, "exact": exact, "grid_alpha2": g2.value, "grid_alpha1": g1.value,
         "grid_alpha1_error": g1.error, "mc_alpha2": mc2.value, "mc_alpha2_error": mc2.error,
         "mc_alpha1": mc1.value, "mc_alpha1_error": mc1.error, "k_sigma": K_SIGMA},
        f"pi^2/4 exact {exact}; grid a=2 {g2.value:.6f} ({'ok' if grid_ok else 'off'}); "
        f"a=2 grid vs MC {fmt(g2)} / {fmt(mc2)} {'agree' if agree2 else 'DISAGREE'}; "
        f"a=1 grid vs MC {fmt(g1)} / {fmt(mc1)} {'agree' if agree1 else 'DISAGREE'}")


def _cf_max_error(symbol: LevySymbol, t: float, n: int, seed: int, config=None) -> float:
    d = symbol.dimension
    radii = np.array([0.25, 0.5, 1.0, 2.0, 4.0])
    dirs = np.random.default_rng(99).standard_normal((len(radii), d))
    xis = radii[:, None] * dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    x = IncrementSampler(symbol, t, config).draw(np.random.default_rng(seed), n)
    emp = np.exp(1j * (x @ xis.T)).mean(axis=0)
    return float(np.max(np.abs(emp - np.exp(-t * np.asarray(eval_psi(symbol, xis))))))


def criterion_5(ov: Mapping[str, float]) -> CheckResult:
    n = 10 ** 5
    tol = 4.5 / math.sqrt(n)
    cases = {
        "brownian d=1": LevySymbol.brownian(1),
        "stable 0.7 d=2": LevySymbol.stable(2, 0.7),
        "stable 1.5 d=1": LevySymbol.stable(1, 1.5),
        "relativistic a=1 m=1": LevySymbol.relativistic(1, 1.0, 1.0),
        "layered eta=1 delta=3": LevySymbol.from_profile(layered_profile(1, 1.0, 3.0)),
    }
    errs = {k: _cf_max_error(s, 1.0, n, i + 1, SamplerConfig(epsilon=1e-2)) for i, (k, s) in enumerate(cases.items())}
    ok = all(e <= tol for e in errs.values())
    return CheckResult(5, "sampler characteristic functions", ok, {"errors": errs, "tol": tol},
                       ", ".join(f"{k} {v:.2e}" for k, v in errs.items()) + f" (tol {tol:.2e})")


def criterion_6(ov: Mapping[str, float]) -> CheckResult:
    n = 10 ** 4
    void = {}
    ok_void = True
    for d, rho, s in ((1, 1.0, 1.0), (1, 1.0, 0.5), (2, 1.0, 0.5), (3, 1.0, 0.5)):
        empty = sum(sample_cloud(d, rho, s + 0.1, seed).count_in_ball(np.zeros(d), s) == 0 for seed in range(n))
        p = void_probability(d, rho, s)
        z = (empty / n - p) / math.sqrt(p * (1 - p) / n)
        void[f"d={d} s={s}"] = z
        ok_void &= abs(z) <= 3.0
    exact = True
    for d in (1, 2, 3):
        c = sample_cloud(d, 2.0, 5.0, 100 + d)
        W = BumpProfile.cone(1.5, 0.9)
        xs = np.random.default_rng(d).uniform(-4.1, 4.1, size=(500, d))
        exact &= bool(np.array_equal(PoissonEnvironment(c, W).potential(xs), eval_potential_bruteforce(c, W, xs)))
    reverified = True
    for d, r, a in ((1, 1.0, 0.2), (2, 0.5, 0.1), (3, 0.4, 0.0)):
        for seed in range(5):
            cloud = sample_cloud(d, 1.0, 5.0, seed)
            found = find_empty_ball(cloud, r, a, 0.5)
            first = None
            for cen in packing_centers(d, r, a, 5.0, 0.5):
                if np.all(np.linalg.norm(cloud.points - cen, axis=1) >= r + a):
                    first = cen
                    break
            reverified &= (found is None and first is None) or (
                found is not None and first is not None and np.array_equal(found, first))
    ok = ok_void and exact and reverified
    return CheckResult(6, "environment laws", ok, {"void_z": void, "grid_exact": exact, "empty_ball": reverified},
                       "void z-scores " + ", ".join(f"{k}: {v:+.2f}" for k, v in void.items())
                       + f"; grid==brute {exact}; empty balls re-verified {reverified}")


def criterion_7(ov: Mapping[str, float]) -> CheckResult:
    bm = LevySymbol.brownian(1)
    z = estimate_u(bm, ConstantPotential(1, 0.0), [0.0], 2.0, 0.01, 2000, 1)
    zero_ok = z.u_hat == 1.0 and z.stderr == 0.0
    v, t = 0.7, 2.0
    cst = estimate_u(bm, ConstantPotential(1, v), [0.0], t, 0.01, 2000, 1)
    cst_err = abs(cst.u_hat - math.exp(-v * t)) / math.exp(-v * t)
    cloud = sample_cloud(1, 1.0, 30.0, 3)
    lo = _run(bm, PoissonEnvironment(cloud, BumpProfile.indicator_ball(1.0, 1.0)), [0.0], [3.0], 0.01, 4000, 2,
              None, None)[0]
    hi = _run(bm, PoissonEnvironment(cloud, BumpProfile.indicator_ball(2.0, 1.0)), [0.0], [3.0], 0.01, 4000, 2,
              None, None)[0]
    big = cloud.with_points(np.random.default_rng(5).uniform(-30, 30, size=(20, 1)))
    inc = _run(bm, PoissonEnvironment(big, BumpProfile.indicator_ball(1.0, 1.0)), [0.0], [3.0], 0.01, 4000, 2,
               None, None)[0]
    mono = bool(np.all(hi <= lo) and np.all(inc <= lo))
    env = PoissonEnvironment(cloud, BumpProfile.indicator_ball(1.0, 1.0))
    a = estimate_u(bm, env, [0.0], 5.0, 0.01, 10 ** 4, 2)
    b = estimate_u(bm, env, [0.0], 5.0, 0.005, 10 ** 4, 2)
    halving = abs(a.u_hat - b.u_hat) / math.hypot(a.stderr, b.stderr)
    ok = zero_ok and cst_err <= 1e-12 and mono and halving <= 5.0
    return CheckResult(7, "Feynman-Kac exactness and monotonicity", ok,
                       {"zero_potential": zero_ok, "constant_rel_error": cst_err, "pathwise_monotone": mono,
                        "dt_halving_in_stderr": halving},
                       f"V=0 -> 1 {zero_ok}; const rel err {cst_err:.1e}; pathwise monotone {mono}; "
                       f"dt halving {halving:.2f} stderr (tol 5)")


def criterion_8(ov: Mapping[str, float]) -> CheckResult:
    alpha = 1.0
    Rs = (1.0, 2.0, 4.0)
    grid = [lambda1_grid_1d(alpha, R, 2000) for R in Rs]
    mc = [lambda1_exit_time_mc(LevySymbol.stable(1, alpha), R, 1e-3, 10 ** 5, 8) for R in Rs]
    gs = [e.value * R ** alpha for e, R in zip(grid, Rs)]
    gerr = [e.error * R ** alpha for e, R in zip(grid, Rs)]
    ms = [e.value * R ** alpha for e, R in zip(mc, Rs)]
    merr = [e.error * R ** alpha for e, R in zip(mc, Rs)]
    grid_ok = max(gs) - min(gs) <= K_SIGMA * max(gerr)
    mc_ok = all(abs(ms[i] - ms[j]) <= K_SIGMA * math.hypot(merr[i], merr[j])
                for i in range(3) for j in range(i + 1, 3))
    ok = grid_ok and mc_ok
    return CheckResult(8, "stable scaling lambda1(B_R) R^alpha", ok,
                       {"alpha": alpha, "R": list(Rs), "grid_scaled": gs, "mc_scaled": ms, "mc_scaled_error": merr},
                       "grid " + ", ".join(f"{v:.6f}" for v in gs) + "; MC "
                       + ", ".join(f"{v:.4f}+-{e:.4f}" for v, e in zip(ms, merr)))


# t grid starts above e, where eta(t) = t / (log t)^2 is defined
QUENCHED_TIMES = (3.0, 5.0, 7.5, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0, 50.0)
# pinned after the first computation (regression constants, not asymptotic targets)
QUENCHED_PIN = {
    "ratio": [-2.0281509060923235, -3.8714546813427306, -5.537689306587441, -6.790115664258655,
              -8.579512330815144, -10.039931698435357, -11.246039495656863, -12.282593576593756,
              -14.29084675959237, -15.703763265516887],
    "sha256": "e1a69fa22d73dea5d3673c6b56ad0fea566f3713d3b51829d1d8c98be0511b7f",
}


def quenched_reference(env_seeds=tuple(range(1, 21)), n_paths: int = 10 ** 4, times=QUENCHED_TIMES,
                       seed: int = 0):
    """Brownian d = 1, rho = 1, W = 1 on B(0, 1), dt = 0.02."""
    row = table1_constants("brownian", 1, 1.0, lambda1_bm_closed_form(1))
    return quenched_ratio_experiment(LevySymbol.brownian(1), 1.0, BumpProfile.indicator_ball(1.0, 1.0),
                                     list(times), list(env_seeds), row, 0.02, n_paths, seed)


def criterion_9(ov: Mapping[str, float]) -> CheckResult:
    s = quenched_reference()
    text = s.to_json()
    digest = hashlib.sha256(text.encode()).hexdigest()
    r = s.ratio
    negative = all(x < 0 for x in r)
    k5 = QUENCHED_TIMES.index(5.0)
    decreasing = all(r[i + 1] < r[i] for i in range(k5, len(r) - 1))
    # byte reproducibility: a second run of two environments matches the first run's entries
    again = quenched_reference(env_seeds=(1, 2))
    repro = again.u_hat == s.u_hat[:2]
    pin_ok = True
    if QUENCHED_PIN["ratio"] is not None:
        pin_ok = (digest == QUENCHED_PIN["sha256"]
                  and np.allclose(r, QUENCHED_PIN["ratio"], rtol=1e-12, atol=0))
    ok = negative and decreasing and repro and pin_ok
    return CheckResult(9, "quenched-ratio diagnostic (pinned)", ok,
                       {"ratio": r, "sha256": digest, "negative": negative, "decreasing_after_5": decreasing,
                        "reproducible": repro, "pinned_match": pin_ok, "escaped": max(s.escaped_fraction)},
                       f"ratio {r[0]:.3f} .. {r[-1]:.3f}; negative {negative}; decreasing past t=5 {decreasing}; "
                       f"reproducible {repro}; pinned {pin_ok}")


CRITERIA: dict[int, Callable[[Mapping[str, float]], CheckResult]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9,
}


def run_checks(selected=None, overrides: Mapping[str, float] | None = None) -> list[CheckResult]:
    ov = dict(overrides or {})
    out = []
    for k in (selected or sorted(CRITERIA)):
        t0 = time.perf_counter()
        res = CRITERIA[int(k)](ov)
        res.seconds = time.perf_counter() - t0
        out.append(res)
    return out


def format_report(results: list[CheckResult], timings: bool = True) -> str:
    lines = []
    for r in results:
        line = r.line()
        if not timings:
            line = line.rsplit(" (", 1)[0]
        lines.append(line)
    n_ok = sum(r.passed for r in results)
    lines.append(f"{n_ok}/{len(results)} checks passed")
    return "\n".join(lines) + "\n"
