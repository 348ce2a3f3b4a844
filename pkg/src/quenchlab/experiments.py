"""Named experiment suites driven by :class:`~quenchlab.config.ExperimentConfig`.

Every runner returns an :class:`ExperimentResult`: CSV rows with a fixed
column order, a JSON payload, summary lines and a gate flag.  Nothing in a
result depends on wall-clock time, so identical configs give identical
files.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .acceptance import default_lambdas
from .config import ExperimentConfig
from .environment import (
    PoissonEnvironment,
    find_empty_ball,
    log_m_epsilon_box_size,
    packing_centers,
    sample_cloud,
    void_probability,
)
from .errors import ConfigError, CoverageError, QuenchLabError
from .feynman_kac import box_halfwidth_for, quenched_ratio_experiment
from .paths import IncrementSampler, SamplerConfig
from .rates import (
    RateMachine,
    TailProfile,
    asymptotic_h_closed_form,
    table1_constants,
    table1_rows,
    table1_theorem_consistency,
)
from .spectral import EigenvalueEstimate, lambda1_bm_closed_form, lambda1_exit_time_mc, lambda1_grid_1d
from .symbols import GaussianPart, IsotropicStable, LevySymbol, NoJumps, eval_psi


@dataclass
class ExperimentResult:
    columns: list[str]
    rows: list[dict]
    payload: Any
    summary: list[str]
    passed: bool = True
    gated: bool = True
    extra: dict = field(default_factory=dict)


def _table1(cfg: ExperimentConfig, threads: int) -> ExperimentResult:
    n = cfg.numeric
    d, rho = int(n["d"]), float(n["rho"])
    supplied = dict(n["lambdas"])
    try:
        lam = default_lambdas(d, float(n["alpha"]), int(n["grid_n"]),
                              {k: float(v) for k, v in supplied.items() if k.startswith("lambda1_")})
    except KeyError as exc:
        raise ConfigError(str(exc.args[0]), "numeric.lambdas.lambda1_stable") from exc
    lam.update({k: float(v) for k, v in supplied.items() if not k.startswith("lambda1_")})
    params = {k: dict(v) for k, v in n["params"].items()}
    params.setdefault("polynomial", {}).setdefault("alpha", float(n["alpha"]))
    try:
        rows = table1_rows(d, rho, lam, params)
    except QuenchLabError as exc:
        raise ConfigError(str(exc), "numeric.params") from exc
    gaps = [table1_theorem_consistency(r) for r in rows]
    ok = max(gaps) <= float(n["tol"])
    recs = []
    for r, g in zip(rows, gaps):
        rec = r.as_record()
        rec["theorem_gap"] = g
        recs.append(rec)
    cols = list(recs[0].keys())
    summ = [f"{r['family']:<14} {r['rate']:<24} C1={r['C1']:.10g} C2={r['C2']:.10g}" for r in recs]
    summ.append(f"max theorem-form gap {max(gaps):.3e} (tol {n['tol']:g}): {'PASS' if ok else 'FAIL'}")
    return ExperimentResult(cols, recs, recs, summ, ok)


def _tail_profile(case: dict, where: str) -> TailProfile:
    fam = case.get("family")
    try:
        if fam == "polynomial":
            return TailProfile.polynomial(float(case["p"]))
        if fam == "log_decay":
            return TailProfile.log_decay(float(case["theta"]), float(case["beta"]), c=float(case.get("c", 1.0)),
                                         d=int(case.get("d", 1)))
        if fam == "stretched_exp":
            return TailProfile.stretched_exp(float(case["theta"]), float(case["beta"]), float(case.get("c", 1.0)))
        if fam == "hard_exp":
            return TailProfile.hard_exp(float(case["c"]))
    except KeyError as exc:
        raise ConfigError(f"missing parameter {exc.args[0]!r}", f"{where}.{exc.args[0]}") from exc
    raise ConfigError(f"unknown tail family {fam!r}", f"{where}.family")


def _rates_asymptotics(cfg: ExperimentConfig, threads: int) -> ExperimentResult:
    n = cfg.numeric
    rows, payload, summ, ok = [], [], [], True
    for i, case in enumerate(n["cases"]):
        where = f"numeric.cases[{i}]"
        prof = _tail_profile(case, where)
        try:
            m = RateMachine(float(case.get("alpha", 2.0)), float(case.get("kappa", 1.0)), prof, int(case.get("d", 1)))
            rep = asymptotic_h_closed_form(m).validate(float(n["t_min"]), float(n["t_max"]), int(n["n"]))
        except QuenchLabError as exc:
            raise ConfigError(str(exc), where) from exc
        name = case.get("name", prof.family)
        refined = rep.get("g_refined_ratio", [math.nan] * len(rep["t"]))
        for t, gr, lr, rr in zip(rep["t"], rep["g_ratio"], rep["log_h_ratio"], refined):
            rows.append({"case": name, "t": t, "g_ratio": gr, "log_h_ratio": lr, "g_refined_ratio": rr})
        tol = case.get("tol")
        good = tol is None or rep["error_at_t_max"] <= float(tol)
        ok &= good
        payload.append({"case": name, **{k: v for k, v in case.items() if k != "name"}, **rep})
        summ.append(f"{name}: |g ratio - 1| at t_max = {rep['error_at_t_max']:.3e}"
                    + ("" if tol is None else f" (tol {tol:g}) {'PASS' if good else 'FAIL'}"))
    return ExperimentResult(["case", "t", "g_ratio", "log_h_ratio", "g_refined_ratio"], rows, payload, summ, ok)


def _closed_form_eigen(sym: LevySymbol, R: float) -> EigenvalueEstimate | None:
    g = sym.gaussian
    if isinstance(sym.jump, NoJumps) and g.kind == "isotropic" and g.a > 0:
        return EigenvalueEstimate(g.a * lambda1_bm_closed_form(sym.dimension) / R ** 2, "closed_form", 0.0)
    return None


def _grid_eigen(sym: LevySymbol, R: float, n: int) -> EigenvalueEstimate | None:
    if sym.dimension != 1:
        return None
    g = sym.gaussian
    if isinstance(sym.jump, NoJumps) and g.kind == "isotropic" and g.a > 0:
        e = lambda1_grid_1d(2.0, R, n)
        return EigenvalueEstimate(g.a * e.value, e.method, g.a * e.error, e.metadata)
    if isinstance(sym.jump, IsotropicStable) and g.kind == "none":
        return lambda1_grid_1d(sym.jump.delta, R, n)
    return None


def _eigen(cfg: ExperimentConfig, threads: int) -> ExperimentResult:
    n = cfg.numeric
    sym = cfg.build_symbol()
    R = float(n["radius"])
    methods = list(n["methods"])
    ests: dict[str, EigenvalueEstimate] = {}
    for meth in methods:
        if meth == "closed_form":
            e = _closed_form_eigen(sym, R)
        elif meth == "grid":
            e = _grid_eigen(sym, R, int(n["grid_n"]))
        elif meth == "mc":
            e = lambda1_exit_time_mc(sym, R, float(n["dt"]), int(n["n_paths"]), int(cfg.seed),
                                     n_batches=int(n["n_batches"]))
        else:
            raise ConfigError(f"unknown method {meth!r}", "numeric.methods")
        if e is not None:
            ests[meth] = e
    ok = True
    checks = []
    k = float(n["k_sigma"])
    if "closed_form" in ests and "mc" in ests:
        rel = abs(ests["mc"].value / ests["closed_form"].value - 1)
        good = rel <= float(n["mc_rel_tol"])
        ok &= good
        checks.append(f"MC vs closed form: rel diff {rel:.3e} (tol {n['mc_rel_tol']:g}) {'PASS' if good else 'FAIL'}")
    if "grid" in ests and "mc" in ests:
        good = ests["grid"].agrees_with(ests["mc"], k)
        ok &= good
        checks.append(f"grid vs MC within {k:g} combined sigma: {'PASS' if good else 'FAIL'}")
    rows = [{"method": m, "value": e.value, "error": e.error} for m, e in ests.items()]
    payload = {m: {"value": e.value, "error": e.error, "method": e.method, "metadata": e.metadata}
               for m, e in ests.items()}
    summ = [f"{sym.label}, B(0, {R:g})"] + [f"{m:<12} {e.value:.8g} +- {e.error:.3g}" for m, e in ests.items()]
    return ExperimentResult(["method", "value", "error"], rows, payload, summ + checks, ok)


def _cf_check(cfg: ExperimentConfig, threads: int) -> ExperimentResult:
    n = cfg.numeric
    sym = cfg.build_symbol()
    d, t, N = sym.dimension, float(n["t"]), int(n["n"])
    radii = np.asarray(n["radii"], dtype=float)
    dirs = np.random.default_rng([int(cfg.seed), 1]).standard_normal((len(radii), d))
    xis = radii[:, None] * dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    x = IncrementSampler(sym, t, SamplerConfig(epsilon=float(n["epsilon"]))).draw(
        np.random.default_rng([int(cfg.seed), 0]), N)
    emp = np.exp(1j * (x @ xis.T)).mean(axis=0)
    exact = np.exp(-t * np.asarray(eval_psi(sym, xis), dtype=float))
    err = np.abs(emp - exact)
    tol = float(n["k"]) / math.sqrt(N)
    ok = bool(np.all(err <= tol))
    rows = [{"xi": ";".join(f"{v:.17g}" for v in xi), "emp_re": float(e.real), "emp_im": float(e.imag),
             "exact": float(ex), "abs_err": float(a)} for xi, e, ex, a in zip(xis, emp, exact, err)]
    summ = [f"{sym.label}, t = {t:g}, N = {N}", f"max |CF error| {err.max():.3e} (tol {tol:.3e}): "
            f"{'PASS' if ok else 'FAIL'}"]
    return ExperimentResult(["xi", "emp_re", "emp_im", "exact", "abs_err"], rows,
                            {"rows": rows, "tol": tol}, summ, ok)


def _env_stats(cfg: ExperimentConfig, threads: int) -> ExperimentResult:
    env, n = cfg.environment, cfg.numeric
    d, rho = int(env["d"]), float(env["rho"])
    radii = [float(s) for s in n["radii"]]
    ns = int(n["n_seeds"])
    rmax = max(radii)
    box = rmax + 0.1 if env["box"] == "auto" else float(env["box"])
    if box < rmax:
        raise ConfigError(f"box {box} must contain the largest test ball {rmax}", "environment.box")
    clouds = [sample_cloud(d, rho, box, int(cfg.seed) + i) for i in range(ns)]
    counts = np.array([c.n for c in clouds])
    mean_expected = rho * (2 * box) ** d
    rows, ok = [], True
    for s in radii:
        empty = sum(c.count_in_ball(np.zeros(d), s) == 0 for c in clouds)
        p = void_probability(d, rho, s)
        z = (empty / ns - p) / math.sqrt(p * (1 - p) / ns)
        ok &= abs(z) <= float(n["z_max"])
        rows.append({"s": s, "empirical": empty / ns, "exact": p, "z": z})
    zc = (counts.mean() - mean_expected) / math.sqrt(mean_expected / ns)
    summ = [f"d = {d}, rho = {rho:g}, box = {box:g}, {ns} seeds",
            f"mean count {counts.mean():.4f} vs {mean_expected:.4f} (z = {zc:+.2f})"]
    summ += [f"void s = {r['s']:g}: {r['empirical']:.5f} vs {r['exact']:.5f} (z = {r['z']:+.2f})" for r in rows]
    summ.append(f"all |z| <= {n['z_max']:g}: {'PASS' if ok else 'FAIL'}")
    return ExperimentResult(["s", "empirical", "exact", "z"], rows,
                            {"void": rows, "mean_count": float(counts.mean()), "expected_count": mean_expected,
                             "box": box}, summ, ok)


def _quenched_ratio(cfg: ExperimentConfig, threads: int) -> ExperimentResult:
    n, env = cfg.numeric, cfg.environment
    sym = cfg.build_symbol()
    W = cfg.build_W()
    d = sym.dimension
    if int(env["d"]) != d:
        raise ConfigError(f"environment dimension {env['d']} differs from the symbol's {d}", "environment.d")
    rowcfg = dict(n["row"])
    fam = rowcfg.pop("family", "brownian")
    lam = float(rowcfg.pop("lambda1", lambda1_bm_closed_form(d)))
    try:
        row = table1_constants(fam, d, float(env["rho"]), lam, **{k: float(v) for k, v in rowcfg.items()})
    except (QuenchLabError, KeyError) as exc:
        raise ConfigError(str(exc), "numeric.row") from exc
    times = [float(t) for t in n["times"]]
    if env["box"] == "auto":
        box = box_halfwidth_for(sym, np.zeros(d), times[-1], W.a, float(n["box_c"]), int(cfg.seed))
    else:
        box = float(env["box"])
        if box <= W.a:
            raise ConfigError("box does not cover the start point", "environment.box")
    seeds = [int(cfg.seed) + 1 + i for i in range(int(n["n_env"]))]
    try:
        s = quenched_ratio_experiment(sym, float(env["rho"]), W, times, seeds, row, float(n["dt"]),
                                      int(n["n_paths"]), int(cfg.seed), box=box, threads=threads)
    except CoverageError as exc:
        raise ConfigError(str(exc), "environment.box") from exc
    rows = s.rows()
    summ = [s.label, f"{sym.label}, rho = {env['rho']:g}, {len(seeds)} environments x {n['n_paths']} paths, "
            f"box {box:.6g}", f"table band [-C1, -C2] = [{-row.C1:.6g}, {-row.C2:.6g}] (reference only)"]
    summ += [f"t = {r['t']:<6g} ratio {r['ratio']:.6f}" for r in rows]
    esc = max(s.escaped_fraction)
    summ.append(f"max escaped fraction {esc:.4f}")
    import json
    return ExperimentResult(["t", "u_hat", "stderr", "eta", "ratio", "C1", "C2"], rows, json.loads(s.to_json()),
                            summ, True, gated=False, extra={"box": box, "env_seeds": seeds})


def _empty_ball(cfg: ExperimentConfig, threads: int) -> ExperimentResult:
    env, n = cfg.environment, cfg.numeric
    W = cfg.build_W()
    d, rho = int(env["d"]), float(env["rho"])
    r, r_in, eps = float(n["r"]), float(n["r_in"]), float(n["epsilon"])
    lm = log_m_epsilon_box_size(eps, r, d, rho)
    if env["box"] == "auto":
        if lm > math.log(50.0):
            raise ConfigError(f"auto box M^eps(r) = exp({lm:.3g}) is too large; give environment.box", "environment.box")
        box = max(math.exp(lm), 2.0 * (r + W.a) + r_in)
    else:
        box = float(env["box"])
    cloud = sample_cloud(d, rho, box, int(cfg.seed))
    found = find_empty_ball(cloud, r, W.a, r_in)
    # exhaustive re-verification in packing order
    first = None
    for c in packing_centers(d, r, W.a, box, r_in):
        if np.all(np.linalg.norm(cloud.points - c, axis=1) >= r + W.a):
            first = c
            break
    ok = (found is None and first is None) or (found is not None and first is not None
                                               and bool(np.array_equal(found, first)))
    center = None if found is None else [float(v) for v in found]
    row = {"r": r, "a": W.a, "r_in": r_in, "box": box, "n_points": cloud.n,
           "found": found is not None, "center": "" if center is None else ";".join(f"{v:.17g}" for v in center),
           "log_M_eps": lm}
    summ = [f"d = {d}, rho = {rho:g}, box = {box:.6g}, {cloud.n} points",
            f"empty ball of radius r + a = {r + W.a:g}: " + ("none" if center is None else f"at {center}"),
            f"log M^eps(r) = {lm:.6g}", f"exhaustive re-verification: {'PASS' if ok else 'FAIL'}"]
    return ExperimentResult(list(row), [row], {**row, "center": center}, summ, ok)


RUNNERS: dict[str, Callable[[ExperimentConfig, int], ExperimentResult]] = {
    "table1": _table1,
    "rates-asymptotics": _rates_asymptotics,
    "eigen": _eigen,
    "cf-check": _cf_check,
    "env-stats": _env_stats,
    "quenched-ratio": _quenched_ratio,
    "empty-ball": _empty_ball,
}


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    return RUNNERS[cfg.experiment](cfg, threads)
