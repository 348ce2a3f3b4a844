"""Rate functions f, h, g and the quenched/annealed constants.

For a tail profile F, a stable index alpha in (0, 2], kappa > 0 and the
dimension d,

    f(r) = ((r ^ |log(1 ^ F(r))|) + (d/2) log r) (d log r / kappa)^(alpha/d),

h is the inverse of f on [1, inf) and g(t) = t / (log h(t))^(alpha/d).
Everything is evaluated in s = log r, so h(t) may be astronomically large
while log h(t) stays representable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DomainError, RangeError
from .geometry import unit_ball_volume

__all__ = [
    "TailProfile",
    "RateMachine",
    "Table1Row",
    "AsymptoticForm",
    "RATE_TAGS",
    "f_value",
    "h_value",
    "g_value",
    "table1_to_csv",
    "table1_to_json",
    "eta_closed_form",
    "rate_exponent",
    "table1_constants",
    "table1_rows",
    "theorem_constants",
    "table1_theorem_consistency",
    "relativistic_limit_constant",
    "asymptotic_h_closed_form",
    "annealed_constant",
]

_LOG_MAX = math.log(np.finfo(float).max)


def _log_expm1(s):
    """log(e^s - 1) for s > 0 without overflow."""
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        small = np.log(np.expm1(np.minimum(s, 30.0)))
        big = s + np.log1p(-np.exp(-np.maximum(s, 30.0)))
    return np.where(s < 30.0, small, big)


# ---------------------------------------------------------------------------
# tail profiles


@dataclass(frozen=True)
class TailProfile:
    """Dominating tail profile F(r) on [1, inf), stored through -log F.

    polynomial      F = r^{-p}
    log_decay       F = exp(-theta L^beta) r^d L^{-(beta-1)},  L = log(c r)
                    (the last two factors only when ``correction`` is set)
    stretched_exp   F = exp(-theta (c (r - 1))^{beta ^ 1})
    hard_exp        F = exp(-c r)
    """

    family: str
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        p = self.params
        fam = self.family
        if fam == "polynomial":
            ok = p.get("p", 0) > 0
        elif fam == "log_decay":
            ok = p.get("theta", 0) > 0 and p.get("beta", 0) > 1 and p.get("c", 1.0) > 0
        elif fam == "stretched_exp":
            ok = p.get("theta", 0) > 0 and p.get("beta", 0) > 0 and p.get("c", 1.0) > 0
        elif fam == "hard_exp":
            ok = p.get("c", 0) > 0
        else:
            raise DomainError(f"unknown tail profile family {fam!r}")
        if not ok:
            raise DomainError(f"invalid parameters for {fam} tail profile: {dict(p)}")

    # constructors
    @classmethod
    def polynomial(cls, p: float) -> "TailProfile":
        return cls("polynomial", {"p": float(p)})

    @classmethod
    def log_decay(cls, theta: float, beta: float, c: float = 1.0, d: int = 1,
                  correction: bool = True) -> "TailProfile":
        return cls("log_decay", {"theta": float(theta), "beta": float(beta), "c": float(c),
                                 "d": int(d), "correction": bool(correction)})

    @classmethod
    def stretched_exp(cls, theta: float, beta: float, c: float = 1.0) -> "TailProfile":
        return cls("stretched_exp", {"theta": float(theta), "beta": float(beta), "c": float(c)})

    @classmethod
    def hard_exp(cls, c: float) -> "TailProfile":
        return cls("hard_exp", {"c": float(c)})

    @property
    def label(self) -> str:
        return f"{self.family}(" + ", ".join(f"{k}={v}" for k, v in self.params.items()) + ")"

    # evaluation in s = log r
    def neg_log_F_s(self, s) -> np.ndarray:
        """-log F(e^s); may be negative where F > 1."""
        s = np.asarray(s, dtype=float)
        p = self.params
        fam = self.family
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if fam == "polynomial":
                return p["p"] * s
            if fam == "log_decay":
                L = math.log(p["c"]) + s
                Lp = np.maximum(L, 0.0)
                out = p["theta"] * Lp ** p["beta"]
                if p.get("correction", True):
                    out = out - p["d"] * s + (p["beta"] - 1.0) * np.log(Lp)
                # log(c r) <= 0 means F >= 1 there
                return np.where(L > 0.0, out, -np.inf)
            if fam == "stretched_exp":
                b = min(p["beta"], 1.0)
                logx = math.log(p["c"]) + _log_expm1(s)
                return np.where(s > 0.0, p["theta"] * np.exp(b * logx), 0.0)
            # hard_exp
            return p["c"] * np.exp(np.minimum(s, _LOG_MAX))

    def neg_log_F(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if np.any(r < 1.0):
            raise DomainError("tail profiles live on r >= 1")
        return self.neg_log_F_s(np.log(r))

    def F(self, r) -> np.ndarray:
        """F(r) (may exceed 1 near r = 1 for the corrected log-decay form)."""
        return np.exp(-self.neg_log_F(r))

    def abs_log_wedge_s(self, s) -> np.ndarray:
        """|log(1 ^ F(e^s))|."""
        return np.maximum(self.neg_log_F_s(s), 0.0)

    def r_star(self, s_max: float = 200.0, n: int = 20001) -> float:
        """Smallest r >= 1 beyond which |log(1 ^ F)| is non-decreasing on a fine log grid."""
        s = np.linspace(0.0, s_max, n)
        a = self.abs_log_wedge_s(s)
        bad = np.nonzero(np.diff(a) < -1e-12 * np.maximum(1.0, np.abs(a[1:])))[0]
        if bad.size == 0:
            return 1.0
        return float(math.exp(s[bad[-1] + 1]))


# ---------------------------------------------------------------------------
# the rate machine


@dataclass(frozen=True)
class RateMachine:
    """Bundle (F, alpha, kappa, d) exposing f, h, g."""

    alpha: float
    kappa: float
    profile: TailProfile
    d: int = 1
    rtol: float = 1e-10
    max_iter: int = 200

    def __post_init__(self):
        if not 0.0 < self.alpha <= 2.0:
            raise DomainError("alpha must lie in (0, 2]")
        if not self.kappa > 0.0:
            raise DomainError("kappa must be positive")
        if self.d < 1:
            raise DomainError("dimension must be >= 1")
        pd = self.profile.params.get("d")
        if self.profile.family == "log_decay" and self.profile.params.get("correction") and pd != self.d:
            raise DomainError(f"log_decay correction built for d={pd}, machine has d={self.d}")

    # f ------------------------------------------------------------------
    def f_log(self, s) -> np.ndarray:
        """f(e^s) for s = log r >= 0."""
        s = np.asarray(s, dtype=float)
        if np.any(s < 0.0):
            raise DomainError("f is defined for r >= 1")
        r = np.exp(np.minimum(s, _LOG_MAX))
        A = self.profile.abs_log_wedge_s(s)
        core = np.minimum(r, A) + 0.5 * self.d * s
        with np.errstate(over="ignore"):
            return core * (self.d * s / self.kappa) ** (self.alpha / self.d)

    def f(self, r) -> np.ndarray | float:
        r_arr = np.asarray(r, dtype=float)
        if np.any(r_arr < 1.0):
            raise DomainError("f is defined for r >= 1")
        out = self.f_log(np.log(r_arr))
        return float(out) if out.ndim == 0 else out

    # h ------------------------------------------------------------------
    def log_h(self, t: float) -> float:
        """log h(t), found by bracket doubling and bisection in s = log r."""
        t = float(t)
        if t < 0.0 or not math.isfinite(t):
            raise DomainError("h is defined for finite t >= 0")
        if t == 0.0:
            return 0.0
        lo, hi = 0.0, math.log(2.0)
        it = 0
        while float(self.f_log(hi)) < t:
            lo, hi = hi, 2.0 * hi
            it += 1
            if it > self.max_iter:
                raise RangeError(f"could not bracket h({t:g}) for {self.profile.label}")
        if lo == 0.0:
            # f can be very steep at r = 1; find a positive lower end by
            # squaring the ratio lo/hi so tiny roots are reached quickly
            k = 1.0
            lo = 0.5 * hi
            while float(self.f_log(lo)) >= t:
                hi, k = lo, 2.0 * k
                lo = hi * 2.0 ** (-k)
                if lo == 0.0:
                    return hi
        # geometric bisection while the bracket is wide, then arithmetic;
        # s is resolved six digits beyond rtol (or to machine resolution)
        for _ in range(4 * self.max_iter):
            mid = math.sqrt(lo * hi) if hi > 4.0 * lo else 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if float(self.f_log(mid)) < t:
                lo = mid
            else:
                hi = mid
            if hi - lo <= self.rtol * 1e-6 * hi:
                break
        return hi

    def h(self, t: float) -> float:
        s = self.log_h(t)
        if s > _LOG_MAX:
            raise RangeError(f"h({t:g}) = exp({s:.6g}) overflows; use log_h")
        return math.exp(s)

    # g ------------------------------------------------------------------
    def g(self, t: float) -> float:
        s = self.log_h(t)
        if s == 0.0:
            raise DomainError("g needs h(t) > 1, i.e. t > 0")
        return t / s ** (self.alpha / self.d)

    def defining_relation_residual(self, t: float) -> float:
        """Relative gap between both sides of the implicit equation for h."""
        s = self.log_h(t)
        lhs = t * (self.kappa / (self.d * s)) ** (self.alpha / self.d)
        r = math.exp(min(s, _LOG_MAX))
        rhs = min(r, float(self.profile.abs_log_wedge_s(s))) + 0.5 * self.d * s
        return abs(lhs - rhs) / abs(rhs)


def f_value(machine: RateMachine, r: float) -> float:
    return machine.f(r)


def h_value(machine: RateMachine, t: float) -> float:
    return machine.h(t)


def g_value(machine: RateMachine, t: float) -> float:
    return machine.g(t)


# ---------------------------------------------------------------------------
# rate functions and Table 1

RATE_TAGS = ("t^{d/(d+alpha)}", "t^{d/(d+2)}", "t^{d beta/(d beta+2)}", "t/(log t)^{2/d}")


def rate_exponent(tag: str, d: int, alpha: float | None = None, beta: float | None = None) -> float:
    """Exponent of t in the power-law rate tags."""
    if tag == RATE_TAGS[0]:
        return d / (d + alpha)
    if tag == RATE_TAGS[1]:
        return d / (d + 2.0)
    if tag == RATE_TAGS[2]:
        return d * beta / (d * beta + 2.0)
    raise DomainError(f"{tag} is not a pure power of t")


@dataclass(frozen=True)
class Table1Row:
    """One line of the table of quenched rates and bounds.

    Bounds read -C1 <= liminf log u / eta <= limsup log u / eta <= -C2.
    ``C1_optimized`` is the lower-bound constant with kappa optimised
    (polynomial rows only; NaN elsewhere).
    """

    family: str
    params: Mapping[str, float]
    d: int
    rho: float
    lambda1: float
    rate_tag: str
    C1: float
    C2: float
    has_limit: bool
    C1_optimized: float = math.nan

    def eta(self, t: float) -> float:
        return eta_closed_form(self, t)

    def as_record(self) -> dict:
        return {
            "family": self.family,
            "params": ";".join(f"{k}={v:g}" for k, v in sorted(self.params.items())),
            "d": self.d,
            "rho": self.rho,
            "lambda1": self.lambda1,
            "rate": self.rate_tag,
            "C1": self.C1,
            "C2": self.C2,
            "has_limit": self.has_limit,
            "C1_optimized": self.C1_optimized,
        }


def eta_closed_form(row: Table1Row, t: float) -> float:
    """Rate eta(t) of a table row."""
    if not t > math.e:
        raise DomainError("eta is evaluated for t > e")
    tag, d, p = row.rate_tag, row.d, row.params
    if tag == RATE_TAGS[3]:
        return t / math.log(t) ** (2.0 / d)
    return t ** rate_exponent(tag, d, p.get("alpha"), p.get("beta"))


def _tail_factor(x: float, d: int, rho: float) -> float:
    return (rho * unit_ball_volume(d) / d) ** x


def table1_constants(family: str, d: int, rho: float, lambda1: float,
                     **params: float) -> Table1Row:
    """Constants C1 >= C2 of one table row from the row parameters.

    ``lambda1`` is the principal Dirichlet eigenvalue on B(0,1) of the
    limiting stable process (polynomial row) or diffusion (other rows).
    """
    if d < 1 or not rho > 0 or not lambda1 > 0:
        raise DomainError("need d >= 1, rho > 0, lambda1 > 0")
    w = rho * unit_ball_volume(d) / d
    nan = math.nan
    if family == "polynomial":
        a = params["alpha"]
        if not 0 < a < 2:
            raise DomainError("polynomial row needs alpha in (0,2)")
        e = d / (d + a)
        base = (2.0 / (d + 2.0 * a)) ** e * w ** (a / (d + a)) * lambda1 ** e
        opt = (a + 4 * d) ** (a / (d + a)) * ((d / a) ** (a / (d + a)) + (a / d) ** e)
        return Table1Row(family, {"alpha": a}, d, rho, lambda1, RATE_TAGS[0],
                         (4 * a + 9 * d) / 2.0 * base, a * base, False,
                         opt * w ** (a / (d + a)) * lambda1 ** e)
    if family == "layered":
        a, dl = params.get("alpha", nan), params["delta"]
        if not dl > 2:
            raise DomainError("layered row needs delta > 2")
        e = d / (d + 2.0)
        # exponent d/(d+2) on 2/(d+2 delta), transcribed as printed
        base = (2.0 / (d + 2.0 * dl)) ** e * w ** (2.0 / (d + 2.0)) * lambda1 ** e
        opt = (dl + 4 * d) ** (2.0 / (d + 2)) * ((d / 2.0) ** (2.0 / (d + 2)) + (2.0 / d) ** e)
        return Table1Row(family, {"alpha": a, "delta": dl}, d, rho, lambda1, RATE_TAGS[1],
                         (4 * dl + 9 * d) / 2.0 * base, dl * base, False,
                         opt * w ** (2.0 / (d + 2.0)) * lambda1 ** e)
    if family == "log_decay":
        th, b = params["theta"], params["beta"]
        if not (th > 0 and b > 1):
            raise DomainError("log_decay row needs theta > 0, beta > 1")
        q = 2.0 + d * b
        c2 = th ** (2.0 / q) * w ** (2.0 * b / q) * lambda1 ** (d * b / q)
        return Table1Row(family, {"theta": th, "beta": b, "alpha": params.get("alpha", nan)},
                         d, rho, lambda1, RATE_TAGS[2], 2.0 * c2, c2, False)
    if family in ("stretched_exp", "exp", "truncated", "brownian"):
        if family == "truncated":
            b, kept = math.inf, {"alpha": params.get("alpha", nan)}
        elif family == "brownian":
            b, kept = math.inf, {}
        else:
            b = params["beta"]
            if not b > 0:
                raise DomainError("stretched_exp row needs beta > 0")
            if family == "exp" and b < 1:
                raise DomainError("exp row needs beta >= 1")
            if family == "stretched_exp" and b >= 1:
                family = "exp"
            kept = {"beta": b, "theta": params.get("theta", nan),
                    "alpha": params.get("alpha", nan)}
        c = (min(b, 1.0) * w) ** (2.0 / d) * lambda1
        return Table1Row(family, kept, d, rho, lambda1, RATE_TAGS[3], c, c, True)
    raise DomainError(f"unsupported table family {family!r}")


def table1_rows(d: int, rho: float, lambdas: Mapping[str, float],
                params: Mapping[str, Mapping[str, float]] | None = None) -> list[Table1Row]:
    """All seven rows in table order.

    ``lambdas`` maps row keys to their lambda1 inputs: ``stable`` (for the
    polynomial row), ``layered``, ``log_decay``, ``stretched_exp``, ``exp``,
    ``truncated`` and ``brownian``.
    """
    defaults = {
        "polynomial": {"alpha": 1.0},
        "layered": {"alpha": 1.0, "delta": 3.0},
        "log_decay": {"alpha": 1.0, "theta": 1.0, "beta": 2.0},
        "stretched_exp": {"alpha": 1.0, "theta": 1.0, "beta": 0.5},
        "exp": {"alpha": 1.0, "theta": 1.0, "beta": 1.0},
        "truncated": {"alpha": 1.0},
        "brownian": {},
    }
    params = {k: dict(v) for k, v in defaults.items()} | {k: dict(v) for k, v in (params or {}).items()}
    keys = {"polynomial": "stable"}
    return [table1_constants(fam, d, rho, lambdas[keys.get(fam, fam)], **params[fam])
            for fam in defaults]


_TABLE_COLUMNS = ("family", "params", "d", "rho", "lambda1", "rate", "C1", "C2",
                  "has_limit", "C1_optimized")


def table1_to_csv(rows: Sequence[Table1Row], path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=_TABLE_COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v)
                        for k, v in row.as_record().items()})


def table1_to_json(rows: Sequence[Table1Row], path=None) -> str:
    import json

    def clean(rec):
        return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in rec.items()}

    text = json.dumps([clean(r.as_record()) for r in rows], indent=2)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text


def theorem_constants(row: Table1Row) -> tuple[float, float]:
    """(C1, C2) in the form of the individual theorems.

    Upper bounds there are written with lambda_(alpha), the Faber-Krahn
    infimum, which for isotropic processes equals omega_d^(alpha/d) lambda1.
    """
    d, rho, lam = row.d, row.rho, row.lambda1
    wd = unit_ball_volume(d)
    p = row.params
    if row.family == "polynomial":
        a = p["alpha"]
        lam_a = wd ** (a / d) * lam
        e = d / (d + a)
        c2 = a * (2.0 / (d + 2 * a)) ** e * (rho / d) ** (a / (d + a)) * lam_a ** e
        c1 = (2 * a + 4.5 * d) * (2.0 / (2 * a + d)) ** e * (rho * wd / d) ** (a / (d + a)) * lam ** e
        return c1, c2
    lam_2 = wd ** (2.0 / d) * lam
    if row.family == "layered":
        dl = p["delta"]
        e = d / (d + 2.0)
        c2 = dl * (2.0 / (2 * dl + d)) ** e * (rho / d) ** (2.0 / (d + 2)) * lam_2 ** e
        c1 = (2 * dl + 4.5 * d) * (2.0 / (2 * dl + d)) ** e * (rho * wd / d) ** (2.0 / (d + 2)) * lam ** e
        return c1, c2
    if row.family == "log_decay":
        th, b = p["theta"], p["beta"]
        q = 2.0 + d * b
        c2 = th ** (2 / q) * (rho / d) ** (2 * b / q) * lam_2 ** (d * b / q)
        c1 = 2 * th ** (2 / q) * (wd * rho / d) ** (2 * b / q) * lam ** (d * b / q)
        return c1, c2
    if row.family in ("stretched_exp", "exp", "truncated"):
        bw = min(p.get("beta", math.inf), 1.0)
        c2 = (rho * bw / d) ** (2.0 / d) * lam_2
        c1 = (rho * wd * bw / d) ** (2.0 / d) * lam
        return c1, c2
    if row.family == "brownian":
        c = (rho * wd / d) ** (2.0 / d) * lam
        return c, c
    raise DomainError(f"no theorem form for {row.family!r}")


def table1_theorem_consistency(row: Table1Row) -> float:
    """Largest relative gap between the table constants and the theorem forms."""
    c1, c2 = theorem_constants(row)
    return max(abs(row.C1 - c1) / abs(c1), abs(row.C2 - c2) / abs(c2))


def relativistic_limit_constant(d: int, alpha: float, m: float, rho: float,
                                lambda1_bm: float) -> float:
    """(alpha/2) m^(1-2/alpha) (rho omega_d / d)^(2/d) lambda1_bm.

    The exponent 2/d on (rho omega_d/d) follows the general stretched- or
    exp-tail limit with beta = 1.
    """
    if not 0 < alpha < 2 or not m > 0:
        raise DomainError("relativistic constant needs alpha in (0,2), m > 0")
    coef = 0.5 * alpha * m ** (1.0 - 2.0 / alpha)
    return coef * (rho * unit_ball_volume(d) / d) ** (2.0 / d) * lambda1_bm


def annealed_constant(d: int, alpha: float, rho: float, lambda_alpha: float) -> float:
    """(rho omega_d)^(alpha/(d+alpha)) ((d+alpha)/alpha) (2 lambda_(alpha)/d)^(d/(d+alpha))."""
    e = d / (d + alpha)
    return ((rho * unit_ball_volume(d)) ** (alpha / (d + alpha)) * ((d + alpha) / alpha)
            * (2.0 * lambda_alpha / d) ** e)


# ---------------------------------------------------------------------------
# closed-form asymptotics of h and g


@dataclass(frozen=True)
class AsymptoticForm:
    """Closed-form large-t behaviour of log h and g for one machine.

    ``refined_g`` (when present) keeps the next-order logarithmic terms and
    is reported for diagnosis only.
    """

    machine: RateMachine
    description: str
    log_h: Callable[[float], float]
    g: Callable[[float], float]
    refined_g: Callable[[float], float] | None = None

    def ratios(self, ts: Sequence[float]) -> dict[str, np.ndarray]:
        ts = np.asarray(ts, dtype=float)
        m = self.machine
        num_s = np.array([m.log_h(t) for t in ts])
        num_g = ts / num_s ** (m.alpha / m.d)
        out = {
            "t": ts,
            "log_h": num_s / np.array([self.log_h(t) for t in ts]),
            "g": num_g / np.array([self.g(t) for t in ts]),
        }
        if self.refined_g is not None:
            out["g_refined"] = num_g / np.array([self.refined_g(t) for t in ts])
        return out

    def validate(self, t_min: float = 1e4, t_max: float = 1e9, n: int = 11) -> dict:
        """Deviation |numeric / closed - 1| of g over a log grid of t."""
        ts = np.logspace(math.log10(t_min), math.log10(t_max), n)
        r = self.ratios(ts)
        err = np.abs(r["g"] - 1.0)
        rep = {
            "t": ts.tolist(),
            "g_ratio": r["g"].tolist(),
            "log_h_ratio": r["log_h"].tolist(),
            "max_error": float(err.max()),
            "error_at_t_max": float(err[-1]),
        }
        if "g_refined" in r:
            rep["g_refined_ratio"] = r["g_refined"].tolist()
            rep["refined_error_at_t_max"] = float(abs(r["g_refined"][-1] - 1.0))
        return rep


def asymptotic_h_closed_form(machine: RateMachine) -> AsymptoticForm:
    """Leading-order closed forms of log h(t) and g(t) for catalog profiles."""
    a, k, d = machine.alpha, machine.kappa, machine.d
    prof = machine.profile
    p = prof.params
    q = a / d
    if prof.family == "polynomial":
        # f(r) = (p + d/2) (d/kappa)^(a/d) (log r)^(1 + a/d) once r > p log r
        c = (p["p"] + 0.5 * d) * (d / k) ** q
        e = d / (d + a)
        log_h = lambda t: (t / c) ** e
        g = lambda t: t / log_h(t) ** q
        return AsymptoticForm(machine, "log h = (t / ((p + d/2)(d/kappa)^(a/d)))^(d/(d+a))",
                              log_h, g)
    if prof.family == "log_decay":
        th, b = p["theta"], p["beta"]
        e = d / (d * b + a)
        log_h = lambda t: (t * (k / d) ** q / th) ** e
        g = lambda t: t / log_h(t) ** q
        return AsymptoticForm(
            machine, "log h = (t (kappa/d)^(a/d) / theta)^(d/(d beta + a))", log_h, g)
    if prof.family in ("stretched_exp", "hard_exp"):
        if prof.family == "stretched_exp":
            b, th, cs = min(p["beta"], 1.0), p["theta"], p["c"]
        else:
            b, th, cs = 1.0, p["c"], 1.0
        log_h = lambda t: math.log(t) / b
        g = lambda t: b ** q * t / math.log(t) ** q

        def refined_log_h(t: float) -> float:
            # one fixed-point step of theta (c r)^b (d log r / kappa)^(a/d) = t
            s0 = math.log(t) / b
            return (math.log(t) - q * math.log(d * s0 / k) - math.log(th)) / b - math.log(cs)

        refined_g = lambda t: t / refined_log_h(t) ** q
        return AsymptoticForm(machine, "g ~ (beta ^ 1)^(a/d) t / (log t)^(a/d)",
                              log_h, g, refined_g)
    raise DomainError(f"no closed form for {prof.family}")
