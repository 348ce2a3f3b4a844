"""Symmetric Levy symbols psi(xi) = xi.A xi + int (1 - cos xi.z) nu(dz).

Every jump family in the catalog is isotropic, so the jump part only
depends on |xi|.  Density families are evaluated through the radial
reduction

    psi_nu(rho) = int_0^inf (1 - k_d(rho r)) g(r) sigma_{d-1} r^{d-1} dr,

with k_d(u) the average of cos(u e_1 . theta) over the unit sphere.
Subordinate families (stable, relativistic, geometric stable) use the
subordinator Levy measure mu(ds) to express the Pruitt function as a
one dimensional integral.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import integrate, special, stats

from .errors import ConditionCUndetermined, DomainError, QuadratureError
from .geometry import sphere_area, stable_density_constant

__all__ = [
    "GaussianPart",
    "NoJumps",
    "IsotropicStable",
    "Relativistic",
    "StableMixture",
    "GeometricStable",
    "DensityProfile",
    "RadialLevyDensityProfile",
    "QuadratureConfig",
    "LevySymbol",
    "ConditionC",
    "one_minus_sphere_cos",
    "polynomial_profile",
    "layered_profile",
    "log_decay_profile",
    "tempered_profile",
    "truncated_profile",
    "custom_profile",
    "eval_psi",
    "pruitt_H",
    "symmetrized_psi",
    "check_condition_C",
    "symbol_from_config",
]


# ---------------------------------------------------------------------------
# spherical cosine average


def one_minus_sphere_cos(d: int, u) -> np.ndarray:
    """1 - k_d(u) where k_d(u) = Gamma(d/2) (2/u)^(d/2-1) J_{d/2-1}(u).

    Uses the power series for small u so that the result keeps full
    relative precision as u -> 0.
    """
    u = np.abs(np.asarray(u, dtype=float))
    if d == 1:
        return 2.0 * np.sin(0.5 * u) ** 2
    nu = 0.5 * d - 1.0
    out = np.empty_like(u)
    small = u < 0.5
    if np.any(small):
        x = 0.25 * u[small] ** 2
        term = np.ones_like(x)
        acc = np.zeros_like(x)
        for k in range(1, 14):
            term = term * x / (k * (nu + k))
            acc += term if k % 2 == 1 else -term
        out[small] = acc
    big = ~small
    if np.any(big):
        ub = u[big]
        if d == 3:
            out[big] = 1.0 - np.sin(ub) / ub
        else:
            out[big] = 1.0 - math.gamma(nu + 1.0) * (2.0 / ub) ** nu * special.jv(nu, ub)
    return out


# ---------------------------------------------------------------------------
# quadrature helpers


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances for the radial integrals of density families."""

    epsrel: float = 1e-10
    epsabs: float = 1e-14
    limit: int = 400


def _quad(f, a, b, what: str, cfg: QuadratureConfig, **kw) -> float:
    if b == np.inf and a > 0 and "weight" not in kw:
        # r = a e^x turns algebraic tails into exponential ones, which the
        # infinite-interval rule handles far better
        xmax = math.log(1e150 / a)

        def g(x: float) -> float:
            if x > xmax:
                return 0.0
            r = a * math.exp(x)
            return f(r) * r

        return _quad(g, 0.0, np.inf, what + f" (tail from {a:g})", cfg, **kw)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        res = integrate.quad(
            f, a, b, epsabs=kw.pop("epsabs", cfg.epsabs), epsrel=cfg.epsrel,
            limit=cfg.limit, full_output=1, **kw,
        )
    val, err = res[0], res[1]
    if not np.isfinite(val):
        raise QuadratureError(f"{what}: non-finite value on [{a}, {b}]")
    scale = max(abs(val), cfg.epsabs)
    if err > max(100 * cfg.epsrel * scale, 100 * cfg.epsabs):
        raise QuadratureError(
            f"{what}: quadrature on [{a}, {b}] did not converge "
            f"(value {val:.6g}, error estimate {err:.3g})"
        )
    return float(val)


def _split(a: float, b: float, breaks: Sequence[float]) -> list[float]:
    pts = [a] + sorted(p for p in breaks if a < p < b) + [b]
    return pts


def _quad_pieces(f, a, b, breaks, what, cfg, **kw) -> float:
    pts = _split(a, b, breaks)
    return sum(_quad(f, lo, hi, what, cfg, **kw) for lo, hi in zip(pts[:-1], pts[1:]))


def _chi2_min_moment(d: int, c):
    """phi_d(c) = E[min(1, c X)] with X ~ chi^2_d."""
    c = np.asarray(c, dtype=float)
    with np.errstate(divide="ignore"):
        x = np.where(c > 0, 1.0 / c, np.inf)
    return c * d * stats.chi2.cdf(x, d + 2) + stats.chi2.sf(x, d)


# ---------------------------------------------------------------------------
# radial density profiles


@dataclass(frozen=True, eq=False)
class RadialLevyDensityProfile:
    """Radial Levy density g(|x|) in dimension d.

    ``family`` is one of polynomial, layered, log_decay, tempered,
    truncated or custom.  Catalog families have a single branch point at
    r = 1 and share the scale ``C`` on both branches.
    """

    family: str
    d: int
    params: Mapping[str, float]
    func: Callable | None = None
    breakpoints: tuple[float, ...] = (1.0,)
    second_moment_finite: bool | None = None
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)

    def __hash__(self) -> int:
        return hash((self.family, self.d, tuple(sorted(self.params.items())), id(self.func)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, RadialLevyDensityProfile):
            return NotImplemented
        return (self.family, self.d, dict(self.params), self.func) == (
            other.family, other.d, dict(other.params), other.func)

    # -- pointwise ---------------------------------------------------------
    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        p, d = self.params, self.d
        C = p.get("C", 1.0)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            if self.family == "polynomial":
                out = C * r ** (-d - p["alpha"])
            elif self.family == "layered":
                out = C * np.where(r <= 1.0, r ** (-d - p["eta"]), r ** (-d - p["delta"]))
            elif self.family == "log_decay":
                lr = np.log(np.maximum(r, 1.0))
                out = C * np.where(r <= 1.0, r ** (-d - p["delta"]),
                                   np.exp(-p["theta"] * lr ** p["beta"]))
            elif self.family == "tempered":
                x = np.maximum(r - 1.0, 0.0)
                out = C * np.where(
                    r <= 1.0, r ** (-d - p["delta"]),
                    np.exp(-p["theta"] * x ** p["beta"]) * r ** (-p.get("gamma", 0.0)))
            elif self.family == "truncated":
                out = C * np.where(r <= 1.0, r ** (-d - p["delta"]), 0.0)
            elif self.family == "custom":
                out = np.asarray(self.func(r), dtype=float)
            else:
                raise DomainError(f"unknown profile family {self.family!r}")
        return np.where(r > 0, out, np.inf)

    def radial_density(self, r) -> np.ndarray:
        """Density of |Y| under nu: sigma_{d-1} r^{d-1} g(r)."""
        r = np.asarray(r, dtype=float)
        return sphere_area(self.d) * r ** (self.d - 1) * self(r)

    def _G(self, r: float) -> float:
        return float(self.radial_density(r))

    @property
    def label(self) -> str:
        args = ", ".join(f"{k}={v:g}" for k, v in sorted(self.params.items()))
        return f"{self.family}({args})"

    # -- integrals ---------------------------------------------------------
    def mass_above(self, r0: float) -> float:
        """nu(|y| > r0)."""
        if self.family == "truncated" and r0 >= 1.0:
            return 0.0
        pts = _split(r0, np.inf, self.breakpoints)
        total = 0.0
        for lo, hi in zip(pts[:-1], pts[1:]):
            total += _quad(self._G, lo, hi, f"tail mass of {self.label}", self.quad)
        return total

    def second_moment_below(self, r0: float) -> float:
        """int_{|y| < r0} |y|^2 nu(dy)."""
        f = lambda r: r * r * self._G(r)
        return _quad_pieces(f, 0.0, r0, self.breakpoints,
                            f"truncated second moment of {self.label}", self.quad)

    def second_moment(self) -> float:
        """int |y|^2 nu(dy); inf when it diverges."""
        if not self.has_finite_second_moment():
            return math.inf
        if self.family == "truncated":
            return self.second_moment_below(1.0)
        top = max(self.breakpoints) if self.breakpoints else 1.0
        f = lambda r: r * r * self._G(r)
        return self.second_moment_below(top) + _quad(
            f, top, np.inf, f"second moment of {self.label}", self.quad)

    def has_finite_second_moment(self) -> bool:
        fam, p = self.family, self.params
        if fam == "polynomial":
            return False
        if fam == "layered":
            return p["delta"] > 2.0
        if fam in ("log_decay", "tempered", "truncated"):
            return True
        if self.second_moment_finite is not None:
            return self.second_moment_finite
        # custom: look for a converging tail of r^2 G
        f = lambda r: r * r * self._G(r)
        a = _quad(f, 1.0, 1e3, "custom second moment", self.quad)
        b = _quad(f, 1.0, 1e6, "custom second moment", self.quad)
        return abs(b - a) <= 1e-6 * max(abs(b), 1e-300)

    def pruitt_part(self, r: float) -> float:
        """int min(1, |y|^2/r^2) nu(dy)."""
        return self.second_moment_below(r) / (r * r) + self.mass_above(r)

    def integrability(self) -> float:
        """int min(1, r^2) g(r) sigma r^{d-1} dr (finite for valid profiles)."""
        return self.second_moment_below(1.0) + self.mass_above(1.0)

    # -- symbol ------------------------------------------------------------
    def psi(self, rho: float) -> float:
        """Radial symbol psi_nu(rho) by adaptive quadrature."""
        rho = abs(float(rho))
        if rho == 0.0:
            return 0.0
        d, cfg = self.d, self.quad
        what = f"psi of {self.label} at |xi|={rho:g}"
        integrand = lambda r: float(one_minus_sphere_cos(d, rho * r)) * self._G(r)
        r1 = max(1.0, 10.0 / rho)
        if self.family == "truncated":
            r1 = 1.0
        # direct part on [0, r1], cut into panels of a few oscillations each
        width = 16.0 * math.pi / rho
        edges = [0.0, min(r1, 1.0 / rho)]
        x = edges[-1]
        while x < r1:
            x = min(r1, x + width)
            edges.append(x)
        edges = sorted(set(edges + [b for b in self.breakpoints if 0 < b < r1]))
        if len(edges) > 4000:
            raise QuadratureError(f"{what}: too many oscillation panels")
        near = sum(_quad(integrand, lo, hi, what, cfg) for lo, hi in zip(edges[:-1], edges[1:]))
        if self.family == "truncated":
            return near
        mass = self.mass_above(r1)
        if mass == 0.0:
            return near
        eps = max(1e-15, 1e-12 * mass)
        if d == 1:
            osc = _quad(self._G, r1, np.inf, what, cfg, weight="cos", wvar=rho, epsabs=eps)
        elif d == 3:
            g3 = lambda r: self._G(r) / (rho * r)
            osc = _quad(g3, r1, np.inf, what, cfg, weight="sin", wvar=rho, epsabs=eps)
        else:
            osc = self._projected_cos(rho, r1, what, eps)
        return near + mass - osc

    def _projected_cos(self, rho: float, r1: float, what: str, eps: float) -> float:
        """int_{|z|>r1} cos(rho z_1) nu(dz) through the first-coordinate marginal."""
        d, cfg = self.d, self.quad
        sig = sphere_area(d - 1)

        def marginal(y: float) -> float:
            s0 = math.sqrt(max(r1 * r1 - y * y, 0.0))
            f = lambda s: float(self(math.hypot(y, s))) * s ** (d - 2)
            brk = [math.sqrt(b * b - y * y) for b in self.breakpoints if b > max(y, r1)]
            return sig * _quad_pieces(f, s0, np.inf, brk, what, cfg)

        head = _quad(lambda y: math.cos(rho * y) * marginal(y), 0.0, r1, what, cfg)
        tail = _quad(marginal, r1, np.inf, what, cfg, weight="cos", wvar=rho, epsabs=eps)
        return 2.0 * (head + tail)


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise DomainError(msg)


def polynomial_profile(d: int, alpha: float, C: float | None = None) -> RadialLevyDensityProfile:
    """C r^{-d-alpha}; the default C makes the symbol exactly |xi|^alpha."""
    _check(0 < alpha < 2, "polynomial profile needs alpha in (0,2)")
    C = stable_density_constant(d, alpha) if C is None else C
    return RadialLevyDensityProfile("polynomial", d, {"alpha": alpha, "C": C}, breakpoints=())


def layered_profile(d: int, eta: float, delta: float, C: float = 1.0) -> RadialLevyDensityProfile:
    """C r^{-d-eta} on r <= 1 and C r^{-d-delta} on r > 1."""
    _check(0 < eta < 2, "layered profile needs eta in (0,2)")
    _check(delta > 0, "layered profile needs delta > 0")
    return RadialLevyDensityProfile("layered", d, {"eta": eta, "delta": delta, "C": C})


def log_decay_profile(d: int, delta: float, theta: float, beta: float,
                      C: float = 1.0) -> RadialLevyDensityProfile:
    """C r^{-d-delta} on r <= 1 and C exp(-theta (log r)^beta) on r > 1."""
    _check(0 < delta < 2, "log_decay profile needs delta in (0,2)")
    _check(theta > 0 and beta > 1, "log_decay profile needs theta > 0, beta > 1")
    return RadialLevyDensityProfile(
        "log_decay", d, {"delta": delta, "theta": theta, "beta": beta, "C": C})


def tempered_profile(d: int, delta: float, theta: float, beta: float, gamma: float = 0.0,
                     C: float = 1.0) -> RadialLevyDensityProfile:
    """C r^{-d-delta} on r <= 1 and C exp(-theta (r-1)^beta) r^{-gamma} on r > 1."""
    _check(0 < delta < 2, "tempered profile needs delta in (0,2)")
    _check(theta > 0 and beta > 0 and gamma >= 0, "tempered profile needs theta, beta > 0, gamma >= 0")
    return RadialLevyDensityProfile(
        "tempered", d, {"delta": delta, "theta": theta, "beta": beta, "gamma": gamma, "C": C})


def truncated_profile(d: int, delta: float, C: float | None = None) -> RadialLevyDensityProfile:
    """C r^{-d-delta} restricted to r <= 1 (default C = C_{d,delta})."""
    _check(0 < delta < 2, "truncated profile needs delta in (0,2)")
    C = stable_density_constant(d, delta) if C is None else C
    return RadialLevyDensityProfile("truncated", d, {"delta": delta, "C": C})


def custom_profile(d: int, g: Callable, breakpoints: Sequence[float] = (1.0,),
                   second_moment_finite: bool | None = None,
                   label: str = "custom") -> RadialLevyDensityProfile:
    """Arbitrary vectorised radial profile (used by tests and examples)."""
    return RadialLevyDensityProfile("custom", d, {}, func=g, breakpoints=tuple(breakpoints),
                                    second_moment_finite=second_moment_finite)


# ---------------------------------------------------------------------------
# Gaussian part


@dataclass(frozen=True)
class GaussianPart:
    """Gaussian coefficient: none, a*Id or a symmetric PSD matrix."""

    kind: str = "none"
    a: float = 0.0
    matrix: tuple[tuple[float, ...], ...] | None = None

    @classmethod
    def none(cls) -> "GaussianPart":
        return cls("none")

    @classmethod
    def isotropic(cls, a: float) -> "GaussianPart":
        if a < 0:
            raise DomainError("Gaussian coefficient a must be >= 0")
        return cls("isotropic", float(a))

    @classmethod
    def from_matrix(cls, A) -> "GaussianPart":
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DomainError("Gaussian matrix must be square")
        if not np.allclose(A, A.T, rtol=0, atol=1e-14 * max(1.0, np.abs(A).max())):
            raise DomainError("Gaussian matrix must be symmetric")
        if np.linalg.eigvalsh(A).min() < -1e-12 * max(1.0, np.abs(A).max()):
            raise DomainError("Gaussian matrix must be non-negative definite")
        return cls("matrix", 0.0, tuple(tuple(row) for row in A))

    def as_array(self, d: int) -> np.ndarray:
        if self.kind == "none":
            return np.zeros((d, d))
        if self.kind == "isotropic":
            return self.a * np.eye(d)
        return np.array(self.matrix, dtype=float)

    def norm(self, d: int) -> float:
        """Operator norm of A."""
        if self.kind == "matrix":
            return float(np.linalg.eigvalsh(self.as_array(d)).max())
        return self.a

    @property
    def isotropic_like(self) -> bool:
        return self.kind != "matrix"

    def to_config(self) -> dict:
        if self.kind == "none":
            return {"kind": "none"}
        if self.kind == "isotropic":
            return {"kind": "isotropic", "a": self.a}
        return {"kind": "matrix", "A": [list(r) for r in self.matrix]}


# ---------------------------------------------------------------------------
# jump families


class _Jump:
    name = "abstract"
    monotone = True

    def psi_radial(self, rho: np.ndarray, d: int) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError

    def pruitt_part(self, r: float, d: int) -> float:  # pragma: no cover
        raise NotImplementedError

    def small_xi(self, d: int) -> tuple[float, float]:
        """(alpha, coefficient) of the small-xi behaviour psi ~ c |xi|^alpha."""
        raise NotImplementedError  # pragma: no cover

    def to_config(self) -> dict:  # pragma: no cover
        raise NotImplementedError


@dataclass(frozen=True)
class NoJumps(_Jump):
    name = "none"

    def psi_radial(self, rho, d):
        return np.zeros_like(np.asarray(rho, dtype=float))

    def pruitt_part(self, r, d):
        return 0.0

    def small_xi(self, d):
        return 2.0, 0.0

    def to_config(self):
        return {"family": "none"}


@dataclass(frozen=True)
class IsotropicStable(_Jump):
    """psi_nu(xi) = |xi|^delta."""

    delta: float
    name = "isotropic_stable"

    def __post_init__(self):
        _check(0 < self.delta < 2, "isotropic_stable needs delta in (0,2)")

    def psi_radial(self, rho, d):
        return np.abs(np.asarray(rho, dtype=float)) ** self.delta

    def pruitt_constant(self, d: int) -> float:
        """c with H_nu(r) = c r^{-delta}."""
        dl = self.delta
        return stable_density_constant(d, dl) * sphere_area(d) * (1.0 / (2.0 - dl) + 1.0 / dl)

    def pruitt_part(self, r, d):
        return self.pruitt_constant(d) * r ** (-self.delta)

    def small_xi(self, d):
        return self.delta, 1.0

    def to_config(self):
        return {"family": "isotropic_stable", "delta": self.delta}


def _subordinated_pruitt(mu: Callable[[float], float], r: float, d: int, what: str,
                         cfg: QuadratureConfig, tail_index: float,
                         head: tuple[float, float]) -> float:
    """int_0^inf E[min(1, |B_s|^2/r^2)] mu(s) ds for B with covariance 2s Id.

    Integrated in x = log(2 s / r^2) so that the algebraic tail
    s^{-1-tail_index} of mu becomes exponential.  ``head = (c, h)`` gives
    mu(s) ~ c s^{-1-h} as s -> 0; the part below x = -40 is done in
    closed form from it.
    """
    s0 = 0.5 * r * r
    c, h = head

    def f(x: float) -> float:
        u = math.exp(x)
        return float(_chi2_min_moment(d, u)) * mu(s0 * u) * s0 * u

    lo = -40.0
    hi = 40.0 / max(tail_index, 0.02)
    edges = np.linspace(lo, hi, int(min(80, max(16, (hi - lo) / 5.0))) + 1)
    body = sum(_quad(f, a, b, what, cfg) for a, b in zip(edges[:-1], edges[1:]))
    # E[min(1, u X)] = d u up to exp(-1/(2u)) terms for tiny u
    return body + d * c * s0 ** (-h) * math.exp((1.0 - h) * lo) / (1.0 - h)


@dataclass(frozen=True)
class Relativistic(_Jump):
    """psi(xi) = (|xi|^2 + m^{2/alpha})^{alpha/2} - m."""

    alpha: float
    m: float
    name = "relativistic"

    def __post_init__(self):
        _check(0 < self.alpha < 2, "relativistic needs alpha in (0,2)")
        _check(self.m > 0, "relativistic needs m > 0")

    @property
    def tilt(self) -> float:
        """m^{2/alpha}, the exponential tempering of the subordinator."""
        return self.m ** (2.0 / self.alpha)

    def psi_radial(self, rho, d):
        rho = np.abs(np.asarray(rho, dtype=float))
        lam = rho * rho
        b, a = self.tilt, 0.5 * self.alpha
        # (lam + b)^a - b^a without cancellation for small lam
        return b ** a * np.expm1(a * np.log1p(lam / b))

    def subordinator_density(self, s: float) -> float:
        a = 0.5 * self.alpha
        return a / math.gamma(1.0 - a) * s ** (-1.0 - a) * math.exp(-self.tilt * s)

    def pruitt_part(self, r, d):
        return _subordinated_pruitt(self.subordinator_density, r, d,
                                    f"Pruitt function of relativistic(alpha={self.alpha}, m={self.m})",
                                    QuadratureConfig(), 0.5 * self.alpha,
                                    (0.5 * self.alpha / math.gamma(1.0 - 0.5 * self.alpha), 0.5 * self.alpha))

    def small_xi(self, d):
        return 2.0, 0.5 * self.alpha * self.m ** (1.0 - 2.0 / self.alpha)

    def to_config(self):
        return {"family": "relativistic", "alpha": self.alpha, "m": self.m}


def relativistic_levy_density(d: int, alpha: float, m: float):
    """Radial Levy density g(r) of the relativistic alpha-stable process.

    g(r) = 2 (4 pi)^{-d/2} a/Gamma(1-a) (r/(2 b^{1/2}))^{-(d+alpha)/2} K_{(d+alpha)/2}(b^{1/2} r)
    with a = alpha/2 and b = m^{2/alpha}.
    """
    a, b = 0.5 * alpha, m ** (2.0 / alpha)
    nu = 0.5 * (d + alpha)
    pref = 2.0 * (4.0 * math.pi) ** (-0.5 * d) * a / math.gamma(1.0 - a)
    sb = math.sqrt(b)

    def g(r):
        r = np.asarray(r, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            return pref * (r / (2.0 * sb)) ** (-nu) * special.kv(nu, sb * r)

    return g


@dataclass(frozen=True)
class StableMixture(_Jump):
    """psi_nu(xi) = sum_i a_i |xi|^{alpha_i}."""

    terms: tuple[tuple[float, float], ...]
    name = "stable_mixture"

    def __post_init__(self):
        _check(len(self.terms) > 0, "stable_mixture needs at least one term")
        for a, al in self.terms:
            _check(a > 0 and 0 < al < 2, "stable_mixture terms need a > 0, alpha in (0,2)")

    def psi_radial(self, rho, d):
        rho = np.abs(np.asarray(rho, dtype=float))
        return sum(a * rho ** al for a, al in self.terms)

    def pruitt_part(self, r, d):
        return sum(a * IsotropicStable(al).pruitt_part(r, d) for a, al in self.terms)

    def small_xi(self, d):
        amin = min(al for _, al in self.terms)
        return amin, sum(a for a, al in self.terms if al == amin)

    def to_config(self):
        return {"family": "stable_mixture", "terms": [list(t) for t in self.terms]}


def mittag_leffler_neg(a: float, s: float) -> float:
    """E_a(-s^a) for a in (0,1), s >= 0, via its completely monotone spectral form."""
    if s == 0.0:
        return 1.0
    z = s ** a
    if z <= 1.0:
        # entire series sum (-z)^k / Gamma(a k + 1)
        k = np.arange(60)
        return float(np.sum((-z) ** k / special.gamma(a * k + 1.0)))
    if z >= 40.0:
        # asymptotic series sum_{k>=1} (-1)^{k+1} z^{-k} / Gamma(1 - a k)
        k = np.arange(1, 9)
        return float(np.sum((-1.0) ** (k + 1) * z ** (-k) * special.rgamma(1.0 - a * k)))
    sa, ca = math.sin(math.pi * a), math.cos(math.pi * a)

    def K(r):
        ra = r ** a
        return r ** (a - 1.0) * sa / (math.pi * (ra * ra + 2.0 * ra * ca + 1.0))

    # r = e^y removes the r^{a-1} endpoint singularity
    def f(y):
        r = math.exp(y)
        return math.exp(-r * s) * K(r) * r

    lo, hi = -40.0 / a, math.log(800.0 / s)
    breaks = np.linspace(lo, hi, 25)[1:-1].tolist() + [-math.log(s), 0.0]
    return _quad_pieces(f, lo, hi, breaks, "Mittag-Leffler function",
                        QuadratureConfig(epsabs=1e-16))


@dataclass(frozen=True)
class GeometricStable(_Jump):
    """psi_nu(xi) = log(1 + |xi|^delta): a delta-stable process run at gamma time."""

    delta: float
    name = "geometric_stable"

    def __post_init__(self):
        _check(0 < self.delta < 2, "geometric_stable needs delta in (0,2)")

    def psi_radial(self, rho, d):
        return np.log1p(np.abs(np.asarray(rho, dtype=float)) ** self.delta)

    def subordinator_density(self, s: float) -> float:
        # Laplace exponent log(1 + lam^a) has Levy density (a/s) E_a(-s^a)
        a = 0.5 * self.delta
        return a / s * mittag_leffler_neg(a, s)

    def pruitt_part(self, r, d):
        return _subordinated_pruitt(self.subordinator_density, r, d,
                                    f"Pruitt function of geometric_stable(delta={self.delta})",
                                    QuadratureConfig(epsrel=1e-9), 0.5 * self.delta,
                                    (0.5 * self.delta, 0.0))

    def small_xi(self, d):
        return self.delta, 1.0

    def to_config(self):
        return {"family": "geometric_stable", "delta": self.delta}


@dataclass(frozen=True)
class DensityProfile(_Jump):
    """nu(dx) = g(|x|) dx for a radial profile g."""

    profile: RadialLevyDensityProfile
    name = "density_profile"
    monotone = False

    def psi_radial(self, rho, d):
        rho = np.asarray(rho, dtype=float)
        flat = np.array([self.profile.psi(x) for x in rho.ravel()])
        return flat.reshape(rho.shape)

    def pruitt_part(self, r, d):
        return self.profile.pruitt_part(r)

    def small_xi(self, d):
        prof = self.profile
        if prof.has_finite_second_moment():
            return 2.0, prof.second_moment() / (2.0 * d)
        fam, p = prof.family, prof.params
        if fam == "polynomial":
            return p["alpha"], p["C"] / stable_density_constant(d, p["alpha"])
        if fam == "layered" and p["delta"] < 2.0:
            return p["delta"], p["C"] / stable_density_constant(d, p["delta"])
        return None  # fitted by check_condition_C

    def to_config(self):
        prof = self.profile
        return {"family": prof.family, **dict(prof.params)}


# ---------------------------------------------------------------------------
# the symbol


@dataclass(frozen=True)
class LevySymbol:
    """psi(xi) = xi.A xi + psi_nu(|xi|) in dimension ``dimension``."""

    dimension: int
    gaussian: GaussianPart = field(default_factory=GaussianPart.none)
    jump: _Jump = field(default_factory=NoJumps)

    def __post_init__(self):
        if self.dimension < 1:
            raise DomainError("dimension must be >= 1")
        if self.gaussian.kind == "matrix" and len(self.gaussian.matrix) != self.dimension:
            raise DomainError("Gaussian matrix size does not match dimension")
        if isinstance(self.jump, DensityProfile) and self.jump.profile.d != self.dimension:
            raise DomainError("profile dimension does not match symbol dimension")

    # convenience constructors
    @classmethod
    def brownian(cls, d: int = 1, a: float = 1.0) -> "LevySymbol":
        return cls(d, GaussianPart.isotropic(a))

    @classmethod
    def stable(cls, d: int, delta: float) -> "LevySymbol":
        return cls(d, GaussianPart.none(), IsotropicStable(delta))

    @classmethod
    def relativistic(cls, d: int, alpha: float, m: float) -> "LevySymbol":
        return cls(d, GaussianPart.none(), Relativistic(alpha, m))

    @classmethod
    def from_profile(cls, profile: RadialLevyDensityProfile, a: float = 0.0) -> "LevySymbol":
        g = GaussianPart.isotropic(a) if a > 0 else GaussianPart.none()
        return cls(profile.d, g, DensityProfile(profile))

    @property
    def isotropic(self) -> bool:
        return self.gaussian.isotropic_like

    @property
    def label(self) -> str:
        parts = []
        if self.gaussian.kind != "none":
            parts.append(f"gauss[{self.gaussian.kind}]")
        if not isinstance(self.jump, NoJumps):
            cfg = self.jump.to_config()
            fam = cfg.pop("family")
            parts.append(fam + "(" + ", ".join(f"{k}={v}" for k, v in cfg.items()) + ")")
        return f"d={self.dimension}:" + "+".join(parts or ["zero"])

    def to_config(self) -> dict:
        return {"dimension": self.dimension, "gaussian": self.gaussian.to_config(),
                "jump": self.jump.to_config()}


def _as_xi(symbol: LevySymbol, xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    if xi.ndim == 0:
        xi = xi.reshape(1)
    if xi.shape[-1] != symbol.dimension:
        raise DomainError(f"xi must have last axis of length {symbol.dimension}")
    return xi


def eval_psi(symbol: LevySymbol, xi) -> np.ndarray | float:
    """psi(xi) for a d-vector (or an array of d-vectors along the last axis)."""
    xi = _as_xi(symbol, xi)
    d = symbol.dimension
    rho = np.sqrt(np.sum(xi * xi, axis=-1))
    g = symbol.gaussian
    if g.kind == "none":
        quad_form = np.zeros_like(rho)
    elif g.kind == "isotropic":
        quad_form = g.a * rho * rho
    else:
        A = g.as_array(d)
        quad_form = np.einsum("...i,ij,...j->...", xi, A, xi)
    out = quad_form + symbol.jump.psi_radial(rho, d)
    out = np.where(rho == 0.0, 0.0, np.maximum(out, 0.0))
    return float(out) if out.ndim == 0 else out


def eval_psi_radial(symbol: LevySymbol, rho) -> np.ndarray:
    """psi along the first axis, psi(rho e_1)."""
    rho = np.asarray(rho, dtype=float)
    xi = np.zeros(rho.shape + (symbol.dimension,))
    xi[..., 0] = rho
    return eval_psi(symbol, xi)


def pruitt_H(symbol: LevySymbol, r: float) -> float:
    """H(r) = ||A||/r^2 + int min(1, |y|^2/r^2) nu(dy)."""
    if not r > 0:
        raise DomainError("pruitt_H needs r > 0")
    d = symbol.dimension
    return symbol.gaussian.norm(d) / (r * r) + symbol.jump.pruitt_part(r, d)


def _directions(d: int, A: np.ndarray | None) -> np.ndarray:
    if d == 1:
        return np.ones((1, 1))
    if d == 2:
        th = np.linspace(0.0, math.pi, 64, endpoint=False)
        dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
    else:
        n = 256
        k = np.arange(n) + 0.5
        z = 1.0 - 2.0 * k / n
        phi = math.pi * (1.0 + 5 ** 0.5) * k
        rr = np.sqrt(1.0 - z * z)
        base = np.stack([rr * np.cos(phi), rr * np.sin(phi), z], axis=1)
        dirs = np.zeros((n, d))
        dirs[:, :3] = base
    if A is not None:
        _, vecs = np.linalg.eigh(A)
        dirs = np.vstack([dirs, vecs.T])
    return dirs


def symmetrized_psi(symbol: LevySymbol, r: float, n_radii: int = 32) -> float:
    """Psi(r) = sup_{|xi| <= r} psi(xi) over a deterministic grid."""
    if not r > 0:
        raise DomainError("symmetrized_psi needs r > 0")
    if symbol.isotropic and symbol.jump.monotone:
        return float(eval_psi_radial(symbol, r))
    radii = r * np.arange(1, n_radii + 1) / n_radii
    if symbol.isotropic:
        return float(np.max(eval_psi_radial(symbol, radii)))
    d = symbol.dimension
    dirs = _directions(d, symbol.gaussian.as_array(d))
    jump = symbol.jump.psi_radial(radii, d)
    A = symbol.gaussian.as_array(d)
    quad = np.einsum("ki,ij,kj->k", dirs, A, dirs)
    vals = quad[:, None] * radii[None, :] ** 2 + jump[None, :]
    return float(vals.max())


# ---------------------------------------------------------------------------
# condition (C)


@dataclass(frozen=True)
class ConditionC:
    """Small-xi stable approximation psi(xi) = c|xi|^alpha + o(|xi|^alpha)."""

    alpha: float
    coefficient: float
    matrix: np.ndarray | None
    residual_report: tuple[tuple[float, float], ...]
    fitted_exponent: float

    @property
    def residuals(self) -> np.ndarray:
        return np.array([r for _, r in self.residual_report])


def _fit_exponent(symbol: LevySymbol) -> tuple[float, float]:
    rho = np.logspace(-4, -2, 9)
    vals = eval_psi_radial(symbol, rho)
    if np.any(vals <= 0):
        raise ConditionCUndetermined("psi vanishes near zero")
    slope, icpt = np.polyfit(np.log(rho), np.log(vals), 1)
    return float(slope), float(math.exp(icpt))


def check_condition_C(symbol: LevySymbol, grid: Sequence[float] | None = None) -> ConditionC:
    """Classify the small-xi behaviour of psi.

    Finite second moment gives alpha = 2 with
    a~ = a + (1/2) int y_1^2 nu(dy); stable-at-zero families give their
    exponent and coefficient.  The residual report lists
    |psi - c|xi|^alpha| / |xi|^alpha along a geometric grid xi -> 0.
    """
    d = symbol.dimension
    info = symbol.jump.small_xi(d)
    slope, coef_fit = _fit_exponent(symbol) if info is None else (math.nan, math.nan)
    if info is None:
        if abs(slope - round(slope, 1)) > 0.05 or not 0 < slope <= 2.05:
            raise ConditionCUndetermined(
                f"condition (C) undetermined for {symbol.label}: fitted exponent {slope:.4f}")
        info = (min(slope, 2.0), coef_fit)
    alpha_j, c_j = info
    g = symbol.gaussian
    has_gauss = g.kind != "none" and g.norm(d) > 0
    matrix = None
    if alpha_j < 2.0:
        alpha, coef = alpha_j, c_j
    else:
        alpha = 2.0
        A = g.as_array(d) + c_j * np.eye(d)
        matrix = A
        coef = float(A[0, 0]) if symbol.isotropic else float(np.linalg.eigvalsh(A).max())
        if not has_gauss and c_j == 0.0:
            raise ConditionCUndetermined(f"condition (C) undetermined for {symbol.label}: psi == 0")
    if grid is None:
        grid = np.logspace(0, -3, 13)
    grid = np.asarray(grid, dtype=float)
    if symbol.isotropic or matrix is None:
        xi_dir = np.zeros(d)
        xi_dir[0] = 1.0
    else:
        xi_dir = np.linalg.eigh(matrix)[1][:, -1]
    vals = eval_psi(symbol, grid[:, None] * xi_dir[None, :])
    if matrix is not None:
        approx = grid ** 2 * float(xi_dir @ matrix @ xi_dir)
    else:
        approx = coef * grid ** alpha
    res = np.abs(vals - approx) / grid ** alpha
    if np.isnan(slope):
        try:
            slope = _fit_exponent(symbol)[0]
        except ConditionCUndetermined:
            slope = math.nan
    return ConditionC(alpha, coef, matrix, tuple(zip(grid.tolist(), res.tolist())), slope)


# ---------------------------------------------------------------------------
# config


_PROFILE_BUILDERS = {
    "polynomial": (polynomial_profile, ("alpha",), ("C",)),
    "layered": (layered_profile, ("eta", "delta"), ("C",)),
    "log_decay": (log_decay_profile, ("delta", "theta", "beta"), ("C",)),
    "tempered": (tempered_profile, ("delta", "theta", "beta"), ("gamma", "C")),
    "truncated": (truncated_profile, ("delta",), ("C",)),
}


def _take(block: Mapping, key: str, where: str):
    from .errors import ConfigError

    if key not in block:
        raise ConfigError(f"missing parameter {key!r}", f"{where}.{key}")
    return float(block[key])


def symbol_from_config(block: Mapping, where: str = "symbol") -> LevySymbol:
    """Build a symbol from ``{dimension, gaussian: {...}, jump: {family, ...}}``."""
    from .errors import ConfigError

    if not isinstance(block, Mapping):
        raise ConfigError("expected a mapping", where)
    d = int(block.get("dimension", 1))
    gblock = block.get("gaussian", {"kind": "none"}) or {"kind": "none"}
    kind = gblock.get("kind", "none")
    if kind == "none":
        gauss = GaussianPart.none()
    elif kind == "isotropic":
        gauss = GaussianPart.isotropic(_take(gblock, "a", f"{where}.gaussian"))
    elif kind == "matrix":
        gauss = GaussianPart.from_matrix(gblock["A"])
    else:
        raise ConfigError(f"unknown Gaussian kind {kind!r}", f"{where}.gaussian.kind")
    jblock = dict(block.get("jump", {"family": "none"}) or {"family": "none"})
    fam = jblock.pop("family", "none")
    jw = f"{where}.jump"
    if fam == "none":
        jump = NoJumps()
    elif fam == "isotropic_stable":
        jump = IsotropicStable(_take(jblock, "delta", jw))
    elif fam == "relativistic":
        jump = Relativistic(_take(jblock, "alpha", jw), _take(jblock, "m", jw))
    elif fam == "stable_mixture":
        terms = jblock.get("terms")
        if not terms:
            raise ConfigError("missing parameter 'terms'", f"{jw}.terms")
        jump = StableMixture(tuple((float(a), float(al)) for a, al in terms))
    elif fam == "geometric_stable":
        jump = GeometricStable(_take(jblock, "delta", jw))
    elif fam in _PROFILE_BUILDERS:
        builder, req, opt = _PROFILE_BUILDERS[fam]
        kwargs = {k: _take(jblock, k, jw) for k in req}
        kwargs.update({k: float(jblock[k]) for k in opt if k in jblock})
        jump = DensityProfile(builder(d, **kwargs))
    else:
        raise ConfigError(f"unknown jump family {fam!r}", f"{jw}.family")
    return LevySymbol(d, gauss, jump)
