"""Principal Dirichlet eigenvalues on balls.

Three routes: the Bessel-zero closed form for the Laplacian, a 1-d
finite-difference quadrature of the fractional Laplacian with zero
exterior data, and a Monte Carlo fit of the exit-time survival curve.
All constants use the symbol normalisation psi(xi) = |xi|^alpha, so that
alpha = 2 is -Laplacian.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np
from scipy import linalg, optimize, special

from .errors import ConvergenceError, DomainError, StatisticalError
from .geometry import stable_density_constant, unit_ball_volume
from .paths import IncrementSampler, SamplerConfig, spawn_seeds
from .symbols import (DensityProfile, GeometricStable, IsotropicStable, LevySymbol, Relativistic,
                      StableMixture)

__all__ = [
    "EigenvalueEstimate",
    "lambda1_bm_closed_form",
    "bessel_first_zero",
    "fractional_laplacian_matrix",
    "lambda1_grid_1d",
    "survival_counts",
    "lambda1_exit_time_mc",
    "lambda_alpha_infimum",
]


@dataclass(frozen=True)
class EigenvalueEstimate:
    value: float
    method: str
    error: float
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.value > 0:
            raise DomainError(f"eigenvalue estimate must be positive, got {self.value}")
        if not self.error >= 0:
            raise DomainError("error bar must be non-negative")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, default=float)

    def agrees_with(self, other: "EigenvalueEstimate", k: float = 1.0) -> bool:
        """|difference| within k times the combined error bar."""
        return abs(self.value - other.value) <= k * math.hypot(self.error, other.error)


# ---------------------------------------------------------------------------
# closed form


def bessel_first_zero(nu: float) -> float:
    """First positive zero of J_nu (nu > -1), by bracketing and Brent's method."""
    if nu <= -1:
        raise DomainError("need nu > -1")
    f = lambda x: special.jv(nu, x)
    # the zero lies in (nu, nu + 2 sqrt(nu + 1) + 3) for nu > -1; scan to be safe
    lo = max(1e-6, 0.5 * nu)
    step = 0.05
    x = lo
    while f(x) * f(x + step) > 0:
        x += step
    return optimize.brentq(f, x, x + step, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def lambda1_bm_closed_form(d: int) -> float:
    """lambda_1 of -Laplacian on B(0,1) = j_{d/2-1,1}^2."""
    if d < 1:
        raise DomainError("dimension must be >= 1")
    if d == 1:
        return math.pi ** 2 / 4.0
    if d == 3:
        return math.pi ** 2
    return bessel_first_zero(0.5 * d - 1.0) ** 2


def lambda_alpha_infimum(d: int, alpha: float, lambda1_unit_ball: float) -> float:
    """Faber-Krahn infimum over unit-volume sets: omega_d^(alpha/d) lambda_1(B(0,1))."""
    if not 0 < alpha <= 2 or not lambda1_unit_ball > 0:
        raise DomainError("need alpha in (0,2] and a positive eigenvalue")
    return unit_ball_volume(d) ** (alpha / d) * lambda1_unit_ball


# ---------------------------------------------------------------------------
# 1-d grid


def _int_pow(a: float, b: float, p: float) -> float:
    """int_a^b y^(-p) dy."""
    if p == 1.0:
        return math.log(b / a)
    return (b ** (1.0 - p) - a ** (1.0 - p)) / (1.0 - p)


def fractional_laplacian_matrix(alpha: float, R: float, n: int) -> np.ndarray:
    """Discrete (-Delta)^(alpha/2) on the n-1 interior nodes of [-R, R], zero outside.

    With L u(x) = C int_0^inf (2u(x) - u(x+y) - u(x-y)) y^(-1-alpha) dy the
    integral is split at y = h.  Near part: u'' (second difference) times
    int_0^h y^(1-alpha) dy.  Far part: 2 u(x) int_h^inf y^(-1-alpha) dy in
    closed form (this carries the exterior Dirichlet condition), minus the
    exact kernel integrated against the piecewise-linear interpolant of the
    interior values.
    """
    if not 0 < alpha <= 2 or not R > 0 or n < 4:
        raise DomainError("need alpha in (0,2], R > 0, n >= 4")
    h = 2.0 * R / n
    m = n - 1
    if alpha == 2.0:
        main = np.full(m, 2.0 / h ** 2)
        off = np.full(m - 1, -1.0 / h ** 2)
        return np.diag(main) + np.diag(off, 1) + np.diag(off, -1)
    C = stable_density_constant(1, alpha)
    # weights w_j for |j| >= 1 from the linear interpolant on [kh, (k+1)h]
    k = np.arange(1, m + 1)
    A = np.empty(m)
    B = np.empty(m)
    for i, kk in enumerate(k):
        a, b = kk * h, (kk + 1) * h
        I1 = _int_pow(a, b, 1.0 + alpha)
        I0 = _int_pow(a, b, alpha)
        B[i] = (I0 - kk * h * I1) / h
        A[i] = I1 - B[i]
    w = np.zeros(m + 1)
    w[1] = A[0]
    w[2:] = A[1:m] + B[0:m - 1]
    near = h ** (2.0 - alpha) / (2.0 - alpha) / h ** 2
    diag = 2.0 * h ** (-alpha) / alpha + 2.0 * near
    first = np.zeros(m)
    first[0] = diag
    first[1:] = -w[1:m]
    first[1] -= near
    return C * linalg.toeplitz(first)


def _smallest_eigenvalue(M: np.ndarray, tol: float = 1e-13, max_iter: int = 500) -> tuple[float, int]:
    """Inverse power iteration with Rayleigh quotient (M symmetric positive definite)."""
    lu = linalg.lu_factor(M)
    v = np.ones(M.shape[0]) / math.sqrt(M.shape[0])
    lam = float(v @ M @ v)
    for it in range(1, max_iter + 1):
        w = linalg.lu_solve(lu, v)
        v = w / np.linalg.norm(w)
        new = float(v @ M @ v)
        if abs(new - lam) <= tol * abs(new):
            return new, it
        lam = new
    raise ConvergenceError(f"inverse power iteration did not converge in {max_iter} steps")


def lambda1_grid_1d(alpha: float, R: float = 1.0, n: int = 2000) -> EigenvalueEstimate:
    """Smallest eigenvalue of the discrete operator on (-R, R).

    The error bar is the Richardson estimate gap / (2^p - 1) of the remaining
    discretisation error, with the gap |lambda(n) - lambda(n/2)| and the
    observed order p from the grids n, n/2, n/4 (clipped to [0.25, 2]).
    """
    if n < 200:
        raise DomainError("grid size must be at least 200")
    lam, it = _smallest_eigenvalue(fractional_laplacian_matrix(alpha, R, n))
    lam2, _ = _smallest_eigenvalue(fractional_laplacian_matrix(alpha, R, n // 2))
    lam4, _ = _smallest_eigenvalue(fractional_laplacian_matrix(alpha, R, n // 4))
    gap, gap2 = abs(lam - lam2), abs(lam2 - lam4)
    p = math.log2(gap2 / gap) if gap > 0 and gap2 > 0 else 2.0
    p = min(2.0, max(0.25, p))
    return EigenvalueEstimate(lam, "grid_1d", gap / (2.0 ** p - 1.0),
                              {"alpha": alpha, "R": R, "n": n, "coarse": [lam2, lam4],
                               "observed_order": p, "iterations": it})


# ---------------------------------------------------------------------------
# exit-time Monte Carlo


def survival_counts(symbol: LevySymbol, radius: float, dt: float, n_paths: int, seed: int,
                    n_batches: int = 10, max_steps: int = 10 ** 6,
                    config: SamplerConfig | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Survival counts in the closed ball B(0, radius) under two monitoring grids.

    Returns (fine, coarse): fine[b, k] counts paths of batch b not yet seen
    outside at steps 0..k; coarse[b, j] does the same when only the even
    steps 0, 2, ..., 2j are inspected (the same paths observed at step 2 dt).
    Both are zero-padded after a batch dies out.  Batch b uses the stream
    SeedSequence([seed, b]).
    """
    if n_paths < n_batches:
        raise DomainError("need at least one path per batch")
    sampler = IncrementSampler(symbol, dt, config)
    d = symbol.dimension
    sizes = [n_paths // n_batches + (1 if b < n_paths % n_batches else 0) for b in range(n_batches)]
    fine_rows, coarse_rows = [], []
    r2 = radius * radius
    for ss, size in zip(spawn_seeds(seed, n_batches), sizes):
        rng = np.random.default_rng(ss)
        x = np.zeros((size, d))
        alive = np.ones(size, dtype=bool)  # fine monitoring; coarse-alive paths are all kept
        fine, coarse = [size], [size]
        steps = 0
        while x.shape[0] and steps < max_steps:
            x = x + sampler.draw(rng, x.shape[0])
            steps += 1
            inside = np.sum(x * x, axis=1) <= r2
            alive &= inside
            fine.append(int(alive.sum()))
            if steps % 2 == 0:
                x, alive = x[inside], alive[inside]
                coarse.append(x.shape[0])
        fine_rows.append(np.asarray(fine))
        coarse_rows.append(np.asarray(coarse))

    def pad(rows):
        K = max(len(r) for r in rows)
        out = np.zeros((n_batches, K), dtype=np.int64)
        for b, r in enumerate(rows):
            out[b, :len(r)] = r
        return out

    return pad(fine_rows), pad(coarse_rows)


def monitoring_order(symbol: LevySymbol) -> float:
    """Exponent p of the discrete-monitoring bias O(dt^p) of the exit rate.

    p = 1/max(beta, 1) with beta the small-jump activity index (2 with a
    Gaussian part): sqrt(dt) for diffusions, dt for alpha <= 1.
    """
    if symbol.gaussian.norm(symbol.dimension) > 0:
        return 0.5
    j = symbol.jump
    if isinstance(j, (IsotropicStable, GeometricStable)):
        beta = j.delta
    elif isinstance(j, Relativistic):
        beta = j.alpha
    elif isinstance(j, StableMixture):
        beta = max(al for _, al in j.terms)
    elif isinstance(j, DensityProfile):
        # int_{|y|<e} |y|^2 nu ~ e^{2 - beta}
        m1, m2 = j.profile.second_moment_below(1e-3), j.profile.second_moment_below(1e-4)
        beta = 2.0 - math.log(m1 / m2) / math.log(10.0) if m2 > 0 else 0.0
    else:
        beta = 2.0
    return 1.0 / max(min(beta, 2.0), 1.0)


def _slope(counts: np.ndarray, dt: float, k1: int, k2: int) -> float:
    """Constant-hazard MLE on steps k1..k2: -log(1 - deaths/exposure) / dt."""
    counts = np.asarray(counts, dtype=float)
    deaths = counts[k1] - counts[k2]
    exposure = counts[k1:k2].sum()
    return float(-math.log1p(-deaths / exposure) / dt)


def _fit_window(total: np.ndarray, dt: float, t1: float | None, t2: float | None,
                min_survivors: int) -> tuple[int, int]:
    n = total[0]
    if t1 is None:
        below = np.nonzero(total <= 0.2 * n)[0]
        if below.size == 0:
            raise StatisticalError("survival never dropped to 0.2; extend the run")
        k1 = int(below[0])
    else:
        k1 = int(round(t1 / dt))
    if t2 is None:
        ok = np.nonzero(total >= min_survivors)[0]
        k2 = int(ok[-1])
    else:
        k2 = int(round(t2 / dt))
    if k2 >= total.size or total[k2] < min_survivors:
        raise StatisticalError(f"fewer than {min_survivors} paths survive at t2 = {k2 * dt:g}; "
                               "use more paths or a smaller t2")
    if k2 - k1 < 5:
        raise StatisticalError("fit window holds fewer than 5 grid times")
    return k1, k2


def lambda1_exit_time_mc(symbol: LevySymbol, radius: float = 1.0, dt: float = 1e-3,
                         n_paths: int = 10 ** 5, seed: int = 0, t1: float | None = None,
                         t2: float | None = None, richardson: bool = True,
                         n_batches: int = 10, min_survivors: int = 100,
                         config: SamplerConfig | None = None) -> EigenvalueEstimate:
    """Decay rate of P0(tau > t) for the ball B(0, radius).

    A constant hazard is fitted by maximum likelihood to the survival
    counts over [t1, t2] (defaults: P <= 0.2 at t1, at least
    ``min_survivors`` paths at t2), with a jackknife error over seed
    batches.  Discrete monitoring biases the
    rate downwards by O(dt^p), p from :func:`monitoring_order`.  The same
    paths are also monitored on the 2 dt grid; with ``richardson`` the two
    slopes are extrapolated linearly in dt^p, otherwise the fine slope is reported and the gap
    between the grids is added to the error bar.
    """
    if n_paths < 10 ** 4:
        raise DomainError("need at least 1e4 paths")
    fine, coarse = survival_counts(symbol, radius, dt, n_paths, seed, n_batches, config=config)
    tot_f = fine.sum(axis=0)
    k1, k2 = _fit_window(tot_f, dt, t1, t2, min_survivors)
    j1, j2 = (k1 + 1) // 2, k2 // 2
    q = 2.0 ** monitoring_order(symbol)

    def estimate(f: np.ndarray, c: np.ndarray) -> tuple[float, float]:
        lf = _slope(f, dt, k1, k2)
        lc = _slope(c, 2 * dt, j1, j2)
        return lf, lc

    def combine(lf: float, lc: float) -> float:
        return (q * lf - lc) / (q - 1.0) if richardson else lf

    lf, lc = estimate(tot_f, coarse.sum(axis=0))
    value = combine(lf, lc)
    B = n_batches
    loo = np.array([combine(*estimate(tot_f - fine[b], coarse.sum(axis=0) - coarse[b])) for b in range(B)])
    stat = math.sqrt((B - 1) / B * np.sum((loo - loo.mean()) ** 2))
    err = stat if richardson else math.hypot(stat, abs(lf - lc))
    meta = {"symbol": symbol.label, "radius": radius, "dt": dt, "n_paths": n_paths, "seed": seed,
            "t1": k1 * dt, "t2": k2 * dt, "fine": lf, "coarse": lc, "richardson": richardson,
            "statistical_error": stat}
    return EigenvalueEstimate(value, "exit_time_mc", err, meta)
