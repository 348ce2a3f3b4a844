"""Increment and path samplers for the catalog Levy processes.

Conventions: psi_A(xi) = xi.A xi, so the Gaussian part of X_t has
covariance 2 A t.  Subordinated families are sampled as B(S) with B a
Brownian motion of covariance 2 s Id at time s and S a subordinator
increment, which keeps every coordinate exact in law.
"""
from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import integrate

from .errors import DomainError, RejectionCapError, SizeError
from .symbols import (
    DensityProfile,
    GeometricStable,
    IsotropicStable,
    LevySymbol,
    NoJumps,
    Relativistic,
    StableMixture,
)

__all__ = [
    "SamplerConfig",
    "PathSample",
    "Ball",
    "Box",
    "IncrementSampler",
    "positive_stable",
    "spawn_seeds",
    "sample_increment",
    "sample_increments",
    "sample_path",
    "exit_time_on_grid",
    "tail_probability_estimate",
    "MAX_STEPS",
]

MAX_STEPS = 10 ** 8


@dataclass(frozen=True)
class SamplerConfig:
    """Knobs of the approximate and rejection samplers.

    epsilon        small-jump cutoff for density profiles (below the branch point 1)
    rejection_cap  rounds of redraws allowed in the tempering rejection step
    gaussian_approx  replace jumps below epsilon by a matching Gaussian
    max_tilt_dt    largest m dt per rejection sub-step (None: no sub-stepping)
    """

    epsilon: float = 1e-2
    rejection_cap: int = 200
    gaussian_approx: bool = True
    max_tilt_dt: float | None = 1.0

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise DomainError("small-jump cutoff must lie in (0, 1)")
        if self.rejection_cap < 1:
            raise DomainError("rejection cap must be positive")
        if self.max_tilt_dt is not None and not self.max_tilt_dt > 0:
            raise DomainError("max_tilt_dt must be positive")


def spawn_seeds(master: int, n: int) -> list[np.random.SeedSequence]:
    """Independent child streams: child i is SeedSequence([master, i])."""
    return [np.random.SeedSequence([int(master), i]) for i in range(n)]


def positive_stable(a: float, scale: float, size, rng: np.random.Generator) -> np.ndarray:
    """One-sided a-stable variables with E exp(-lam S) = exp(-scale lam^a), a in (0, 1).

    Kanter's representation: S = (A(U)/E)^((1-a)/a) with U uniform on (0, pi),
    E standard exponential and
    A(u) = sin(a u)^(a/(1-a)) sin((1-a) u) / sin(u)^(1/(1-a)).
    """
    if not 0 < a < 1:
        raise DomainError("positive stable index must lie in (0,1)")
    u = rng.uniform(0.0, math.pi, size)
    e = rng.standard_exponential(size)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        A = (np.sin(a * u) ** (a / (1 - a)) * np.sin((1 - a) * u)
             / np.sin(u) ** (1 / (1 - a)))
        s = (A / e) ** ((1 - a) / a)
    return scale ** (1.0 / a) * s


def _unit_vectors(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    if d == 1:
        return np.where(rng.random(n) < 0.5, -1.0, 1.0)[:, None]
    z = rng.standard_normal((n, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# radial jump tables for density profiles


class _RadialJumps:
    """Compound-Poisson part |y| >= eps of a radial density, by inverse transform."""

    def __init__(self, profile, eps: float, n_grid: int = 4001, tail_tol: float = 1e-12):
        self.profile = profile
        self.eps = eps
        self.rate = profile.mass_above(eps)
        if not self.rate > 0:
            self.u = self.r = np.zeros(2)
            return
        top = 1.0 if profile.family == "truncated" else None
        if top is None:
            top = 2.0
            while profile.mass_above(top) > tail_tol * self.rate and top < 1e30:
                top *= 4.0
        # log grid with the branch points as nodes; integrand G(r) r in u = log r
        nodes = sorted({eps, top, *[b for b in profile.breakpoints if eps < b < top]})
        pieces = []
        per = max(64, n_grid // (len(nodes) - 1))
        for lo, hi in zip(nodes[:-1], nodes[1:]):
            pieces.append(np.linspace(math.log(lo), math.log(hi), per + 1)[:-1])
        u = np.concatenate(pieces + [[math.log(top)]])
        dens = profile.radial_density(np.exp(u)) * np.exp(u)
        # cumulative mass from eps, Simpson on each smooth piece
        cum = np.zeros_like(u)
        start = 0
        for k in range(len(pieces)):
            stop = start + per
            seg = integrate.cumulative_simpson(dens[start:stop + 1], x=u[start:stop + 1], initial=0.0)
            cum[start:stop + 1] = cum[start] + seg
            start = stop
        self.u = cum / cum[-1]
        self.r = np.exp(u)
        self.mass_tabulated = float(cum[-1])

    def radii(self, n: int, rng: np.random.Generator) -> np.ndarray:
        v = rng.random(n)
        return np.exp(np.interp(v, self.u, np.log(self.r)))


# ---------------------------------------------------------------------------
# samplers


class IncrementSampler:
    """Vectorised sampler of X_dt for one symbol.

    ``draw(rng, n)`` returns an (n, d) array of i.i.d. increments.  All
    randomness flows through the supplied generator.
    """

    def __init__(self, symbol: LevySymbol, dt: float, config: SamplerConfig | None = None):
        if not dt > 0:
            raise DomainError("dt must be positive")
        self.symbol = symbol
        self.dt = float(dt)
        self.config = config or SamplerConfig()
        self.d = symbol.dimension
        A = symbol.gaussian.as_array(self.d)
        self._gauss = None
        if np.any(A != 0):
            w, V = np.linalg.eigh(2.0 * A * self.dt)
            self._gauss = V * np.sqrt(np.clip(w, 0.0, None))
        jump = symbol.jump
        self._jumps = None
        self._small_sd = 0.0
        if isinstance(jump, DensityProfile):
            eps = self.config.epsilon
            prof = jump.profile
            self._jumps = _RadialJumps(prof, eps)
            if self.config.gaussian_approx:
                var = prof.second_moment_below(eps) / self.d
                self._small_sd = math.sqrt(var * self.dt)
                if math.sqrt(var) < 3.0 * eps:
                    warnings.warn(f"small-jump Gaussian approximation is rough for {prof.label}: "
                                  f"sigma(eps)/eps = {math.sqrt(var) / eps:.3g} < 3", stacklevel=2)
        elif not isinstance(jump, (NoJumps, IsotropicStable, Relativistic, StableMixture, GeometricStable)):
            raise DomainError(f"no sampler for jump family {jump.name}")

    # subordinator helpers ------------------------------------------------
    def _tempered(self, a: float, tilt: float, m: float, n: int, rng) -> np.ndarray:
        """Subordinator with Laplace exponent dt((lam + tilt)^a - m), m = tilt^a, by rejection."""
        cfg = self.config
        k = 1
        if cfg.max_tilt_dt is not None:
            k = max(1, int(math.ceil(m * self.dt / cfg.max_tilt_dt)))
        h = self.dt / k
        total = np.zeros(n)
        for _ in range(k):
            out = np.empty(n)
            todo = np.arange(n)
            for _round in range(cfg.rejection_cap):
                s = positive_stable(a, h, todo.size, rng)
                ok = rng.random(todo.size) < np.exp(-tilt * s)
                out[todo[ok]] = s[ok]
                todo = todo[~ok]
                if todo.size == 0:
                    break
            else:
                raise RejectionCapError(
                    f"tempering rejection exceeded {cfg.rejection_cap} rounds "
                    f"(acceptance exp(-m dt) = {math.exp(-m * h):.3g}); use a smaller dt")
            total += out
        return total

    def _subordinated(self, s: np.ndarray, rng) -> np.ndarray:
        return np.sqrt(2.0 * s)[:, None] * rng.standard_normal((s.size, self.d))

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        d, dt = self.d, self.dt
        x = np.zeros((n, d))
        if self._gauss is not None:
            x += rng.standard_normal((n, d)) @ self._gauss.T
        jump = self.symbol.jump
        if isinstance(jump, IsotropicStable):
            x += self._subordinated(positive_stable(0.5 * jump.delta, dt, n, rng), rng)
        elif isinstance(jump, StableMixture):
            for c, al in jump.terms:
                x += self._subordinated(positive_stable(0.5 * al, c * dt, n, rng), rng)
        elif isinstance(jump, Relativistic):
            s = self._tempered(0.5 * jump.alpha, jump.tilt, jump.m, n, rng)
            x += self._subordinated(s, rng)
        elif isinstance(jump, GeometricStable):
            # delta-stable motion run at an independent Gamma(dt, 1) time
            g = rng.gamma(dt, 1.0, n)
            y = self._subordinated(positive_stable(0.5 * jump.delta, 1.0, n, rng), rng)
            x += g[:, None] ** (1.0 / jump.delta) * y
        elif isinstance(jump, DensityProfile):
            tab = self._jumps
            if tab.rate > 0:
                counts = rng.poisson(tab.rate * dt, n)
                # chunk so that at most ~2e6 jumps are held at once
                lo = 0
                csum = np.cumsum(counts)
                while lo < n:
                    base = csum[lo - 1] if lo else 0
                    hi = int(np.searchsorted(csum, base + 2_000_000, side="right"))
                    hi = min(n, max(hi, lo + 1))
                    c = counts[lo:hi]
                    tot = int(c.sum())
                    if tot:
                        r = tab.radii(tot, rng)
                        jumps = r[:, None] * _unit_vectors(tot, d, rng)
                        owner = np.repeat(np.arange(hi - lo), c)
                        for k in range(d):
                            x[lo:hi, k] += np.bincount(owner, weights=jumps[:, k], minlength=hi - lo)
                    lo = hi
            if self._small_sd > 0:
                x += self._small_sd * rng.standard_normal((n, d))
        return x


def sample_increments(symbol: LevySymbol, dt: float, n: int, rng: np.random.Generator,
                      config: SamplerConfig | None = None) -> np.ndarray:
    return IncrementSampler(symbol, dt, config).draw(rng, n)


def sample_increment(symbol: LevySymbol, dt: float, rng: np.random.Generator,
                     config: SamplerConfig | None = None) -> np.ndarray:
    """One increment of law X_dt (a d-vector)."""
    return sample_increments(symbol, dt, 1, rng, config)[0]


# ---------------------------------------------------------------------------
# paths


@dataclass(frozen=True, eq=False)
class PathSample:
    """Grid skeleton X_0, X_dt, ..., X_{n dt}."""

    dt: float
    positions: np.ndarray
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.positions.shape[0] - 1

    @property
    def d(self) -> int:
        return self.positions.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n + 1)

    _HEAD = "<4sIqd"

    def to_bin(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(struct.pack(self._HEAD, b"QLPS", self.d, self.n, self.dt))
            fh.write(self.positions.astype("<f8").tobytes())

    @classmethod
    def from_bin(cls, path) -> "PathSample":
        raw = Path(path).read_bytes()
        size = struct.calcsize(cls._HEAD)
        magic, d, n, dt = struct.unpack(cls._HEAD, raw[:size])
        if magic != b"QLPS":
            raise DomainError(f"{path} is not a path file")
        return cls(dt, np.frombuffer(raw[size:], dtype="<f8").reshape(n + 1, d).copy())


def sample_path(symbol: LevySymbol, x0, t_end: float, dt: float, seed: int,
                config: SamplerConfig | None = None) -> PathSample:
    """Cumulative sum of ceil(t_end/dt) increments started at x0."""
    d = symbol.dimension
    x0 = np.asarray(x0, dtype=float).reshape(d)
    if t_end < 0 or not dt > 0:
        raise DomainError("need t_end >= 0 and dt > 0")
    n = int(math.ceil(t_end / dt - 1e-9)) if t_end > 0 else 0
    if n > MAX_STEPS:
        raise SizeError(f"{n} steps exceeds the cap {MAX_STEPS}")
    pos = np.empty((n + 1, d))
    pos[0] = x0
    if n:
        rng = np.random.default_rng(seed)
        inc = IncrementSampler(symbol, dt, config).draw(rng, n)
        pos[1:] = x0 + np.cumsum(inc, axis=0)
    return PathSample(float(dt), pos, seed)


@dataclass(frozen=True)
class Ball:
    radius: float
    center: Sequence[float] | None = None

    def inside(self, x: np.ndarray) -> np.ndarray:
        c = 0.0 if self.center is None else np.asarray(self.center, dtype=float)
        return np.sum((x - c) ** 2, axis=-1) <= self.radius ** 2


@dataclass(frozen=True)
class Box:
    halfwidth: float
    center: Sequence[float] | None = None

    def inside(self, x: np.ndarray) -> np.ndarray:
        c = 0.0 if self.center is None else np.asarray(self.center, dtype=float)
        return np.max(np.abs(x - c), axis=-1) <= self.halfwidth


def exit_time_on_grid(path: PathSample, domain: Ball | Box) -> tuple[int, float] | None:
    """First grid index whose position is outside the closed domain."""
    out = np.nonzero(~domain.inside(path.positions))[0]
    if out.size == 0:
        return None
    k = int(out[0])
    return k, k * path.dt


def tail_probability_estimate(symbol: LevySymbol, t: float, r: float, n_paths: int, seed: int,
                              config: SamplerConfig | None = None) -> tuple[float, float]:
    """Monte Carlo P0(|X_t| >= r) with its binomial standard error."""
    if n_paths < 1000:
        raise DomainError("need at least 1000 paths")
    if r <= 0:
        return 1.0, 0.0
    rng = np.random.default_rng(seed)
    x = IncrementSampler(symbol, t, config).draw(rng, n_paths)
    p = float(np.mean(np.sum(x * x, axis=1) >= r * r))
    return p, math.sqrt(max(p * (1 - p), 0.0) / n_paths)
