"""Poisson clouds, finite-range bump profiles and the potential V(x) = sum W(x - y_i)."""
from __future__ import annotations

import csv
import itertools
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numba
import numpy as np
from scipy.spatial import cKDTree

from .errors import CoverageError, DomainError, RangeError, SizeError
from .geometry import unit_ball_volume

__all__ = [
    "PoissonCloud",
    "BumpProfile",
    "PoissonEnvironment",
    "sample_cloud",
    "eval_potential",
    "eval_potential_bruteforce",
    "find_empty_ball",
    "packing_centers",
    "m_epsilon_box_size",
    "log_m_epsilon_box_size",
    "check_sup_potential_bound",
    "void_probability",
    "MAX_EXPECTED_POINTS",
]

MAX_EXPECTED_POINTS = 1e8
_LOG_MAX = math.log(np.finfo(float).max)


# ---------------------------------------------------------------------------
# clouds


@dataclass(frozen=True, eq=False)
class PoissonCloud:
    """Poisson points on the cube [-box, box]^d."""

    d: int
    rho: float
    box: float
    seed: int | None
    points: np.ndarray

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=float).reshape(-1, self.d)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def __eq__(self, other) -> bool:
        return (isinstance(other, PoissonCloud) and self.d == other.d and self.rho == other.rho
                and self.box == other.box and self.seed == other.seed
                and np.array_equal(self.points, other.points))

    def with_points(self, extra: np.ndarray) -> "PoissonCloud":
        """Superset cloud (used for the inclusion-monotonicity coupling)."""
        extra = np.asarray(extra, dtype=float).reshape(-1, self.d)
        if np.any(np.abs(extra) > self.box):
            raise DomainError("extra points must lie in the box")
        return PoissonCloud(self.d, self.rho, self.box, self.seed, np.vstack([self.points, extra]))

    def subset(self, mask: np.ndarray) -> "PoissonCloud":
        return PoissonCloud(self.d, self.rho, self.box, self.seed, self.points[np.asarray(mask)])

    def count_in_ball(self, center, radius: float) -> int:
        c = np.asarray(center, dtype=float)
        return int(np.count_nonzero(np.sum((self.points - c) ** 2, axis=1) < radius * radius))

    # serialization ------------------------------------------------------
    _BIN_MAGIC = b"QLPC"
    _BIN_HEAD = "<4sIddqq"

    def to_bin(self, path) -> None:
        seed = -1 if self.seed is None else int(self.seed)
        with open(path, "wb") as fh:
            fh.write(struct.pack(self._BIN_HEAD, self._BIN_MAGIC, self.d, self.rho, self.box, seed, self.n))
            fh.write(self.points.astype("<f8").tobytes())

    @classmethod
    def from_bin(cls, path) -> "PoissonCloud":
        raw = Path(path).read_bytes()
        size = struct.calcsize(cls._BIN_HEAD)
        magic, d, rho, box, seed, n = struct.unpack(cls._BIN_HEAD, raw[:size])
        if magic != cls._BIN_MAGIC:
            raise DomainError(f"{path} is not a cloud file")
        pts = np.frombuffer(raw[size:], dtype="<f8").reshape(n, d)
        return cls(d, rho, box, None if seed < 0 else seed, pts.copy())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# d={self.d} rho={self.rho!r} box={self.box!r} seed={self.seed} n={self.n}\n")
            w = csv.writer(fh)
            w.writerow([f"x{i}" for i in range(self.d)])
            for p in self.points:
                w.writerow([repr(float(v)) for v in p])

    @classmethod
    def from_csv(cls, path) -> "PoissonCloud":
        with open(path, newline="") as fh:
            head = fh.readline().lstrip("# ").split()
            meta = dict(kv.split("=", 1) for kv in head)
            rows = list(csv.reader(fh))[1:]
        d = int(meta["d"])
        pts = np.array([[float(v) for v in r] for r in rows], dtype=float).reshape(-1, d)
        seed = None if meta["seed"] == "None" else int(meta["seed"])
        return cls(d, float(meta["rho"]), float(meta["box"]), seed, pts)


def sample_cloud(d: int, rho: float, box: float, seed: int) -> PoissonCloud:
    """Poisson(rho (2 box)^d) points i.i.d. uniform on [-box, box]^d."""
    if d < 1 or not rho > 0 or not box > 0:
        raise DomainError("need d >= 1, rho > 0, box > 0")
    mean = rho * (2.0 * box) ** d
    if mean > MAX_EXPECTED_POINTS:
        raise SizeError(f"expected {mean:.3g} points exceeds the cap {MAX_EXPECTED_POINTS:.0e}")
    rng = np.random.default_rng(seed)
    n = int(rng.poisson(mean))
    pts = rng.uniform(-box, box, size=(n, d))
    return PoissonCloud(d, float(rho), float(box), seed, pts)


def void_probability(d: int, rho: float, radius: float) -> float:
    """P[no point in B(0, radius)] = exp(-rho omega_d radius^d)."""
    return math.exp(-rho * unit_ball_volume(d) * radius ** d)


# ---------------------------------------------------------------------------
# bump profiles

_KIND = {"indicator_ball": 0, "cone": 1, "table": 2}


@dataclass(frozen=True, eq=False)
class BumpProfile:
    """Radial profile W(x) = w(|x|), zero beyond the range a.

    indicator_ball  w = height on [0, a]
    cone            w = height (1 - r/a)
    table           piecewise-linear through (radii, values), radii[-1] = a
    """

    shape: str
    height: float
    a: float
    radii: np.ndarray = field(default_factory=lambda: np.zeros(0))
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if self.shape not in _KIND:
            raise DomainError(f"unknown bump shape {self.shape!r}")
        if self.shape != "table" and not self.a > 0:
            raise DomainError("range a must be positive")
        if self.shape == "table":
            r = np.asarray(self.radii, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if r.ndim != 1 or r.shape != v.shape or r.size < 2 or r[0] != 0.0 or np.any(np.diff(r) <= 0):
                raise DomainError("table needs increasing radii starting at 0, same length as values")
            if np.any(v < 0):
                raise DomainError("table values must be non-negative")
            if not r[-1] > 0:
                raise DomainError("range a must be positive")
            object.__setattr__(self, "radii", r)
            object.__setattr__(self, "values", v)
            object.__setattr__(self, "a", float(r[-1]))
            object.__setattr__(self, "height", float(v.max()))
        elif not self.height >= 0:
            raise DomainError("height must be non-negative")

    @classmethod
    def indicator_ball(cls, v0: float, a: float) -> "BumpProfile":
        return cls("indicator_ball", float(v0), float(a))

    @classmethod
    def cone(cls, height: float, a: float) -> "BumpProfile":
        return cls("cone", float(height), float(a))

    @classmethod
    def table(cls, radii: Sequence[float], values: Sequence[float]) -> "BumpProfile":
        return cls("table", 0.0, 0.0, np.asarray(radii, float), np.asarray(values, float))

    @property
    def sup(self) -> float:
        return self.height

    def scaled(self, factor: float) -> "BumpProfile":
        if self.shape == "table":
            return BumpProfile.table(self.radii, self.values * factor)
        return BumpProfile(self.shape, self.height * factor, self.a)

    def _kernel_args(self):
        return (_KIND[self.shape], float(self.height), float(self.a),
                np.ascontiguousarray(self.radii), np.ascontiguousarray(self.values))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r = np.sqrt(np.sum(x * x, axis=-1))
        return self.radial(r)

    def radial(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.shape == "indicator_ball":
            return np.where(r <= self.a, self.height, 0.0)
        if self.shape == "cone":
            return np.where(r <= self.a, self.height * (1.0 - r / self.a), 0.0)
        return np.where(r <= self.a, np.interp(r, self.radii, self.values), 0.0)

    def to_config(self) -> dict:
        if self.shape == "table":
            return {"shape": "table", "radii": self.radii.tolist(), "values": self.values.tolist()}
        return {"shape": self.shape, "height": self.height, "a": self.a}


@numba.njit(cache=True)
def _w_of_r2(r2, kind, height, a, radii, values):
    if r2 > a * a:
        return 0.0
    if kind == 0:
        return height
    r = math.sqrt(r2)
    if kind == 1:
        return height * (1.0 - r / a)
    # table: linear interpolation
    j = np.searchsorted(radii, r, side="right") - 1
    if j >= radii.size - 1:
        return values[radii.size - 1]
    t = (r - radii[j]) / (radii[j + 1] - radii[j])
    return values[j] + t * (values[j + 1] - values[j])


# ---------------------------------------------------------------------------
# grid index and potential


@numba.njit(cache=True, nogil=True)
def _potential_kernel(xs, pts, order, starts, shape, lo, cell, offsets,
                      kind, height, a, radii, values, out, buf):
    m, d = xs.shape
    for i in range(m):
        nb = 0
        for o in range(offsets.shape[0]):
            flat = 0
            ok = True
            for k in range(d):
                c = int(math.floor((xs[i, k] - lo) / cell)) + offsets[o, k]
                if c < 0 or c >= shape[k]:
                    ok = False
                    break
                flat = flat * shape[k] + c
            if not ok:
                continue
            for q in range(starts[flat], starts[flat + 1]):
                j = order[q]
                r2 = 0.0
                for k in range(d):
                    z = xs[i, k] - pts[j, k]
                    r2 += z * z
                if r2 <= a * a:
                    buf[nb] = j
                    nb += 1
        # sum in ascending point index so the result is order-independent
        for q in range(1, nb):
            v = buf[q]
            p = q - 1
            while p >= 0 and buf[p] > v:
                buf[p + 1] = buf[p]
                p -= 1
            buf[p + 1] = v
        s = 0.0
        for q in range(nb):
            j = buf[q]
            r2 = 0.0
            for k in range(d):
                z = xs[i, k] - pts[j, k]
                r2 += z * z
            s += _w_of_r2(r2, kind, height, a, radii, values)
        out[i] = s


_MAX_CELLS = 2_000_000


class PoissonEnvironment:
    """Cloud plus bump profile, with a uniform-grid neighbour index."""

    def __init__(self, cloud: PoissonCloud, W: BumpProfile):
        self.cloud = cloud
        self.W = W
        d, box = cloud.d, cloud.box
        # cells at least as wide as the range so only the 3^d neighbours matter
        cell = max(W.a * (1.0 + 1e-9), 2.0 * box / _MAX_CELLS ** (1.0 / d))
        n_side = max(1, int(math.ceil(2.0 * box / cell)))
        self._lo = -box
        self._cell = cell
        self._shape = np.full(d, n_side, dtype=np.int64)
        pts = cloud.points
        ci = np.clip(np.floor((pts - self._lo) / cell).astype(np.int64), 0, n_side - 1)
        flat = np.zeros(len(pts), dtype=np.int64)
        for k in range(d):
            flat = flat * n_side + ci[:, k]
        self._order = np.argsort(flat, kind="stable").astype(np.int64)
        counts = np.bincount(flat, minlength=n_side ** d)
        self._starts = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self._offsets = np.array(list(itertools.product((-1, 0, 1), repeat=d)), dtype=np.int64)
        self._max_local = int(self._max_neighbourhood(counts.reshape((n_side,) * d)))

    @staticmethod
    def _max_neighbourhood(counts: np.ndarray) -> int:
        padded = np.pad(counts, 1)
        tot = np.zeros_like(counts)
        d = counts.ndim
        for off in itertools.product((0, 1, 2), repeat=d):
            sl = tuple(slice(o, o + n) for o, n in zip(off, counts.shape))
            tot = tot + padded[sl]
        return int(tot.max()) if tot.size else 0

    @property
    def d(self) -> int:
        return self.cloud.d

    def coverage_radius(self) -> float:
        """Largest R with (-R, R)^d fully covered (R + a <= box)."""
        return self.cloud.box - self.W.a

    def covered(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float).reshape(-1, self.d)
        return np.max(np.abs(xs), axis=1) + self.W.a <= self.cloud.box

    def potential(self, xs, check: bool = True) -> np.ndarray:
        """V at each row of xs (shape (m, d) or (d,))."""
        arr = np.asarray(xs, dtype=float)
        single = arr.ndim == 1 and self.d > 1 or arr.ndim == 0
        xs2 = np.ascontiguousarray(arr.reshape(-1, self.d))
        if check and not np.all(self.covered(xs2)):
            bad = xs2[~self.covered(xs2)][0]
            raise CoverageError(f"x = {bad.tolist()} is within range a = {self.W.a} of the box edge "
                                f"{self.cloud.box}")
        out = np.empty(len(xs2))
        buf = np.empty(max(1, self._max_local), dtype=np.int64)
        _potential_kernel(xs2, self.cloud.points, self._order, self._starts, self._shape,
                          self._lo, self._cell, self._offsets, *self.W._kernel_args(), out, buf)
        if single:
            return out[0]
        return out.reshape(arr.shape[:-1]) if arr.ndim > 1 else out


def eval_potential(cloud: PoissonCloud, W: BumpProfile, x) -> float | np.ndarray:
    """V(x) through the grid index; x closer than a to the box edge raises."""
    return PoissonEnvironment(cloud, W).potential(x)


def eval_potential_bruteforce(cloud: PoissonCloud, W: BumpProfile, x) -> np.ndarray:
    """All-points sum in point order, no spatial index (oracle)."""
    xs = np.asarray(x, dtype=float).reshape(-1, cloud.d)
    out = np.empty(len(xs))
    for i, xi in enumerate(xs):
        z = xi - cloud.points
        r2 = np.zeros(cloud.n)
        for k in range(cloud.d):
            r2 = r2 + z[:, k] * z[:, k]
        vals = np.array([_w_of_r2(v, *W._kernel_args()) for v in r2])
        # left-to-right accumulation; zero terms leave partial sums unchanged
        out[i] = float(np.cumsum(vals)[-1]) if vals.size else 0.0
    return out


# ---------------------------------------------------------------------------
# empty balls and box sizes


def packing_centers(d: int, r: float, a: float, M: float, r_in: float) -> np.ndarray:
    """Centers of the disjoint boxes of side 2(r + a) packed into (-M, M)^d.

    Boxes whose closure meets (-r_in, r_in)^d are dropped; rows are sorted
    by sup-norm, then lexicographically.
    """
    side = 2.0 * (r + a)
    k = int(math.floor(M / side + 1e-12))
    # per axis: symmetric lattice of 2k boxes centred at +-(j + 1/2) side
    ax = (np.arange(-k, k) + 0.5) * side
    if ax.size == 0:
        return np.zeros((0, d))
    grid = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)
    half = 0.5 * side
    meets = np.all(np.abs(grid) - half <= r_in, axis=1)
    grid = grid[~meets]
    key = np.max(np.abs(grid), axis=1)
    idx = np.lexsort(tuple(grid[:, j] for j in range(d - 1, -1, -1)) + (key,))
    return grid[idx]


def find_empty_ball(cloud: PoissonCloud, r: float, a: float = 0.0, r_in: float = 0.0,
                    M: float | None = None) -> np.ndarray | None:
    """First packing center c with B(c, r + a) free of cloud points, or None."""
    if not r > 0 or a < 0 or r_in < 0:
        raise DomainError("need r > 0, a >= 0, r_in >= 0")
    M = cloud.box if M is None else float(M)
    if M > cloud.box:
        raise CoverageError(f"search box {M} exceeds the cloud box {cloud.box}")
    centers = packing_centers(cloud.d, r, a, M, r_in)
    if centers.size == 0:
        return None
    if cloud.n == 0:
        return centers[0].copy()
    tree = cKDTree(cloud.points)
    # nearest point strictly outside the open ball
    dist, _ = tree.query(centers, k=1)
    free = np.nonzero(dist >= r + a)[0]
    return centers[free[0]].copy() if free.size else None


def log_m_epsilon_box_size(epsilon: float, r: float, d: int, rho: float) -> float:
    """log M^eps(r)."""
    if not epsilon > 0 and epsilon != 0.0 or not r > 0 or not rho > 0:
        raise DomainError("need epsilon >= 0, r > 0, rho > 0")
    c = unit_ball_volume(d) * rho * (1.0 + epsilon) / d
    return (2.0 / d + 2.0) * math.log(1.0 / c) - (2 * d + 2) * math.log(r) + c * r ** d


def m_epsilon_box_size(epsilon: float, r: float, d: int, rho: float) -> float:
    """M^eps(r) = (d/(omega_d rho (1+eps)))^(2/d+2) r^(-2d-2) exp(omega_d rho (1+eps) r^d / d)."""
    lm = log_m_epsilon_box_size(epsilon, r, d, rho)
    if lm > _LOG_MAX:
        c = unit_ball_volume(d) * rho * (1.0 + epsilon) / d
        r_max = (_LOG_MAX / c) ** (1.0 / d)
        raise RangeError(f"M^eps(r) overflows at r = {r:g} (exponent alone overflows beyond r ~ {r_max:.4g})")
    return math.exp(lm)


@dataclass(frozen=True)
class SupBoundReport:
    sup: float
    bound: float
    passed: bool
    n_grid: int


def check_sup_potential_bound(cloud: PoissonCloud, W: BumpProfile, R: float,
                              spacing: float | None = None) -> SupBoundReport:
    """max of V on a grid of (-R, R)^d against 3 d log R."""
    if not R > 1:
        raise DomainError("the bound 3 d log R needs R > 1")
    if R + W.a > cloud.box:
        raise CoverageError(f"R + a = {R + W.a} exceeds the box {cloud.box}")
    h = W.a / 4.0 if spacing is None else float(spacing)
    if h > W.a / 4.0:
        raise DomainError("grid spacing must be at most a/4")
    n = int(math.ceil(2.0 * R / h)) + 1
    if n ** cloud.d > 5e7:
        raise SizeError(f"grid of {n}^{cloud.d} points is too large")
    env = PoissonEnvironment(cloud, W)
    ax = np.linspace(-R, R, n)
    # closed-box endpoints are within coverage since R + a <= box
    sup = 0.0
    if cloud.d == 1:
        sup = float(env.potential(ax[:, None]).max())
    else:
        rest = np.stack(np.meshgrid(*([ax] * (cloud.d - 1)), indexing="ij"), axis=-1).reshape(-1, cloud.d - 1)
        for x0 in ax:
            pts = np.hstack([np.full((len(rest), 1), x0), rest])
            sup = max(sup, float(env.potential(pts).max()))
    bound = 3.0 * cloud.d * math.log(R)
    return SupBoundReport(sup, bound, sup <= bound, n ** cloud.d)
