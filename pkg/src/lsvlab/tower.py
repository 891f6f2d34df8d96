"""Random tower over the base (1/2, 1].

Column n of the fiber at ``anchor`` is (x'_n, x'_{n-1}] with
x'_n = (x_n(sigma omega) + 1) / 2, x'_0 = 1: one right-branch step lands on
x_n(sigma omega), and n - 1 left steps then carry it to 1/2. Level l of the
tower over omega is the set of base points at sigma^{-l} omega whose return
time exceeds l; its Lebesgue measure is x_l(sigma^{1-l} omega) / 2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .lsv import compose, log_jacobian
from .noise import NoisePath, ParamDistribution, path_keys, signature
from .preimages import constant_sequence, envelope


class ConsistencyError(RuntimeError):
    """A structural check on the tower failed beyond tolerance."""


def _is_constant(path: NoisePath) -> bool:
    d = path.dist
    return d.kind == "discrete" and d.p1 == 1.0


def _shifted(path: NoisePath, anchor: int, height: int) -> np.ndarray:
    """x_n(sigma omega), n = 0..height, omega at ``anchor``."""
    if _is_constant(path):
        return constant_sequence(path.dist.alpha0, height).copy()
    return K.shifted_preimages(path.params(anchor, height), height)


@dataclass(frozen=True)
class TowerPartition:
    """Return-time partition of (1/2, 1] for the fiber at ``anchor``.

    ``xprime[n]`` for n = 0..height is decreasing from 1; column n is
    (xprime[n], xprime[n-1]] and carries return time n.
    """

    anchor: int
    height: int
    xprime: np.ndarray
    shifted: np.ndarray

    @property
    def intervals(self) -> list[tuple[float, float, int]]:
        return [(float(self.xprime[n]), float(self.xprime[n - 1]), n)
                for n in range(1, self.height + 1)]

    @property
    def masses(self) -> np.ndarray:
        """Lebesgue measure of each column, n = 1..height."""
        return -np.diff(self.xprime)

    @property
    def tail_mass(self) -> float:
        """m{R > height}, the part of the base not covered by the partition."""
        return 0.5 * float(self.shifted[self.height])

    def return_time(self, x) -> np.ndarray | int:
        """Return time of base points; 0 marks points below the truncation."""
        arr = np.asarray(x, dtype=float)
        if np.any(arr <= 0.5) or np.any(arr > 1.0):
            raise ValueError("base points must lie in (1/2, 1]")
        rev = self.xprime[::-1]  # increasing
        pos = np.searchsorted(rev, arr, side="left")
        n = self.height + 1 - pos
        n = np.where(n > self.height, 0, n)
        return int(n) if n.ndim == 0 else n


def build_partition(path: NoisePath, anchor: int, height: int,
                    check: bool | int = True, tol: float = 1e-9) -> TowerPartition:
    """Columns 1..height at ``anchor`` with the Markov check on their images.

    ``check`` may be an int to cap the number of columns verified.
    """
    if height < 1:
        raise ValueError("height must be >= 1")
    sh = _shifted(path, anchor, height)
    xp = np.empty(height + 1)
    xp[0] = 1.0
    xp[1:] = 0.5 * (sh[1:] + 1.0)
    part = TowerPartition(int(anchor), int(height), xp, sh)
    if check:
        cap = height if check is True else min(int(check), height)
        markov_errors(path, part, cap, tol)
    return part


def markov_errors(path: NoisePath, part: TowerPartition, n_max: int | None = None,
                  tol: float | None = None) -> np.ndarray:
    """Endpoint-image errors of columns 1..n_max.

    Column n is pushed by the forced itinerary R L^{n-1}; the image of its
    endpoints must be exactly 1/2 and 1. Returns the max error per column.
    """
    n_max = part.height if n_max is None else n_max
    alphas = path.params(part.anchor, n_max)
    errs = np.empty(n_max)
    for n in range(1, n_max + 1):
        lo, hi = part.xprime[n], part.xprime[n - 1]
        # the first step is affine; start the left steps from the stored
        # pre-images so that rounding of x' is not amplified
        e_r = max(abs(2.0 * lo - 1.0 - part.shifted[n]),
                  abs(2.0 * hi - 1.0 - (part.shifted[n - 1] if n > 1 else 1.0)))
        if n == 1:
            img = (2.0 * lo - 1.0, 2.0 * hi - 1.0)
        else:
            br = "L" * (n - 1)
            img = (compose(alphas[1:n], part.shifted[n], br),
                   compose(alphas[1:n], part.shifted[n - 1], br))
        errs[n - 1] = max(e_r, abs(img[0] - 0.5), abs(img[1] - 1.0))
    if tol is not None and errs.max() > tol:
        bad = int(np.argmax(errs)) + 1
        raise ConsistencyError(f"column {bad} maps onto the base with error {errs.max():.3g}")
    return errs


# -------------------------------------------------------------- tower map


@dataclass(frozen=True)
class TowerPoint:
    """(x, level) with x in the base of the column that started at
    ``index - level``; ``ret`` is that column's return time."""

    x: float
    level: int
    index: int
    ret: int

    def __post_init__(self):
        if not 0.5 < self.x <= 1.0:
            raise ValueError("base point must lie in (1/2, 1]")
        if not 0 <= self.level < self.ret:
            raise ValueError("level must lie below the column's roof")

    @property
    def base_index(self) -> int:
        return self.index - self.level


def first_return(path: NoisePath, index: int, x: float, cap: int = 10**9) -> tuple[int, float]:
    """(R, f^R x) for x in the base at fiber ``index``."""
    n, y = K.first_return(*path.kernel_args(), int(index) + path.offset, float(x), int(cap))
    if n < 0:
        raise RuntimeError(f"no return within {cap} steps")
    return int(n), float(y)


def tower_point(path: NoisePath, index: int, x: float) -> TowerPoint:
    """The level-0 point over fiber ``index``."""
    n, _ = first_return(path, index, x)
    return TowerPoint(float(x), 0, int(index), n)


def tower_step(pt: TowerPoint, path: NoisePath) -> TowerPoint:
    if pt.level + 1 < pt.ret:
        return TowerPoint(pt.x, pt.level + 1, pt.index + 1, pt.ret)
    _, y = first_return(path, pt.base_index, pt.x)
    n, _ = first_return(path, pt.index + 1, y)
    return TowerPoint(y, 0, pt.index + 1, n)


def hat_return(pt: TowerPoint) -> int:
    """Steps left before the point drops back to level 0."""
    return pt.ret - pt.level


def projection(pt: TowerPoint, path: NoisePath) -> float:
    """pi(x, l) = f^l along the fibers base_index, ..., index - 1."""
    if pt.level == 0:
        return pt.x
    return float(compose(path.params(pt.base_index, pt.level), pt.x))


def interval_orbit(path: NoisePath, index: int, x: float, n: int) -> np.ndarray:
    """x, f x, ..., f^n x starting at fiber ``index``."""
    alphas = path.params(index, n)
    out = np.empty(n + 1)
    out[0] = x
    for j, a in enumerate(alphas):
        y = out[j]
        out[j + 1] = y * (1.0 + (2.0 * y) ** a) if y <= 0.5 else 2.0 * y - 1.0
    return out


def base_frequency(path: NoisePath, index: int, x: float, nsteps: int) -> float:
    """Fraction of the first ``nsteps`` images of x that lie in (1/2, 1]."""
    v = K.base_visits(*path.kernel_args(), int(index) + path.offset, float(x), int(nsteps))
    return v / nsteps


def mean_return(path: NoisePath, index: int, x: float, n_returns: int) -> float:
    """Average of successive return times along the orbit of a base point."""
    total = 0
    i, y = int(index), float(x)
    for _ in range(n_returns):
        n, y = first_return(path, i, y)
        total += n
        i += n
    return total / n_returns


# ---------------------------------------------------------- (P6), (P7)


def level_masses(path: NoisePath, index: int, height: int) -> np.ndarray:
    """m(level l of the tower over the fiber at ``index``), l = 0..height-1.

    Level l sits over sigma^{-l} omega and has mass x_l(sigma^{1-l} omega)/2,
    with level 0 of mass 1/2. One backward pass seeded at ``index - 1`` gives
    them all.
    """
    if height < 1:
        raise ValueError("height must be >= 1")
    out = np.empty(height)
    out[0] = 0.5
    if height > 1:
        if _is_constant(path):
            x = constant_sequence(path.dist.alpha0, height - 1)
        else:
            # x_l at index - l + 1: rows of a pass of length height-1 anchored
            # so that row l sits at (start + height - 1 - l)
            start = index - height + 1
            x = K.backward_table(path.params(start + 1, height - 2)) if height > 2 \
                else np.array([np.nan, 0.5])
            # backward_table rows: x[k] at (start+1) + (height-1) - k = index - k + 1
        out[1:] = 0.5 * x[1:height]
    return out


@dataclass(frozen=True)
class TowerMass:
    height: int
    partial: np.ndarray
    envelope: np.ndarray
    tail_bound: float


def tower_mass(path: NoisePath, index: int, height: int) -> TowerMass:
    """Truncated tower mass, its envelope from the constant alpha1 path, and
    the discarded tail bound sum_{l >= height} x_l(alpha1)/2 (integral test)."""
    m = level_masses(path, index, height)
    a1 = path.dist.alpha1
    env = 0.5 * constant_sequence(a1, max(height - 1, 1))[: height].copy()
    env[0] = 0.5
    x_last = float(constant_sequence(a1, height)[height])
    # x_l <= x_h (h / l)^{1/a1} for l >= h approximately; integral of the power
    tail = 0.5 * x_last * (1.0 + height / (1.0 / a1 - 1.0))
    return TowerMass(height, np.cumsum(m), np.cumsum(env), tail)


def annealed_tail_mc(dist: ParamDistribution, ns, n_samples: int, seed: int = 0,
                     method: str = "closed", first: int = 0) -> np.ndarray:
    """MC estimate of (P x m){R = n} for each n in ``ns``.

    ``closed``: mean of 2^{alpha(omega)} x_n(omega)^{alpha(omega)+1} / 2.
    ``difference``: mean of (x_{n-1}(sigma omega) - x_n(omega)) / 2 with the
    two terms drawn from independent paths.

    One backward pass per sample serves every n: row n of a pass of length N
    is x_n at a position whose law does not depend on n.
    """
    ns = np.atleast_1d(np.asarray(ns, dtype=np.int64))
    if np.any(ns < 1):
        raise ValueError("n must be >= 1")
    N = int(ns.max())
    code = dist.code
    if method == "difference":
        keys = path_keys(seed, 2 * n_samples, 2 * first)
    else:
        keys = path_keys(seed, n_samples, first)
    acc = np.zeros(ns.size)
    if method == "closed":
        for key in keys:
            x, anc = K.annealed_pass(code, dist.alpha0, dist.alpha1, dist.p1, key, N)
            a = anc[ns]
            acc += 0.5 * 2.0**a * x[ns] ** (a + 1.0)
    elif method == "difference":
        prev = np.maximum(ns - 1, 1)
        for s in range(n_samples):
            xa, _ = K.annealed_pass(code, dist.alpha0, dist.alpha1, dist.p1, keys[2 * s], N)
            xb, _ = K.annealed_pass(code, dist.alpha0, dist.alpha1, dist.p1, keys[2 * s + 1], N)
            up = np.where(ns == 1, 1.0, xa[prev])
            acc += 0.5 * (up - xb[ns])
    else:
        raise ValueError(f"unknown method {method!r}")
    return acc / n_samples


def annealed_tail_envelope(dist: ParamDistribution, ns) -> np.ndarray:
    """(log n)^b / n^{1/a0 + 1} with b = q (a0 + 1) / a0 (the (P7) shape)."""
    ns = np.asarray(ns, dtype=float)
    a0 = dist.alpha0
    b = signature(dist).q * (a0 + 1.0) / a0
    return np.log(np.maximum(ns, 2.0)) ** b / ns ** (1.0 / a0 + 1.0)


def loglog_slope(ns, values) -> float:
    ns = np.asarray(ns, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = v > 0
    return float(np.polyfit(np.log(ns[keep]), np.log(v[keep]), 1)[0])


# ------------------------------------------------------------ distortion


@dataclass(frozen=True)
class DistortionReport:
    per_column: np.ndarray  # index n-1 -> max |J(x)/J(y) - 1| on column n
    min_log_jacobian: np.ndarray

    @property
    def d_hat(self) -> float:
        return float(self.per_column.max())


def check_distortion(path: NoisePath, anchor: int, height: int, n_pairs: int = 64,
                     seed: int = 0, separation: float | None = None) -> DistortionReport:
    """Empirical distortion of the full-return map on columns 1..height.

    Pairs are uniform in the column, or at relative ``separation`` of the
    column width when given. The Jacobian is accumulated in log space.
    """
    if height < 1:
        raise ValueError("height must be >= 1")
    part = build_partition(path, anchor, height, check=False)
    alphas = path.params(anchor, height)
    rng = np.random.default_rng(seed)
    worst = np.zeros(height)
    jmin = np.zeros(height)
    for n in range(1, height + 1):
        lo, hi = part.xprime[n], part.xprime[n - 1]
        w = hi - lo
        if separation is None:
            u, v = rng.random(n_pairs), rng.random(n_pairs)
        else:
            u = rng.random(n_pairs) * (1.0 - separation)
            v = u + separation
        x = lo + w * np.clip(u, 1e-12, 1.0)
        y = lo + w * np.clip(v, 1e-12, 1.0)
        lx = log_jacobian(alphas[:n], x)
        ly = log_jacobian(alphas[:n], y)
        worst[n - 1] = float(np.max(np.abs(np.expm1(lx - ly))))
        jmin[n - 1] = float(min(lx.min(), ly.min()))
    return DistortionReport(worst, jmin)


def return_map_jacobian(path: NoisePath, index: int, x, n_returns: int) -> np.ndarray:
    """log of the derivative of the n-fold full-return map at base points x."""
    out = []
    for x0 in np.atleast_1d(np.asarray(x, dtype=float)):
        i, y, total = int(index), float(x0), 0.0
        for _ in range(n_returns):
            n, y_next = first_return(path, i, y)
            total += float(log_jacobian(path.params(i, n), y))
            i += n
            y = y_next
        out.append(total)
    return np.asarray(out)


def tail_envelope(path: NoisePath, height: int) -> tuple[float, float]:
    """Bounds on m{R > height} from the constant paths."""
    lo, hi = envelope(path.dist.alpha0, path.dist.alpha1, height)
    return 0.5 * lo, 0.5 * hi
