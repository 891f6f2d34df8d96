"""Quenched future and past correlations by operator pushforward.

Future:  int (phi o f^n_omega) psi dmu_omega - int phi dmu_{sigma^n omega} int psi dmu_omega
Past:    the same with omega replaced by sigma^{-n} omega.

With h_{sigma^n omega} taken as the n-step push of h_omega, both reduce to
integrating phi against the push of the centred signed density (psi - E psi) h.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels as K
from .lsv import FiberDensity, FiberGrid, make_grid, push_masses
from .noise import NoisePath
from .series import DecayFit, InsufficientPointsError, TailSeries, fit_decay
from .transfer import equivariant_density, push_sweep

__all__ = [
    "Observable", "constant", "identity", "power", "cosine", "bump", "BUILTINS",
    "future_corr", "future_corr_series", "past_corr", "past_corr_series",
    "pushforward_distance", "mc_future_corr", "fit_decay", "DecayFit",
    "TailSeries", "InsufficientPointsError",
]


@dataclass(frozen=True)
class Observable:
    name: str
    func: Callable[[np.ndarray], np.ndarray]
    holder: float | None  # None: bounded only

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))

    def __add__(self, other: "Observable") -> "Observable":
        eta = None if None in (self.holder, other.holder) else min(self.holder, other.holder)
        return Observable(f"({self.name}+{other.name})", lambda x: self(x) + other(x), eta)

    def scale(self, c: float) -> "Observable":
        return Observable(f"{c}*{self.name}", lambda x: c * self(x), self.holder)


def constant(c: float = 1.0) -> Observable:
    return Observable(f"const{c}", lambda x: np.full_like(x, c), 1.0)


identity = Observable("identity", lambda x: x, 1.0)


def power(eta: float) -> Observable:
    if not 0.0 < eta <= 1.0:
        raise ValueError("exponent must lie in (0, 1]")
    return Observable(f"power{eta}", lambda x: x**eta, eta)


cosine = Observable("cosine", lambda x: np.cos(2.0 * np.pi * x), 1.0)


def _bump(x):
    t = 4.0 * (x - 0.5)  # support (1/4, 3/4) <-> |t| < 1
    out = np.zeros_like(x)
    inside = np.abs(t) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
    return out


bump = Observable("bump", _bump, 1.0)

BUILTINS = {"identity": identity, "cosine": cosine, "bump": bump,
            "power0.5": power(0.5), "one": constant(1.0)}


def _centred(grid: FiberGrid, h: FiberDensity, psi: Observable) -> np.ndarray:
    psi_avg = grid.cell_average(psi)
    g = psi_avg * h.mass
    return g - g.sum() * h.mass


def future_corr_series(path: NoisePath, phi: Observable, psi: Observable, ns, at_index: int = 0,
                       n_pullback: int = 200, grid: FiberGrid | None = None,
                       h: FiberDensity | None = None) -> TailSeries:
    """Future correlations for every n in ``ns`` from one push sweep."""
    grid = make_grid() if grid is None else grid
    h = equivariant_density(path, at_index, n_pullback, grid) if h is None else h
    ns = np.asarray(ns, dtype=np.int64)
    if np.any(ns < 0):
        raise ValueError("n must be >= 0")
    phi_avg = grid.cell_average(phi)
    got = {n: float(np.dot(phi_avg, m))
           for n, m in push_sweep(path, grid, _centred(grid, h, psi), at_index, int(ns.max()), ns)}
    return TailSeries(ns, np.array([got[int(n)] for n in ns]))


def future_corr(path: NoisePath, phi: Observable, psi: Observable, n: int, at_index: int = 0,
                **kw) -> float:
    return float(future_corr_series(path, phi, psi, [n], at_index, **kw).values[0])


def past_corr(path: NoisePath, phi: Observable, psi: Observable, n: int, at_index: int = 0,
              n_pullback: int = 200, grid: FiberGrid | None = None) -> float:
    """Correlation over the n steps that end at ``at_index``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    grid = make_grid() if grid is None else grid
    start = at_index - n
    h = equivariant_density(path, start, n_pullback, grid)
    m = _centred(grid, h, psi)
    for a in path.params(start, n):
        m = push_masses(a, grid, m)
    return float(np.dot(grid.cell_average(phi), m))


def past_corr_series(path: NoisePath, phi: Observable, psi: Observable, ns, at_index: int = 0,
                     n_pullback: int = 200, grid: FiberGrid | None = None) -> TailSeries:
    grid = make_grid() if grid is None else grid
    ns = np.asarray(ns, dtype=np.int64)
    vals = [past_corr(path, phi, psi, int(n), at_index, n_pullback, grid) for n in ns]
    return TailSeries(ns, np.array(vals))


def pushforward_distance(path: NoisePath, d: FiberDensity, d2: FiberDensity, ns,
                         from_index: int = 0) -> TailSeries:
    """L1 distance between the n-step pushes of two densities, n in ``ns``."""
    if d.grid is not d2.grid and not np.array_equal(d.grid.edges, d2.grid.edges):
        raise ValueError("densities live on different grids")
    ns = np.asarray(ns, dtype=np.int64)
    got = {n: float(np.abs(m).sum())
           for n, m in push_sweep(path, d.grid, d.mass - d2.mass, from_index, int(ns.max()), ns)}
    return TailSeries(ns, np.array([got[int(n)] for n in ns]))


def sample_density(h: FiberDensity, n_points: int, seed: int = 0) -> np.ndarray:
    """Draw points from the piecewise-constant density."""
    rng = np.random.default_rng(seed)
    cells = rng.choice(h.grid.n_cells, size=n_points, p=h.mass / h.mass.sum())
    e = h.grid.edges
    return e[cells] + rng.random(n_points) * (e[cells + 1] - e[cells])


def mc_future_corr(path: NoisePath, phi: Observable, psi: Observable, n: int, at_index: int = 0,
                   n_points: int = 10**7, h: FiberDensity | None = None, n_pullback: int = 200,
                   seed: int = 0, chunk: int = 1 << 20) -> tuple[float, float]:
    """Orbit-average estimate of the future correlation and its standard error."""
    if h is None:
        h = equivariant_density(path, at_index, n_pullback)
    s_pp = s_p = s_q = s_pp2 = 0.0
    vals = []
    done = 0
    j = 0
    while done < n_points:
        m = min(chunk, n_points - done)
        x = sample_density(h, m, seed * 1_000_003 + j)
        y = K.orbit_endpoints(*path.kernel_args(), int(at_index) + path.offset, x, int(n))
        a, b = phi(y), psi(x)
        s_pp += float(np.sum(a * b))
        s_p += float(np.sum(a))
        s_q += float(np.sum(b))
        vals.append((a - a.mean()) * (b - b.mean()))
        done += m
        j += 1
    corr = s_pp / done - (s_p / done) * (s_q / done)
    v = np.concatenate(vals)
    s_pp2 = float(np.std(v))
    return corr, s_pp2 / math.sqrt(done)
