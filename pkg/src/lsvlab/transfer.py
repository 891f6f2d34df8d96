"""Quenched transfer operators along a noise path and equivariant densities."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from . import _kernels as K
from .lsv import FiberDensity, FiberGrid, make_grid, push_masses
from .noise import NoisePath


def push_signed(path: NoisePath, grid: FiberGrid, masses: np.ndarray, from_index: int,
                n: int, max_straddle: int | None = 16) -> np.ndarray:
    """n-step quenched pushforward of (possibly signed) cell masses."""
    if n < 0:
        raise ValueError("n must be >= 0")
    m = np.asarray(masses, dtype=float)
    for a in path.params(from_index, n):
        m = push_masses(a, grid, m, max_straddle)
    return m


def quenched_push(path: NoisePath, d: FiberDensity, from_index: int, n: int,
                  max_straddle: int | None = 16) -> FiberDensity:
    """Compose n transfer steps with the parameters at from_index, ..., from_index + n - 1."""
    m = push_signed(path, d.grid, d.mass, from_index, n, max_straddle)
    return FiberDensity.normalized(d.grid, m)


def push_sweep(path: NoisePath, grid: FiberGrid, masses: np.ndarray, from_index: int,
               n_max: int, every=None):
    """Yield (n, masses) for n = 0..n_max (or only n in ``every``) in one sweep."""
    wanted = None if every is None else set(int(v) for v in every)
    m = np.asarray(masses, dtype=float)
    alphas = path.params(from_index, n_max)
    if wanted is None or 0 in wanted:
        yield 0, m
    for j, a in enumerate(alphas, start=1):
        m = push_masses(a, grid, m)
        if wanted is None or j in wanted:
            yield j, m


def equivariant_density(path: NoisePath, at_index: int, n_pullback: int = 200,
                        grid: FiberGrid | None = None) -> FiberDensity:
    """h_omega estimated by pushing Lebesgue from ``at_index - n_pullback``."""
    if n_pullback < 1:
        raise ValueError("n_pullback must be >= 1")
    grid = make_grid() if grid is None else grid
    return quenched_push(path, FiberDensity.uniform(grid), at_index - n_pullback, n_pullback)


def cesaro_density(path: NoisePath, at_index: int, n: int,
                   grid: FiberGrid | None = None) -> FiberDensity:
    """(1/n) sum_{j<n} of the j-step pushes of normalized Lebesgue on (1/2, 1]
    that end at ``at_index``, via R <- P(R) + b."""
    if n < 1:
        raise ValueError("n must be >= 1")
    grid = make_grid() if grid is None else grid
    b = np.where(grid.edges[:-1] >= 0.5, grid.widths, 0.0)
    b /= b.sum()
    r = np.zeros(grid.n_cells)
    for a in path.params(at_index - n, n):
        r = push_masses(a, grid, r) + b
    return FiberDensity.normalized(grid, r / n)


def density_sup(d: FiberDensity, region=(0.0, 1.0)) -> float:
    """Largest cell-average density among cells inside ``region``."""
    lo, hi = region
    if not 0.0 <= lo < hi <= 1.0:
        raise ValueError("region must be a subinterval of [0, 1]")
    e = d.grid.edges
    inside = (e[:-1] >= lo - 1e-15) & (e[1:] <= hi + 1e-15)
    if not inside.any():
        raise ValueError("region contains no whole cell")
    return float(d.values[inside].max())


def l1_distance(d: FiberDensity, other: FiberDensity) -> float:
    if d.grid is not other.grid and not np.array_equal(d.grid.edges, other.grid.edges):
        raise ValueError("densities live on different grids")
    return d.l1(other)


def coarsen(masses: np.ndarray, grid: FiberGrid, edges: np.ndarray) -> np.ndarray:
    """Sum cell masses into the coarser partition ``edges`` (edges must be grid edges)."""
    idx = np.searchsorted(grid.edges, edges)
    if not np.allclose(grid.edges[idx], edges, rtol=0, atol=1e-15):
        raise ValueError("coarse edges must be a subset of the grid edges")
    cum = np.concatenate([[0.0], np.cumsum(masses)])
    return np.diff(cum[idx])


def coarse_edges(grid: FiberGrid, n_bins: int) -> np.ndarray:
    """About ``n_bins`` bins made of whole grid cells, equal in cell count."""
    picks = np.unique(np.linspace(0, grid.n_cells, n_bins + 1).round().astype(int))
    return grid.edges[picks]


def orbit_histogram(path: NoisePath, grid: FiberGrid, start: int, n_orbits: int,
                    burn: int, nsteps: int, seed: int = 0) -> np.ndarray:
    """Empirical cell masses of orbit points (oracle for densities)."""
    rng = np.random.default_rng(seed)
    x0 = rng.random(n_orbits)
    return K.orbit_histogram(*path.kernel_args(), int(start) + path.offset, x0,
                             int(burn), int(nsteps), np.ascontiguousarray(grid.edges))


def equivariance_residual(path: NoisePath, at_index: int, n_pullback: int,
                          grid: FiberGrid | None = None) -> float:
    """|| push(h_omega, 1) - h_{sigma omega} ||_1 with both from the same pullback length."""
    grid = make_grid() if grid is None else grid
    h = equivariant_density(path, at_index, n_pullback, grid)
    h1 = equivariant_density(path, at_index + 1, n_pullback, grid)
    return quenched_push(path, h, at_index, 1).l1(h1)


def write_density_csv(d: FiberDensity, dest) -> None:
    dest = Path(dest)
    with dest.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell_left", "cell_right", "mass"])
        e = d.grid.edges
        for i in range(d.grid.n_cells):
            w.writerow([format(e[i], ".17g"), format(e[i + 1], ".17g"), format(d.mass[i], ".17g")])
