"""The LSV map family, its left-branch inverse and the Ulam-type transfer step.

    f_a(x) = x (1 + (2x)^a)   on [0, 1/2]
    f_a(x) = 2x - 1           on (1/2, 1]

The break point x = 1/2 belongs to the left branch, so f_a(1/2) = 1.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K


class GridWarning(UserWarning):
    """Pre-images of target cells span too many source cells (grid too coarse)."""


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"map parameter must lie in (0, 1), got {alpha}")
    return alpha


def _check_unit(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"{name} must lie in [0, 1]")
    return arr


def apply(alpha: float, x):
    """Evaluate f_alpha at a point or an array of points."""
    alpha = check_alpha(alpha)
    arr = _check_unit(x)
    out = np.where(arr <= 0.5, arr * (1.0 + (2.0 * arr) ** alpha), 2.0 * arr - 1.0)
    return float(out) if out.ndim == 0 else out


def derivative(alpha: float, x):
    """f_alpha'(x); at x = 1/2 this is the left-branch limit."""
    alpha = check_alpha(alpha)
    arr = _check_unit(x)
    out = np.where(arr <= 0.5, 1.0 + (alpha + 1.0) * (2.0 * arr) ** alpha, 2.0)
    return float(out) if out.ndim == 0 else out


def invert_left(alpha: float, y):
    """The unique x in [0, 1/2] with f_alpha(x) = y."""
    alpha = check_alpha(alpha)
    arr = _check_unit(y, "y")
    if arr.ndim == 0:
        return K.invert_left(alpha, float(arr))
    return K.invert_left_array(alpha, np.ascontiguousarray(arr.ravel())).reshape(arr.shape)


def compose(alphas, x, branches=None):
    """Apply f_{alphas[-1]} o ... o f_{alphas[0]} to x.

    ``branches`` optionally forces the branch at each step ('L' or 'R'),
    which is how closed-interval endpoint images are evaluated.
    """
    y = np.asarray(x, dtype=float).copy()
    for j, a in enumerate(alphas):
        if branches is None:
            y = np.where(y <= 0.5, y * (1.0 + (2.0 * y) ** a), 2.0 * y - 1.0)
        elif branches[j] == "L":
            y = y * (1.0 + (2.0 * y) ** a)
        else:
            y = 2.0 * y - 1.0
    return float(y) if y.ndim == 0 else y


def log_jacobian(alphas, x):
    """log of the derivative of the composed map along the orbit of x."""
    y = np.asarray(x, dtype=float).copy()
    total = np.zeros_like(y)
    for a in alphas:
        left = y <= 0.5
        total += np.log(np.where(left, 1.0 + (a + 1.0) * (2.0 * y) ** a, 2.0))
        y = np.where(left, y * (1.0 + (2.0 * y) ** a), 2.0 * y - 1.0)
    return float(total) if total.ndim == 0 else total


# ------------------------------------------------------------------ grids


@dataclass(eq=False)
class FiberGrid:
    """Cell edges on [0, 1]; treated as immutable once built."""

    edges: np.ndarray
    _plans: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=float)
        if e.ndim != 1 or e.size < 2:
            raise ValueError("need at least one cell")
        if e[0] != 0.0 or e[-1] != 1.0:
            raise ValueError("edges must start at 0 and end at 1")
        if np.any(np.diff(e) <= 0.0):
            raise ValueError("edges must be strictly increasing")
        e.setflags(write=False)
        self.edges = e

    @property
    def n_cells(self) -> int:
        return self.edges.size - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    def cell_average(self, func, order: int = 4) -> np.ndarray:
        """Gauss-Legendre average of ``func`` over every cell."""
        nodes, weights = np.polynomial.legendre.leggauss(order)
        lo, hi = self.edges[:-1], self.edges[1:]
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        acc = np.zeros(self.n_cells)
        for t, w in zip(nodes, weights):
            acc += w * np.asarray(func(mid + half * t), dtype=float)
        return 0.5 * acc

    def plan(self, alpha: float):
        """Interpolation plan of the two inverse branches, cached per alpha."""
        p = self._plans.get(alpha)
        if p is None:
            p = _TransferPlan(self, alpha)
            if len(self._plans) > 64:
                self._plans.clear()
            self._plans[alpha] = p
        return p


def make_grid(n_cells: int = 8192, x_min: float = 1e-8, x_split: float = 1e-2,
              frac_below: float = 0.25) -> FiberGrid:
    """Geometric cells from ``x_min`` upward, uniform cells beyond the point
    where the geometric width reaches the uniform width.

    The geometric ratio puts ``frac_below`` of all cells under ``x_split``;
    the first cell is [0, x_min].
    """
    if n_cells < 16:
        raise ValueError("grid too small")
    n_low = max(int(round(frac_below * n_cells)) - 1, 1)
    ratio = (x_split / x_min) ** (1.0 / n_low)
    # continue geometrically until a cell is as wide as the uniform remainder
    geo = [0.0, x_min]
    while True:
        x = geo[-1]
        n_left = n_cells - (len(geo) - 1)
        h = (1.0 - x) / n_left
        if x * (ratio - 1.0) >= h or n_left <= 1:
            break
        geo.append(x * ratio)
    x = geo[-1]
    n_left = n_cells - (len(geo) - 1)
    # keep 1/2 as an edge so no cell straddles the branch break
    n_mid = max(int(round(n_left * (0.5 - x) / (1.0 - x))), 1)
    mid = np.linspace(x, 0.5, n_mid + 1)[1:]
    right = np.linspace(0.5, 1.0, n_left - n_mid + 1)[1:]
    return FiberGrid(np.concatenate([np.asarray(geo), mid, right]))


def uniform_grid(n_cells: int) -> FiberGrid:
    return FiberGrid(np.linspace(0.0, 1.0, n_cells + 1))


class _TransferPlan:
    """Pre-images of every edge under both branches as (index, weight) pairs."""

    def __init__(self, grid: FiberGrid, alpha: float):
        e = grid.edges
        left = K.invert_left_array(alpha, np.ascontiguousarray(e))
        left[-1] = 0.5
        right = 0.5 * (e + 1.0)
        self.left = self._locate(e, left)
        self.right = self._locate(e, right)
        # source cells under the pre-image of each target cell (diagnostic)
        self.max_straddle = int(max(np.max(np.diff(idx)) + 1
                                    for idx, _ in (self.left, self.right)))

    @staticmethod
    def _locate(e, pts):
        idx = np.clip(np.searchsorted(e, pts, side="right") - 1, 0, e.size - 2)
        w = (pts - e[idx]) / (e[idx + 1] - e[idx])
        return idx, np.clip(w, 0.0, 1.0)

    def push(self, masses: np.ndarray) -> np.ndarray:
        cum = np.empty(masses.size + 1)
        cum[0] = 0.0
        np.cumsum(masses, out=cum[1:])
        out = np.zeros(masses.size)
        for idx, w in (self.left, self.right):
            at = cum[idx] + w * masses[idx]
            out += np.diff(at)
        return out


def push_masses(alpha: float, grid: FiberGrid, masses: np.ndarray,
                max_straddle: int | None = 16) -> np.ndarray:
    """Pushforward of (possibly signed) cell masses by f_alpha, projected back
    onto the grid. Mass of a target cell is the source mass lying over its
    exact pre-image under either branch."""
    plan = grid.plan(float(alpha))
    if max_straddle is not None and plan.max_straddle > max_straddle:
        warnings.warn(
            f"a target cell pulls back over {plan.max_straddle} source cells"
            f" (> {max_straddle}); grid too coarse",
            GridWarning, stacklevel=2)
    return plan.push(np.asarray(masses, dtype=float))


@dataclass(eq=False)
class FiberDensity:
    """Piecewise-constant probability density stored as cell masses."""

    grid: FiberGrid
    mass: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=float)
        if m.shape != (self.grid.n_cells,):
            raise ValueError("one mass per cell required")
        if np.any(m < 0.0):
            raise ValueError("negative cell mass")
        if abs(m.sum() - 1.0) > 1e-12:
            raise ValueError(f"masses sum to {m.sum()!r}, not 1")
        self.mass = m

    @classmethod
    def uniform(cls, grid: FiberGrid) -> "FiberDensity":
        return cls(grid, grid.widths / grid.widths.sum())

    @classmethod
    def from_function(cls, grid: FiberGrid, func) -> "FiberDensity":
        m = grid.cell_average(func) * grid.widths
        return cls(grid, m / m.sum())

    @classmethod
    def normalized(cls, grid: FiberGrid, masses) -> "FiberDensity":
        m = np.clip(np.asarray(masses, dtype=float), 0.0, None)
        return cls(grid, m / m.sum())

    @property
    def values(self) -> np.ndarray:
        """Density value on each cell."""
        return self.mass / self.grid.widths

    def integrate(self, func) -> float:
        """Integral of func against this density (cell averages of func)."""
        return float(np.dot(self.grid.cell_average(func), self.mass))

    def l1(self, other: "FiberDensity") -> float:
        return float(np.abs(self.mass - other.mass).sum())


def transfer_step(alpha: float, d: FiberDensity, max_straddle: int | None = 16) -> FiberDensity:
    """One application of the transfer operator of f_alpha to ``d``."""
    alpha = check_alpha(alpha)
    m = push_masses(alpha, d.grid, d.mass, max_straddle)
    m = np.clip(m, 0.0, None)
    return FiberDensity(d.grid, m / m.sum())
