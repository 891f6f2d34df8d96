"""Alternating stopping times and the simultaneous return time T.

Both coordinates are driven by the same path. tau_1 is the first time
>= l0 at which x is in the base (1/2, 1]; tau_2 is the first time >= tau_1 + l0
at which x' is; the coordinates then keep alternating. T is the first tau_i
with i >= 2 at which both coordinates sit in the base.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .noise import NoisePath, ParamDistribution, path_keys
from .series import DecayFit, TailSeries, fit_decay


class UndersampledError(RuntimeError):
    """Too few uncensored samples in the tail to trust the estimate."""


@dataclass(frozen=True)
class CouplingRun:
    seed: int
    x: float
    xp: float
    ell0: int
    horizon: int
    taus: tuple[int, ...]
    T: int | None  # None when censored at the horizon

    @property
    def censored(self) -> bool:
        return self.T is None

    def validate(self) -> None:
        t = self.taus
        if t and t[0] < self.ell0:
            raise AssertionError("tau_1 below l0")
        for a, b in zip(t, t[1:]):
            if b < a + self.ell0:
                raise AssertionError("tau gap below l0")
        if self.T is not None and (len(t) < 2 or self.T != t[-1]):
            raise AssertionError("T must be the last recorded tau (i >= 2)")


def simulate_T(path: NoisePath, x: float, xp: float, ell0: int = 1, horizon: int = 10_000,
               start: int = 0, max_taus: int = 1 << 16) -> CouplingRun:
    if not (0.5 < x <= 1.0 and 0.5 < xp <= 1.0):
        raise ValueError("base points must lie in (1/2, 1]")
    if ell0 < 1 or horizon < ell0:
        raise ValueError("need l0 >= 1 and horizon >= l0")
    taus = np.zeros(max_taus, dtype=np.int64)
    T, ntau = K.coupling_run(*path.kernel_args(), int(start) + path.offset, float(x),
                             float(xp), int(ell0), int(horizon), taus)
    return CouplingRun(path.seed, float(x), float(xp), int(ell0), int(horizon),
                       tuple(int(v) for v in taus[: min(ntau, max_taus)]),
                       None if T < 0 else int(T))


def tau_sequence_ok(run: CouplingRun, path: NoisePath, start: int = 0) -> bool:
    """Recheck the recorded taus against a plain orbit of both coordinates."""
    n = run.T if run.T is not None else run.horizon
    alphas = path.params(start, n)
    y, yp = run.x, run.xp
    inb = np.zeros((n + 1, 2), dtype=bool)
    for j, a in enumerate(alphas, start=1):
        y = y * (1 + (2 * y) ** a) if y <= 0.5 else 2 * y - 1
        yp = yp * (1 + (2 * yp) ** a) if yp <= 0.5 else 2 * yp - 1
        inb[j] = (y > 0.5, yp > 0.5)
    expect, last, i = [], 0, 0
    for j in range(1, n + 1):
        if j < (run.ell0 if i == 0 else last + run.ell0):
            continue
        if inb[j, i % 2]:
            expect.append(j)
            last, i = j, i + 1
            if i >= 2 and inb[j].all():
                break
    return tuple(expect[: len(run.taus)]) == run.taus


def sample_T(dist: ParamDistribution, n_samples: int, seed: int = 0, ell0: int = 1,
             horizon: int = 10_000, first: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """T (-1 when censored) and tau_2 - tau_1 - l0 for runs first..first+n-1.

    Run i uses the path NoisePath(task_seed(seed, i)) and a base pair drawn
    from a stream tied to that path, so results do not depend on batching.
    """
    keys = path_keys(seed, n_samples, first)
    xs, xps = K.pair_points(keys)
    return K.coupling_batch(dist.code, dist.alpha0, dist.alpha1, dist.p1, keys, xs, xps,
                            int(ell0), int(horizon))


def survival(T: np.ndarray, n_grid, horizon: int) -> np.ndarray:
    """P{T > n}; censored runs (T = -1) count as exceeding every n <= horizon."""
    n_grid = np.asarray(n_grid, dtype=np.int64)
    if np.any(n_grid > horizon):
        raise ValueError("grid extends beyond the horizon")
    t = np.where(T < 0, horizon + 1, T)
    st = np.sort(t)
    return 1.0 - np.searchsorted(st, n_grid, side="right") / t.size


def coupling_tail(dist: ParamDistribution, n_grid, n_samples: int = 10_000, ell0: int = 1,
                  seed: int = 0, horizon: int | None = None, min_tail: int = 100) -> TailSeries:
    """Empirical P{T > n} over paths and uniform base pairs.

    ``extra`` carries the raw T, the tau_2 - tau_1 - l0 gaps, the horizon and
    the number of censored runs.
    """
    if n_samples < 10_000:
        raise ValueError("need at least 10^4 samples")
    n_grid = np.asarray(n_grid, dtype=np.int64)
    horizon = int(10 * n_grid.max()) if horizon is None else int(horizon)
    T, gap = sample_T(dist, n_samples, seed, ell0, horizon)
    n_max = int(n_grid.max())
    beyond = int(np.sum(T > n_max))
    if beyond < min_tail:
        raise UndersampledError(f"only {beyond} uncensored samples beyond n = {n_max}")
    return TailSeries(n_grid, survival(T, n_grid, horizon),
                      {"horizon": horizon, "T": T, "gap": gap, "censored": int(np.sum(T < 0)),
                       "n_samples": n_samples})


def tail_fit(series: TailSeries, window=None) -> DecayFit:
    """Log-log fit of the survival; the horizon itself never enters."""
    hi = series.extra.get("horizon", np.inf) - 1
    lo, top = (series.n.min(), series.n.max()) if window is None else window
    return fit_decay(series, (lo, min(top, hi)), noise_floor=0.0)


def rhat_tail(dist: ParamDistribution, n_grid, n_samples: int = 200, seed: int = 1,
              kmax: int | None = None) -> np.ndarray:
    """Annealed m{R_hat > n} = sum_{k > n} m{R > k} = (1/2) sum_{k > n} E x_k.

    E x_k from backward passes; beyond ``kmax`` the tail is extended with the
    k^{-1/a0} shape of the last value.
    """
    n_grid = np.asarray(n_grid, dtype=np.int64)
    kmax = int(10 * n_grid.max()) if kmax is None else int(kmax)
    acc = np.zeros(kmax + 1)
    for key in path_keys(seed, n_samples):
        x, _ = K.annealed_pass(dist.code, dist.alpha0, dist.alpha1, dist.p1, key, kmax)
        acc[1:] += x[1:]
    ex = acc / n_samples
    s = 1.0 / dist.alpha0
    tail_beyond = ex[kmax] * kmax / (s - 1.0)
    csum = np.cumsum(ex[::-1])[::-1]  # csum[k] = sum_{j >= k}^{kmax}
    return 0.5 * (csum[n_grid + 1] + tail_beyond)

