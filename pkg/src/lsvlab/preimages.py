"""Backward recursion for the pre-images of 1/2 along a noise path.

Index bookkeeping. Let the path be positioned so that omega sits at
``base``. Then

    x_1(omega) = 1/2,
    x_l(omega) = L_{alpha(base)}( x_{l-1}(sigma omega) ),

where L_a is the left-branch inverse. Unrolling, x_l(omega) seeds 1/2 at the
far end and applies L with the parameters at base + l - 2, ..., base + 1,
base in that order; it depends on exactly those l - 1 coordinates.

One such pass produces every intermediate value, and the value after
k - 1 inversions is x_k at the path positioned at base + l - k. That is the
row convention of :class:`PreimageTable`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .lsv import check_alpha
from .noise import NoisePath, signature


@dataclass(frozen=True)
class PreimageTable:
    """Rows k = 1..length of one backward pass (index 0 is unused).

    ``x[k]`` is x_k with omega at ``anchor + length - k``;
    ``xprime[k]`` is x'_k with omega at ``anchor + length - k - 1``, so that
    ``xprime[k] = (x[k] + 1) / 2`` for k >= 2 and f maps it onto x[k].
    """

    length: int
    anchor: int
    x: np.ndarray
    xprime: np.ndarray

    def row_index(self, k: int) -> int:
        """Path index at which omega sits for row k of ``x``."""
        return self.anchor + self.length - k


def preimage_sequence(path: NoisePath, base_index: int, ell: int) -> PreimageTable:
    if ell < 1:
        raise ValueError("length must be >= 1")
    alphas = path.params(base_index, ell - 1)
    x = K.backward_table(alphas)
    xp = np.empty_like(x)
    xp[0] = 1.0
    xp[1:] = 0.5 * (x[1:] + 1.0)
    xp[1] = 0.75
    return PreimageTable(ell, int(base_index), x, xp)


def x_at(path: NoisePath, base_index: int, ell: int) -> float:
    """x_ell(omega) with omega at ``base_index``."""
    if ell < 1:
        raise ValueError("length must be >= 1")
    return float(K.backward_last(path.params(base_index, ell - 1)))


def return_tail(path: NoisePath, base_index: int, ell: int) -> float:
    """Lebesgue measure of {R_omega > ell} in (1/2, 1], i.e. x_ell(sigma omega) / 2."""
    return 0.5 * x_at(path, base_index + 1, ell)


_SEQ_CACHE: dict[float, np.ndarray] = {}


def constant_sequence(alpha: float, kmax: int) -> np.ndarray:
    """x_k for the constant path at ``alpha``, k = 0..kmax (entry 0 is NaN).

    Cached per alpha; a longer request replaces the stored sequence.
    """
    alpha = check_alpha(alpha)
    kmax = max(int(kmax), 1)
    x = _SEQ_CACHE.get(alpha)
    if x is None or x.size <= kmax:
        x = K.constant_sequence(alpha, kmax)
        x.setflags(write=False)
        if len(_SEQ_CACHE) > 8:
            _SEQ_CACHE.clear()
        _SEQ_CACHE[alpha] = x
    return x[: kmax + 1]


def deterministic_c(alpha: float, k) -> np.ndarray | float:
    """c_k = x_k(constant alpha) * k^(1/alpha); tends to (1/2) alpha^(-1/alpha)."""
    alpha = check_alpha(alpha)
    kk = np.asarray(k, dtype=np.int64)
    if np.any(kk < 1):
        raise ValueError("k must be >= 1")
    x = constant_sequence(alpha, int(kk.max()))
    out = x[kk] * kk.astype(float) ** (1.0 / alpha)
    return float(out) if out.ndim == 0 else out


def deterministic_limit(alpha: float) -> float:
    return 0.5 * alpha ** (-1.0 / alpha)


def envelope(alpha0: float, alpha1: float, ell: int) -> tuple[float, float]:
    """(x_ell at constant alpha0, x_ell at constant alpha1): lower and upper bounds."""
    return (float(constant_sequence(alpha0, ell)[ell]),
            float(constant_sequence(alpha1, ell)[ell]))


def one_step_terms(table: PreimageTable, path: NoisePath, alpha0: float):
    """Per-row increments 1/x_k^a0 - 1/x_{k-1}^a0 (k = 2..l) with the lower and
    upper one-step bounds evaluated at the row's own parameter."""
    k = np.arange(2, table.length + 1)
    alphas = path.params(table.anchor, table.length - 1)
    a = alphas[table.length - k]
    xk = table.x[k]
    inc = xk ** (-alpha0) - table.x[k - 1] ** (-alpha0)
    base = 2.0 * xk
    r0 = alpha0 * 2.0**alpha0
    upper = r0 * base ** (a - alpha0)
    lower = upper - 0.5 * (1.0 + alpha0) * r0 * base ** (2.0 * a - alpha0)
    return inc, lower, upper


def normalized_series(path: NoisePath, base_index: int, ells) -> list[tuple[int, float, float]]:
    """Rows (ell, x_ell, ell^(1/a0) x_ell / (log ell)^(q/a0)) for CSV output."""
    a0 = path.dist.alpha0
    q = signature(path.dist).q
    rows = []
    for ell in ells:
        x = x_at(path, base_index, int(ell))
        denom = math.log(ell) ** (q / a0) if q > 0 else 1.0
        rows.append((int(ell), x, ell ** (1.0 / a0) * x / denom))
    return rows
