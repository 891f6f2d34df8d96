"""The A_k sequence, its expectations, partial sums and the sharp asymptotics.

With the finite-k constants c_k of the two constant paths,

    A_k(alpha) = r0 B0_k^(alpha - a0) - (1 + a0)/2 r0 B1_k^(2 alpha - a0),
    r0 = a0 2^a0,  B0_k = 2 c_k(a0) / k^(1/a0),  B1_k = 2 c_k(a1) / k^(1/a1),

for k >= 2 and A_1 = 0. Note that B_k = 2 x_k of the constant path, so every
base lies in (0, 1] and |A_k| <= r0 for all k.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import _kernels as K
from .noise import NoisePath, ParamDistribution, expect, path_keys, signature
from .preimages import constant_sequence, deterministic_c, x_at


@dataclass(frozen=True)
class AkSpec:
    dist: ParamDistribution
    k: int
    ck0: float
    ck1: float

    @property
    def r0(self) -> float:
        return self.dist.alpha0 * 2.0**self.dist.alpha0

    @property
    def bases(self) -> tuple[float, float]:
        a0, a1 = self.dist.alpha0, self.dist.alpha1
        return (2.0 * self.ck0 / self.k ** (1.0 / a0), 2.0 * self.ck1 / self.k ** (1.0 / a1))


def make_ak_spec(dist: ParamDistribution, k: int) -> AkSpec:
    if k < 1:
        raise ValueError("k must be >= 1")
    return AkSpec(dist, int(k), deterministic_c(dist.alpha0, k), deterministic_c(dist.alpha1, k))


def x_part(spec: AkSpec, alpha):
    b0, _ = spec.bases
    return spec.r0 * b0 ** (np.asarray(alpha) - spec.dist.alpha0)


def y_part(spec: AkSpec, alpha):
    _, b1 = spec.bases
    return 0.5 * (1.0 + spec.dist.alpha0) * spec.r0 * b1 ** (2.0 * np.asarray(alpha) - spec.dist.alpha0)


def a_k(spec: AkSpec, alpha):
    """A_k at parameter ``alpha`` (A_1 = 0)."""
    alpha = np.asarray(alpha, dtype=float)
    if spec.k == 1:
        out = np.zeros_like(alpha)
    else:
        a0 = spec.dist.alpha0
        b0, b1 = spec.bases
        r0 = spec.r0
        out = r0 * np.exp((alpha - a0) * math.log(b0)) \
            - 0.5 * (1.0 + a0) * r0 * np.exp((2.0 * alpha - a0) * math.log(b1))
    return float(out) if out.ndim == 0 else out


def ak_bases(dist: ParamDistribution, kmax: int) -> tuple[np.ndarray, np.ndarray]:
    """(B0_k, B1_k) for k = 0..kmax as 2 x_k of the two constant paths."""
    return (2.0 * constant_sequence(dist.alpha0, kmax),
            2.0 * constant_sequence(dist.alpha1, kmax))


# ------------------------------------------------------ Laplace transforms


def _phi_uniform(w):
    w = np.asarray(w, dtype=float)
    small = np.abs(w) < 1e-8
    safe = np.where(small, 1.0, w)
    return np.where(small, 1.0 - 0.5 * w, -np.expm1(-safe) / safe)


def _phi_quadratic(w):
    w = np.asarray(w, dtype=float)
    small = np.abs(w) < 1e-3
    safe = np.where(small, 1.0, w)
    big = 2.0 * (-np.expm1(-safe) - safe * np.exp(-safe)) / safe**2
    series = 1.0 - 2.0 * w / 3.0 + w**2 / 4.0 - w**3 / 15.0
    return np.where(small, series, big)


def laplace(dist: ParamDistribution, u, c: float = 1.0):
    """E_nu[exp(-(c alpha - alpha0) u)] in closed form.

    Uniform:   e^{-(c-1) a0 u} (1 - e^{-w}) / w
    Quadratic: e^{-(c-1) a0 u} 2 (1 - e^{-w}(w + 1)) / w^2,   w = c (a1 - a0) u
    """
    u = np.asarray(u, dtype=float)
    a0 = dist.alpha0
    lead = np.exp(-(c - 1.0) * a0 * u)
    if dist.kind == "discrete":
        return dist.p1 * lead + dist.p2 * np.exp(-(c * dist.alpha1 - a0) * u)
    w = c * dist.width * u
    if dist.kind == "uniform":
        return lead * _phi_uniform(w)
    return lead * _phi_quadratic(w)


def laplace_leading(dist: ParamDistribution, u, c: float = 1.0):
    """Leading large-u term of ``laplace`` (continuous kinds)."""
    u = np.asarray(u, dtype=float)
    lead = np.exp(-(c - 1.0) * dist.alpha0 * u)
    if dist.kind == "uniform":
        return lead / (dist.width * c * u)
    if dist.kind == "quadratic":
        return lead * 2.0 / (dist.width * c * u) ** 2
    raise ValueError("no leading term for the discrete law")


# ------------------------------------------------------------ expectations


def expected_a_array(dist: ParamDistribution, kmax: int) -> np.ndarray:
    """E_nu A_k for k = 0..kmax (entry 0 NaN, entry 1 zero), closed form."""
    b0, b1 = ak_bases(dist, kmax)
    a0 = dist.alpha0
    r0 = a0 * 2.0**a0
    out = np.empty(kmax + 1)
    out[0] = np.nan
    out[1] = 0.0
    u0 = -np.log(b0[2:])
    u1 = -np.log(b1[2:])
    out[2:] = r0 * laplace(dist, u0, 1.0) - 0.5 * (1.0 + a0) * r0 * laplace(dist, u1, 2.0)
    return out


def expected_x_array(dist: ParamDistribution, kmax: int) -> np.ndarray:
    b0, _ = ak_bases(dist, kmax)
    r0 = dist.alpha0 * 2.0**dist.alpha0
    out = np.full(kmax + 1, np.nan)
    out[2:] = r0 * laplace(dist, -np.log(b0[2:]), 1.0)
    return out


def expected_a(dist: ParamDistribution, k: int, method: str = "closed") -> float:
    """E_nu A_k, by the closed form or by quadrature of A_k against nu."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return 0.0
    if method == "closed":
        return float(expected_a_array(dist, k)[k])
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    spec = make_ak_spec(dist, k)
    u0 = -math.log(spec.bases[0])
    return expect(dist, lambda a: a_k(spec, a), scale=1.0 / max(u0, 1e-300))


def a1_partial_sums(dist: ParamDistribution, ells) -> np.ndarray:
    """S_l = (log l)^q / l * sum_{k=1}^l E A_k for each l in ``ells``."""
    ells = np.asarray(ells, dtype=np.int64)
    if np.any(ells < 2):
        raise ValueError("l must be >= 2")
    q = signature(dist).q
    ea = expected_a_array(dist, int(ells.max()))
    cum = np.cumsum(np.nan_to_num(ea))
    logs = np.log(ells.astype(float))
    return logs**q / ells * cum[ells]


def a1_partial_sum(dist: ParamDistribution, ell: int) -> float:
    return float(a1_partial_sums(dist, [ell])[0])


def expected_a_prime_array(dist: ParamDistribution, kmax: int, c_nu: float | None = None) -> np.ndarray:
    """E_nu A'_k, A'_k = r0 [3 (log k)^(q/a0) / (c k)^(1/a0)]^(alpha - a0)."""
    sig = signature(dist)
    c = sig.c_nu if c_nu is None else c_nu
    a0 = dist.alpha0
    r0 = a0 * 2.0**a0
    k = np.arange(2, kmax + 1, dtype=float)
    log_base = math.log(3.0) + (sig.q / a0) * np.log(np.log(k)) - (np.log(c) + np.log(k)) / a0
    out = np.full(kmax + 1, np.nan)
    out[2:] = r0 * laplace(dist, -log_base, 1.0)
    return out


def a2_partial_sums(dist: ParamDistribution, ells, c_nu: float | None = None) -> np.ndarray:
    ells = np.asarray(ells, dtype=np.int64)
    if np.any(ells < 4):
        raise ValueError("l must be >= 4")
    q = signature(dist).q
    ea = expected_a_prime_array(dist, int(ells.max()), c_nu)
    cum = np.concatenate([[0.0, 0.0], np.cumsum(ea[2:])])  # cum[k] = sum_{j=2}^{k}
    roots = np.floor(np.sqrt(ells)).astype(np.int64)
    m = ells - roots
    return np.log(m.astype(float)) ** q / m * (cum[ells] - cum[roots])


def a2_partial_sum(dist: ParamDistribution, ell: int, c_nu: float | None = None) -> float:
    return float(a2_partial_sums(dist, [ell], c_nu)[0])


# ------------------------------------------------------ sharp asymptotics


def sharp_scale(dist: ParamDistribution, ell: int, c_nu: float | None = None) -> float:
    sig = signature(dist)
    c = sig.c_nu if c_nu is None else c_nu
    return ((math.log(ell) ** sig.q) / (c * ell)) ** (1.0 / dist.alpha0)


def sharp_ratio(path: NoisePath, ell: int, dist: ParamDistribution | None = None,
                base_index: int = 0, c_nu: float | None = None) -> float:
    """x_l(omega) / [(log l)^q / (c(nu) l)]^(1/alpha0)."""
    if ell < 2:
        raise ValueError("l must be >= 2")
    dist = path.dist if dist is None else dist
    return x_at(path, base_index, ell) / sharp_scale(dist, ell, c_nu)


# --------------------------------------------------------------- Hoeffding


@dataclass(frozen=True)
class HoeffdingResult:
    ell: int
    t: float
    empirical: float
    bound: float
    stderr: float
    n_samples: int
    max_abs_ak: float

    @property
    def ok(self) -> bool:
        return self.empirical <= self.bound + 3.0 * self.stderr


def hoeffding_deviations(dist: ParamDistribution, ell: int, n_samples: int, seed: int,
                         first: int = 0) -> np.ndarray:
    """(log l)^q / l * |sum A_k - sum E A_k| for paths first..first+n_samples-1."""
    if ell < 2:
        raise ValueError("l must be >= 2")
    q = signature(dist).q
    b0, b1 = ak_bases(dist, ell)
    keys = path_keys(seed, n_samples, first)
    sums = K.ak_sums(dist.code, dist.alpha0, dist.alpha1, dist.p1, keys, b0, b1, ell)
    mean = np.nansum(expected_a_array(dist, ell))
    return math.log(ell) ** q / ell * np.abs(sums - mean)


def hoeffding_bound(dist: ParamDistribution, ell: int, t: float) -> float:
    q = signature(dist).q
    r0 = dist.alpha0 * 2.0**dist.alpha0
    return math.exp(-ell * t * t / (2.0 * r0 * math.log(ell) ** (2.0 * q)))


def hoeffding_check(dist: ParamDistribution, ell: int, t, n_samples: int = 10_000,
                    seed: int = 0, deviations: np.ndarray | None = None
                    ) -> list[HoeffdingResult] | HoeffdingResult:
    """Empirical P{deviation >= t} against the Hoeffding-type bound.

    ``deviations`` may carry precomputed samples (e.g. gathered in parallel).
    """
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts <= 0.0):
        raise ValueError("t must be positive")
    dev = hoeffding_deviations(dist, ell, n_samples, seed) if deviations is None else deviations
    n_samples = dev.size
    if n_samples < 1000:
        raise ValueError("need at least 1000 samples")
    # measured range of A_k over k <= l and a parameter grid (reported only)
    b0, b1 = ak_bases(dist, ell)
    a0 = dist.alpha0
    r0 = a0 * 2.0**a0
    max_abs = 0.0
    for alpha in np.linspace(dist.alpha0, dist.alpha1, 33):
        vals = r0 * b0[2:] ** (alpha - a0) - 0.5 * (1 + a0) * r0 * b1[2:] ** (2 * alpha - a0)
        max_abs = max(max_abs, float(np.max(np.abs(vals))))
    out = []
    for tt in ts:
        p = float(np.mean(dev >= tt))
        out.append(HoeffdingResult(int(ell), float(tt), p, hoeffding_bound(dist, ell, tt),
                                   math.sqrt(p * (1.0 - p) / n_samples), n_samples, max_abs))
    return out if np.ndim(t) else out[0]


# ---------------------------------------------------------- sum lemmas


def _log_power(k, a, b):
    return np.log(k) ** b / k**a


def tail_sum(a: float, b: float, n: int, direct: int = 200_000) -> tuple[float, float]:
    """(sum_{k>n} (log k)^b / k^a, (log n)^b n^(1-a) / (a-1)).

    Direct summation over ``direct`` terms, then Euler-Maclaurin from there on
    with the integral in closed form via the upper incomplete gamma function.
    """
    if not a > 1.0 or b < 0.0 or n < 2:
        raise ValueError("need a > 1, b >= 0, n >= 2")
    k = np.arange(n + 1, n + direct + 1, dtype=float)
    head = math.fsum(_log_power(k, a, b))
    m = float(n + direct + 1)
    z = (a - 1.0) * math.log(m)
    integral = special.gamma(b + 1.0) * special.gammaincc(b + 1.0, z) / (a - 1.0) ** (b + 1.0)
    f = float(_log_power(m, a, b))
    fprime = math.log(m) ** (b - 1.0) * m ** (-a - 1.0) * (b - a * math.log(m)) if b > 0 else -a * m ** (-a - 1.0)
    exact = head + integral + 0.5 * f - fprime / 12.0
    asym = math.log(n) ** b * n ** (1.0 - a) / (a - 1.0)
    return exact, asym


def log_power_sum(a: float, n: int, chunk: int = 1 << 22) -> tuple[float, float]:
    """(sum_{k=2}^n 1/(log k)^a, n/(log n)^a)."""
    if not a > 0.0 or n < 3:
        raise ValueError("need a > 0, n >= 3")
    parts = []
    for lo in range(2, n + 1, chunk):
        k = np.arange(lo, min(lo + chunk, n + 1), dtype=float)
        parts.append(float(np.sum(np.log(k) ** (-a))))
    return math.fsum(parts), n / math.log(n) ** a
