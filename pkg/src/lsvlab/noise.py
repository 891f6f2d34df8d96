"""Randomizing environment: parameter laws, two-sided noise paths, expectations."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import _kernels as K

KINDS = ("discrete", "uniform", "quadratic")


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class Signature:
    q: float
    c_nu: float


@dataclass(frozen=True)
class ParamDistribution:
    """Law of the map parameter on [alpha0, alpha1].

    discrete:  p1 delta_{alpha0} + (1 - p1) delta_{alpha1}
    uniform:   CDF (t - alpha0) / (alpha1 - alpha0)
    quadratic: CDF (t - alpha0)^2 / (alpha1 - alpha0)^2
    """

    kind: str
    alpha0: float
    alpha1: float
    p1: float = 0.5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if not 0.0 < self.alpha0 < self.alpha1 < 1.0:
            raise ValueError(
                f"need 0 < alpha0 < alpha1 < 1, got alpha0={self.alpha0}, alpha1={self.alpha1}")
        # p1 in {0, 1} gives the degenerate constant paths
        if self.kind == "discrete" and not 0.0 <= self.p1 <= 1.0:
            raise ValueError(f"p1 must lie in [0, 1], got {self.p1}")

    @classmethod
    def discrete(cls, alpha0, alpha1, p1=0.5):
        return cls("discrete", float(alpha0), float(alpha1), float(p1))

    @classmethod
    def uniform(cls, alpha0, alpha1):
        return cls("uniform", float(alpha0), float(alpha1))

    @classmethod
    def quadratic(cls, alpha0, alpha1):
        return cls("quadratic", float(alpha0), float(alpha1))

    @property
    def code(self) -> int:
        return K.KIND_CODES[self.kind]

    @property
    def width(self) -> float:
        return self.alpha1 - self.alpha0

    @property
    def p2(self) -> float:
        return 1.0 - self.p1

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "discrete":
            return np.where(u < self.p1, self.alpha0, self.alpha1)
        if self.kind == "uniform":
            return self.alpha0 + self.width * u
        return self.alpha0 + self.width * np.sqrt(u)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "discrete":
            return np.where(t < self.alpha0, 0.0, np.where(t < self.alpha1, self.p1, 1.0))
        s = np.clip((t - self.alpha0) / self.width, 0.0, 1.0)
        return s if self.kind == "uniform" else s * s

    def pdf(self, t):
        """Density on [alpha0, alpha1] (continuous kinds only)."""
        t = np.asarray(t, dtype=float)
        if self.kind == "uniform":
            return np.full_like(t, 1.0 / self.width)
        if self.kind == "quadratic":
            return 2.0 * (t - self.alpha0) / self.width**2
        raise ValueError("discrete law has no density")

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "alpha0": self.alpha0, "alpha1": self.alpha1}
        if self.kind == "discrete":
            d["p1"] = self.p1
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ParamDistribution":
        return cls(d["kind"], float(d["alpha0"]), float(d["alpha1"]), float(d.get("p1", 0.5)))


def signature(dist: ParamDistribution) -> Signature:
    """The (q, c(nu)) pair governing the return-time asymptotics.

    These are the published constants. For the quadratic law the Laplace
    asymptotics of E X_k carry an extra alpha0 2^alpha0 factor, see
    ``laplace_signature``.
    """
    a0, a1 = dist.alpha0, dist.alpha1
    if dist.kind == "discrete":
        return Signature(0.0, a0 * 2.0**a0 * dist.p1)
    if dist.kind == "uniform":
        return Signature(1.0, a0**2 * 2.0**a0 / (a1 - a0))
    return Signature(2.0, 2.0 * (a0 / (a1 - a0)) ** 2)


def laplace_signature(dist: ParamDistribution) -> Signature:
    """(q, lim (log k)^q E X_k) from the leading Laplace term with u ~ log k / alpha0."""
    a0, a1 = dist.alpha0, dist.alpha1
    r0 = a0 * 2.0**a0
    if dist.kind == "discrete":
        return Signature(0.0, r0 * dist.p1)
    if dist.kind == "uniform":
        return Signature(1.0, r0 * a0 / (a1 - a0))
    return Signature(2.0, r0 * 2.0 * a0**2 / (a1 - a0) ** 2)


def expect(dist: ParamDistribution, g, scale: float | None = None,
           epsabs: float = 1e-12, limit: int = 500) -> float:
    """E_nu[g(alpha)].

    Exact for the discrete law; adaptive Gauss-Kronrod otherwise. ``scale``
    is the width of a boundary layer at alpha0 (e.g. 1/u for e^{-(alpha-alpha0)u});
    breakpoints are placed at geometric multiples of it.
    """
    if dist.kind == "discrete":
        return dist.p1 * float(g(dist.alpha0)) + dist.p2 * float(g(dist.alpha1))
    a0, a1 = dist.alpha0, dist.alpha1
    w = (lambda t: 1.0 / (a1 - a0)) if dist.kind == "uniform" else \
        (lambda t: 2.0 * (t - a0) / (a1 - a0) ** 2)
    cuts = [a0]
    if scale is not None and scale > 0.0:
        s = scale
        while a0 + s < a1:
            cuts.append(a0 + s)
            s *= 4.0
    cuts.append(a1)
    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            try:
                val, err = integrate.quad(lambda t: g(t) * w(t), lo, hi,
                                          epsabs=epsabs / len(cuts), epsrel=1e-13, limit=limit)
            except integrate.IntegrationWarning as exc:
                raise QuadratureError(str(exc)) from exc
            if err > epsabs:
                raise QuadratureError(f"quadrature error {err:.3g} exceeds {epsabs:.3g}")
            total += val
    return total


# ------------------------------------------------------------------ paths


def _key(seed: int) -> np.uint64:
    return np.uint64(K.mix64(np.uint64((int(seed) + 0x632BE59BD9B4E019) & 0xFFFFFFFFFFFFFFFF)))


@dataclass(frozen=True)
class NoisePath:
    """A two-sided i.i.d. parameter sequence; value i is a pure function of
    (seed, i + offset, dist). ``shift(k)`` gives the path sigma^k omega."""

    seed: int
    dist: ParamDistribution
    offset: int = 0

    @property
    def key(self) -> np.uint64:
        return _key(self.seed)

    def shift(self, k: int = 1) -> "NoisePath":
        return NoisePath(self.seed, self.dist, self.offset + int(k))

    def kernel_args(self):
        d = self.dist
        return d.code, d.alpha0, d.alpha1, d.p1, self.key

    def sample_at(self, i: int) -> float:
        return float(K.param_at(*self.kernel_args(), int(i) + self.offset))

    def params(self, start: int, n: int) -> np.ndarray:
        """Parameters at indices start, ..., start + n - 1."""
        if n < 0:
            raise ValueError("negative length")
        return K.params_block(*self.kernel_args(), int(start) + self.offset, int(n))

    def uniforms(self, start: int, n: int) -> np.ndarray:
        key = self.key
        return np.array([K.uniform_at(key, int(start) + self.offset + j) for j in range(n)])


def constant_path(alpha: float) -> NoisePath:
    """The deterministic path with every coordinate equal to ``alpha``."""
    alpha = float(alpha)
    return NoisePath(0, ParamDistribution.discrete(alpha, 0.5 * (alpha + 1.0), 1.0))


def task_seed(root: int, index: int) -> int:
    """Deterministic 64-bit seed for task ``index`` under ``root``."""
    ss = np.random.SeedSequence(int(root), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


def path_keys(root: int, n: int, first: int = 0) -> np.ndarray:
    """Kernel keys of the paths NoisePath(task_seed(root, i)) for i in [first, first + n)."""
    return np.array([_key(task_seed(root, i)) for i in range(first, first + n)], dtype=np.uint64)
