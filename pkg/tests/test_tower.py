import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lsvlab import tower as tw
from lsvlab.noise import NoisePath, ParamDistribution, constant_path
from lsvlab.preimages import constant_sequence, x_at
from lsvlab.transfer import equivariant_density

D = ParamDistribution.discrete(0.3, 0.6, 0.5)


def test_first_column():
    part = tw.build_partition(NoisePath(1, D), 0, 5)
    lo, hi, n = part.intervals[0]
    assert (lo, hi, n) == (0.75, 1.0, 1)
    assert part.masses[0] == 0.25  # aperiodicity: m{R = 1} = 1/4 exactly


def test_markov_constant_path():
    part = tw.build_partition(constant_path(0.5), 0, 50)
    assert tw.markov_errors(constant_path(0.5), part).max() <= 1e-9


@pytest.mark.parametrize("kind", ["discrete", "uniform", "quadratic"])
def test_markov_random_paths(kind):
    path = NoisePath(5, ParamDistribution(kind, 0.3, 0.6))
    part = tw.build_partition(path, 17, 50)
    errs = tw.markov_errors(path, part)
    assert errs.max() <= 1e-9


def test_partition_covers_base():
    path = NoisePath(2, D)
    part = tw.build_partition(path, 0, 300, check=False)
    assert np.all(np.diff(part.xprime) < 0)
    assert part.masses.sum() + part.tail_mass == pytest.approx(0.5, abs=1e-15)
    assert part.tail_mass == pytest.approx(0.5 * x_at(path, 1, 300), rel=1e-14)


def test_tail_mass_constant():
    part = tw.build_partition(constant_path(0.5), 0, 10**4, check=False)
    assert part.tail_mass == 0.5 * constant_sequence(0.5, 10**4)[10**4]


@given(st.integers(0, 10**6), st.floats(0.5001, 1.0))
def test_return_time_matches_orbit(seed, x):
    path = NoisePath(seed, D)
    part = tw.build_partition(path, 3, 400, check=False)
    n = part.return_time(x)
    if n:
        assert n == tw.first_return(path, 3, x)[0]


def test_tower_step_examples():
    path = NoisePath(0, D)
    pt = tw.tower_point(path, 0, 0.8)
    assert pt.ret == 1 and tw.hat_return(pt) == 1
    nxt = tw.tower_step(pt, path)
    assert (nxt.x, nxt.level) == (pytest.approx(0.6), 0)
    # a point in column 3 climbs to levels 1 and 2 before returning
    part = tw.build_partition(path, 0, 5, check=False)
    lo, hi, n = part.intervals[2]
    pt = tw.tower_point(path, 0, 0.5 * (lo + hi))
    assert pt.ret == 3
    levels = []
    for _ in range(3):
        levels.append(pt.level)
        assert tw.hat_return(pt) == 3 - pt.level
        pt = tw.tower_step(pt, path)
    assert levels == [0, 1, 2] and pt.level == 0


def test_hat_return_lands_on_base():
    path = NoisePath(4, ParamDistribution.uniform(0.3, 0.6))
    pt = tw.tower_point(path, 0, 0.5000123)
    for _ in range(tw.hat_return(pt)):
        assert pt.level < pt.ret
        pt = tw.tower_step(pt, path)
    assert pt.level == 0


def test_semi_conjugacy():
    path = NoisePath(9, ParamDistribution.quadratic(0.3, 0.6))
    x0 = 0.77
    orbit = tw.interval_orbit(path, 0, x0, 1000)
    pt = tw.tower_point(path, 0, x0)
    for j in range(1000):
        assert abs(tw.projection(pt, path) - orbit[j]) <= 1e-9
        pt = tw.tower_step(pt, path)


def test_kac_frequency_against_density():
    # long-run fraction of time in the base vs the invariant mass of (1/2, 1]
    p = constant_path(0.5)
    h = equivariant_density(p, 0, 3000)
    base = h.mass[h.grid.edges[:-1] >= 0.5].sum()
    freq = tw.base_frequency(p, 0, 0.7071, 10**6)
    assert abs(freq / base - 1) < 0.05
    assert abs(tw.mean_return(p, 0, 0.7071, 20000) * base - 1) < 0.05


def test_level_masses_match_preimages():
    path = NoisePath(6, D)
    m = tw.level_masses(path, 100, 30)
    assert m[0] == 0.5
    for l in (1, 2, 9, 29):
        assert m[l] == pytest.approx(0.5 * x_at(path, 100 - l + 1, l), rel=1e-14)


def test_tower_mass_bounded_by_envelope():
    path = NoisePath(3, D)
    tm = tw.tower_mass(path, 0, 3000)
    assert np.all(np.diff(tm.partial) > 0)
    assert np.all(tm.partial <= tm.envelope + 1e-15)
    assert tm.tail_bound < 1e-2


def test_annealed_tail_first_value(dist):
    assert tw.annealed_tail_mc(dist, [1], 50, seed=1)[0] == pytest.approx(0.25, abs=1e-15)


def test_annealed_estimators_agree():
    ns = [2, 3, 5, 8, 13]
    n = 20000
    closed = tw.annealed_tail_mc(D, ns, n, seed=2)
    diff = tw.annealed_tail_mc(D, ns, n, seed=3, method="difference")
    # per-sample spread of the difference form is bounded by the return mass itself
    se = np.array([0.5 * x_at(constant_path(0.6), 0, k - 1) for k in ns]) / math.sqrt(n)
    assert np.all(np.abs(closed - diff) <= 4 * se)


def test_annealed_slope():
    ns = np.unique(np.logspace(2, 4, 9).round().astype(int))
    v = tw.annealed_tail_mc(D, ns, 1000, seed=4)
    assert tw.loglog_slope(ns, v) <= -(1 / 0.3 + 1) + 0.2
    assert np.all(v <= 1e3 * tw.annealed_tail_envelope(D, ns))


def test_distortion():
    p = constant_path(0.5)
    rep = tw.check_distortion(p, 0, 30, n_pairs=64, seed=1)
    assert rep.per_column[0] < 1e-12  # affine first column
    assert np.isfinite(rep.d_hat) and rep.d_hat < 5
    longer = tw.check_distortion(p, 0, 60, n_pairs=64, seed=1)
    assert longer.d_hat < 2 * rep.d_hat + 1
    near = [tw.check_distortion(p, 0, 20, 64, 1, separation=s).d_hat for s in (0.1, 0.01, 0.001)]
    assert near[0] > near[1] > near[2]
    assert near[1] / near[2] == pytest.approx(10, rel=0.3)  # Lipschitz in the separation


def test_weak_expansion():
    path = NoisePath(7, ParamDistribution.uniform(0.3, 0.6))
    xs = np.linspace(0.501, 0.999, 25)
    for n in (1, 3, 6):
        lj = tw.return_map_jacobian(path, 0, xs, n)
        assert np.all(lj >= n * math.log(2) - 1e-12)
