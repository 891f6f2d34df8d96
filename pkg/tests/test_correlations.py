import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lsvlab import correlations as cor
from lsvlab.lsv import FiberDensity, make_grid
from lsvlab.noise import NoisePath, ParamDistribution, constant_path
from lsvlab.series import InsufficientPointsError, TailSeries, fit_decay
from lsvlab.transfer import equivariant_density

D = ParamDistribution.discrete(0.5, 0.8, 0.5)


@pytest.fixture(scope="module")
def g2048():
    return make_grid(2048)


def test_builtin_observables():
    x = np.linspace(0, 1, 9)
    np.testing.assert_allclose(cor.identity(x), x)
    np.testing.assert_allclose(cor.cosine(x), np.cos(2 * np.pi * x))
    b = cor.bump(x)
    assert b[x <= 0.25].max() == 0 and b[x >= 0.75].max() == 0 and cor.bump(0.5) == pytest.approx(1.0)
    assert cor.power(0.5).holder == 0.5


@pytest.mark.parametrize("psi", [cor.identity, cor.cosine, cor.bump])
def test_constant_phi_gives_zero(psi, g2048):
    path = NoisePath(1, D)
    for n in (0, 5, 40):
        assert abs(cor.future_corr(path, cor.constant(), psi, n, grid=g2048)) < 1e-10
        assert abs(cor.past_corr(path, cor.constant(), psi, n, grid=g2048)) < 1e-10


def test_variance_at_zero(g2048):
    path = NoisePath(2, D)
    v = cor.future_corr(path, cor.identity, cor.identity, 0, grid=g2048)
    h = equivariant_density(path, 0, 200, g2048)
    # on the grid psi h is (cell average of psi) x (cell mass)
    avg = g2048.cell_average(cor.identity)
    ref = np.dot(avg**2, h.mass) - np.dot(avg, h.mass) ** 2
    assert v > 0 and v == pytest.approx(ref, rel=1e-12)
    cont = h.integrate(lambda x: x * x) - h.integrate(lambda x: x) ** 2
    assert v == pytest.approx(cont, rel=1e-5)


def test_past_equals_future_on_constant_path(g2048):
    p = constant_path(0.5)
    for n in (1, 10, 60):
        f = cor.future_corr(p, cor.identity, cor.cosine, n, grid=g2048)
        assert cor.past_corr(p, cor.identity, cor.cosine, n, grid=g2048) == f


@settings(max_examples=15)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 30))
def test_bilinear(a, b, n):
    g = make_grid(512)
    path = NoisePath(4, D)
    h = equivariant_density(path, 0, 100, g)
    combo = cor.identity.scale(a) + cor.cosine.scale(b)
    lhs = cor.future_corr(path, combo, cor.bump, n, grid=g, h=h)
    rhs = (a * cor.future_corr(path, cor.identity, cor.bump, n, grid=g, h=h)
           + b * cor.future_corr(path, cor.cosine, cor.bump, n, grid=g, h=h))
    assert lhs == pytest.approx(rhs, abs=1e-10)
    lhs = cor.future_corr(path, cor.bump, combo, n, grid=g, h=h)
    rhs = (a * cor.future_corr(path, cor.bump, cor.identity, n, grid=g, h=h)
           + b * cor.future_corr(path, cor.bump, cor.cosine, n, grid=g, h=h))
    assert lhs == pytest.approx(rhs, abs=1e-10)


def test_shift_reanchoring(g2048):
    path = NoisePath(5, D)
    a = cor.future_corr(path, cor.identity, cor.identity, 25, at_index=7, grid=g2048)
    b = cor.future_corr(path.shift(1), cor.identity, cor.identity, 25, at_index=6, grid=g2048)
    assert a == b


def test_fit_decay_synthetic():
    n = np.logspace(1, 4, 30)
    fit = fit_decay(TailSeries(n, 3 * n**-2.0))
    assert fit.slope == pytest.approx(-2, abs=1e-12) and fit.r2 == pytest.approx(1)
    n = np.logspace(3, 6, 30)
    assert -1.0 < fit_decay(TailSeries(n, np.log(n) ** 2 / n)).slope < -0.6
    assert fit_decay(TailSeries(n, np.full(n.size, 0.3))).slope == pytest.approx(0, abs=1e-12)
    with pytest.raises(InsufficientPointsError):
        fit_decay(TailSeries(n, np.full(n.size, 1e-13)))


def test_pushforward_distance(grid):
    p = constant_path(0.5)
    u = FiberDensity.uniform(grid)
    ns = np.unique(np.logspace(np.log10(50), np.log10(2000), 15).round().astype(int))
    assert np.all(cor.pushforward_distance(p, u, u, ns).values == 0)
    h = equivariant_density(p, 0, 3000, grid)
    s = cor.pushforward_distance(p, u, h, ns)
    assert np.all(np.diff(s.values) <= 1e-15)
    assert fit_decay(s, (50, 2000)).slope <= -0.7


def test_constant_path_decay(grid):
    p = constant_path(0.5)
    ns = np.unique(np.logspace(np.log10(50), np.log10(2000), 15).round().astype(int))
    s = cor.future_corr_series(p, cor.identity, cor.identity, ns, grid=grid, n_pullback=3000)
    fit = fit_decay(s, (50, 2000))
    assert fit.slope <= -0.7
    # diagnostic lower side: the deterministic map decays like n^{1 - 1/alpha}
    assert fit.slope > -1.6


def test_monte_carlo_oracle(grid):
    path = NoisePath(6, D)
    h = equivariant_density(path, 0, 500, grid)
    for n in (5, 40):
        exact = cor.future_corr(path, cor.identity, cor.cosine, n, grid=grid, h=h)
        mc, se = cor.mc_future_corr(path, cor.identity, cor.cosine, n, h=h, n_points=2 * 10**6, seed=n)
        assert abs(mc - exact) <= 5 * se + 1e-4
