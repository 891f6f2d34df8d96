import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lsvlab import lsv
from lsvlab import transfer as tr
from lsvlab.lsv import FiberDensity, make_grid
from lsvlab.noise import NoisePath, ParamDistribution, constant_path

D = ParamDistribution.discrete(0.5, 0.8, 0.5)


def _random_density(grid, seed):
    return FiberDensity.normalized(grid, np.random.default_rng(seed).random(grid.n_cells))


def test_zero_steps_is_identity(small_grid):
    d = _random_density(small_grid, 0)
    out = tr.quenched_push(NoisePath(1, D), d, 5, 0)
    np.testing.assert_array_equal(out.mass, d.mass)


def test_composition_law(small_grid):
    path = NoisePath(2, ParamDistribution.uniform(0.3, 0.6))
    d = _random_density(small_grid, 1)
    two = tr.push_signed(path, small_grid, d.mass, 10, 30)
    leg = tr.push_signed(path, small_grid, tr.push_signed(path, small_grid, d.mass, 10, 12), 22, 18)
    np.testing.assert_array_equal(two, leg)


def test_constant_path_matches_single_map(small_grid):
    d = _random_density(small_grid, 2)
    m = d.mass
    for _ in range(25):
        m = lsv.transfer_step(0.4, FiberDensity.normalized(small_grid, m)).mass
    out = tr.quenched_push(constant_path(0.4), d, 0, 25)
    np.testing.assert_allclose(out.mass, m, atol=1e-14)


@settings(max_examples=100)
@given(st.sampled_from(["discrete", "uniform", "quadratic"]), st.integers(0, 10**6), st.integers(0, 200))
def test_mass_and_positivity(kind, seed, n):
    g = make_grid(256)
    path = NoisePath(seed, ParamDistribution(kind, 0.2, 0.7))
    m = tr.push_signed(path, g, _random_density(g, seed).mass, -n, n)
    assert m.sum() == pytest.approx(1.0, abs=1e-12)
    assert m.min() >= -1e-16


@settings(max_examples=20)
@given(st.integers(0, 10**6))
def test_l1_nonexpansive(seed):
    g = make_grid(512)
    path = NoisePath(seed, D)
    diff = _random_density(g, seed).mass - _random_density(g, seed + 1).mass
    prev = np.abs(diff).sum()
    for _, m in tr.push_sweep(path, g, diff, 0, 60):
        cur = np.abs(m).sum()
        assert cur <= prev + 1e-14
        prev = cur


def test_density_positive_everywhere(grid):
    h = tr.equivariant_density(NoisePath(3, D), 0, 200, grid)
    assert np.all(h.mass > 0)


def test_equivariance_residual_decreasing(grid):
    path = NoisePath(4, D)
    res = [tr.equivariance_residual(path, 0, n, grid) for n in (50, 100, 200)]
    assert res[0] > res[1] > res[2]


def test_grid_refinement_stable():
    path = NoisePath(5, D)
    phi = lambda x: np.cos(3 * x) + x**2
    vals = [tr.equivariant_density(path, 0, 300, make_grid(n)).integrate(phi) for n in (4096, 8192)]
    assert abs(vals[0] - vals[1]) < 1e-3


def test_stationary_density_slope(grid):
    # h(x) ~ x^{-alpha} near the neutral fixed point
    h = tr.equivariant_density(constant_path(0.5), 0, 5000, grid)
    c = grid.centers
    sel = (c > 1e-6) & (c < 1e-2)
    slope = np.polyfit(np.log(c[sel]), np.log(h.values[sel]), 1)[0]
    assert slope == pytest.approx(-0.5, abs=0.05)


def test_density_sup(grid):
    assert tr.density_sup(FiberDensity.uniform(grid)) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ValueError):
        tr.density_sup(FiberDensity.uniform(grid), (0.6, 0.4))


def test_base_sup_stable_under_refinement():
    p = constant_path(0.5)
    s = [tr.density_sup(tr.equivariant_density(p, 0, 1000, make_grid(n)), (0.5, 1.0)) for n in (4096, 8192)]
    assert s[0] == pytest.approx(s[1], rel=0.02)


def test_cesaro_bounded_and_close(grid):
    path = NoisePath(6, D)
    sups = [tr.density_sup(tr.cesaro_density(path, 0, n, grid), (0.5, 1.0)) for n in (250, 1000, 4000)]
    assert max(sups) < 2 * min(sups)
    h = tr.equivariant_density(path, 0, 1000, grid)
    assert tr.l1_distance(h, tr.cesaro_density(path, 0, 4000, grid)) < 0.05


def test_coarsen_and_csv(tmp_path, small_grid):
    d = _random_density(small_grid, 7)
    ce = tr.coarse_edges(small_grid, 16)
    assert tr.coarsen(d.mass, small_grid, ce).sum() == pytest.approx(1.0)
    tr.write_density_csv(d, tmp_path / "h.csv")
    rows = (tmp_path / "h.csv").read_text().splitlines()
    assert rows[0] == "cell_left,cell_right,mass" and len(rows) == small_grid.n_cells + 1
