import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from lsvlab import lsv
from lsvlab.noise import NoisePath, ParamDistribution, constant_path
from lsvlab.preimages import (constant_sequence, deterministic_c, deterministic_limit, envelope,
                              one_step_terms, preimage_sequence, return_tail, x_at)

kinds = st.sampled_from(["discrete", "uniform", "quadratic"])


def _mp_sequence(alpha, kmax):
    mpmath.mp.dps = 40
    a = mpmath.mpf(alpha)
    xs = [None, mpmath.mpf(1) / 2]
    for _ in range(2, kmax + 1):
        y = xs[-1]
        xs.append(mpmath.findroot(lambda x: x * (1 + (2 * x) ** a) - y, y / 2))
    return xs


def test_first_terms():
    assert x_at(constant_path(0.5), 0, 1) == 0.5
    x2 = x_at(constant_path(0.5), 0, 2)
    assert lsv.apply(0.5, x2) == pytest.approx(0.5, rel=1e-15)


def test_constant_sequence_against_mpmath():
    ref = _mp_sequence(0.37, 60)
    x = constant_sequence(0.37, 60)
    for k in (2, 10, 60):
        assert x[k] == pytest.approx(float(ref[k]), rel=1e-13)


def test_deterministic_constant():
    assert deterministic_limit(0.5) == 2.0
    c = deterministic_c(0.5, 10**6)
    assert 1.99 < c < 2.01


def test_table_consistency():
    path = NoisePath(2, ParamDistribution.uniform(0.3, 0.6))
    t = preimage_sequence(path, 5, 40)
    for k in (1, 2, 17, 40):
        assert t.x[k] == x_at(path, t.row_index(k), k)
    assert t.xprime[1] == 0.75 and t.xprime[0] == 1.0
    # the right branch at the fiber below row k sends x'_k onto x_k
    for k in (2, 9, 39):
        a = path.sample_at(t.row_index(k) - 1)
        assert lsv.apply(a, t.xprime[k]) == pytest.approx(t.x[k], abs=4e-16)


def test_return_tail():
    path = NoisePath(1, ParamDistribution.discrete(0.3, 0.6))
    assert return_tail(path, 0, 1) == 0.25
    tails = [return_tail(path, 0, l) for l in range(1, 50)]
    assert all(b < a for a, b in zip(tails, tails[1:]))


@given(kinds, st.integers(0, 10**6), st.integers(1, 300))
def test_envelope(kind, seed, ell):
    path = NoisePath(seed, ParamDistribution(kind, 0.3, 0.6))
    lo, hi = envelope(0.3, 0.6, ell)
    x = x_at(path, seed % 17, ell)
    assert lo * (1 - 1e-12) <= x <= hi * (1 + 1e-12)


def test_one_step_bounds():
    path = NoisePath(8, ParamDistribution.uniform(0.3, 0.6))
    t = preimage_sequence(path, 0, 2000)
    inc, lower, upper = one_step_terms(t, path, 0.3)
    assert np.all(inc <= upper * (1 + 1e-9))
    assert np.all(inc >= lower * (1 - 1e-9) - 1e-12)
