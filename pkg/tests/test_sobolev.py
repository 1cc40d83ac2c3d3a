import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qotlab.errors import NonzeroMeanForNegativeOrder
from qotlab.grid import PhaseDensity, PhaseGrid, gaussian_gh
from qotlab.sobolev import (ProductState, c_d, hs_norm, loeper_classical_check, lower_bound_chain,
                            smoothing_multiplier_check, smoothing_norm_check, smoothing_w1_check,
                            upper_bound_chain)
from qotlab.suites import product_corpus
from qotlab.transforms import coherent_state

GRID = PhaseGrid.make(0.125, 32, 3.0)


def _zero_mean(r):
    v = r.normal(size=GRID.shape)
    return PhaseDensity(GRID, v - v.mean())


def test_hs_norm_plancherel():
    r = np.random.default_rng(3)
    f = _zero_mean(r)
    assert hs_norm(f, 0) == pytest.approx(np.sqrt(np.sum(f.values ** 2) * GRID.cell_weight), rel=1e-12)


def test_hs_norm_rejects_mass_for_negative_order():
    with pytest.raises(NonzeroMeanForNegativeOrder):
        hs_norm(PhaseDensity(GRID, np.ones(GRID.shape)), -1)
    with pytest.raises(ValueError):
        hs_norm(PhaseDensity(GRID, np.zeros(GRID.shape)), 2)


def test_hs_norm_of_plane_wave():
    xx, pp = GRID.mesh()
    k = 2 * np.pi / (2 * GRID.half_width) * 3
    f = PhaseDensity(GRID, np.cos(k * xx))
    l2 = hs_norm(f, 0)
    assert hs_norm(f, 1) == pytest.approx(k * l2, rel=1e-10)
    assert hs_norm(f, -1) == pytest.approx(l2 / k, rel=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31), st.sampled_from([-1.0, -0.5, 0.0, 0.5, 1.0]), st.floats(-3, 3))
def test_hs_norm_is_a_norm(seed, s, c):
    r = np.random.default_rng(seed)
    f, g = _zero_mean(r), _zero_mean(r)
    assert hs_norm(f.with_values(c * f.values), s) == pytest.approx(abs(c) * hs_norm(f, s), rel=1e-10, abs=1e-12)
    assert hs_norm(f + g, s) <= hs_norm(f, s) + hs_norm(g, s) + 1e-10


@pytest.mark.parametrize("s", [-1, 0, 1])
def test_smoothing_multiplier_frequencywise(s):
    assert smoothing_multiplier_check(GRID, s)["pass"]


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 31), st.sampled_from([-1, 0, 1]))
def test_smoothing_norm_bound(seed, s):
    g = _zero_mean(np.random.default_rng(seed))
    assert smoothing_norm_check(g, s)["pass"]


def test_c_d_below_sqrt_d():
    for d in (1, 2, 3):
        assert c_d(d) < np.sqrt(d)
    assert c_d(1) == pytest.approx(np.sqrt(np.pi) / 2)


def test_loeper_identical_and_shifted():
    grid = PhaseGrid.make(0.125, 32)
    f = gaussian_gh(grid, variance=0.15)
    same = loeper_classical_check(f, f)
    assert same["lhs"] == pytest.approx(0.0, abs=1e-12)
    for t in (grid.dx, 2 * grid.dx):
        r = loeper_classical_check(f, gaussian_gh(grid, (t, 0), variance=0.15))
        assert r["pass"]
        assert r["W2"] == pytest.approx(t, abs=1e-6)


def test_smoothing_w1_bound():
    grid = PhaseGrid.make(0.125, 64, 4.0)
    r = smoothing_w1_check(gaussian_gh(grid, variance=0.2))
    assert r["pass"]


def test_lower_chain_equal_states(coherent):
    r = lower_bound_chain(coherent, coherent, 0)
    assert r["lhs"] == pytest.approx(0.0, abs=1e-12)
    assert r["pass"]


def test_lower_chain_d1_corollary(coherent):
    grid = coherent.grid
    other = coherent_state(grid, (4 * grid.dx, 0)).density()
    r = lower_bound_chain(coherent, other, 0)
    assert r["pass"] and r["margin"] > 0
    assert "corollary_rhs" not in r  # C_inf = 1/h > 1 here


def test_lower_chain_d2_products():
    cache = {}
    for r1, r2 in product_corpus():
        for s in (-1, 0, 1):
            r = lower_bound_chain(r1, r2, s, cost_cache=cache)
            assert r["d"] == 2 and r["pass"], (s, r["lhs"], r["rhs"])


def test_product_state_materializes():
    g = PhaseGrid.make(0.125, 8)
    a = coherent_state(g).density()
    p = ProductState(a, a)
    m = p.materialize()
    assert m.grid.d == 2
    assert m.trace().real == pytest.approx(1.0)
    assert p.op_norm() == pytest.approx(np.linalg.eigvalsh(m.matrix)[-1])


def test_upper_chain_coherent_pair(coherent):
    grid = coherent.grid
    other = coherent_state(grid, (4 * grid.dx, 0)).density()
    r = upper_bound_chain(coherent, other, 4)
    assert r["pass"], r["checks"]
    assert r["W2"] == pytest.approx(0.5, abs=1e-6)
    assert r["C_rho"][0] == pytest.approx(np.sqrt(3.0), rel=1e-6)
    with pytest.raises(ValueError):
        upper_bound_chain(coherent, other, 2)
