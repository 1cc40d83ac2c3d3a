import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qotlab.errors import NegativeSymbol
from qotlab.grid import PhaseDensity, PhaseGrid, gaussian_gh
from qotlab.qop import l2_norm_sq
from qotlab.states import random_mixed_state, symbol
from qotlab.transforms import (CoherentFamily, coherent_state, husimi, husimi_dual, nyquist_tail,
                               partition_defect, toeplitz_matrix, toeplitz_quantize, weyl_quantize, wigner,
                               wigner_imag_residue)


def test_coherent_wigner_is_gh(coherent, grid128):
    # Wigner transform of a coherent state is g_h centered at its phase point
    f = wigner(coherent)
    ref = gaussian_gh(grid128)
    assert np.abs(f.values - ref.values).max() < 1e-8 * ref.values.max()
    assert f.integral() == pytest.approx(1.0, abs=1e-12)


def test_husimi_of_coherent_is_wider_gaussian(coherent, grid128):
    hus = husimi(coherent)
    ref = gaussian_gh(grid128, variance=grid128.hbar)
    assert np.abs(hus.values - ref.values).max() < 1e-7 * ref.values.max()
    assert hus.kind == "probability"


def test_husimi_two_routes_agree(grid64, rng):
    rho = random_mixed_state(grid64, rng, spread=0.5)
    a = husimi(rho).values
    b = husimi_dual(rho).values
    assert np.abs(a - b).max() < 1e-10 * np.abs(a).max()
    assert np.allclose(husimi(rho, "coherent").values, b, atol=1e-14)


def test_plancherel_and_weyl_roundtrip(grid64, rng):
    rho = random_mixed_state(grid64, rng, spread=0.5)
    f = wigner(rho)
    f2 = np.sum(f.values ** 2) * grid64.cell_weight
    assert abs(f2 - l2_norm_sq(rho)) <= 1e-8 * f2
    back = weyl_quantize(f)
    assert np.linalg.norm(back.matrix - rho.matrix) <= 1e-10 * np.linalg.norm(rho.matrix)
    assert wigner_imag_residue(rho) < 1e-8 * np.abs(f.values).max()


def test_weyl_then_wigner_on_symbols(grid64):
    f = symbol(grid64, "gaussian", 0.8)
    assert np.allclose(wigner(weyl_quantize(f)).values, f.values, atol=1e-12 * f.values.max())


def test_partition_of_unity(grid128):
    assert partition_defect(grid128) < 1e-10


def test_nyquist_tail_flags_wide_states():
    small = PhaseGrid.make(0.125, 16)
    wide = coherent_state(small, (2 * small.dx, 0)).density()
    assert nyquist_tail(wide) > 1e-2
    big = PhaseGrid.make(0.125, 128, 8.0)
    assert nyquist_tail(coherent_state(big).density()) < 1e-6


def test_coherent_family_columns_are_packets(grid64):
    fam = CoherentFamily(grid64)
    cols = fam.apply(np.eye(grid64.n), [5])[0]
    for k in (0, 17, 40):
        v = coherent_state(grid64, (grid64.x[5], grid64.xi[k])).vector
        overlap = abs(np.vdot(v, cols[:, k]))
        assert overlap == pytest.approx(1.0, abs=1e-12)


def test_toeplitz_of_delta_is_coherent(grid64):
    from qotlab.grid import delta_cell
    z = (grid64.x[30], grid64.xi[36])
    t = toeplitz_quantize(delta_cell(grid64, z))
    ref = coherent_state(grid64, z).density()
    assert np.allclose(t.matrix, ref.matrix, atol=1e-12 * np.abs(ref.matrix).max())


def test_toeplitz_matrix_matches_direct_sum(grid64, rng):
    vals = rng.random(grid64.shape) * np.exp(-grid64.radius_squared() / 0.5)
    fam = CoherentFamily(grid64)
    direct = np.zeros((grid64.n, grid64.n), complex)
    cols = fam.apply(np.eye(grid64.n), np.arange(grid64.n))
    for m in range(grid64.n):
        direct += (cols[m] * vals[m]) @ cols[m].conj().T
    direct *= grid64.cell_weight / grid64.scale.h
    assert np.allclose(toeplitz_matrix(grid64, vals), direct, atol=1e-12 * np.abs(direct).max())


def test_toeplitz_rejects_negative_probability(grid64):
    vals = np.zeros(grid64.shape)
    vals[1, 1] = -1.0
    f = PhaseDensity(grid64, vals, "signed")
    object.__setattr__(f, "kind", "probability")
    with pytest.raises(NegativeSymbol):
        toeplitz_quantize(f)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_toeplitz_is_positive_and_husimi_nonnegative(seed):
    grid = PhaseGrid.make(0.125, 32)
    r = np.random.default_rng(seed)
    vals = r.random(grid.shape) * np.exp(-grid.radius_squared() / 0.3)
    vals /= vals.sum() * grid.cell_weight
    rho = toeplitz_quantize(PhaseDensity(grid, vals, "probability"))
    assert rho.eigenvalues.min() > -1e-12 * rho.eigenvalues.max()
    assert rho.trace().real == pytest.approx(1.0, abs=1e-6)
    assert husimi(rho, "coherent").values.min() >= -1e-12
