import io
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qotlab.errors import NotPSD, OffGridWarning
from qotlab.grid import PhaseGrid
from qotlab.qop import (DensityOperator, Operator, density_from_matrix, derivative, expectation,
                        gradient_norm_sq, moments_op, momentum, operator_from_csv, operator_to_csv,
                        position, pure_state, schatten_norm, skew_information, skew_information_alt,
                        sqrt_psd, trace_convolution_check, translate, variance)
from qotlab.states import random_mixed_state
from qotlab.transforms import coherent_state, wigner


def test_trace_and_schatten_of_pure_state(coherent):
    h = coherent.scale.h
    assert coherent.trace().real == pytest.approx(1.0, abs=1e-12)
    assert schatten_norm(coherent, 1) == pytest.approx(1.0, abs=1e-10)
    assert schatten_norm(coherent, np.inf) == pytest.approx(1 / h, rel=1e-12)
    assert schatten_norm(coherent, 2) ** 2 == pytest.approx(1 / h, rel=1e-12)


def test_schatten_monotone_in_p(grid64, rng):
    rho = random_mixed_state(grid64, rng)
    # h^{d/p} weighting: L^1 = 1 for a state, and norms interpolate
    assert schatten_norm(rho, 1) == pytest.approx(1.0, abs=1e-9)
    assert schatten_norm(rho, 3) ** 3 <= schatten_norm(rho, 1) * schatten_norm(rho, np.inf) ** 2 * (1 + 1e-9)


def test_sqrt_psd_squares_back(grid64, rng):
    rho = random_mixed_state(grid64, rng)
    s = sqrt_psd(rho).matrix
    assert np.allclose(s @ s, rho.matrix, atol=1e-10 * np.abs(rho.matrix).max())


def test_sqrt_rejects_indefinite(grid64):
    m = np.diag(np.linspace(-1, 1, grid64.n)).astype(complex)
    with pytest.raises(NotPSD):
        sqrt_psd(Operator(grid64, m, True))
    with pytest.raises(NotPSD):
        DensityOperator(grid64, m, normalized=False)


def test_density_validation(grid64):
    with pytest.raises(ValueError):
        DensityOperator(grid64, np.eye(grid64.n))
    rho = density_from_matrix(grid64, np.eye(grid64.n))
    assert rho.trace().real == pytest.approx(1.0)


def test_coherent_gradient_oracle(coherent):
    # Gaussian calculus: hbar^2 ||grad sqrt(rho)||^2 = 2 d hbar for a coherent state
    hbar = coherent.grid.hbar
    val = hbar ** 2 * gradient_norm_sq(coherent.sqrt)
    assert val == pytest.approx(2 * hbar, rel=1e-8)


def test_gradient_matches_wigner_derivatives(coherent):
    from qotlab.qop import quantum_gradient
    grid = coherent.grid
    gx, gv = quantum_gradient(coherent)
    f = wigner(coherent).values
    kx = 2 * np.pi * np.fft.fftfreq(grid.n, grid.dx)
    kp = 2 * np.pi * np.fft.fftfreq(grid.n, grid.dxi)
    dfx = np.fft.ifft(1j * kx[:, None] * np.fft.fft(f, axis=0), axis=0).real
    dfv = np.fft.ifft(1j * kp[None, :] * np.fft.fft(f, axis=1), axis=1).real
    scale = np.abs(dfx).max()
    assert np.abs(wigner(gx).values - dfx).max() < 1e-5 * scale
    assert np.abs(wigner(gv).values - dfv).max() < 1e-5 * scale


def test_coherent_variances(coherent):
    hbar = coherent.grid.hbar
    x, p = position(coherent.grid), momentum(coherent.grid)
    assert variance(coherent, x) == pytest.approx(hbar / 2, rel=1e-8)
    assert variance(coherent, p) == pytest.approx(hbar / 2, rel=1e-8)
    assert expectation(coherent, x) == pytest.approx(0.0, abs=1e-12)


def test_skew_information_pure_equals_variance(coherent):
    for k in (position(coherent.grid), momentum(coherent.grid)):
        assert skew_information(coherent, k) == pytest.approx(variance(coherent, k), rel=1e-8)
        assert skew_information_alt(coherent, k) == pytest.approx(skew_information(coherent, k), rel=1e-8)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(1, 6))
def test_skew_bounded_by_variance(seed, rank):
    grid = PhaseGrid.make(0.125, 32)
    rho = random_mixed_state(grid, np.random.default_rng(seed), rank=rank, spread=0.5)
    x, p = position(grid), momentum(grid)
    for k in (x, p):
        assert skew_information(rho, k) <= variance(rho, k) * (1 + 1e-9)
    assert variance(rho, x) + variance(rho, p) >= grid.d * grid.hbar * (1 - 1e-9)


def test_translation_moves_expectations(coherent):
    grid = coherent.grid
    z = (5 * grid.dx, 3 * grid.dxi)
    moved = translate(coherent, z)
    assert expectation(moved, position(grid)) == pytest.approx(z[0], abs=1e-10)
    assert expectation(moved, momentum(grid)) == pytest.approx(z[1], abs=1e-10)
    ref = coherent_state(grid, z).density()
    assert np.allclose(moved.matrix, ref.matrix, atol=1e-12)


def test_off_lattice_translation_warns(grid64):
    rho = coherent_state(grid64).density()
    with pytest.warns(OffGridWarning):
        translate(rho, (0.3 * grid64.dx, 0.0))


def test_trace_convolution_identity(grid64, rng):
    rho = random_mixed_state(grid64, rng, spread=0.5)
    mu = random_mixed_state(grid64, rng, spread=0.5)
    lhs, rhs = trace_convolution_check(rho, mu)
    assert lhs == pytest.approx(rhs, rel=1e-6)


def test_moments_of_coherent(coherent):
    hbar = coherent.grid.hbar
    mo = moments_op(coherent, 2)
    # N_2 = M_2 = hbar/2 and Z_2^2 = N_2 + M_2 + d hbar m0
    assert mo["N_n"] == pytest.approx(hbar / 2, rel=1e-8)
    assert mo["M_n"] == pytest.approx(hbar / 2, rel=1e-8)
    assert mo["Z_n_quantum"] ** 2 == pytest.approx(2 * hbar, rel=1e-8)


def test_derivative_is_antihermitian(grid64):
    d = derivative(grid64).matrix
    assert np.allclose(d, -d.conj().T)


def test_operator_csv_roundtrip(grid64, rng):
    rho = random_mixed_state(grid64, rng)
    buf = io.StringIO(operator_to_csv(rho))
    back = operator_from_csv(buf, density=True)
    assert back.grid == grid64
    assert np.allclose(back.matrix, rho.matrix, atol=1e-14)


def test_pure_state_normalizes(grid64):
    v = np.exp(-grid64.x ** 2)
    rho = pure_state(grid64, v * 3.0)
    assert rho.trace().real == pytest.approx(1.0)
