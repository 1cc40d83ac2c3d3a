import numpy as np
import pytest

from qotlab.errors import NoBoundStates, ResolutionError, ZeroSymbol
from qotlab.grid import PhaseDensity, PhaseGrid
from qotlab.states import (HARMONIC, PotentialSpec, ProjectionSpec, ThermalSpec, c_a, eigensystem,
                           hamiltonian, harmonic_eigenstate, harmonic_partition_function,
                           projection_gradient_scaling, spectral_projection, symbol, thermal_bounds_report,
                           thermal_state, toeplitz_power_state)

WELL = PotentialSpec("shifted_power", 1.0, 2.0, -1.0)


def test_harmonic_spectrum():
    grid = PhaseGrid.make(0.125, 256)
    w, _ = eigensystem(HARMONIC, grid)
    # -hbar^2 Lap + x^2 has eigenvalues hbar (2k + 1)
    assert np.allclose(w[:10], 0.125 * (2 * np.arange(10) + 1), atol=1e-10)


def test_hamiltonian_resolution_guard():
    grid = PhaseGrid.make(0.125, 64)
    with pytest.raises(ResolutionError):
        hamiltonian(HARMONIC, grid, energy_scale=1e3)


@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("hbar", [0.125, 0.0625])
def test_thermal_partition_function(beta, hbar):
    grid = PhaseGrid.make(hbar, 256)
    rho, z = thermal_state(ThermalSpec(HARMONIC, beta, grid))
    assert z == pytest.approx(harmonic_partition_function(beta, hbar), rel=1e-4)
    assert rho.trace().real == pytest.approx(1.0, abs=1e-10)


def test_thermal_needs_room():
    grid = PhaseGrid.make(0.125, 32, 1.0)
    with pytest.raises(ResolutionError):
        thermal_state(ThermalSpec(HARMONIC, 0.5, grid))


def test_thermal_bounds_hold():
    grid = PhaseGrid.make(0.125, 256)
    rep = thermal_bounds_report(ThermalSpec(HARMONIC, 1.0, grid), 4)
    for key, (lhs, rhs) in rep.items():
        assert lhs <= rhs * (1 + 1e-9), key
    # Golden-Thompson is nearly tight for the harmonic oscillator
    lhs, rhs = rep["golden_thompson"]
    assert lhs / rhs > 0.98


def test_c_a_harmonic_value():
    # phase-space integral of exp(-(|xi|^2 + |x|^2)) in d = 1 is pi
    assert c_a(1, 2) == pytest.approx(np.pi)


def test_projection_weyl_count():
    for hbar in (0.125, 0.0625):
        grid = PhaseGrid.make(hbar, 256)
        rho, z0, p = spectral_projection(ProjectionSpec(WELL, grid))
        assert z0 == pytest.approx(np.pi, rel=1e-12)
        assert np.allclose(p @ p, p, atol=1e-10)
        assert rho.trace().real == pytest.approx(1.0)


def test_projection_needs_negative_region():
    grid = PhaseGrid.make(0.125, 64)
    with pytest.raises(NoBoundStates):
        spectral_projection(ProjectionSpec(HARMONIC, grid))


def test_projection_momentum_bound_and_gradient_scaling():
    grids = [PhaseGrid.make(0.125, 128), PhaseGrid.make(0.0625, 128)]
    rows = projection_gradient_scaling(WELL, grids)
    for r in rows:
        assert r["pP_op"] <= r["Vminus_sup_sqrt"] == 1.0
    ratio = rows[0]["sqrt_hbar_grad"] / rows[1]["sqrt_hbar_grad"]
    assert 0.5 < ratio < 2


@pytest.mark.parametrize("name,cf", [("gaussian", 1194.22613), ("two_bump", 241.506774), ("uniform", 117.863713)])
def test_toeplitz_power_constants(name, cf):
    grid = PhaseGrid.make(0.125, 256)
    out = toeplitz_power_state(symbol(grid, name, 1.0), 4)
    assert out["C_f"] == pytest.approx(cf, rel=1e-6)
    assert out["C_f"] <= out["Cf_bound"]
    assert out["rho"].trace().real == pytest.approx(1.0)


def test_toeplitz_power_rejects_bad_input(grid64):
    with pytest.raises(ValueError):
        toeplitz_power_state(symbol(grid64, "gaussian"), 3)
    with pytest.raises(ZeroSymbol):
        toeplitz_power_state(PhaseDensity(grid64, np.zeros(grid64.shape)), 2)


def test_symbols_are_probabilities(grid64):
    for name in ("gaussian", "two_bump", "uniform"):
        assert symbol(grid64, name).integral() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        symbol(grid64, "triangle")


def test_harmonic_eigenstate_is_pure(grid64):
    rho = harmonic_eigenstate(grid64, 1)
    assert rho.eigenvalues[-1] * rho.scale.h == pytest.approx(1.0)
