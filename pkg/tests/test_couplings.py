import json

import numpy as np
import pytest

from qotlab.couplings import (RankOneFamily, SelfCoupling, lifted_coupling, packet_cost, pseudometric_upper_bound,
                              sandwich_report, self_coupling_cost, toeplitz_coupling_cost)
from qotlab.errors import DimensionTooLarge, TailTruncation
from qotlab.grid import PhaseDensity, PhaseGrid, delta_cell, gaussian_gh
from qotlab.states import HARMONIC, ThermalSpec, symbol, thermal_state
from qotlab.transforms import coherent_state, husimi, toeplitz_matrix, toeplitz_quantize


def test_coherent_self_cost_oracle(coherent):
    # E_z integrates to d hbar + 2 d hbar for a coherent state
    rep = self_coupling_cost(coherent)
    hbar = coherent.grid.hbar
    assert rep.total == pytest.approx(3 * hbar, rel=1e-6)
    assert rep.rel_error < 1e-6
    assert rep.i2 == pytest.approx(2 * hbar, rel=1e-6)
    assert rep.extras["i2_ibp"] == pytest.approx(rep.i2, rel=1e-8)
    assert rep.extras["min_integrand"] >= 0
    assert set(json.loads(rep.to_json())) == {"total", "i1", "i2", "rhs_identity", "rel_error", "grid"}


def test_thermal_self_cost_identity():
    grid = PhaseGrid.make(0.125, 256)
    rho, _ = thermal_state(ThermalSpec(HARMONIC, 1.0, grid))
    rep = self_coupling_cost(rho)
    assert rep.rel_error < 1e-10
    assert rep.i1 + rep.i2 == pytest.approx(rep.total, rel=1e-10)


def test_self_cost_refuses_aliased_state():
    grid = PhaseGrid.make(0.125, 16)
    rho = coherent_state(grid, (2 * grid.dx, 0)).density()
    with pytest.raises(TailTruncation):
        self_coupling_cost(rho)


def test_self_coupling_marginal_is_husimi(grid64):
    rho = coherent_state(grid64, (grid64.x[34], grid64.xi[30])).density()
    sc = SelfCoupling(rho)
    hus, _ = sc.scan()
    assert np.allclose(hus, husimi(rho).values, atol=1e-10 * hus.max())
    m = sc.marginal()
    assert np.allclose(m, rho.matrix, atol=1e-10 * np.abs(rho.matrix).max())


def test_packet_cost_is_d_hbar(grid128):
    # packets inside the alias-free window; edge packets wrap around the torus
    e0 = packet_cost(grid128)[32:96, 32:96]
    assert np.allclose(e0, grid128.hbar, rtol=1e-6)


@pytest.mark.parametrize("name", ["gaussian", "two_bump", "uniform"])
def test_toeplitz_coupling_cost(name):
    grid = PhaseGrid.make(0.125, 256)
    rep = toeplitz_coupling_cost(symbol(grid, name, 1.0))
    assert rep.total == pytest.approx(grid.hbar, rel=1e-6)


def test_lifted_coupling_coherent():
    grid = PhaseGrid.make(0.125, 24)
    rho = coherent_state(grid).density()
    lc = lifted_coupling(RankOneFamily.from_self_coupling(rho), rho.matrix)
    rep = lc.report
    assert (rep.total - rep.i1) == pytest.approx(grid.hbar, rel=1e-4)
    assert lc.marginal_errors["tr1_vs_rho"] < 1e-10
    assert lc.marginal_errors["tr2_vs_toeplitz"] < 1e-5
    assert lc.marginal_errors["min_eigenvalue"] > -1e-10 * lc.marginal_errors["max_eigenvalue"]


def test_lifted_coupling_delta_is_exact():
    grid = PhaseGrid.make(0.125, 24)
    f = delta_cell(grid, (0, 0))
    lc = lifted_coupling(RankOneFamily.from_toeplitz(f), toeplitz_matrix(grid, f.values))
    assert lc.report.total == pytest.approx(2 * grid.hbar, rel=1e-10)


def test_lifted_coupling_size_guard():
    grid = PhaseGrid.make(0.125, 64)
    rho = coherent_state(grid).density()
    with pytest.raises(DimensionTooLarge):
        lifted_coupling(RankOneFamily.from_self_coupling(rho), rho.matrix)


def test_sandwich_bounds(coherent, grid128):
    f = gaussian_gh(grid128, (4 * grid128.dx, 0))
    rep = sandwich_report(f, coherent)
    assert rep["pass"]
    assert rep["lower"] <= rep["upper"]
    ub = pseudometric_upper_bound(f, coherent)
    assert ub["sqrt_cost"] == pytest.approx(np.sqrt(3 * grid128.hbar), rel=1e-5)
