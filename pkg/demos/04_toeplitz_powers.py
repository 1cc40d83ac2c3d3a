"""Powers of Toeplitz operators and their self-coupling cost."""
from qotlab import PhaseGrid, self_coupling_cost, toeplitz_coupling_cost, toeplitz_power_state
from qotlab.states import symbol

grid = PhaseGrid.make(1 / 8, 256)
for name in ("gaussian", "two_bump", "uniform"):
    f = symbol(grid, name, 1.0)
    print(f"{name}: Toeplitz coupling cost {toeplitz_coupling_cost(f).total:.8f} (d hbar = {grid.hbar})")
    for n in (2, 4):
        out = toeplitz_power_state(f, n)
        cost = self_coupling_cost(out["rho"]).total
        print(f"    n={n}: C_f={out['C_f']:.4g} <= {out['Cf_bound']:.4g};  cost={cost:.5f} <= {out['cost_rhs']:.5f}")
