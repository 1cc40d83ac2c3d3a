"""Self-coupling cost of a coherent state and the gradient identity.

The cost of the explicit self-coupling splits into d*hbar plus
hbar^2 ||grad sqrt(rho)||^2; for a coherent state the second term is
2 d hbar, so the total is 3 d hbar.
"""
from qotlab import PhaseGrid, coherent_state, self_coupling_cost

for hbar in (1 / 8, 1 / 16):
    grid = PhaseGrid.make(hbar, 256, 8.0)
    rho = coherent_state(grid, (0.5, -0.25)).density()
    rep = self_coupling_cost(rho)
    print(f"hbar={hbar:.4f}  cost={rep.total:.8f}  3*hbar={3 * hbar:.8f}  "
          f"classical part={rep.i1:.8f}  gradient part={rep.i2:.8f}")
