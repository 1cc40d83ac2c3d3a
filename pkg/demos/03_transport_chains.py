"""Classical OT between Husimi transforms and the two bound chains.

Two coherent states half a unit apart: the Husimi transforms are
Gaussians, so W2 between them is the shift.  The chains compare the
quantum Sobolev distance and the transport upper bound.
"""
from qotlab import PhaseGrid, coherent_state, husimi, lower_bound_chain, upper_bound_chain
from qotlab.classical_ot import w2_between_densities

grid = PhaseGrid.make(1 / 8, 128, 8.0)
a = coherent_state(grid).density()
b = coherent_state(grid, (0.5, 0.0)).density()
w2, err = w2_between_densities(husimi(a), husimi(b))
print(f"W2(Husimi a, Husimi b) = {w2:.6f} (discretization bound {err:.3f})")

low = lower_bound_chain(a, b, 0)
print(f"lower chain: |a-b|_H^-1 = {low['lhs']:.4f} <= {low['rhs']:.4f}  (MK upper {low['MK_upper']:.4f})")
up = upper_bound_chain(a, b, 4)
print(f"upper chain: W2 = {up['W2']:.4f} <= {up['rhs_W2']:.4f};  MK upper {up['MK_upper']:.4f} <= {up['rhs_full']:.4f}")
