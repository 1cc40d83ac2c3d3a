"""Thermal states and spectral projections of Schroedinger operators.

Prints the partition function against pi*hbar/sinh(beta*hbar), the
thermal moment and Golden-Thompson bounds, and the hbar scaling of the
quantum gradient of the projection onto negative energies of x^2 - 1.
"""
import numpy as np

from qotlab import PhaseGrid, PotentialSpec, ThermalSpec, projection_gradient_scaling, thermal_bounds_report, thermal_state
from qotlab.states import HARMONIC, harmonic_partition_function

for beta in (0.5, 1.0, 2.0):
    grid = PhaseGrid.make(1 / 8, 256)
    spec = ThermalSpec(HARMONIC, beta, grid)
    _, z = thermal_state(spec)
    print(f"beta={beta}: Z={z:.8f} exact={harmonic_partition_function(beta, 1 / 8):.8f}")
    for key, (lhs, rhs) in thermal_bounds_report(spec, 4).items():
        print(f"    {key:16s} {lhs:10.4g} <= {rhs:10.4g}")

well = PotentialSpec("shifted_power", 1.0, 2.0, -1.0)
grids = [PhaseGrid.make(h, n) for h, n in ((1 / 8, 128), (1 / 16, 128), (1 / 32, 256))]
for row in projection_gradient_scaling(well, grids):
    print(f"hbar={row['hbar']:.5f}  Z0-pi={row['Z0'] - np.pi:+.2e}  "
          f"sqrt(hbar)|grad P|={row['sqrt_hbar_grad']:.5f}  |pP|={row['pP_op']:.4f}")
