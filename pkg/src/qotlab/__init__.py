"""Numerical toolkit for semiclassical optimal transport on a phase-space grid."""
from .errors import *  # noqa: F401,F403
from .grid import (PhaseDensity, PhaseGrid, PlanckScale, SpatialGrid, balanced_half_width, convolve,
                   delta_cell, gaussian_gh, moment)
from .qop import (DensityOperator, Operator, density_from_matrix, expectation, gradient_norm_sq, moments_op,
                  pure_state, quantum_gradient, schatten_norm, skew_information, sqrt_psd, trace_convolution_check,
                  translate, variance)
from .transforms import (CoherentState, coherent_state, husimi, toeplitz_quantize, weyl_quantize, wigner)
from .states import (PotentialSpec, ProjectionSpec, ThermalSpec, hamiltonian, projection_gradient_scaling,
                     spectral_projection, thermal_bounds_report, thermal_state, toeplitz_power_state)
from .couplings import (CostReport, SelfCoupling, lifted_coupling, pseudometric_upper_bound, sandwich_report,
                        self_coupling_cost, toeplitz_coupling_cost)
from .classical_ot import (DiscreteMeasure, TransportPlan, discretize, interpolation_lemma_check, wasserstein)
from .sobolev import (ProductState, hs_norm, loeper_classical_check, lower_bound_chain, upper_bound_chain)

__version__ = "0.1.0"
