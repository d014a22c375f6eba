"""Large-N spectral densities of the quartic fermionic matrix ensemble.

Closed forms at zero fermion mass, a Nystrom integral-equation solver at
positive mass, heat-kernel observables of the Dirac spectrum, and a finite-N
Metropolis sampler for validation.
"""

from .core import (DensityGrid, EquilibriumSolution, ModelParams, ONE_CUT,
                   ParamError, PhaseMismatchError, SingularInputError,
                   SolverError, Support, TWO_CUT, dirac_spectrum_from_H,
                   energy_functional, kernel_K, kernel_Ktilde, kernel_R,
                   l1_distance, potential_U, sqrt_s, sqrt_s_plus)
from .closedform import (TransitionReport, gaussian_massless,
                         moments_D_from_H, moments_massless, one_cut_massless,
                         phase_boundary_massless, solve_massless,
                         transition_order_check, two_cut_massless)
from .specfun import bessel_I, bessel_J, hyp2f2
from .fredholm import (NystromConfig, nystrom_phi, solve_equilibrium,
                       solve_one_cut, solve_two_cut)
from .estimators import (EstimatorCurve, dirac_density, estimator_table,
                         heat_kernel_kD2, heat_kernel_kD2_factorized,
                         heat_kernel_kH, low_energy_exponent, mass_transform,
                         spectral_dimension, spectral_variance)
from .mc import (Estimate, McChain, McConfig, action, expectation_estimator,
                 histogram_density, metropolis_sample)

__version__ = "0.1.0"
