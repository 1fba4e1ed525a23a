"""Numerical laboratory for the nonlocal dispersal equation with absorption,

    u_t = J*u - u - u^p,   1 < p < 1 + 2/N,

with the barriers, rescalings, and local-limit profiles that organize its
large-time behavior.
"""

from .kernels import KernelSpec, DiscreteStencil, build_kernel, alpha, scaled_kernel, sample_on_grid
from .field import (Grid, Field, ZeroTail, PowerTail, CompactBump, PowerTailDatum,
                    Constant, Custom, sample_datum, norms, weighted_sup)
from .nonlocal_op import (ConvolutionPlan, make_plan, convolve, apply_L,
                          apply_L_scaled, local_limit_residual, gaussian_test_field)
from .evolve import (EvolveParams, Trajectory, step_etd1, step_picard, run,
                     evolve_pair_compare, max_stable_dt)
from .barriers import (BarrierPhi, TimeBarrier, admissible_C2, verify_supersolution,
                       choose_constants, measure_datum_bound, time_barrier_check)
from .limits import (flat_solution, flat_decay_constant, heat_kernel, profile_rhs,
                     ProfileSolution, integrate_profile, shoot_vss, shoot_UA,
                     eval_profile, w_series, check_w_bounds)
from .asymptotics import (RateFit, rescale_field, fit_power_law, convergence_metric,
                          check_mass_divergence, gamma, mass_balance_residual)

__version__ = "0.1.0"
