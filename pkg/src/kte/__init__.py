"""Transport-entropy toolkit.

Convex costs and their Young profiles, Hopf-Lax operators on grids,
Orlicz-type norms, dual Sobolev norms, exact discrete optimal transport and
end-to-end checks of transport-entropy energy bounds.

Set ``KTE_DISABLE_NUMBA=1`` to run the pure-numpy kernels instead of the
compiled ones.
"""

from ._accel import USE_NUMBA
from .bvp import ThetaSolution, interpolation_constant, solve_delta, solve_theta
from .convex_cost import (BlackBoxCost, CostSpec, PowerCost, RadialCost, YoungProfile, check_delta2,
                          cost_from_dict, eval_cost, gamma, legendre, one_sided_derivatives, radius_RL,
                          young_phi, young_psi)
from .errors import (Delta2Violation, InvalidOrder, InvalidSpec, KteError, NotSuperlinear, OutOfDomain,
                     PreconditionViolation, QuadratureFailure, SizeLimit, Unbounded, WindowExceedsGrid)
from .grid import GridField, gaussian_smooth
from .harness import (MeasurePair, VerificationReport, gen_measures, smooth, verify_energy_bound,
                      verify_ledoux_interpolation)
from .hopf_lax import generator_probe, hj_residual, inf_convolve, interpolation_check, semigroup_residual
from .measures import DiscreteMeasure, VectorSample, convolve_measures
from .orlicz import luxemburg_norm, orlicz_norm
from .sobolev_dual import DualNormProblem, DualNormResult, dual_sobolev_norm
from .transport import TransportPlan, dual_via_hopf_lax, ot_1d_monotone, solve_ot

__version__ = "0.1.0"
