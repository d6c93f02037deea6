"""Random and stochastic Hill's equations in the small-fluctuation regime."""

from .apps import (AxisRatios, ExtractedCycle, OrbitTrace, extract_cycles,
                   omega_y_sq, pooled_barrier, preheat_preset)
from .cycle import (CycleSolution, FirstOrderCoeffs, first_order_coeffs,
                    integrate_cycle, j_factor, perturbed_elements,
                    sin2_two_j1_minus_1, small_q_elements, small_q_h,
                    two_j1_minus_1, zeroth_order_moments)
from .errors import (AccuracyError, ConfigError, DegenerateBaseError,
                     DegenerateMomentsError, DomainError, GridMismatchError,
                     HillError, InsufficientTraceError, NotEllipticError,
                     SingularMapError, UnsupportedFormError)
from .model import (BarrierShape, HillParams, NoiseConfig, PerturbationDist,
                    RunConfig, barrier_eval, barrier_validate, config_from_dict,
                    config_to_dict, load_config, stream)
from .random_hill import (RandomHillRun, eta_of_perturbation, growth_direct_random,
                          growth_eta_sampled, growth_t22, growth_t31)
from .stochastic import (NoisePath, XiMoments, equivalent_perturbations,
                         growth_stochastic, integrate_stochastic_cycle, ou_path,
                         sample_equivalent_perturbations, xi_moments)
from .xfer import (EllipticalForm, GrowthEstimate, TransferMatrix,
                   elliptical_decompose, growth_from_eta, growth_product,
                   matrix_from_elements, product_det_drift)

__version__ = "0.1.0"
