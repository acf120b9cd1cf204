"""covform: numeric workbench for covariant-differential field theory.

Vector-valued differential forms on periodic finite-difference grids,
exterior covariant differentials, Lagrangian momenta, field-equation
residuals, energy tensors, Noether currents, and metric-affine gravity,
with every identity cross-checked against independent evaluation paths.
"""

__version__ = "0.1.0"

from .grid import Chart, GridField, TrigSpec, cell_sum, diff_axis, \
    interior_mask, make_trig_field, partial_derivative
from .fiber import (CoSpinor, CotangentIndex, Endomorphism, FiberSignature,
                    InternalCovector, InternalVector, Metric, Multiplicity,
                    Spinor, TangentIndex, complementary_convert, hodge_star,
                    interior_product, pack, unpack, wedge)
from .connections import (Background, LinearConnection, SpacetimeConnection,
                          SpinorConnection, curvature, dual_connection,
                          gamma_matrices, levi_civita, riemann_from_gamma,
                          tensor_product_connection)
from .calculus import (VariationPair, connection_as_form, covariant_derivative,
                       covariant_divergence, covariant_lie_derivative,
                       d_kappa_basic, d_kappa_lie, d_kappa_std, gauge_variation,
                       replacement_residual, variation_prolong)
from .sectors import (FiberPoint, MomentaTriple, momenta_analytic,
                      momenta_numeric, random_fiber_point, sector_lambda)
from .dynamics import (ActionTools, DFState, action_tools,
                       canonical_energy_tensor, dirac_residual, divergence_of_T,
                       field_eq_residual, gauge_delta_lambda, gravity_residuals,
                       matter_signature, noether_current, prolong,
                       stress_energy_tensor, total_stress_energy)
from .states import (abelian_vacuum, dirac_wave, flat_background,
                     frw_gravity_state, klein_gordon_wave,
                     minkowski_gravity_state, random_boson_state,
                     random_dirac_state, random_gauge_state,
                     random_so3_connection, random_spacetime_connection)
from .report import (Scenario, convergence_study, load_scenario,
                     parse_scenario, run_suite)
