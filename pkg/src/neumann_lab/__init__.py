"""Finite-dimensional laboratory for quantization no-go constructions."""

from .classical_layer import (ClassicalObservable, LDFunction, compose, constant, ld_affine,
                              ld_arctan, ld_g, ld_identity, ld_map, ld_q,
                              lemma_identity_residuals, observable)
from .errors import (AmbiguityError, CommutingOperatorsError, DomainError, EstimationError,
                     NonCommutingError, QuadratureAccuracyError)
from .operator_core import (GeneratingOperator, HermitianOperator, IntervalSet,
                            check_projection_is_identity, commutant_dimension, commutator,
                            eigenspace_projector, functional_calculus, generating_operator,
                            operator_norm, s_form, spectral_projector)
from .peetre_probe import (GridFunction, LocalOperator, estimate_order,
                           order_multiplicativity_check, support_nonincrease_check)
from .weyl_quantizer import (MultiplicationQuantizer, QuantizationContext, axiom_audit,
                             deviation_sweep, momentum_operator, neumann_deviation,
                             position_operator, weyl_quantize)
from .witness_engine import (WitnessReport, born_probability, eigenvector_identity_check,
                             find_witness_set, g_transform, growth_diagnostic,
                             projection_transport_check, scaled_family)

__version__ = "0.1.0"
