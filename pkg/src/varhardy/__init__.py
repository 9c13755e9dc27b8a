"""Desk-scale verification of multiscale operators on variable-exponent spaces."""

from .atomic import (Atom, AtomicDecomposition, a_functional, atom_validate,
                     atomic_decompose, level_sets, reconstruct, select_cubes)
from .calderon import (CoefficientField, ScaleTransforms, analyze, hardy_norm,
                       square_function_G, square_function_Gd, synthesize)
from .czo import (CzoKernel, almost_orthogonality_check, correct_operator,
                  hardy_boundedness_harness, kernel_condition_check, make_operator,
                  matrix_coeff, pairing_T1)
from .errors import (ConfigurationError, DomainError, FilterConstructionError,
                     HypothesisViolation, NumericalIntegrityError, PreconditionError,
                     ScaleRangeError, VarhardyError)
from .filterbank import FilterBank, build_filterbank, check_moments
from .grid import (CubeLattice, DyadicCube, Grid, SampledFunction, build_lattice,
                   convolve_scaled, make_grid)
from .maximal import MaximalConfig, fs_vector_check, hl_maximal, smooth_maximal
from .paraproduct import (BmoSymbol, ParaproductConfig, bmo_norm, carleson_check,
                          kernel_eval, paraproduct_adjoint_apply, paraproduct_apply)
from .varexp import (ExponentFunction, check_log_holder, constant_exponent,
                     luxemburg_norm, modular, piecewise_exponent, smoothstep_exponent)

__version__ = "0.1.0"
