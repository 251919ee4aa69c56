"""Free multiplicative convolution, norm-growth bounds, and random-matrix checks."""

__version__ = "0.1.0"

from .bounds import (
    bounds_report,
    cohen_newman_lambda,
    cohen_newman_large_k,
    cyclic_vector_norm,
    digamma,
    gamma_constant,
    growth_rate,
    symmetric_product_bounds,
    product_norm_bounds,
    product_norm_log_bounds,
    verify_proof_inequalities,
)
from .errors import NonConvergence, NumericalBreakdown, UndefinedTransform, ValidationError
from .freeconv import ConvolutionResult, free_multiply, free_power, gram_base, product_gram_moments
from .measure import (
    MomentSequence,
    SpectralMeasure,
    hankel_psd_check,
    load_measure,
    marchenko_pastur,
    mean_variance,
    measure_from_atoms,
    measure_from_json,
    moments,
    normalize_mean,
    point_mass,
    save_measure,
    support_radius,
)
from .series import TruncatedSeries, compose, lagrange_invert, mul, power, reciprocal
from .transforms import (
    CauchyEvaluator,
    cauchy_evaluator,
    extrapolated_density,
    free_power_evaluator,
    moments_from_s,
    psi_from_moments,
    s_transform,
    stieltjes_invert,
    support_edge,
)
