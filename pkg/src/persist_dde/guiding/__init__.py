"""Guiding functions and sampled checks of the persistence hypotheses."""
from .checks import (
    F_star,
    F_star_curve,
    SupEstimate,
    check_H1,
    check_H2,
    check_H3,
    check_H4,
    check_H5_H6,
    check_H7,
    check_H8,
    check_H9,
    phi_star,
    phi_star_curve,
    rate,
    theta,
    theta_estimates,
    witness_value,
    witness_violates,
)
from .functions import (
    GuidingFunction,
    get_guiding,
    half_square,
    linear,
    min_coordinate,
    squared_norm,
)
from .report import FAILS, HOLDS, UNDETERMINED, HypothesisReport, Witness
from .sampling import SublevelSampler
