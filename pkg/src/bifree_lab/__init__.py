"""Numerical laboratory for microstate entropy of left/right (bi-free) variable families."""

__version__ = "0.1.0"

from .cumulants import (CumulantTable, free_cumulants_from_moments, free_product_moment, is_m_eps_free,
                        moments_from_free_cumulants)
from .entropy import (ChiValue, chi_upper_bound, gaussian_chi, gaussian_delta, numeric_delta, shift_chi,
                      subadditivity_gap, transform_chi)
from .errors import ConfigurationError, PreconditionError
from .gram import (cone_upper_bound, gram_log_constant, gram_region_log_volume, pair_constraint_log_volume_oracle,
                   validate_gram_constant)
from .matrices import (NumericalCorruption, eval_generalized_lr_word, eval_lr_word, hs_inner, operator_norm,
                       sample_gue, sample_haar_unitary, sample_hs_ball)
from .microstates import MicrostateSpec, MicrostateTuple, is_microstate
from .moments import (CovarianceSpec, TargetMoments, build_target, gaussian_moment, pushforward_covariance,
                      read_moment_file, target_from_values)
from .orbital import (OrbitalEstimate, asymptotic_freeness_fraction, chi_orb_sequence, orbital_hit_probability,
                      orbital_subadditivity_gap, semicircle_families)
from .partitions import enumerate_nc_pairings, enumerate_nc_partitions
from .volume import (GUESampler, HSBall, VolumeEstimate, chi_sequence, estimate_log_volume,
                     pushforward_volume_ratio, reference_log_volume)
from .words import Letter, ReducedWord, left, reduced_words, right

__all__ = [name for name in dir() if not name.startswith("_")]
