"""Congruence classes of point configurations in fractal sets.

Tools for the metric on k-point configurations modulo rigid motions, Haar
sampling on O(d), self-similar measures of prescribed dimension, and Monte
Carlo estimators of the configuration energies attached to them.
"""

from .estimators import (
    EnergySweepReport,
    Estimate,
    config_correlation,
    default_c_m,
    energy_sweep,
    epsset_haar_measure,
    fit_loglog_slope,
    nu_rho_density_at,
    nu_rho_moment,
    nu_rho_moment_trend,
    riesz_energy,
    semifinal_estimate,
)
from .fractal import (
    InfeasibleSpecError,
    SampleSet,
    Similarity,
    SimilarityIFS,
    box_counting_dimension,
    chaos_game_sample,
    deterministic_cells,
    make_cantor_like,
    read_samples,
    segment_samples,
    similarity_dimension,
    uniform_box_samples,
    write_samples,
)
from .geometry import (
    CenteredConfiguration,
    Centering,
    Configuration,
    OrthogonalMatrix,
    RigidMotion,
    affine_reduce,
    center,
    config_dim,
    configuration_rank,
    optimal_alignment,
    procrustes_distance,
    procrustes_distance_batch,
    read_configurations,
    threshold,
)
from .haar import RngSeed, SamplingError, frobenius_volume, haar_batch, haar_check, sample_near, sample_orthogonal

__version__ = "0.1.0"
