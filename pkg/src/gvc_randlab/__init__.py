"""Upstreamness/downstreamness correlations in random input-output economies."""

from .analytics import (
    MomentSet,
    covariance_curve,
    covariance_exact,
    hyp2f1_special,
    j_integral,
    l_integral,
    moments_analytic,
    slope_exact,
)
from .experiments import EnsembleSpec, covariance_table, run_ensemble, scatter_uv, sparsity_sweep
from .measures import (
    downstreamness_fally,
    downstreamness_true,
    rank1_estimators,
    upstreamness_fally,
    upstreamness_true,
)
from .model import Disorder, IoTable, ModelParams, SubstochasticPair, build_pair, instance_rng, sample_table

__version__ = "0.1.0"
