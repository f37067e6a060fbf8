"""Bayesian ordinal-probit cellular automata for wildfire spread.

Typical use::

    from cafire import GridSpec, NeighborhoodSpec, fit_states, forecast, ForecastConfig

States are 1 (unburnt), 2 (burning) and 3 (burnt); cells are indexed
row-major from the south-west corner.
"""
from .basis import BasisMatrix, RankError, bisquare_basis, compute_eofs, construct_eofs, regular_knots
from .errors import CafireError, ConfigError, DataError, DimensionError, NumericalError
from .forecast import ForecastConfig, ForecastDistribution, forecast, most_probable_states
from .grid import (BURNING, BURNT, STATES, UNBURNT, ClassifierConfig, GridSpec, TemperatureRaster,
                   classify_states, coarsen_raster, monotone_collapse, validate_statefield)
from .inference import (ChainConfig, GibbsSampler, ModelData, ModelParams, PosteriorSamples, Priors,
                        fit_states, in_sample_probabilities, run_gibbs, transition_probability)
from .neighborhood import (NeighborhoodSpec, WindRecord, build_covariates, covariate_stack, dynamic_neighbors,
                           neighbor_counts)
from .simulator import (RuleTable, SimConfig, fit_fsim, forward_most_probable, gsim_impute, simulate_fire,
                        temperature_pools)
from .summaries import hpd_interval, state_probabilities
from .verification import ContingencyTable, ScoreReport, gss, naive_rps, per_state_gss, rps, score

__version__ = "0.1.0"
