"""Counterfactual wage decompositions under a censored selection rule.

The estimation pipeline has three stages. Stage 1 fits a logistic
distribution regression of annual hours on the full sample and evaluates
each worker's conditional CDF at their own hours - the control function -
along with the per-observation probability of working zero hours. Stage 2
regresses log wages on transformations of the wage covariates and the
control function, by least squares (conditional mean) and by distribution
regression over a log-wage grid (conditional distribution), over a trimmed
selected sample. Stage 3 assembles counterfactual outcome distributions for
group triples (outcome structure, composition, selection rule), from which
quantile changes between two groups split into selection, composition and
structural effects that add up to the total change by construction.

A fully parametric censored-selection simulator with closed-form effects
serves as an independent oracle, and a weighted bootstrap provides
uncertainty bands for every decomposition output.
"""

__version__ = "0.1.0"

from .bootstrap import (BootstrapConfig, BootstrapResult,
                        bootstrap_decomposition, two_group_bootstrap)
from .config import GroupSource, SimulateSpec, StudyConfig, load_config
from .control import ControlFit, estimate_control
from .counterfactual import (CounterfactualCurve, DecompResult, GroupFit,
                             MeanDecomposition, RatioDecompResult,
                             ate_education, counterfactual_cdf,
                             counterfactual_lasf_mean, decompose,
                             decompose_between, decompose_mean,
                             decompose_ratio, fit_group)
from .data import (ControlSpec, DesignSpec, MicroSample, Observation, Term,
                   TrimRule, build_design, design_columns, indicator,
                   intercept, interaction, linear, read_sample_csv, square,
                   validate_sample, write_sample_csv)
from .distreg import (DRFit, GridPolicy, GridQuantile, LogitFit, evaluate_cdf,
                      fit_distribution_regression, fit_logit,
                      make_threshold_grid, quantile_from_curve,
                      rearrange_monotone)
from .errors import (CollinearDesignError, ConfigError, ConvergenceError,
                     DataError, EmptySelectionError, EmptyTrimmedSampleError,
                     EstimationError, PerfectSeparationError)
from .oracle import (CovariateLaw, HSMParams, MCEstimate, MixtureComponent,
                     OracleEffects, closed_form_effects, counterfactual_mean,
                     inverse_mills, simulate_hsm)
from .outcome import OutcomeFit, fit_outcome, lasf_value, trim_indices
from .study import run_ate, run_between, run_ratio, run_study
