"""Absolute risk prediction for cannabis use disorder under competing mortality.

A Bayesian proportional-hazards engine with an M-spline baseline, survey
weights and left truncation in the likelihood, a life-table competing
mortality hazard, posterior-averaged absolute-risk prediction, validation
metrics with logistic recalibration, and a synthetic-cohort oracle.
"""

from .cohort import CohortRecord, read_cohort_csv, write_cohort_csv
from .errors import (ConvergenceError, CudriskError, DomainError,
                     InitializationError, SchemaError, SimulationError)
from .hazard import (ModelParams, cud_hazard, cud_survival, linear_predictor,
                     profile_vector, relative_risk)
from .likelihood import log_likelihood, log_prior
from .longitudinal import (LmmFit, PanelObservation, blup, fit_lmm,
                           mean_over_waves, read_panel_csv)
from .mcmc import (McmcConfig, PosteriorDraws, check_convergence, fit_map,
                   run_mcmc)
from .model import AbsoluteRiskModel
from .mortality import (LifeTableHazard, load_life_table,
                        mortality_survival_ratio, read_life_table_csv)
from .risk import (Anchor, RiskEstimate, RiskQuery, absolute_risk,
                   competing_death_risk, posterior_risk)
from .screening import (CoxFit, c_index, fit_cox, sign_flip_report,
                        univariate_screen)
from .selection import (posterior_summary, select_credible_interval,
                        select_scaled_neighborhood)
from .splines import (SplineBasis, ispline_eval, ispline_matrix, make_knots,
                      mspline_eval, mspline_matrix)
from .synthetic import (SimConfig, TruthRecord, constant_hazard_model,
                        simulate_cohort, write_truth_csv)
from .validation import (CrossValidationResult, Outcome, PredictionInterval,
                         PredictionOutcomePair, classify_outcome,
                         cross_validate, expected_observed, interval_auc,
                         quartile_calibration, recalibrate,
                         subgroup_calibration)

__version__ = "0.1.0"
