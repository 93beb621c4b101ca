"""Threshold-based multiclass classification on the probability simplex."""

from .metrics import ConfusionCounts, Score, ScoreSpec, binary_score, macro_score, overall_accuracy, per_class_confusions
from .regions import RegionAssignment, TiePolicy, classify, classify_batch, region_of, shifted_scores
from .simplex import DirichletParams, barycenter, dirichlet_density, sample_dirichlet, simplex_grid, validate_simplex
from .sol_loss import MultiSOL, SolConfig, expected_confusions, hoeffding_samples, multisol_loss, multisol_loss_with_gradient, soft_membership
from .tuning import TuneResult, heatmap_table, tune_grid, tune_mc

__version__ = "0.1.0"
