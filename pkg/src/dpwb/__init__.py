"""Differentially private analytics queries and a utility/scalability benchmark."""

from dpwb.accountant import BudgetLedger, new_ledger
from dpwb.datagen import BoundsPolicy, Dataset, GenParams, generate, grid_27, load_csv, resolve_bounds
from dpwb.errors import (
    BudgetExhausted,
    ConfigurationError,
    DPError,
    InvalidArgumentError,
    NonConvergenceError,
    UnsupportedQueryError,
)
from dpwb.kinds import DpDefinition, MeanStrategy, QueryKind, VarStrategy
from dpwb.mechanisms import Bounds, MechanismKind, MechanismSpec
from dpwb.queries import QueryPlan, QueryResult, clip, dp_count, dp_mean, dp_std, dp_sum, dp_variance
from dpwb.rng import random_source
from dpwb.sensitivity import SamplerConfig, analytic_sensitivity, sample_sensitivity

__version__ = "0.1.0"
