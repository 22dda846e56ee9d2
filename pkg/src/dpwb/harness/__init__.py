"""Benchmark engine: utility and scalability loops, DP tester, reports."""

from dpwb.harness.dptest import DpTestReport, dp_statistical_test
from dpwb.harness.metrics import UndefinedBaselineError, epsilon_grid, mre, sase
from dpwb.harness.plans import PRESETS, build_plans, known_selectors, plan_for
from dpwb.harness.report import emit_report, read_scalability_csv, read_utility_csv
from dpwb.harness.scalability import ScalabilityRecord, run_scalability
from dpwb.harness.utility import UtilityRecord, run_utility

__all__ = [
    "DpTestReport",
    "PRESETS",
    "ScalabilityRecord",
    "UndefinedBaselineError",
    "UtilityRecord",
    "build_plans",
    "dp_statistical_test",
    "emit_report",
    "epsilon_grid",
    "known_selectors",
    "mre",
    "plan_for",
    "read_scalability_csv",
    "read_utility_csv",
    "run_scalability",
    "run_utility",
    "sase",
]
