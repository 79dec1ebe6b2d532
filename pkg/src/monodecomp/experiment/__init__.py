"""Decomposition sweeps and the statistics used to compare strategies."""

from .analysis import comparison_report, regression_report, select_best, summarize
from .stats import OlsResult, WelchResult, drop_one_regressions, ols_fit, welch_t_test
from .sweep import SweepConfig, SweepResult, cluster_count_range, run_sweep, run_sweeps, weight_grid
