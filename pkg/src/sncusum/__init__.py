"""Self-normalized CUSUM tests and estimators for a change in the mean."""

__version__ = "0.1.0"

from .series import InvalidSeriesError, PrefixSums, as_series, cumulative_sums, segment_mean
from .statistics import (DegenerateSeriesError, EstimateResult, ExtendedStatistic,
                         bartlett_lrv, changepoint_estimate, cusum_statistic, q_statistic,
                         q_statistic_naive, r_statistic, r_statistic_naive)
from .bootstrap import (AsymptoticConfig, BootstrapConfig, BootstrapDistribution, TestReport,
                        critical_value, p_value, run_test, wild_replicates)
from .limit import (QuantileTable, VarianceProfile, simulate_alternative_limit,
                    simulate_quantiles)
from .dgp import DgpSpec, generate, theoretical_eta

__all__ = [
    "InvalidSeriesError", "PrefixSums", "as_series", "cumulative_sums", "segment_mean",
    "DegenerateSeriesError", "EstimateResult", "ExtendedStatistic", "bartlett_lrv",
    "changepoint_estimate", "cusum_statistic", "q_statistic", "q_statistic_naive",
    "r_statistic", "r_statistic_naive", "AsymptoticConfig", "BootstrapConfig",
    "BootstrapDistribution", "TestReport", "critical_value", "p_value", "run_test",
    "wild_replicates", "QuantileTable", "VarianceProfile", "simulate_alternative_limit",
    "simulate_quantiles", "DgpSpec", "generate", "theoretical_eta",
]
