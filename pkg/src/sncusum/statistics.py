"""Self-normalized CUSUM statistics, the changepoint estimator and the classic CUSUM test.

All statistics are evaluated over every candidate k = 1..n without trimming.
Finite samples can produce vanishing denominators (for example a perfect
two-level step), so the following conventions apply everywhere:

* an empty maximum or sum is 0;
* a term whose numerator is 0 contributes 0;
* a positive numerator over a zero denominator is +inf.

"Zero" means below a rounding threshold proportional to the scale of the
data, so the classification is invariant to rescaling the series.
"""

from dataclasses import dataclass
import math

import numpy as np

from . import _kernels
from .series import series_values

NAIVE_MAX_N = 4096

METHODS = ("direct", "envelope")


class DegenerateSeriesError(ValueError):
    """The series carries no variation the statistic can normalise by."""


@dataclass(frozen=True)
class ExtendedStatistic:
    """A non-negative statistic value that may be +inf.

    ``degenerate`` records that some candidate k had a vanishing denominator,
    whether or not that produced an infinite value.
    """

    value: float
    degenerate: bool = False

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.value)

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class EstimateResult:
    tau_hat: int
    objective: float
    runner_up_gap: float


def _check_method(method):
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    return method == "envelope"


def q_statistic(ps, method: str = "direct") -> ExtendedStatistic:
    """Supremum-type self-normalized statistic Q(V_n).

    Parameters
    ----------
    ps : PrefixSums or array_like
        The series (or its cumulative sums).
    method : {"direct", "envelope"}
        ``"direct"`` evaluates every inner maximum in O(n^2) total;
        ``"envelope"`` answers them from convex hulls in O(n log n).
    """
    envelope = _check_method(method)
    y = series_values(ps)
    value, degenerate = _kernels.q_stat(y, envelope)
    return ExtendedStatistic(float(value), bool(degenerate))


def r_statistic(ps) -> ExtendedStatistic:
    """Integral-type self-normalized statistic R(V_n), O(n) via prefix moments."""
    y = series_values(ps)
    value, degenerate = _kernels.r_stat(y)
    return ExtendedStatistic(float(value), bool(degenerate))


def _naive_input(series):
    y = series_values(series)
    if y.shape[0] > NAIVE_MAX_N:
        raise ValueError(f"naive evaluation limited to n <= {NAIVE_MAX_N}, got {y.shape[0]}")
    tol, tol_sq = _kernels.zero_tolerances(y, _kernels.center(y))
    return y, tol, tol_sq


def _naive_parts(y, k):
    """Centered partial sums of the two segments split after position k.

    Returns the sums sum_{j<=i}(Y_j - mean(Y_1..Y_k)) for i = 1..k and the
    sums sum_{j>=i}(Y_j - mean(Y_{k+1}..Y_n)) for i = k+1..n.
    """
    head = np.cumsum(y[:k] - np.mean(y[:k]))
    if k == y.shape[0]:
        return head, np.zeros(0)
    rest = y[k:] - np.mean(y[k:])
    tail = np.cumsum(rest[::-1])[::-1]
    return head, tail


def q_statistic_naive(series) -> ExtendedStatistic:
    """Q(V_n) written out with explicit segment means; a reference for testing."""
    y, tol, _ = _naive_input(series)
    n = y.shape[0]
    overall = np.cumsum(y - np.mean(y))
    best, degenerate = 0.0, False
    for k in range(1, n + 1):
        num = abs(overall[k - 1])
        head, tail = _naive_parts(y, k)
        den = np.max(np.abs(head)) + (np.max(np.abs(tail)) if tail.size else 0.0)
        if den <= tol:
            degenerate = True
        if num <= tol:
            continue
        best = math.inf if den <= tol else max(best, num / den)
    return ExtendedStatistic(float(best), degenerate)


def r_statistic_naive(series) -> ExtendedStatistic:
    """R(V_n) written out with explicit segment means; a reference for testing."""
    y, tol, tol_sq = _naive_input(series)
    n = y.shape[0]
    overall = np.cumsum(y - np.mean(y))
    total, degenerate = 0.0, False
    for k in range(1, n + 1):
        num = abs(overall[k - 1])
        head, tail = _naive_parts(y, k)
        den = np.sum(head ** 2) + np.sum(tail ** 2)
        if den <= tol_sq:
            degenerate = True
        if num <= tol:
            continue
        total = math.inf if den <= tol_sq else total + num * num / den
    return ExtendedStatistic(float(total), degenerate)


def estimator_objective(ps, method: str = "direct") -> np.ndarray:
    """Objective values of the changepoint estimator for k = 1..n."""
    envelope = _check_method(method)
    return _kernels.estimator_objective(series_values(ps), envelope)[1:]


def changepoint_estimate(ps, method: str = "direct") -> EstimateResult:
    """Argmax estimator of the changepoint location, ties going to the smallest k."""
    obj = estimator_objective(ps, method)
    k = int(np.argmax(obj))
    best = float(obj[k])
    others = np.delete(obj, k)
    if math.isinf(best):
        gap = 0.0 if np.isinf(others).any() else math.inf
    else:
        gap = best - float(np.max(others))
    return EstimateResult(tau_hat=k + 1, objective=best, runner_up_gap=gap)


def bartlett_lrv(series, M: int, full_output: bool = False):
    """Bartlett-kernel long-run variance estimate with window length ``M``.

    Computes R(0) + 2 sum_{k=1}^{M} (1 - k/M) R(k) with autocovariances
    R(k) = n^{-1} sum_i (Y_i - mean)(Y_{i+k} - mean).  A negative kernel sum
    is clamped to 0; with ``full_output`` the clamp flag is returned as well.
    """
    y = series_values(series)
    n = y.shape[0]
    if not 1 <= M < n:
        raise ValueError(f"window length M must satisfy 1 <= M < n={n}, got {M}")
    x = y - np.mean(y)
    est = float(np.dot(x, x)) / n
    for k in range(1, M + 1):
        est += 2.0 * (1.0 - k / M) * float(np.dot(x[:-k], x[k:])) / n
    clamped = est < 0.0
    if clamped:
        est = 0.0
    if full_output:
        return est, clamped
    return est


def default_window(n: int) -> int:
    """Rule-of-thumb window M = n/10, rounded down, at least 1."""
    return max(1, n // 10)


def cusum_statistic(series, M: int | None = None) -> float:
    """Sup-type CUSUM standardised by the Bartlett estimate and sqrt(n).

    The extra 1/sqrt(n) makes the null limit the supremum of a standard
    Brownian bridge.
    """
    y = series_values(series)
    n = y.shape[0]
    if M is None:
        M = default_window(n)
    lrv = bartlett_lrv(y, M)
    floor = (32.0 * np.finfo(float).eps * float(np.mean(np.abs(y)))) ** 2
    if lrv <= floor:
        raise DegenerateSeriesError("long-run variance estimate is zero; CUSUM undefined")
    partial = np.cumsum(y - np.mean(y))[:-1]
    return float(np.max(np.abs(partial)) / math.sqrt(lrv * n))
