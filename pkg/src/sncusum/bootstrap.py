"""Wild bootstrap for the self-normalized statistics.

Each replicate multiplies the centred observations by i.i.d. standard normal
multipliers, Y*_k = (Y_k - mean(Y)) X_k, and re-evaluates the statistic.  The
multipliers of replicate ``b`` come from their own generator seeded by
``(seed, b)``, so results do not depend on how replicates are split across
worker threads.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math

import numpy as np

from . import _kernels
from .series import as_series, series_values
from .statistics import changepoint_estimate, q_statistic, r_statistic

KINDS = ("Q", "R")
CHUNK = 128


@dataclass(frozen=True)
class BootstrapConfig:
    B: int = 2000
    seed: int = 0
    statistic_kind: str = "Q"
    alpha: float = 0.05

    def __post_init__(self):
        if self.B < 1:
            raise ValueError(f"B must be positive, got {self.B}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.statistic_kind not in KINDS:
            raise ValueError(f"statistic_kind must be one of {KINDS}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class AsymptoticConfig:
    """Critical values taken from a simulated limit-distribution table."""

    table: "QuantileTable"  # noqa: F821
    statistic_kind: str = "Q"
    alpha: float = 0.05

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        expected = {"Q": "S", "R": "T"}.get(self.statistic_kind)
        if expected is None:
            raise ValueError(f"statistic_kind must be one of {KINDS}")
        if self.table.functional_kind != expected:
            raise ValueError(
                f"{self.statistic_kind} needs a {expected}-table, got {self.table.functional_kind}")


@dataclass(frozen=True)
class BootstrapDistribution:
    replicates: np.ndarray
    observed: float
    config: BootstrapConfig

    @property
    def B(self) -> int:
        return self.replicates.shape[0]


@dataclass
class TestReport:
    statistic_kind: str
    observed: float
    method: str
    critical_value: float
    p_value: float | None
    reject: bool
    alpha: float
    tau_hat: int | None = None
    seed: int | None = None
    B: int | None = None
    degenerate: bool = False
    extra: dict = field(default_factory=dict)

    __test__ = False  # keep pytest from collecting this as a test class

    def to_dict(self) -> dict:
        d = {
            "statistic_kind": self.statistic_kind,
            "observed": _json_float(self.observed),
            "method": self.method,
            "critical_value": _json_float(self.critical_value),
            "p_value": self.p_value,
            "reject": self.reject,
            "alpha": self.alpha,
            "tau_hat": self.tau_hat,
            "seed": self.seed,
            "B": self.B,
            "degenerate": self.degenerate,
        }
        d.update(self.extra)
        return d


def _json_float(x):
    if x is None:
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(x)


def replicate_stream(seed: int, b: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, b]))


def _chunk_stats(xc, seed, start, stop, kinds, envelope):
    n = xc.shape[0]
    Y = np.empty((stop - start, n))
    for row, b in enumerate(range(start, stop)):
        Y[row] = xc * replicate_stream(seed, b).standard_normal(n)
    q = np.empty(stop - start)
    r = np.empty(stop - start)
    _kernels.qr_rows(Y, "Q" in kinds, "R" in kinds, envelope, q, r)
    return q, r


def replicate_statistics(series, B: int, seed: int, kinds=KINDS, workers: int = 1,
                         envelope: bool = True) -> dict:
    """Unsorted bootstrap replicates of the requested statistics, keyed by kind.

    Q and R replicates computed together share their multipliers, exactly as
    two separate runs with the same seed would.
    """
    y = series_values(series)
    xc = _kernels.center(y)
    bounds = [(s, min(s + CHUNK, B)) for s in range(0, B, CHUNK)]
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(
                lambda se: _chunk_stats(xc, seed, se[0], se[1], kinds, envelope), bounds))
    else:
        parts = [_chunk_stats(xc, seed, s, e, kinds, envelope) for s, e in bounds]
    out = {}
    if "Q" in kinds:
        out["Q"] = np.concatenate([p[0] for p in parts])
    if "R" in kinds:
        out["R"] = np.concatenate([p[1] for p in parts])
    return out


def observed_statistic(series, kind: str):
    if kind == "Q":
        return q_statistic(series, method="envelope")
    return r_statistic(series)


def wild_replicates(series, cfg: BootstrapConfig, workers: int = 1) -> BootstrapDistribution:
    y = as_series(series_values(series))
    reps = replicate_statistics(y, cfg.B, cfg.seed, (cfg.statistic_kind,), workers)
    sorted_reps = np.sort(reps[cfg.statistic_kind])
    sorted_reps.flags.writeable = False
    observed = observed_statistic(y, cfg.statistic_kind).value
    return BootstrapDistribution(sorted_reps, observed, cfg)


def order_statistic_index(level: float, count: int) -> int:
    """0-based index of the ceil(level * count)-th order statistic."""
    k = math.ceil(level * count - 1e-9)
    return min(max(k, 1), count) - 1


def critical_value(dist: BootstrapDistribution, alpha: float) -> float:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return float(dist.replicates[order_statistic_index(1.0 - alpha, dist.B)])


def p_value(dist: BootstrapDistribution) -> float:
    """(1 + #{replicates >= observed}) / (B + 1); never zero."""
    exceed = dist.B - np.searchsorted(dist.replicates, dist.observed, side="left")
    return (1.0 + exceed) / (dist.B + 1.0)


def run_test(series, cfg, workers: int = 1) -> TestReport:
    """Test for a mean change with bootstrap or asymptotic critical values.

    ``cfg`` is a :class:`BootstrapConfig` or an :class:`AsymptoticConfig`.
    When the null is rejected the report carries the changepoint estimate.
    """
    y = as_series(series_values(series))
    if isinstance(cfg, BootstrapConfig):
        dist = wild_replicates(y, cfg, workers)
        stat = observed_statistic(y, cfg.statistic_kind)
        crit = critical_value(dist, cfg.alpha)
        report = TestReport(
            statistic_kind=cfg.statistic_kind, observed=stat.value, method="bootstrap",
            critical_value=crit, p_value=p_value(dist), reject=stat.value > crit,
            alpha=cfg.alpha, seed=cfg.seed, B=cfg.B, degenerate=stat.degenerate)
    elif isinstance(cfg, AsymptoticConfig):
        stat = observed_statistic(y, cfg.statistic_kind)
        crit = cfg.table.quantile(1.0 - cfg.alpha)
        report = TestReport(
            statistic_kind=cfg.statistic_kind, observed=stat.value, method="asymptotic",
            critical_value=crit, p_value=cfg.table.p_value(stat.value),
            reject=stat.value > crit, alpha=cfg.alpha, seed=cfg.table.seed,
            degenerate=stat.degenerate)
    else:
        raise TypeError(f"unsupported configuration {type(cfg).__name__}")
    if report.reject:
        report.tau_hat = changepoint_estimate(y, method="envelope").tau_hat
    return report
