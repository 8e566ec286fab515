"""Size/power simulation study: rejection rates, size-power curves and estimator spread.

Every repetition of every cell draws from its own seed derived from
``(master_seed, cell id, repetition)``, so a cell can be re-run in isolation
and results do not depend on execution order.
"""

from dataclasses import dataclass, field, replace
from functools import lru_cache
import csv
import io
import json
import math
import re
import zlib

import numpy as np

from .bootstrap import order_statistic_index, replicate_statistics
from .dgp import DgpSpec, generate, theoretical_eta
from .limit import VarianceProfile, simulate_quantiles
from .statistics import DegenerateSeriesError, changepoint_estimate, cusum_statistic, \
    q_statistic, r_statistic

METHODS = ("Q_asymptotic", "R_asymptotic", "Q_bootstrap", "R_bootstrap", "CUSUM_M",
           "Q_true_eta", "R_true_eta")
DEFAULT_METHODS = ("Q_asymptotic", "R_asymptotic", "Q_bootstrap", "R_bootstrap")

_CELL_RE = re.compile(
    r"^(?P<errors>iid|ar1|ar1_ar1|ar1_x10|arch1_inc)(?P<t3>_t3)?"
    r"_(?:null|d(?P<delta>[-0-9.e+]+)_tau(?P<tau>[0-9.]+))_n(?P<n>\d+)"
    r"(?P<extra>(?:_(?:mu|phi|alpha1|bf|pre|post)[-0-9.e+]+)*)$")
# optional suffixes for parameters that differ from the DgpSpec defaults
_EXTRA = (("mu", "mu"), ("phi", "phi"), ("alpha1", "alpha1"), ("bf", "break_fraction"),
          ("pre", "pre_scale"), ("post", "post_scale"))
_EXTRA_RE = re.compile(r"_(mu|phi|alpha1|bf|pre|post)([-0-9.e+]+)")


def _num(x) -> str:
    short = f"{x:g}"
    return short if float(short) == x else repr(float(x))


def cell_id(spec: DgpSpec) -> str:
    """Readable identifier such as ``iid_null_n400`` or ``ar1_t3_d0.5_tau0.25_n100``."""
    parts = [spec.errors]
    if spec.innovations == "t3":
        parts.append("t3")
    if spec.is_null:
        parts.append("null")
    else:
        parts.append(f"d{_num(spec.delta)}_tau{_num(spec.tau / spec.n)}")
    parts.append(f"n{spec.n}")
    default = DgpSpec(n=spec.n)
    for tag, name in _EXTRA:
        value = getattr(spec, name)
        if value is not None and value != getattr(default, name):
            parts.append(f"{tag}{float(value)!r}")
    return "_".join(parts)


def parse_cell_id(text: str) -> DgpSpec:
    m = _CELL_RE.match(text.strip())
    if m is None:
        raise ValueError(f"cannot parse cell id {text!r}")
    n = int(m["n"])
    kw = dict(n=n, errors=m["errors"], innovations="t3" if m["t3"] else "normal")
    if m["delta"] is not None:
        kw["delta"] = float(m["delta"])
        kw["tau"] = int(round(float(m["tau"]) * n))
    fields = dict(_EXTRA)
    for tag, value in _EXTRA_RE.findall(m["extra"]):
        kw[fields[tag]] = float(value)
    return DgpSpec(**kw)


def derive_seed(*keys) -> int:
    """64-bit seed derived from a tuple of non-negative integers."""
    return int(np.random.SeedSequence(list(keys)).generate_state(1, np.uint64)[0])


def _cell_key(cid: str) -> int:
    return zlib.crc32(cid.encode())


@dataclass
class ExperimentConfig:
    cells: list
    methods: tuple = DEFAULT_METHODS
    repetitions: int = 1000
    B: int = 500
    alphas: tuple = (0.01, 0.05, 0.10)
    master_seed: int = 0
    m_rule: float = 0.1
    asym_m: int = 1000
    asym_runs: int = 100_000
    asym_seed: int = 0

    def __post_init__(self):
        self.cells = [parse_cell_id(c) if isinstance(c, str) else
                      (DgpSpec.from_dict(c) if isinstance(c, dict) else c) for c in self.cells]
        self.methods = tuple(self.methods)
        self.alphas = tuple(float(a) for a in self.alphas)
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; choose from {METHODS}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if self.B < 1:
            raise ValueError("B must be at least 1")
        if not all(0.0 < a < 1.0 for a in self.alphas):
            raise ValueError("alphas must lie in (0, 1)")
        if not self.cells:
            raise ValueError("no cells configured")

    @classmethod
    def full_scale(cls, cells, **kw):
        """5000 repetitions with 2000 bootstrap samples each."""
        return cls(cells, repetitions=5000, B=2000, **kw)

    def to_dict(self) -> dict:
        return {
            "cells": [c.to_dict() for c in self.cells],
            "methods": list(self.methods),
            "repetitions": self.repetitions,
            "B": self.B,
            "alphas": list(self.alphas),
            "master_seed": self.master_seed,
            "m_rule": self.m_rule,
            "asym_m": self.asym_m,
            "asym_runs": self.asym_runs,
            "asym_seed": self.asym_seed,
        }

    @classmethod
    def from_dict(cls, d: dict):
        return cls(**d)


@lru_cache(maxsize=32)
def asymptotic_table(kind: str, profile: VarianceProfile, levels: tuple, m: int, runs: int,
                     seed: int):
    return simulate_quantiles(kind, profile, m=m, runs=runs, levels=levels, seed=seed)


@dataclass
class CellResult:
    cell_id: str
    spec: DgpSpec
    scores: dict = field(default_factory=dict)
    rejects: dict = field(default_factory=dict)
    degenerate: dict = field(default_factory=dict)
    tau_hat: np.ndarray | None = None


@dataclass
class RejectionTable:
    rows: list

    def rate(self, cell: str, method: str, alpha: float) -> float:
        for r in self.rows:
            if r["cell"] == cell and r["method"] == method and math.isclose(r["alpha"], alpha):
                return r["rejection_rate"]
        raise KeyError((cell, method, alpha))

    def to_csv(self, rows=None) -> str:
        buf = io.StringIO()
        cols = ["cell", "method", "alpha", "rejection_rate", "stderr", "repetitions",
                "degenerate"]
        w = csv.DictWriter(buf, cols, lineterminator="\n")
        w.writeheader()
        w.writerows(self.rows if rows is None else rows)
        return buf.getvalue()


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    cells: dict
    table: RejectionTable


def _tables(cfg, spec, kinds_needed):
    levels = tuple(sorted(1.0 - a for a in cfg.alphas))
    out = {}
    for method in kinds_needed:
        if method in ("Q_asymptotic", "R_asymptotic"):
            profile = VarianceProfile.constant()
        elif method in ("Q_true_eta", "R_true_eta"):
            profile = theoretical_eta(spec)
        elif method == "CUSUM_M":
            out[method] = asymptotic_table("BB", VarianceProfile.constant(), levels,
                                           cfg.asym_m, cfg.asym_runs, cfg.asym_seed)
            continue
        else:
            continue
        kind = "S" if method[0] == "Q" else "T"
        out[method] = asymptotic_table(kind, profile, levels, cfg.asym_m, cfg.asym_runs,
                                       cfg.asym_seed)
    return out


def run_cell(spec: DgpSpec, cfg: ExperimentConfig, workers: int = 1) -> CellResult:
    cid = cell_id(spec)
    key = _cell_key(cid)
    tables = _tables(cfg, spec, cfg.methods)
    reps = cfg.repetitions
    res = CellResult(cid, spec)
    for m in cfg.methods:
        res.scores[m] = np.empty(reps)
        res.degenerate[m] = 0
        for a in cfg.alphas:
            res.rejects[(m, a)] = np.zeros(reps, dtype=bool)
    res.tau_hat = np.empty(reps, dtype=np.int64)
    boot_kinds = tuple(k for k in ("Q", "R") if f"{k}_bootstrap" in cfg.methods)
    window = max(1, int(cfg.m_rule * spec.n))

    for rep in range(reps):
        y = generate(spec, derive_seed(cfg.master_seed, key, rep, 0))
        q = q_statistic(y, method="envelope")
        r = r_statistic(y)
        observed = {"Q": q, "R": r}
        res.tau_hat[rep] = changepoint_estimate(y, method="envelope").tau_hat
        boot = {}
        if boot_kinds:
            boot = replicate_statistics(y, cfg.B, derive_seed(cfg.master_seed, key, rep, 1),
                                        boot_kinds, workers)
        for m in cfg.methods:
            if m == "CUSUM_M":
                try:
                    stat, degen = cusum_statistic(y, window), False
                except DegenerateSeriesError:
                    stat, degen = -math.inf, True
                res.scores[m][rep] = stat
                res.degenerate[m] += degen
                for a in cfg.alphas:
                    res.rejects[(m, a)][rep] = stat > tables[m].quantile(1.0 - a)
                continue
            obs = observed[m[0]]
            res.degenerate[m] += obs.degenerate
            if m.endswith("_bootstrap"):
                srt = np.sort(boot[m[0]])
                exceed = srt.shape[0] - np.searchsorted(srt, obs.value, side="left")
                res.scores[m][rep] = 1.0 - (1.0 + exceed) / (srt.shape[0] + 1.0)
                for a in cfg.alphas:
                    crit = srt[order_statistic_index(1.0 - a, srt.shape[0])]
                    res.rejects[(m, a)][rep] = obs.value > crit
            else:
                res.scores[m][rep] = obs.value
                for a in cfg.alphas:
                    res.rejects[(m, a)][rep] = obs.value > tables[m].quantile(1.0 - a)
    return res


def tabulate(cells: dict, cfg: ExperimentConfig) -> RejectionTable:
    rows = []
    for cid, res in cells.items():
        for m in cfg.methods:
            for a in cfg.alphas:
                rej = res.rejects[(m, a)]
                p = float(rej.mean())
                rows.append({
                    "cell": cid, "method": m, "alpha": a, "rejection_rate": p,
                    "stderr": math.sqrt(p * (1.0 - p) / rej.shape[0]),
                    "repetitions": int(rej.shape[0]), "degenerate": int(res.degenerate[m]),
                })
    return RejectionTable(rows)


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    cells = {}
    for spec in cfg.cells:
        res = run_cell(spec, cfg, workers)
        cells[res.cell_id] = res
    return ExperimentResult(cfg, cells, tabulate(cells, cfg))


def rejection_rates(cfg: ExperimentConfig, workers: int = 1) -> RejectionTable:
    return run_experiment(cfg, workers).table


def adjusted_size_power(null_scores, alt_scores):
    """Empirical size against empirical power over all thresholds taken from the null sample.

    Larger scores mean stronger evidence against the null.  Returns two arrays
    sorted by size, running from (0, 0) to (1, 1).
    """
    null_scores = np.asarray(null_scores, dtype=float)
    alt_scores = np.asarray(alt_scores, dtype=float)
    thresholds = np.concatenate(([math.inf], np.unique(null_scores)[::-1], [-math.inf]))
    ns = np.sort(null_scores)
    al = np.sort(alt_scores)
    size = 1.0 - np.searchsorted(ns, thresholds, side="right") / ns.shape[0]
    power = 1.0 - np.searchsorted(al, thresholds, side="right") / al.shape[0]
    size[-1] = power[-1] = 1.0  # rejecting everything, including scores of -inf
    return size, power


def size_power_curve(result: ExperimentResult, null_cell: str, alt_cell: str, method: str):
    a = result.cells[null_cell].spec
    b = result.cells[alt_cell].spec
    if not a.is_null or b.is_null or (a.errors, a.innovations, a.n) != (b.errors, b.innovations, b.n):
        raise ValueError(f"cells {null_cell} and {alt_cell} do not form a null/alternative pair")
    return adjusted_size_power(result.cells[null_cell].scores[method],
                               result.cells[alt_cell].scores[method])


def matching_pairs(result: ExperimentResult):
    """(null cell, alternative cell) pairs sharing error model, innovations and n."""
    pairs = []
    for ncid, nres in result.cells.items():
        if not nres.spec.is_null:
            continue
        for acid, ares in result.cells.items():
            s, t = nres.spec, ares.spec
            if not t.is_null and (s.errors, s.innovations, s.n) == (t.errors, t.innovations, t.n):
                pairs.append((ncid, acid))
    return pairs


def estimator_distribution(cfg: ExperimentConfig) -> dict:
    """tau_hat / n for every repetition of every (alternative) cell."""
    out = {}
    for spec in cfg.cells:
        if spec.is_null:
            raise ValueError(f"cell {cell_id(spec)} has no change; estimator spread undefined")
        cid = cell_id(spec)
        key = _cell_key(cid)
        vals = np.empty(cfg.repetitions)
        for rep in range(cfg.repetitions):
            y = generate(spec, derive_seed(cfg.master_seed, key, rep, 0))
            vals[rep] = changepoint_estimate(y, method="envelope").tau_hat / spec.n
        out[cid] = vals
    return out


def extreme_hetero_scenario(seed: int = 0, reps: int = 1000, B: int = 500, n: int = 200,
                            alphas=(0.01, 0.05, 0.10), pre_scale: float = 10.0,
                            asym_runs: int = 100_000, workers: int = 1) -> ExperimentResult:
    """AR(1) errors whose first quarter is multiplied by ``pre_scale``.

    Compares asymptotic critical values that wrongly assume eta(t) = t, the
    asymptotic values under the true eta, and the wild bootstrap, under the
    null and under a unit change in the middle.
    """
    null = DgpSpec(n=n, errors="ar1_x10", pre_scale=None if pre_scale == 10.0 else pre_scale)
    alt = replace(null, delta=1.0, tau=n // 2)
    cfg = ExperimentConfig(
        [null, alt], methods=("Q_asymptotic", "R_asymptotic", "Q_true_eta", "R_true_eta",
                              "Q_bootstrap", "R_bootstrap"),
        repetitions=reps, B=B, alphas=alphas, master_seed=seed, asym_runs=asym_runs)
    return run_experiment(cfg, workers)


def summary(result: ExperimentResult) -> dict:
    return {
        "config": result.config.to_dict(),
        "cells": list(result.cells),
        "rejection_rates": result.table.rows,
    }


def write_outputs(result: ExperimentResult, outdir, write):
    """Write every artifact of an experiment through ``write(path, text)``."""
    from pathlib import Path

    outdir = Path(outdir)
    write(outdir / "rejection_table.csv", result.table.to_csv())
    for cid, res in result.cells.items():
        for m in result.config.methods:
            rows = [r for r in result.table.rows if r["cell"] == cid and r["method"] == m]
            write(outdir / f"{cid}_{m}.csv", result.table.to_csv(rows))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["repetition", "tau_hat", "tau_hat_over_n"] + list(result.config.methods))
        for rep in range(res.tau_hat.shape[0]):
            w.writerow([rep, int(res.tau_hat[rep]), res.tau_hat[rep] / res.spec.n]
                       + [repr(float(res.scores[m][rep])) for m in result.config.methods])
        write(outdir / f"{cid}_scores.csv", buf.getvalue())
    for ncid, acid in matching_pairs(result):
        for m in result.config.methods:
            size, power = size_power_curve(result, ncid, acid, m)
            text = "size,power\n" + "".join(f"{s!r},{p!r}\n" for s, p in zip(size, power))
            write(outdir / f"{acid}_{m}_curve.csv", text)
    write(outdir / "summary.json", json.dumps(summary(result), indent=2))
