"""Monte-Carlo simulation of the limit distributions of the self-normalized statistics.

Paths of a time-changed Wiener process W(eta(t)) are sampled on the grid
t = j/m.  On such a grid, suprema become maxima over grid points and the
integrals become left-endpoint Riemann sums, which makes the S functional
identical to the Q statistic of the path increments and the T functional
identical to the R statistic of the increments.
"""

from concurrent.futures import ThreadPoolExecutor
import csv
from dataclasses import dataclass, field
import io
import json
import math

import numpy as np

from . import _kernels
from .bootstrap import order_statistic_index

FUNCTIONALS = ("S", "T", "BB")
N_BATCHES = 10
CHUNK = 1000


@dataclass(frozen=True)
class VarianceProfile:
    """Deterministic variance function sigma^2 on [0, 1].

    ``kind`` is ``"constant"``, ``"piecewise_constant"`` (one value per
    interval between consecutive ``breaks``) or ``"piecewise_linear"`` (one
    value per break, linearly interpolated).
    """

    kind: str = "constant"
    breaks: tuple = (0.0, 1.0)
    values: tuple = (1.0,)

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if self.kind not in ("constant", "piecewise_constant", "piecewise_linear"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if b.size < 2 or b[0] != 0.0 or b[-1] != 1.0 or np.any(np.diff(b) <= 0):
            raise ValueError("breaks must increase strictly from 0 to 1")
        want = b.size if self.kind == "piecewise_linear" else b.size - 1
        if self.kind == "constant" and (b.size != 2 or v.size != 1):
            raise ValueError("a constant profile has breaks (0, 1) and one value")
        if v.size != want:
            raise ValueError(f"{self.kind} profile needs {want} values, got {v.size}")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValueError("variance values must be positive and finite")
        object.__setattr__(self, "breaks", tuple(float(x) for x in b))
        object.__setattr__(self, "values", tuple(float(x) for x in v))

    @classmethod
    def constant(cls):
        return cls()

    @classmethod
    def piecewise_constant(cls, breaks, values):
        return cls("piecewise_constant", tuple(breaks), tuple(values))

    @classmethod
    def piecewise_linear(cls, breaks, values):
        return cls("piecewise_linear", tuple(breaks), tuple(values))

    @property
    def id(self) -> str:
        if self.kind == "constant":
            return "linear"
        fmt = lambda xs: ",".join(f"{x:g}" for x in xs)  # noqa: E731
        tag = "pc" if self.kind == "piecewise_constant" else "pl"
        return f"{tag}:{fmt(self.breaks)}:{fmt(self.values)}"

    def integral(self, t):
        """Integral of sigma^2 from 0 to t (exact, vectorised)."""
        t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        b = np.asarray(self.breaks)
        v = np.asarray(self.values)
        j = np.clip(np.searchsorted(b, t, side="right") - 1, 0, b.size - 2)
        width = np.diff(b)
        if self.kind == "piecewise_linear":
            seg = width * (v[:-1] + v[1:]) / 2.0
            slope = (v[1:] - v[:-1]) / width
            dt = t - b[j]
            part = v[j] * dt + slope[j] * dt ** 2 / 2.0
        else:
            seg = width * v
            part = v[j] * (t - b[j])
        cum = np.concatenate(([0.0], np.cumsum(seg)))
        return cum[j] + part

    @property
    def total(self) -> float:
        return float(self.integral(1.0))

    def eta(self, t):
        out = self.integral(t) / self.total
        return out if np.ndim(out) else float(out)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "breaks": list(self.breaks), "values": list(self.values)}

    @classmethod
    def from_dict(cls, d: dict):
        if d.get("kind", "constant") == "constant":
            return cls()
        return cls(d["kind"], tuple(d["breaks"]), tuple(d["values"]))


def eta_from_sigma(profile: VarianceProfile):
    """Time change eta(t) = int_0^t sigma^2 / int_0^1 sigma^2 as a vectorised callable."""
    return profile.eta


def simulate_path(eta, m: int, rng: np.random.Generator) -> np.ndarray:
    """Discrete path W(eta(j/m)), j = 0..m, of a time-changed standard Wiener process."""
    if m < 2:
        raise ValueError(f"grid size must be at least 2, got {m}")
    grid = np.asarray(eta(np.arange(m + 1) / m), dtype=float)
    steps = np.sqrt(np.maximum(np.diff(grid), 0.0)) * rng.standard_normal(m)
    return np.concatenate(([0.0], np.cumsum(steps)))


def _increments(path):
    path = np.asarray(path, dtype=float)
    if path.ndim != 1 or path.shape[0] < 3:
        raise ValueError("path must be one-dimensional with at least 3 grid points")
    return np.diff(path)


def functional_S(path) -> float:
    """Grid version of the supremum-type limit functional."""
    return float(_kernels.q_stat(_increments(path), True)[0])


def functional_T(path) -> float:
    """Grid version of the integral-type limit functional, O(m) via prefix moments."""
    return float(_kernels.r_stat(_increments(path))[0])


def functional_T_quadrature(path) -> float:
    """Direct O(m^2) left-endpoint quadrature of the integral-type functional.

    Independent of the prefix-moment route used by :func:`functional_T`.
    """
    w = np.asarray(path, dtype=float) - path[0]
    m = w.shape[0] - 1
    x = np.diff(w)
    tol, tol_sq = _kernels.zero_tolerances(x, _kernels.center(x))
    tol_sq /= m
    j = np.arange(m + 1)
    wt = w[m] - w
    total = 0.0
    for k in range(1, m + 1):
        num = abs(w[k] - k / m * w[m])
        head = np.sum((w[:k] - j[:k] / k * w[k]) ** 2) / m
        tail = np.sum((wt[k:m] - (m - j[k:m]) / (m - k) * wt[k]) ** 2) / m if k < m else 0.0
        if num <= tol:
            continue
        if head + tail <= tol_sq:
            return math.inf
        total += num * num / (head + tail) / m
    return total


def bridge_sup(path) -> float:
    """sup_t |W(t) - t W(1)| on the grid (not scale invariant)."""
    w = np.asarray(path, dtype=float)[None, :] - path[0]
    out = np.empty(1)
    _kernels.bridge_sup_rows(w, out)
    return float(out[0])


def zeta_bridge(B, zeta: float) -> np.ndarray:
    """B_zeta on the grid: (1 - zeta) B(t) up to zeta, B(zeta) - zeta B(t) after.

    ``zeta`` is snapped to the nearest grid point.
    """
    B = np.asarray(B, dtype=float)
    m = B.shape[-1] - 1
    jz = _grid_index(zeta, m)
    z = jz / m
    t_idx = np.arange(m + 1)
    b_z = B[..., jz:jz + 1]
    return np.where(t_idx <= jz, (1.0 - z) * B, b_z - z * B)


def _grid_index(zeta, m):
    if not 0.0 < zeta < 1.0:
        raise ValueError(f"zeta must lie in (0, 1), got {zeta}")
    return min(max(int(round(zeta * m)), 1), m - 1)


@dataclass
class QuantileTable:
    """Simulated quantiles of a limit functional.

    ``levels`` are probabilities (0.95, not 95).  ``sample`` holds the sorted
    simulated values when available; it is not serialised.
    """

    functional_kind: str
    profile_id: str
    levels: list
    quantiles: list
    mc_stderr: list
    m: int
    runs: int
    seed: int
    delta: float | None = None
    zeta: float | None = None
    sample: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def monotone(self) -> bool:
        return all(a < b for a, b in zip(self.quantiles, self.quantiles[1:]))

    def quantile(self, level: float) -> float:
        for lv, q in zip(self.levels, self.quantiles):
            if math.isclose(lv, level, abs_tol=1e-9):
                return q
        if self.sample is not None:
            return float(self.sample[order_statistic_index(level, self.sample.shape[0])])
        raise KeyError(f"level {level} not in table {self.levels}")

    def p_value(self, observed: float):
        if self.sample is None:
            return None
        exceed = self.sample.shape[0] - np.searchsorted(self.sample, observed, side="left")
        return float((1.0 + exceed) / (self.sample.shape[0] + 1.0))

    def to_dict(self) -> dict:
        return {
            "functional_kind": self.functional_kind,
            "profile_id": self.profile_id,
            "levels": list(self.levels),
            "quantiles": list(self.quantiles),
            "mc_stderr": list(self.mc_stderr),
            "m": self.m,
            "runs": self.runs,
            "seed": self.seed,
            "delta": self.delta,
            "zeta": self.zeta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict):
        return cls(**{k: d.get(k) for k in (
            "functional_kind", "profile_id", "levels", "quantiles", "mc_stderr",
            "m", "runs", "seed", "delta", "zeta")})

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "quantile", "mc_stderr"])
        for row in zip(self.levels, self.quantiles, self.mc_stderr):
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()


def _run_stream(seed, run):
    return np.random.default_rng(np.random.SeedSequence([seed, run]))


def _functional_rows(paths_or_incs, kind, out):
    if kind == "BB":
        _kernels.bridge_sup_rows(paths_or_incs, out)
    else:
        scratch = np.empty(out.shape[0])
        if kind == "S":
            _kernels.qr_rows(paths_or_incs, True, False, True, out, scratch)
        else:
            _kernels.qr_rows(paths_or_incs, False, True, True, scratch, out)


def _chunk(kinds, steps, seed, start, stop, alt):
    m = steps.shape[0]
    incs = np.empty((stop - start, m))
    for row, run in enumerate(range(start, stop)):
        rng = _run_stream(seed, run)
        incs[row] = steps * rng.standard_normal(m)
        if alt is not None:
            scale, jz = alt
            b = np.concatenate(([0.0], np.cumsum(rng.standard_normal(m) / math.sqrt(m))))
            z = jz / m
            bz = np.where(np.arange(m + 1) <= jz, (1.0 - z) * b, b[jz] - z * b)
            incs[row] -= scale * np.diff(bz)
    res = {}
    for kind in kinds:
        out = np.empty(stop - start)
        if kind == "BB":
            paths = np.zeros((stop - start, m + 1))
            np.cumsum(incs, axis=1, out=paths[:, 1:])
            _functional_rows(paths, kind, out)
        else:
            _functional_rows(incs, kind, out)
        res[kind] = out
    return res


def simulate_functionals(kinds, profile=None, m: int = 1000, runs: int = 100_000,
                         seed: int = 0, workers: int = 1, alt=None) -> dict:
    """Raw Monte-Carlo samples (in run order) of the requested functionals.

    ``alt`` is an optional ``(delta, zeta)`` pair selecting the fixed-alternative
    limit W_eta - (delta / varsigma) B_zeta with an independent Wiener process B.
    """
    kinds = tuple(kinds)
    for k in kinds:
        if k not in FUNCTIONALS:
            raise ValueError(f"unknown functional {k!r}; choose from {FUNCTIONALS}")
    profile = profile or VarianceProfile.constant()
    grid = profile.eta(np.arange(m + 1) / m)
    steps = np.sqrt(np.maximum(np.diff(grid), 0.0))
    alt_args = None
    if alt is not None:
        delta, zeta = alt
        alt_args = (delta / math.sqrt(profile.total), _grid_index(zeta, m))
    bounds = [(s, min(s + CHUNK, runs)) for s in range(0, runs, CHUNK)]
    job = lambda se: _chunk(kinds, steps, seed, se[0], se[1], alt_args)  # noqa: E731
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, bounds))
    else:
        parts = [job(se) for se in bounds]
    return {k: np.concatenate([p[k] for p in parts]) for k in kinds}


def quantile_table(sample, kind, levels, *, profile_id, m, runs, seed, delta=None, zeta=None):
    """Order-statistic quantiles plus batch-means standard errors over 10 batches."""
    levels = [float(lv) for lv in levels]
    srt = np.sort(sample)
    qs = [float(srt[order_statistic_index(lv, srt.shape[0])]) for lv in levels]
    batches = np.array_split(np.asarray(sample), N_BATCHES)
    errs = []
    for lv in levels:
        per = [np.sort(bt)[order_statistic_index(lv, bt.shape[0])] for bt in batches]
        per = np.asarray(per)
        finite = np.isfinite(per)
        errs.append(float(np.std(per[finite], ddof=1) / math.sqrt(finite.sum()))
                    if finite.sum() > 1 else math.nan)
    srt.flags.writeable = False
    return QuantileTable(kind, profile_id, levels, qs, errs, m, runs, seed,
                         delta=delta, zeta=zeta, sample=srt)


def _check_sizes(m, runs):
    if m < 100:
        raise ValueError(f"grid size m must be at least 100, got {m}")
    if runs < 1000:
        raise ValueError(f"need at least 1000 runs, got {runs}")


def simulate_quantiles(kind: str, profile=None, m: int = 1000, runs: int = 100_000,
                       levels=(0.90, 0.95, 0.975, 0.99, 0.995), seed: int = 0,
                       workers: int = 1) -> QuantileTable:
    """Quantiles of S(W_eta), T(W_eta) or sup|Brownian bridge| (kind "BB")."""
    _check_sizes(m, runs)
    profile = profile or VarianceProfile.constant()
    sample = simulate_functionals((kind,), profile, m, runs, seed, workers)[kind]
    return quantile_table(sample, kind, levels, profile_id=profile.id, m=m, runs=runs, seed=seed)


def simulate_alternative_limit(kind: str, profile=None, delta: float = 0.0, zeta: float = 0.5,
                               m: int = 1000, runs: int = 100_000,
                               levels=(0.5, 0.90, 0.95, 0.99), seed: int = 0,
                               workers: int = 1) -> QuantileTable:
    """Quantiles of S or T applied to W_eta - (delta / varsigma) B_zeta."""
    _check_sizes(m, runs)
    if kind not in ("S", "T"):
        raise ValueError("alternative limit is defined for the S and T functionals")
    if not math.isfinite(delta):
        raise ValueError("delta must be finite")
    profile = profile or VarianceProfile.constant()
    sample = simulate_functionals((kind,), profile, m, runs, seed, workers,
                                  alt=(delta, zeta))[kind]
    return quantile_table(sample, kind, levels, profile_id=profile.id, m=m, runs=runs,
                          seed=seed, delta=delta, zeta=zeta)
