"""Time series validation, cumulative sums and segment means."""

from dataclasses import dataclass

import numpy as np

from . import _kernels


class InvalidSeriesError(ValueError):
    """Raised for series that are too short or contain non-finite values."""


def as_series(values) -> np.ndarray:
    """Validate ``values`` and return them as a read-only float64 array.

    A series needs at least two observations and every entry must be finite.
    """
    y = np.array(values, dtype=np.float64, copy=True)
    if y.ndim != 1:
        raise InvalidSeriesError(f"expected a one-dimensional series, got shape {y.shape}")
    if y.shape[0] < 2:
        raise InvalidSeriesError(f"need at least 2 observations, got {y.shape[0]}")
    bad = np.flatnonzero(~np.isfinite(y))
    if bad.size:
        raise InvalidSeriesError(
            f"non-finite value {y[bad[0]]!r} at position {bad[0] + 1}")
    y.flags.writeable = False
    return y


def _frozen(a):
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class PrefixSums:
    """Cumulative sums V(0..n) of a series and the auxiliary prefix moments.

    ``V[0] == 0`` so that every segment sum is a two-term difference.
    ``SV2[k]`` is the sum of V(i)^2, ``SiV[k]`` the sum of i V(i) and ``Si2[k]``
    the sum of i^2, all over 1 <= i <= k.
    """

    values: np.ndarray
    V: np.ndarray
    SV2: np.ndarray
    SiV: np.ndarray
    Si2: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def tail(self, k):
        """Ṽ(k) = V(n) - V(k), the sum of the observations after position k."""
        return self.V[self.n] - self.V[k]


def cumulative_sums(series) -> PrefixSums:
    y = as_series(series)
    n = y.shape[0]
    V = _kernels.neumaier_cumsum(y)
    idx = np.arange(1, n + 1, dtype=np.float64)
    SV2 = _kernels.neumaier_cumsum(V[1:] ** 2)
    SiV = _kernels.neumaier_cumsum(idx * V[1:])
    Si2 = np.concatenate(([0.0], np.cumsum(idx ** 2)))
    return PrefixSums(y, _frozen(V), _frozen(SV2), _frozen(SiV), _frozen(Si2))


def segment_mean(series, i: int, j: int) -> float:
    """Mean of observations i..j (1-based, inclusive)."""
    ps = series if isinstance(series, PrefixSums) else cumulative_sums(series)
    if not 1 <= i <= j <= ps.n:
        raise IndexError(f"segment ({i}, {j}) outside 1..{ps.n}")
    return float((ps.V[j] - ps.V[i - 1]) / (j - i + 1))


def series_values(obj) -> np.ndarray:
    """Accept a raw series or a :class:`PrefixSums` and return the observations."""
    if isinstance(obj, PrefixSums):
        return obj.values
    return as_series(obj)
