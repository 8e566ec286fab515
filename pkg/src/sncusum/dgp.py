"""Data-generating processes for the simulation study.

Y_k = mu + delta 1{k > tau} + e_k with one of the error models

* ``iid``       innovations directly;
* ``ar1``       e_k = phi e_{k-1} + sqrt(1 - phi^2) nu_k, unit marginal variance;
* ``ar1_ar1``   AR(1) scaled by sqrt(2) after the first quarter;
* ``ar1_x10``   AR(1) scaled by 10 during the first quarter;
* ``arch1_inc`` ARCH(1) e_k = nu_k sqrt(1 - a + a e_{k-1}^2), multiplied by a
  random factor m_k with m_k^2 = 1 + U_k 2 (k - 1) / (n - 1), U_k ~ U(0, 1).

Innovations are standard normal or Student t(3) divided by sqrt(3).
"""

from dataclasses import asdict, dataclass
import json
import math

import numpy as np
from numba import njit
from scipy.signal import lfilter

from .limit import VarianceProfile

ERRORS = ("iid", "ar1", "ar1_ar1", "ar1_x10", "arch1_inc")
INNOVATIONS = ("normal", "t3")
BURN_IN = 1000

# (pre-break scale, post-break scale) for the AR(1) models with a volatility break
_ENVELOPES = {"ar1": (1.0, 1.0), "ar1_ar1": (1.0, math.sqrt(2.0)), "ar1_x10": (10.0, 1.0)}


@dataclass(frozen=True)
class DgpSpec:
    n: int
    mu: float = 0.0
    delta: float = 0.0
    tau: int | None = None
    errors: str = "iid"
    innovations: str = "normal"
    phi: float = 0.3
    alpha1: float = 0.9
    break_fraction: float = 0.25
    pre_scale: float | None = None
    post_scale: float | None = None

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"n must be at least 2, got {self.n}")
        if self.errors not in ERRORS:
            raise ValueError(f"errors must be one of {ERRORS}, got {self.errors!r}")
        if self.innovations not in INNOVATIONS:
            raise ValueError(f"innovations must be one of {INNOVATIONS}")
        if self.tau is not None and not 1 <= self.tau <= self.n:
            raise ValueError(f"tau must lie in 1..{self.n}, got {self.tau}")
        if not -1.0 < self.phi < 1.0:
            raise ValueError(f"phi must lie in (-1, 1), got {self.phi}")
        if not 0.0 <= self.alpha1 < 1.0:
            raise ValueError(f"alpha1 must lie in [0, 1), got {self.alpha1}")
        if not 0.0 < self.break_fraction < 1.0:
            raise ValueError("break_fraction must lie in (0, 1)")

    @property
    def is_null(self) -> bool:
        return self.delta == 0 or self.tau is None or self.tau == self.n

    @property
    def scales(self) -> tuple:
        """Volatility multipliers before and after the break (AR(1) models only)."""
        pre, post = _ENVELOPES.get(self.errors, (1.0, 1.0))
        return (pre if self.pre_scale is None else self.pre_scale,
                post if self.post_scale is None else self.post_scale)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict):
        return cls(**d)

    @classmethod
    def from_json(cls, text: str):
        return cls.from_dict(json.loads(text))


def _innovations(rng, size, law):
    if law == "normal":
        return rng.standard_normal(size)
    return rng.standard_t(3, size) / math.sqrt(3.0)


def _ar1(rng, spec):
    phi = spec.phi
    scale = math.sqrt(1.0 - phi * phi)
    if spec.innovations == "normal":
        nu = rng.standard_normal(spec.n)
        drive = scale * nu
        drive[0] = nu[0]  # stationary start: e_1 ~ N(0, 1)
        return lfilter([1.0], [1.0, -phi], drive)
    nu = _innovations(rng, BURN_IN + spec.n, spec.innovations)
    return lfilter([1.0], [1.0, -phi], scale * nu)[BURN_IN:]


@njit(cache=True)
def _arch1(nu, alpha1):
    omega = 1.0 - alpha1
    e = np.empty(nu.shape[0])
    prev = 0.0
    for k in range(nu.shape[0]):
        prev = nu[k] * math.sqrt(omega + alpha1 * prev * prev)
        e[k] = prev
    return e


def _errors(rng, spec):
    n = spec.n
    if spec.errors == "iid":
        return _innovations(rng, n, spec.innovations)
    if spec.errors == "arch1_inc":
        nu = _innovations(rng, BURN_IN + n, spec.innovations)
        e = _arch1(nu, spec.alpha1)[BURN_IN:]
        u = rng.uniform(size=n)
        growth = 2.0 * np.arange(n) / (n - 1)
        return e * np.sqrt(1.0 + u * growth)
    e = _ar1(rng, spec)
    pre, post = spec.scales
    k = np.arange(1, n + 1)
    return e * np.where(k > n * spec.break_fraction, post, pre)


def generate(spec: DgpSpec, seed: int) -> np.ndarray:
    """Simulate one path of the model; deterministic in ``(spec, seed)``."""
    rng = np.random.default_rng(seed)
    e = _errors(rng, spec)
    tau = spec.n if spec.tau is None else spec.tau
    k = np.arange(1, spec.n + 1)
    y = spec.mu + spec.delta * (k > tau) + e
    y.flags.writeable = False
    return y


def theoretical_eta(spec: DgpSpec) -> VarianceProfile:
    """Variance profile implied by the deterministic scaling of the error model."""
    if spec.errors == "arch1_inc":
        raise ValueError("arch1_inc has a random volatility envelope; no deterministic eta")
    if spec.errors == "iid":
        return VarianceProfile.constant()
    pre, post = spec.scales
    if pre == post:
        return VarianceProfile.constant()
    return VarianceProfile.piecewise_constant(
        (0.0, spec.break_fraction, 1.0), (pre * pre, post * post))


def to_csv(y) -> str:
    return "".join(f"{float(v)!r}\n" for v in y)
