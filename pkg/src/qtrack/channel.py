"""Measurement-dependent binary-input channels.

The channel law depends on a query only through its Lebesgue measure: a query
of measure ``|A|`` puts the channel in state ``q = f(|A|)``, where ``f`` is an
affine size map.  The measurement-dependent BSC flips the oracle's answer with
probability ``zeta * q``.

Inputs and outputs are bits ``{0, 1}``; row ``x`` of a transition matrix is the
law of ``Y`` given ``X = x``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

STOCHASTIC_TOL = 1e-12


class ChannelError(ValueError):
    """Invalid channel parameters or an out-of-domain argument."""


@dataclass(frozen=True)
class SizeMap:
    """Affine size map ``f(q) = slope * q + intercept`` on ``[0, 1]``."""

    slope: float
    intercept: float

    def __post_init__(self):
        if self.intercept < 0 or self.slope + self.intercept < 0:
            raise ChannelError(
                f"size map must be nonnegative on [0,1]: slope={self.slope}, "
                f"intercept={self.intercept}"
            )

    @property
    def lipschitz(self) -> float:
        return abs(self.slope)

    @property
    def max_value(self) -> float:
        return max(self.intercept, self.slope + self.intercept)

    @property
    def min_value(self) -> float:
        return min(self.intercept, self.slope + self.intercept)

    def __call__(self, measure):
        return self.slope * np.asarray(measure, dtype=float) + self.intercept


def state_of_measure(size_map: SizeMap, measure: float) -> float:
    """Channel state of a query with the given Lebesgue measure."""
    if not 0.0 <= measure <= 1.0:
        raise ChannelError(f"query measure must lie in [0, 1], got {measure}")
    return size_map.slope * measure + size_map.intercept


@dataclass(frozen=True)
class ChannelSpec:
    """Measurement-dependent binary symmetric channel.

    ``zeta * max f`` must not exceed one.  States whose crossover exceeds 1/2
    are legal but make queries of that size anti-informative, so they trigger a
    warning at construction.
    """

    zeta: float
    size_map: SizeMap
    kind: str = "MD-BSC"

    def __post_init__(self):
        if self.kind != "MD-BSC":
            raise ChannelError(f"unsupported channel kind {self.kind!r}")
        if not 0.0 < self.zeta <= 1.0:
            raise ChannelError(f"zeta must lie in (0, 1], got {self.zeta}")
        worst = self.zeta * self.size_map.max_value
        if worst > 1.0 + STOCHASTIC_TOL:
            raise ChannelError(
                f"zeta * max f = {worst} exceeds 1; transition probabilities invalid"
            )
        if worst > 0.5:
            warnings.warn(
                f"crossover reaches {worst:.4g} > 1/2 for large queries",
                stacklevel=3,
            )

    @classmethod
    def md_bsc(cls, zeta: float, slope: float, intercept: float) -> "ChannelSpec":
        return cls(zeta=zeta, size_map=SizeMap(slope, intercept))

    @property
    def output_alphabet_size(self) -> int:
        return 2

    def crossover(self, q):
        """Flip probability in state ``q`` (vectorised)."""
        return self.zeta * np.asarray(q, dtype=float)

    def crossover_of_measure(self, measure):
        return self.crossover(self.size_map(measure))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "zeta": self.zeta,
            "slope": self.size_map.slope,
            "intercept": self.size_map.intercept,
        }


def transition_matrix(channel: ChannelSpec, q: float) -> np.ndarray:
    """2x2 row-stochastic matrix ``W[x, y]`` of the channel in state ``q``."""
    e = channel.zeta * q
    if e > 1.0 + STOCHASTIC_TOL or e < -STOCHASTIC_TOL or q < 0:
        raise ChannelError(f"state q={q} gives crossover {e} outside [0, 1]")
    e = min(max(e, 0.0), 1.0)
    return np.array([[1.0 - e, e], [e, 1.0 - e]])


def log_transition_matrix(channel: ChannelSpec, q: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(transition_matrix(channel, q))


def sample_output(channel: ChannelSpec, q, x, rng: np.random.Generator):
    """Pass bit(s) ``x`` through the channel in state(s) ``q``.

    Accepts scalars or equal-shape arrays; consumes one uniform draw per bit.
    """
    x = np.asarray(x, dtype=np.uint8)
    e = channel.crossover(q)
    if np.any(e > 1.0 + STOCHASTIC_TOL) or np.any(e < 0):
        raise ChannelError("crossover outside [0, 1]")
    flips = rng.random(np.shape(x)) < e
    y = x ^ flips.astype(np.uint8)
    return int(y) if y.ndim == 0 else y


def _log_ratio_norm(w_a: np.ndarray, w_b: np.ndarray) -> float:
    # 0/0 entries carry no information; x/0 with x>0 is an unbounded ratio.
    both_zero = (w_a == 0) & (w_b == 0)
    if np.any((w_a == 0) ^ (w_b == 0)):
        return math.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.abs(np.log(w_a) - np.log(w_b))
    r[both_zero] = 0.0
    return float(r.max())


def continuity_reference(channel: ChannelSpec, q: float, xi: float) -> float:
    """Mean-value bound on the log-ratio slope over ``[q - xi, q + xi]``.

    ``K * max(1 / q', zeta / (1 - zeta q'))`` maximised over the states
    ``q' = f(u)`` reachable for ``u`` in the perturbation range.
    """
    f = channel.size_map
    k = f.lipschitz
    if k == 0:
        return 0.0
    lo = min(f(q - xi), f(q + xi))
    hi = max(f(q - xi), f(q + xi))
    if lo <= 0:
        return math.inf
    z = channel.zeta
    if z * hi >= 1.0:
        return math.inf
    # 1/q' is largest at the low end, zeta/(1 - zeta q') at the high end
    return k * max(1.0 / lo, z / (1.0 - z * hi))


@dataclass(frozen=True)
class ContinuityCheck:
    lhs: float
    c_estimate: float
    c_ref: float
    ok: bool


def verify_continuity(channel: ChannelSpec, q: float, xi: float) -> ContinuityCheck:
    """Evaluate the log-ratio continuity condition at measure ``q``.

    The perturbation ``q -> q +/- xi`` is applied to the query measure and
    pushed through the size map, so a constant map gives ``lhs = 0``.
    """
    if not 0.0 < q < 1.0:
        raise ChannelError(f"q must lie in (0, 1), got {q}")
    if not 0.0 < xi < min(q, 1.0 - q):
        raise ChannelError(f"xi must lie in (0, min(q, 1-q)), got {xi}")
    f = channel.size_map
    w0 = transition_matrix(channel, float(f(q)))
    w_up = transition_matrix(channel, float(f(q + xi)))
    w_dn = transition_matrix(channel, float(f(q - xi)))
    lhs = max(_log_ratio_norm(w0, w_up), _log_ratio_norm(w0, w_dn))
    c_ref = continuity_reference(channel, q, xi)
    ok = bool(lhs <= c_ref * xi * (1 + 1e-12) + 1e-15)
    return ContinuityCheck(lhs=lhs, c_estimate=lhs / xi, c_ref=c_ref, ok=ok)
