"""Second-order approximations to the minimal achievable tracking resolution.

With ``n`` queries, ``d`` dimensions and tolerated excess probability ``eps``,

    -2d log delta*  ~  nC + sqrt(n V_eps) Phi^{-1}(eps),

valid when the total distance ``n v_max`` grows slower than ``sqrt(n)``.  The
remainder ``O(max(n v_max, log n))`` is never folded into the numbers; it is
reported as a caveat string instead.  Inverting the approximation gives the
excess probability for a target resolution, which switches from 0 to 1 as the
decay rate ``-log(delta)/n`` crosses ``C / (2d)``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .info import ChannelStats, gaussian_cdf, gaussian_icdf

STRONG = "strong"
WEAK = "weak"
OUT_OF_SCOPE = "out-of-scope"

_CAVEATS = {
    STRONG: "second-order approximation; remainder O(max{n*v_max, log n}) dropped",
    WEAK: "first-order only; remainder O(n*v_max) dominates the sqrt(n) term",
    OUT_OF_SCOPE: "n*v_max is not sub-linear in n; no approximation applies",
}

COEFFICIENT_NOTE = (
    "excess probability uses the 2d coefficient (-2d log delta), matching the "
    "resolution approximation and the critical rate C/(2d); pass coefficient=d "
    "for the single-d variant"
)


def velocity_regime(n: int, v_max: float):
    """Classify ``(n, v_max)`` against the sub-linear motion conditions.

    Returns ``(regime, caveat)``; thresholds are ``sqrt(n)`` and ``n``.
    """
    if n < 1 or v_max < 0:
        raise ValueError("need n >= 1 and v_max >= 0")
    dist = n * v_max
    if dist <= math.sqrt(n):
        regime = STRONG
    elif dist < n:
        regime = WEAK
    else:
        regime = OUT_OF_SCOPE
    return regime, _CAVEATS[regime]


def resolution_approx(n: int, d: int, eps: float, stats: ChannelStats) -> float:
    if n < 1 or d < 1:
        raise ValueError("need n >= 1 and d >= 1")
    v = stats.v_eps(eps)
    exponent = n * stats.C + math.sqrt(n * v) * gaussian_icdf(eps)
    return math.exp(-exponent / (2 * d))


def excess_prob_approx(n: int, d: int, delta: float, stats: ChannelStats,
                       coefficient: float | None = None) -> float:
    """Gaussian approximation to the minimal excess-resolution probability.

    When several inputs achieve capacity the dispersion is ambiguous: the
    largest one is used when the result lands at or below 1/2 and the
    smallest one above, mirroring the case split of ``V_eps``.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return excess_prob_from_log(n, d, math.log(delta), stats, coefficient)


def excess_prob_from_log(n: int, d: int, log_delta: float, stats: ChannelStats,
                         coefficient: float | None = None) -> float:
    """Same as :func:`excess_prob_approx` but takes ``log(delta)``."""
    coef = 2 * d if coefficient is None else coefficient
    num = -coef * log_delta - n * stats.C
    v = max(stats.V_at_pca) if num <= 0 else min(stats.V_at_pca)
    if v == 0:
        return 0.5 if num == 0 else float(num > 0)
    return gaussian_cdf(num / math.sqrt(n * v))


def critical_rate(d: int, stats: ChannelStats) -> float:
    return stats.C / (2 * d)


def phase_curve(n: int, d: int, stats: ChannelStats, rate_min: float, rate_max: float,
                points: int, include_critical: bool = True):
    """``(rate, eps_hat)`` pairs on an even rate grid.

    With ``include_critical`` the critical rate is merged into the grid so the
    transition point always appears as a row.
    """
    if not 0.0 < rate_min < rate_max:
        raise ValueError("need 0 < rate_min < rate_max")
    if points < 2:
        raise ValueError("need at least two points")
    step = (rate_max - rate_min) / (points - 1)
    rates = [rate_min + i * step for i in range(points)]
    crit = critical_rate(d, stats)
    if include_critical and rate_min <= crit <= rate_max and crit not in rates:
        rates = sorted(rates + [crit])
    return [(r, excess_prob_from_log(n, d, -r * n, stats)) for r in rates]


@dataclass(frozen=True)
class LimitReport:
    n: int
    d: int
    eps: float
    C: float
    V_eps: float
    delta_approx: float
    critical_rate: float
    regime: str
    caveat: str
    units: str = "nats"

    def to_dict(self) -> dict:
        out = asdict(self)
        out["critical_rate_units"] = "nats/query"
        return out


def limit_report(n: int, d: int, eps: float, stats: ChannelStats, v_max: float = 0.0) -> LimitReport:
    regime, caveat = velocity_regime(n, v_max)
    return LimitReport(
        n=n, d=d, eps=eps, C=stats.C, V_eps=stats.v_eps(eps),
        delta_approx=resolution_approx(n, d, eps, stats),
        critical_rate=critical_rate(d, stats), regime=regime, caveat=caveat,
    )
