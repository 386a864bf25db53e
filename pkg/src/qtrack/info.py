"""Information density, capacity and dispersion of measurement-dependent channels.

All quantities are in nats.  For an input ``X ~ Bern(p)`` the channel is
evaluated in the coupled state ``q = f(p)``: a query covering a fraction ``p``
of the search space is answered "yes" with probability ``p`` and is subject to
the noise level of a query of that size.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelError, ChannelSpec, state_of_measure, transition_matrix

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class InfoError(ValueError):
    pass


def _check_p(p, open_interval=True):
    lo_ok = p > 0 if open_interval else p >= 0
    hi_ok = p < 1 if open_interval else p <= 1
    if not (lo_ok and hi_ok):
        raise InfoError(f"input probability out of range: {p}")


def output_dist(p: float, q: float, channel: ChannelSpec) -> np.ndarray:
    """Output law ``P_Y`` induced by ``Bern(p)`` through the channel in state ``q``."""
    _check_p(p, open_interval=False)
    w = transition_matrix(channel, q)
    return np.array([1.0 - p, p]) @ w


def info_density_table(p: float, q: float, channel: ChannelSpec) -> np.ndarray:
    """``table[x, y] = log W(y|x) / P_Y(y)``; ``-inf`` where ``W(y|x) = 0``.

    Columns with ``P_Y(y) = 0`` are NaN (undefined density).
    """
    w = transition_matrix(channel, q)
    py = np.array([1.0 - p, p]) @ w
    with np.errstate(divide="ignore", invalid="ignore"):
        table = np.log(w) - np.log(py)[None, :]
    table[:, py == 0] = np.nan
    return table


def info_density(p: float, q: float, channel: ChannelSpec, x: int, y: int) -> float:
    py = output_dist(p, q, channel)
    if py[y] <= 0:
        raise InfoError(f"output symbol {y} has zero probability at p={p}, q={q}")
    w = transition_matrix(channel, q)
    with np.errstate(divide="ignore"):
        return float(np.log(w[x, y]) - np.log(py[y]))


def empirical_info(p: float, q_seq, x_seq, y_seq, channel: ChannelSpec) -> float:
    """Sum of per-symbol information densities, with a state per symbol."""
    q_seq = np.asarray(q_seq, dtype=float)
    x_seq = np.asarray(x_seq, dtype=int)
    y_seq = np.asarray(y_seq, dtype=int)
    if not (len(q_seq) == len(x_seq) == len(y_seq)):
        raise InfoError(
            f"length mismatch: q={len(q_seq)}, x={len(x_seq)}, y={len(y_seq)}"
        )
    total = 0.0
    tables = {}
    for q, x, y in zip(q_seq, x_seq, y_seq):
        if q not in tables:
            tables[q] = info_density_table(p, q, channel)
        v = tables[q][x, y]
        if np.isnan(v):
            raise InfoError(f"output symbol {y} has zero probability")
        total += v
    return float(total)


def _moments(p, channel: ChannelSpec):
    """Mean, variance and third absolute central moment of the density at ``(p, f(p))``.

    Vectorised over ``p``.  Zero-probability cells are dropped from the sums.
    """
    p = np.asarray(p, dtype=float)
    e = channel.crossover(channel.size_map(p))
    e = np.clip(e, 0.0, 1.0)
    w = np.stack([np.stack([1 - e, e], -1), np.stack([e, 1 - e], -1)], -2)  # [..., x, y]
    px = np.stack([1 - p, p], -1)
    py = np.einsum("...x,...xy->...y", px, w)
    joint = px[..., :, None] * w
    with np.errstate(divide="ignore", invalid="ignore"):
        dens = np.log(w) - np.log(py)[..., None, :]
    dens = np.where(joint > 0, dens, 0.0)
    mean = np.sum(joint * dens, axis=(-2, -1))
    dev = np.where(joint > 0, dens - mean[..., None, None], 0.0)
    var = np.sum(joint * dev**2, axis=(-2, -1))
    third = np.sum(joint * np.abs(dev) ** 3, axis=(-2, -1))
    return mean, var, third


def mutual_info(p, channel: ChannelSpec):
    """Expected information density at input ``Bern(p)`` and state ``f(p)``."""
    mean, _, _ = _moments(p, channel)
    mean = np.maximum(mean, 0.0)
    return float(mean) if mean.ndim == 0 else mean


def dispersion(p, channel: ChannelSpec):
    _, var, _ = _moments(p, channel)
    return float(var) if var.ndim == 0 else var


def third_moment(p, channel: ChannelSpec):
    _, _, third = _moments(p, channel)
    return float(third) if third.ndim == 0 else third


def golden_section_max(fun, lo: float, hi: float, tol: float = 1e-9):
    """Maximise a unimodal scalar function on ``[lo, hi]``; returns ``(x, f(x))``."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fun(d)
    x = 0.5 * (a + b)
    return x, fun(x)


def capacity(channel: ChannelSpec, grid_step: float = 1e-4, refine_tol: float = 1e-9):
    """Maximise the mutual information over ``p``.

    The objective need not be unimodal because the state moves with ``p``, so
    every local maximiser of a dense grid scan is refined by golden section.

    Returns ``(C, p_ca)`` where ``p_ca`` lists all refined maximisers within
    ``refine_tol`` of ``C``.
    """
    if grid_step > 1e-3:
        raise InfoError(f"grid_step must be <= 1e-3, got {grid_step}")
    m = int(math.ceil(1.0 / grid_step))
    grid = np.linspace(0.0, 1.0, m + 1)[1:-1]
    vals = mutual_info(grid, channel)
    left = np.concatenate([[-np.inf], vals[:-1]])
    right = np.concatenate([vals[1:], [-np.inf]])
    peaks = np.flatnonzero((vals >= left) & (vals >= right) & ((vals > left) | (vals > right)))
    if peaks.size == 0:
        # flat objective (e.g. a useless channel): every p achieves C
        peaks = np.array([int(np.argmax(vals))])

    candidates = []
    for i in peaks:
        lo = grid[i - 1] if i > 0 else grid[0] / 2
        hi = grid[i + 1] if i + 1 < grid.size else (1.0 + grid[-1]) / 2
        x, fx = golden_section_max(lambda t: mutual_info(t, channel), lo, hi, refine_tol)
        if fx < vals[i]:
            x, fx = float(grid[i]), float(vals[i])
        candidates.append((float(x), float(fx)))

    c_max = max(fx for _, fx in candidates)
    p_ca = sorted({x for x, fx in candidates if fx >= c_max - refine_tol})
    return c_max, p_ca


def v_eps_from_set(v_values, eps: float) -> float:
    """Max dispersion over the capacity-achieving set if ``eps <= 0.5``, else min."""
    if len(v_values) == 0:
        raise InfoError("empty capacity-achieving set")
    if not 0.0 < eps < 1.0:
        raise InfoError(f"eps must lie in (0, 1), got {eps}")
    return max(v_values) if eps <= 0.5 else min(v_values)


@dataclass(frozen=True)
class ChannelStats:
    """Capacity, capacity-achieving inputs and dispersion figures (nats)."""

    C: float
    p_ca_set: tuple
    V_at_pca: tuple
    T_at_pca: tuple
    channel: ChannelSpec = field(repr=False, compare=False, default=None)

    def v_eps(self, eps: float) -> float:
        return v_eps_from_set(self.V_at_pca, eps)

    @property
    def singleton(self) -> bool:
        return len(self.p_ca_set) == 1

    def to_dict(self, eps: float | None = None) -> dict:
        out = {
            "C": self.C,
            "p_ca": list(self.p_ca_set),
            "V_at_pca": list(self.V_at_pca),
            "T_at_pca": list(self.T_at_pca),
            "units": "nats",
        }
        if eps is not None:
            out["eps"] = eps
            out["V_eps"] = self.v_eps(eps)
        return out


def channel_stats(channel: ChannelSpec, grid_step: float = 1e-4, refine_tol: float = 1e-9) -> ChannelStats:
    c, p_ca = capacity(channel, grid_step, refine_tol)
    return ChannelStats(
        C=c,
        p_ca_set=tuple(p_ca),
        V_at_pca=tuple(dispersion(p, channel) for p in p_ca),
        T_at_pca=tuple(third_moment(p, channel) for p in p_ca),
        channel=channel,
    )


def v_eps(stats: ChannelStats, eps: float) -> float:
    return stats.v_eps(eps)


# -- standard Gaussian ------------------------------------------------------

# Acklam's rational approximation to the normal quantile (relative error
# ~1.15e-9 before polishing).
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def gaussian_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def _acklam(p: float) -> float:
    if p < _P_LOW:
        r = math.sqrt(-2.0 * math.log(p))
        num = ((((_C[0] * r + _C[1]) * r + _C[2]) * r + _C[3]) * r + _C[4]) * r + _C[5]
        den = (((_D[0] * r + _D[1]) * r + _D[2]) * r + _D[3]) * r + 1.0
        return num / den
    if p > 1.0 - _P_LOW:
        return -_acklam(1.0 - p)
    r = p - 0.5
    s = r * r
    num = (((((_A[0] * s + _A[1]) * s + _A[2]) * s + _A[3]) * s + _A[4]) * s + _A[5]) * r
    den = ((((_B[0] * s + _B[1]) * s + _B[2]) * s + _B[3]) * s + _B[4]) * s + 1.0
    return num / den


def gaussian_icdf(eps: float) -> float:
    """Standard normal quantile, rational approximation plus one Halley step."""
    if not 0.0 < eps < 1.0:
        raise InfoError(f"eps must lie in (0, 1), got {eps}")
    if eps == 0.5:
        return 0.0
    # work in the lower tail so the residual is computed without cancellation
    if eps > 0.5:
        return -gaussian_icdf(1.0 - eps)
    x = _acklam(eps)
    err = gaussian_cdf(x) - eps
    u = err * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)
