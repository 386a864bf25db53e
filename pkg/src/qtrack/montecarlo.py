"""Seeded Monte Carlo estimates of the excess-resolution probability.

Every trial draws its randomness from a stream derived from
``(master seed, delta index, trial index)``, so results do not depend on the
order or the number of threads the trials run on.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .channel import ChannelSpec
from .info import ChannelStats, channel_stats, gaussian_icdf
from .limits import excess_prob_approx, velocity_regime
from .motion import TargetState
from .scheme import (
    DEFAULT_BUDGET,
    BudgetError,
    TrajectoryDecoder,
    draw_codebook,
    plan_grid,
    simulate_answers,
    unwrapped_errors,
)

UNIFORM = "uniform-product"
WORST_CASE = "worst-case-grid"
FIXED = "fixed-state"
REPRESENTATIVE = "grid-representative"
PRIORS = (UNIFORM, WORST_CASE, FIXED, REPRESENTATIVE)

_CODEBOOK_STREAM = 0
_TRIAL_STREAM = 1
# trials per work item; fixed so the split never depends on the thread count
BLOCK = 128


def wilson_ci(k: int, N: int, level: float = 0.95):
    """Wilson score interval for ``k`` successes out of ``N``."""
    if N < 1 or not 0 <= k <= N:
        raise ValueError(f"need 0 <= k <= N and N >= 1, got k={k}, N={N}")
    z = gaussian_icdf(0.5 + level / 2.0)
    phat = k / N
    denom = 1.0 + z * z / N
    centre = (phat + z * z / (2 * N)) / denom
    half = z * math.sqrt(phat * (1 - phat) / N + z * z / (4 * N * N)) / denom
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == N else min(1.0, centre + half)
    return lo, hi


def worst_case_states(G: int, d: int, v_max: float):
    """``G**(2d)`` deterministic start states in lexicographic order.

    Locations are the right edges ``1/G, ..., 1`` of a G-partition, which are
    cell edges of any grid whose cell count is a multiple of ``G``; velocities
    span ``[-v_max, v_max]`` including both extremes.
    """
    if G < 1:
        raise ValueError("G must be positive")
    s_axis = [(i + 1) / G for i in range(G)]
    v_axis = list(np.linspace(-v_max, v_max, G)) if G > 1 else [0.0]
    axes = [s_axis] * d + [v_axis] * d
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    return [TargetState(tuple(p[:d]), tuple(p[d:]), v_max) for p in pts]


def sample_initial(prior: str, d: int, v_max: float, rng: np.random.Generator,
                   fixed_state: TargetState | None = None, grid=None) -> TargetState:
    """Draw a start state under ``prior``.

    ``worst-case-grid`` is deterministic and enumerated by
    :func:`worst_case_states` instead; ``grid-representative`` needs ``grid``.
    """
    if prior == UNIFORM:
        s = rng.random(d)
        v = rng.uniform(-v_max, v_max, d) if v_max > 0 else np.zeros(d)
        return TargetState(tuple(s), tuple(v), v_max)
    if prior == FIXED:
        if fixed_state is None:
            raise ValueError("fixed-state prior needs a state")
        return fixed_state
    if prior == REPRESENTATIVE:
        if grid is None:
            raise ValueError("grid-representative prior needs a grid")
        s, v = grid.representative(int(rng.integers(grid.J)))
        return TargetState(tuple(s), tuple(np.clip(v, -v_max, v_max)), v_max)
    if prior == WORST_CASE:
        raise ValueError("worst-case-grid states are enumerated, not sampled")
    raise ValueError(f"unknown prior {prior!r}")


def derive_seed(*words: int) -> int:
    """64-bit seed from a tuple of nonnegative integers."""
    state = np.random.SeedSequence([int(w) for w in words]).generate_state(2, np.uint32)
    return int(state[0]) << 32 | int(state[1])


def trial_rng(master: int, delta_index: int, *trial_key: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence([master, delta_index, _TRIAL_STREAM, *trial_key])
    )


@dataclass
class ExperimentPlan:
    channel: ChannelSpec
    n: int
    d: int
    v_max: float
    deltas: list
    trials: int = 2000
    seed: int = 0
    prior: str = UNIFORM
    grid_points: int = 3
    fixed_state: TargetState | None = None
    p: float | None = None
    budget: int = DEFAULT_BUDGET
    fresh_codebook_per_trial: bool = False
    level: float = 0.95

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.prior not in PRIORS:
            raise ValueError(f"unknown prior {self.prior!r}; choose from {PRIORS}")
        if not self.deltas:
            raise ValueError("need at least one delta")
        for delta in self.deltas:
            if not 0.0 < delta < 1.0:
                raise ValueError(f"delta must lie in (0, 1), got {delta}")
        if self.prior == FIXED and self.fixed_state is None:
            raise ValueError("fixed-state prior needs fixed_state")

    @classmethod
    def from_rates(cls, rates, n, **kwargs) -> "ExperimentPlan":
        return cls(deltas=[math.exp(-r * n) for r in rates], n=n, **kwargs)

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k not in ("channel", "fixed_state")}
        out["channel"] = self.channel.to_dict()
        if self.fixed_state is not None:
            out["fixed_state"] = {"s": list(self.fixed_state.s), "v": list(self.fixed_state.v)}
        return out


@dataclass(frozen=True)
class SummaryRow:
    delta: float
    rate: float
    trials: int
    excess_count: int
    p_hat: float
    ci_low: float
    ci_high: float
    eps_hat: float
    prior: str
    regime: str
    caveat: str = field(default="")

    def to_dict(self) -> dict:
        return asdict(self)


CSV_COLUMNS = ("delta", "rate", "trials", "excess_count", "p_hat", "ci_low",
               "ci_high", "eps_hat", "prior", "regime")


def _stats_for(plan: ExperimentPlan, stats: ChannelStats | None) -> ChannelStats:
    return channel_stats(plan.channel) if stats is None else stats


def _run_block(plan, grid, codebook, decoder, delta, di, keys, states):
    """Run the trials named by ``keys``; returns their excess flags."""
    targets, decoded, ys = [], [], []
    for key, state in zip(keys, states):
        rng = trial_rng(plan.seed, di, *key)
        if state is None:
            state = sample_initial(plan.prior, plan.d, plan.v_max, rng, plan.fixed_state, grid)
        targets.append(state)
        if plan.fresh_codebook_per_trial:
            seed = derive_seed(plan.seed, di, _CODEBOOK_STREAM, *key)
            dec = TrajectoryDecoder(plan.channel, grid, draw_codebook(grid, decoder.p, seed), decoder.p)
            _, y = simulate_answers(plan.channel, dec.codebook, grid, state, rng, dec.states)
            decoded.append(int(dec.decode_batch(y[None, :])[0][0]))
        else:
            ys.append(simulate_answers(plan.channel, codebook, grid, state, rng, decoder.states)[1])
    if ys:
        decoded = [int(j) for j in decoder.decode_batch(np.stack(ys))[0]]
    flags = []
    for state, j in zip(targets, decoded):
        s_hat, v_hat = grid.representative(j)
        err = unwrapped_errors(s_hat, v_hat, state.s, state.v, grid.n)
        flags.append(bool(err.max() > delta))
    return flags


def _map_blocks(fn, blocks, threads):
    if threads <= 1 or len(blocks) <= 1:
        return [fn(b) for b in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, blocks))


def estimate_excess_prob(plan: ExperimentPlan, stats: ChannelStats | None = None,
                         threads: int = 1) -> list:
    """One :class:`SummaryRow` per delta of the plan.

    Under ``worst-case-grid`` every lattice state gets ``plan.trials`` trials
    and the row reports the largest per-state excess frequency.
    """
    stats = _stats_for(plan, stats)
    p = min(stats.p_ca_set) if plan.p is None else plan.p
    regime, caveat = velocity_regime(plan.n, plan.v_max)
    rows = []
    for di, delta in enumerate(plan.deltas):
        try:
            grid = plan_grid(delta, plan.n, plan.d, plan.v_max, plan.budget)
        except BudgetError as exc:
            raise BudgetError(exc.n_hypotheses, exc.budget,
                              f"delta={delta:.6g} (rate {-math.log(delta) / plan.n:.6g})") from exc
        codebook = draw_codebook(grid, p, derive_seed(plan.seed, di, _CODEBOOK_STREAM))
        decoder = TrajectoryDecoder(plan.channel, grid, codebook, p)

        if plan.prior == WORST_CASE:
            lattice = worst_case_states(plan.grid_points, plan.d, plan.v_max)
            groups = [[(si, i) for i in range(plan.trials)] for si in range(len(lattice))]
            group_states = [[lattice[si]] * plan.trials for si in range(len(lattice))]
        else:
            groups = [[(i,) for i in range(plan.trials)]]
            group_states = [[None] * plan.trials]

        counts = []
        for keys, states in zip(groups, group_states):
            blocks = [(keys[a:a + BLOCK], states[a:a + BLOCK]) for a in range(0, len(keys), BLOCK)]
            results = _map_blocks(
                lambda b: _run_block(plan, grid, codebook, decoder, delta, di, b[0], b[1]),
                blocks, threads,
            )
            counts.append(sum(sum(r) for r in results))
        k = max(counts)
        lo, hi = wilson_ci(k, plan.trials, plan.level)
        rows.append(SummaryRow(
            delta=delta, rate=-math.log(delta) / plan.n, trials=plan.trials,
            excess_count=k, p_hat=k / plan.trials, ci_low=lo, ci_high=hi,
            eps_hat=excess_prob_approx(plan.n, plan.d, delta, stats),
            prior=plan.prior, regime=regime, caveat=caveat,
        ))
    return rows


def compare_with_theory(plan: ExperimentPlan, rows=None, stats: ChannelStats | None = None,
                        threads: int = 1) -> list:
    """Join Monte Carlo rows with the Gaussian approximation at the same delta."""
    stats = _stats_for(plan, stats)
    if rows is None:
        rows = estimate_excess_prob(plan, stats, threads)
    table = []
    for row in rows:
        eps_hat = excess_prob_approx(plan.n, plan.d, row.delta, stats)
        table.append({
            "delta": row.delta, "rate": row.rate, "p_hat": row.p_hat,
            "ci_low": row.ci_low, "ci_high": row.ci_high, "eps_hat": eps_hat,
            "abs_gap": abs(row.p_hat - eps_hat), "prior": row.prior,
        })
    return table
