"""Non-adaptive query design and trajectory decoder.

The scheme quantises (initial location, velocity) space into a hypothesis
grid and draws an i.i.d. ``Bern(p)`` bit for every (time, location cell) pair.
The query at time ``t`` is the union of location cells whose bit is set, so
its measure concentrates around ``p``.

A hypothesis does not own a codeword directly.  Its codeword is read out of the
location codebook along the hypothesis' representative trajectory: at time
``t`` it is the bit of the cell the representative occupies.  Decoding picks the
hypothesis maximising the summed information density of its codeword against
the noisy answers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSpec, sample_output, transition_matrix
from .info import info_density_table, output_dist
from .motion import TargetState, locate_scalar, locate_vector

DEFAULT_BUDGET = 10**7

# Largest magnitude (in quantum units) a score may reach while every partial
# sum stays exactly representable in float64.
_EXACT_RANGE = 2.0**52


class BudgetError(RuntimeError):
    """The hypothesis grid is larger than the configured budget."""

    def __init__(self, n_hypotheses, budget, context=""):
        self.n_hypotheses = n_hypotheses
        self.budget = budget
        msg = f"hypothesis grid has J={n_hypotheses} hypotheses, budget is {budget}"
        super().__init__(f"{context}: {msg}" if context else msg)


@dataclass(frozen=True)
class HypothesisGrid:
    d: int
    n: int
    M_s: int
    M_v: int
    v_max: float
    delta_target: float

    @property
    def delta_s(self) -> float:
        return 1.0 / self.M_s

    @property
    def delta_v(self) -> float:
        return 0.0 if self.v_max == 0 else 2.0 * self.v_max / self.M_v

    @property
    def n_cells(self) -> int:
        return self.M_s**self.d

    @property
    def J(self) -> int:
        return (self.M_s * self.M_v) ** self.d

    @property
    def shape(self) -> tuple:
        return (self.M_s,) * self.d + (self.M_v,) * self.d

    def representative(self, j):
        """Cell-centre ``(s_hat, v_hat)`` of hypothesis index/indices ``j``.

        Hypotheses are ordered C-style over ``(s_1..s_d, v_1..v_d)`` cell indices.
        """
        idx = np.stack(np.unravel_index(np.asarray(j), self.shape), axis=-1)
        s_hat = (idx[..., : self.d] + 0.5) / self.M_s
        if self.v_max == 0:
            v_hat = np.zeros_like(s_hat)
        else:
            v_hat = -self.v_max + (idx[..., self.d:] + 0.5) * self.delta_v
        return s_hat, v_hat

    def to_dict(self) -> dict:
        return {
            "d": self.d, "n": self.n, "M_s": self.M_s, "M_v": self.M_v,
            "v_max": self.v_max, "delta_target": self.delta_target, "J": self.J,
        }


def plan_grid(delta_target: float, n: int, d: int, v_max: float,
              budget: int = DEFAULT_BUDGET) -> HypothesisGrid:
    """Quantise so every representative trajectory stays within ``delta_target``.

    Half the budget goes to the initial location (``delta_s / 2``) and half to
    the velocity error accumulated over ``n`` steps (``n * delta_v / 2``).
    """
    if not 0.0 < delta_target < 0.5:
        raise ValueError(f"delta_target must lie in (0, 1/2), got {delta_target}")
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    if v_max < 0:
        raise ValueError("v_max must be nonnegative")
    m_s = math.ceil(1.0 / delta_target)
    m_v = max(1, math.ceil(2.0 * v_max * n / delta_target)) if v_max > 0 else 1
    grid = HypothesisGrid(d=d, n=n, M_s=m_s, M_v=m_v, v_max=v_max, delta_target=delta_target)
    if grid.J > budget:
        raise BudgetError(grid.J, budget)
    return grid


@dataclass(frozen=True)
class Codebook:
    """``bits[t-1, c]`` says whether location cell ``c`` is in the query at time ``t``."""

    bits: np.ndarray = field(repr=False)
    p: float
    seed: int


def draw_codebook(grid: HypothesisGrid, p: float, seed: int) -> Codebook:
    if not 0.0 < p <= 1.0:
        raise ValueError(f"codebook density must lie in (0, 1], got {p}")
    rng = np.random.default_rng(seed)
    bits = rng.random((grid.n, grid.n_cells)) < p
    bits.setflags(write=False)
    return Codebook(bits=bits, p=float(p), seed=int(seed))


def query_measures(codebook: Codebook) -> np.ndarray:
    """Lebesgue measure of every query (length ``n``)."""
    return codebook.bits.mean(axis=1)


def query_at(codebook: Codebook, grid: HypothesisGrid, t: int):
    """Flat indices of the cells in query ``t`` (1-based) and its measure."""
    if not 1 <= t <= grid.n:
        raise ValueError(f"t must lie in [1, {grid.n}], got {t}")
    row = codebook.bits[t - 1]
    cells = np.flatnonzero(row)
    return cells, cells.size / grid.n_cells


def cell_of(location, M_s: int):
    """Per-dimension cell index; cells are ``(k/M_s, (k+1)/M_s]``."""
    u = np.asarray(location, dtype=float)
    if np.any(u <= 0) or np.any(u > 1):
        raise ValueError("locations must lie in (0, 1]")
    return np.clip(np.ceil(u * M_s).astype(np.int64) - 1, 0, M_s - 1)


def flat_cell(cells, M_s: int):
    """Flatten per-dimension cell indices along the last axis."""
    cells = np.asarray(cells)
    d = cells.shape[-1]
    weights = M_s ** np.arange(d - 1, -1, -1)
    return cells @ weights


def oracle_answers(codebook: Codebook, grid: HypothesisGrid, state: TargetState) -> np.ndarray:
    """Noiseless answers ``x_1..x_n`` for a target in ``state``."""
    times = np.arange(1, grid.n + 1)
    loc = locate_vector(state, times)  # (n, d)
    cells = flat_cell(cell_of(loc, grid.M_s), grid.M_s)
    return codebook.bits[times - 1, cells].astype(np.uint8)


def oracle_answer(codebook: Codebook, grid: HypothesisGrid, state: TargetState, t: int) -> int:
    if not 1 <= t <= grid.n:
        raise ValueError(f"t must lie in [1, {grid.n}], got {t}")
    cell = flat_cell(cell_of(locate_vector(state, t), grid.M_s), grid.M_s)
    return int(codebook.bits[t - 1, cell])


def trajectory_codewords(codebook: Codebook, grid: HypothesisGrid, start: int = 0,
                         stop: int | None = None) -> np.ndarray:
    """Codewords of hypotheses ``start..stop-1`` as a boolean ``(stop-start, n)`` array."""
    stop = grid.J if stop is None else stop
    s_hat, v_hat = grid.representative(np.arange(start, stop))
    times = np.arange(1, grid.n + 1, dtype=float)
    loc = locate_scalar(s_hat[:, None, :], v_hat[:, None, :], times[None, :, None])
    cells = flat_cell(cell_of(loc, grid.M_s), grid.M_s)  # (m, n)
    return codebook.bits[np.arange(grid.n)[None, :], cells]


def trajectory_codeword(codebook: Codebook, grid: HypothesisGrid, j: int) -> np.ndarray:
    if not 0 <= j < grid.J:
        raise ValueError(f"hypothesis index must lie in [0, {grid.J}), got {j}")
    return trajectory_codewords(codebook, grid, j, j + 1)[0].astype(np.uint8)


@dataclass(frozen=True)
class Decoded:
    j: int
    s_hat: np.ndarray
    v_hat: np.ndarray
    score: float


class TrajectoryDecoder:
    """Exhaustive maximum-information-density decoder over the hypothesis grid.

    The density splits as ``log W(y|x) - log P_Y(y)``.  The second term does
    not depend on the hypothesis, so only ``log W`` enters the comparison, after
    rounding to a dyadic grid fine enough that every sum is exact in float64.
    Scores therefore do not depend on summation order, hypotheses with equal
    likelihood tie exactly, and the smallest index wins ties.  The rounding
    moves a score by at most ``n`` quanta (well below 1e-9).

    Answers impossible under a hypothesis (zero transition probability) are
    counted separately; fewer impossible answers always wins.
    """

    def __init__(self, channel: ChannelSpec, grid: HypothesisGrid, codebook: Codebook,
                 p: float | None = None, cache_bytes: int = 1 << 28,
                 chunk_elems: int = 1 << 22):
        self.channel = channel
        self.grid = grid
        self.codebook = codebook
        self.p = codebook.p if p is None else float(p)
        self.measures = query_measures(codebook)
        self.states = channel.size_map(self.measures)
        self.chunk_elems = chunk_elems

        tables = {}
        per_t = np.empty((grid.n, 2, 2))
        log_w = np.empty((grid.n, 2, 2))
        log_py = np.zeros((grid.n, 2))
        for t, m in enumerate(self.measures):
            if m not in tables:
                q = float(channel.size_map(m))
                with np.errstate(divide="ignore"):
                    py = output_dist(self.p, q, channel)
                    tables[m] = (info_density_table(self.p, q, channel),
                                 np.log(transition_matrix(channel, q)),
                                 np.where(py > 0, np.log(np.where(py > 0, py, 1.0)), 0.0))
            per_t[t], log_w[t], log_py[t] = tables[m]
        self.tables = per_t  # [t, x, y]
        self.log_py = log_py  # [t, y]
        self.impossible = ~np.isfinite(log_w)
        finite = np.where(self.impossible, 0.0, log_w)
        bound = float(np.abs(finite).max()) * grid.n + 1.0
        self.quantum_exp = int(math.floor(math.log2(_EXACT_RANGE / 4.0 / bound)))
        scale = 2.0**self.quantum_exp
        self.scaled = np.round(finite * scale)
        self.has_impossible = bool(self.impossible.any())

        self._codewords = None
        if grid.J * grid.n <= cache_bytes:
            self._codewords = trajectory_codewords(codebook, grid)

    @property
    def q_seq(self) -> np.ndarray:
        return self.states

    def _codeword_chunks(self, size):
        J = self.grid.J
        for start in range(0, J, size):
            stop = min(J, start + size)
            if self._codewords is not None:
                yield start, self._codewords[start:stop]
            else:
                yield start, trajectory_codewords(self.codebook, self.grid, start, stop)

    def decode_batch(self, y):
        """Decode a ``(B, n)`` array of answer sequences; returns ``(j_hat, scores)``."""
        y = np.atleast_2d(np.asarray(y, dtype=np.intp))
        B, n = y.shape
        if n != self.grid.n:
            raise ValueError(f"expected {self.grid.n} answers, got {n}")
        t_idx = np.arange(n)[None, :]
        s0 = self.scaled[t_idx, 0, y]  # (B, n)
        s1 = self.scaled[t_idx, 1, y]
        base = s0.sum(axis=1)
        diff = (s1 - s0).T  # (n, B)
        if self.has_impossible:
            i0 = self.impossible[t_idx, 0, y].astype(float)
            i1 = self.impossible[t_idx, 1, y].astype(float)
            ibase = i0.sum(axis=1)
            idiff = (i1 - i0).T

        best_j = np.zeros(B, dtype=np.int64)
        best_s = np.full(B, -np.inf)
        best_c = np.full(B, np.inf)
        size = max(1, self.chunk_elems // max(B, n))
        cols = np.arange(B)
        for start, cw in self._codeword_chunks(size):
            cwf = cw.astype(float)
            score = cwf @ diff + base[None, :]
            if self.has_impossible:
                count = cwf @ idiff + ibase[None, :]
                cmin = count.min(axis=0)
                score = np.where(count == cmin[None, :], score, -np.inf)
            else:
                cmin = np.zeros(B)
            k = np.argmax(score, axis=0)
            sk = score[k, cols]
            better = (cmin < best_c) | ((cmin == best_c) & (sk > best_s))
            best_j = np.where(better, start + k, best_j)
            best_s = np.where(better, sk, best_s)
            best_c = np.where(better, cmin, best_c)

        scores = best_s / 2.0**self.quantum_exp - self.log_py[t_idx, y].sum(axis=1)
        scores = np.where(best_c > 0, -np.inf, scores)
        return best_j, scores

    def all_scores(self, y) -> np.ndarray:
        """Score of every hypothesis for one answer sequence (``-inf`` if impossible)."""
        y = np.asarray(y, dtype=np.intp)
        t_idx = np.arange(self.grid.n)
        s0 = self.scaled[t_idx, 0, y]
        s1 = self.scaled[t_idx, 1, y]
        out = np.empty(self.grid.J)
        for start, cw in self._codeword_chunks(max(1, self.chunk_elems // self.grid.n)):
            cwf = cw.astype(float)
            score = (cwf @ (s1 - s0) + s0.sum()) / 2.0**self.quantum_exp - self.log_py[t_idx, y].sum()
            if self.has_impossible:
                i0 = self.impossible[t_idx, 0, y].astype(float)
                i1 = self.impossible[t_idx, 1, y].astype(float)
                score = np.where(cwf @ (i1 - i0) + i0.sum() > 0, -np.inf, score)
            out[start:start + len(cw)] = score
        return out

    def decode(self, y) -> Decoded:
        j, score = self.decode_batch(np.asarray(y)[None, :])
        s_hat, v_hat = self.grid.representative(int(j[0]))
        return Decoded(j=int(j[0]), s_hat=s_hat, v_hat=v_hat, score=float(score[0]))


def decode(codebook: Codebook, grid: HypothesisGrid, y, channel: ChannelSpec,
           p: float | None = None) -> Decoded:
    """One-shot decode of answers ``y``; the per-query states are the realised ones."""
    return TrajectoryDecoder(channel, grid, codebook, p).decode(y)


def unwrapped_errors(s_hat, v_hat, s, v, n: int):
    """Per-dimension max over ``t`` in ``{0, n}`` of the unwrapped position error.

    The error is affine in ``t``, so the two endpoints bound every integer time.
    """
    ds = np.asarray(s_hat, dtype=float) - np.asarray(s, dtype=float)
    dv = np.asarray(v_hat, dtype=float) - np.asarray(v, dtype=float)
    return np.maximum(np.abs(ds), np.abs(ds + n * dv))


@dataclass
class TrialResult:
    s_hat: np.ndarray
    v_hat: np.ndarray
    j_hat: int
    score: float
    excess: bool
    max_error: float
    measures: np.ndarray = field(repr=False, default=None)
    x: np.ndarray = field(repr=False, default=None)
    y: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "s_hat": [float(c) for c in self.s_hat],
            "v_hat": [float(c) for c in self.v_hat],
            "j_hat": self.j_hat,
            "score": self.score,
            "score_units": "nats",
            "excess": self.excess,
            "max_error": self.max_error,
            "measures": None if self.measures is None else [float(m) for m in self.measures],
            "x": None if self.x is None else [int(b) for b in self.x],
            "y": None if self.y is None else [int(b) for b in self.y],
        }


def simulate_answers(channel: ChannelSpec, codebook: Codebook, grid: HypothesisGrid,
                     state: TargetState, rng: np.random.Generator, states=None):
    """True answers and their noisy channel outputs for one episode."""
    if states is None:
        states = channel.size_map(query_measures(codebook))
    x = oracle_answers(codebook, grid, state)
    y = sample_output(channel, states, x, rng)
    return x, np.asarray(y, dtype=np.uint8)


def score_trial(grid: HypothesisGrid, state: TargetState, j_hat: int, score: float,
                delta_target: float) -> TrialResult:
    s_hat, v_hat = grid.representative(j_hat)
    err = unwrapped_errors(s_hat, v_hat, state.s, state.v, grid.n)
    max_err = float(err.max())
    return TrialResult(s_hat=s_hat, v_hat=v_hat, j_hat=int(j_hat), score=float(score),
                       excess=bool(max_err > delta_target), max_error=max_err)


def run_episode(channel: ChannelSpec, grid: HypothesisGrid, codebook: Codebook,
                true_state: TargetState, delta_target: float, rng: np.random.Generator,
                decoder: TrajectoryDecoder | None = None) -> TrialResult:
    """Query, answer through the channel, decode, and score one target."""
    if true_state.d != grid.d:
        raise ValueError(f"state has d={true_state.d}, grid has d={grid.d}")
    if decoder is None:
        decoder = TrajectoryDecoder(channel, grid, codebook)
    x, y = simulate_answers(channel, codebook, grid, true_state, rng, decoder.states)
    j, score = decoder.decode_batch(y[None, :])
    result = score_trial(grid, true_state, int(j[0]), float(score[0]), delta_target)
    result.measures = decoder.measures
    result.x = x
    result.y = y
    return result
