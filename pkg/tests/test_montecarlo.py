import math

import numpy as np
import pytest

from qtrack.channel import ChannelSpec
from qtrack.info import channel_stats
from qtrack.motion import TargetState
from qtrack.montecarlo import (
    CSV_COLUMNS,
    FIXED,
    REPRESENTATIVE,
    UNIFORM,
    WORST_CASE,
    ExperimentPlan,
    compare_with_theory,
    derive_seed,
    estimate_excess_prob,
    sample_initial,
    wilson_ci,
    worst_case_states,
)
from qtrack.scheme import BudgetError, plan_grid

REF = ChannelSpec.md_bsc(0.2, 2.0, 0.5)
STATS = channel_stats(REF)


def wilson_oracle(k, n, z=1.959963984540054):
    p = k / n
    centre = (2 * k + z * z) / (2 * (n + z * z))
    half = z * math.sqrt(z * z + 4 * n * p * (1 - p)) / (2 * (n + z * z))
    return centre - half, centre + half


def test_wilson_examples():
    lo, hi = wilson_ci(50, 100)
    assert lo == pytest.approx(0.40383, abs=1e-4) and hi == pytest.approx(0.59617, abs=1e-4)
    assert wilson_ci(0, 20)[0] == 0.0 and wilson_ci(20, 20)[1] == 1.0
    with pytest.raises(ValueError):
        wilson_ci(5, 4)


def test_wilson_against_statsmodels_form():
    rng = np.random.default_rng(0)
    for _ in range(500):
        n = int(rng.integers(1, 5000))
        k = int(rng.integers(0, n + 1))
        lo, hi = wilson_ci(k, n)
        olo, ohi = wilson_oracle(k, n)
        assert lo == pytest.approx(max(0.0, olo) if k else 0.0, abs=1e-12)
        assert hi == pytest.approx(min(1.0, ohi) if k < n else 1.0, abs=1e-12)
        assert lo <= k / n <= hi


def test_worst_case_lattice():
    states = worst_case_states(3, 1, 0.01)
    assert len(states) == 9
    assert {st.s for st in states} == {(1 / 3,), (2 / 3,), (1.0,)}
    assert {st.v for st in states} == {(-0.01,), (0.0,), (0.01,)}
    assert len(worst_case_states(2, 2, 0.0)) == 16


def test_sample_initial_uniform_moments():
    rng = np.random.default_rng(1)
    draws = [sample_initial(UNIFORM, 2, 0.1, rng) for _ in range(4000)]
    s = np.array([d.s for d in draws])
    v = np.array([d.v for d in draws])
    assert np.all((s > 0) & (s <= 1)) and np.all(np.abs(v) <= 0.1)
    assert np.abs(s.mean(axis=0) - 0.5).max() < 4 * math.sqrt(1 / 12 / 4000)
    assert np.abs(v.mean(axis=0)).max() < 4 * 0.1 * math.sqrt(1 / 3 / 4000)


def test_sample_initial_other_priors():
    rng = np.random.default_rng(2)
    fixed = TargetState((0.3,), (0.0,))
    assert sample_initial(FIXED, 1, 0.0, rng, fixed) is fixed
    grid = plan_grid(0.1, 10, 1, 0.01)
    st = sample_initial(REPRESENTATIVE, 1, 0.01, rng, grid=grid)
    assert st.s[0] * grid.M_s % 1 == pytest.approx(0.5)
    with pytest.raises(ValueError):
        sample_initial(WORST_CASE, 1, 0.0, rng)
    with pytest.raises(ValueError):
        sample_initial("nope", 1, 0.0, rng)


def test_derive_seed_stable():
    assert derive_seed(0, 1, 2) == derive_seed(0, 1, 2)
    assert derive_seed(0, 1, 2) != derive_seed(0, 2, 1)


def test_plan_validation():
    with pytest.raises(ValueError):
        ExperimentPlan(REF, 10, 1, 0.0, [0.1], prior="bad")
    with pytest.raises(ValueError):
        ExperimentPlan(REF, 10, 1, 0.0, [])
    with pytest.raises(ValueError):
        ExperimentPlan(REF, 10, 1, 0.0, [0.1], prior=FIXED)
    plan = ExperimentPlan.from_rates([0.05], 20, channel=REF, d=1, v_max=0.0)
    assert plan.deltas[0] == pytest.approx(math.exp(-1.0))


def test_budget_error_carries_rate():
    plan = ExperimentPlan(REF, 200, 1, 0.005, [1e-5], trials=1, budget=1000)
    with pytest.raises(BudgetError, match="rate"):
        estimate_excess_prob(plan, STATS)


def _small_plan(**kw):
    base = dict(channel=REF, n=30, d=1, v_max=1 / 30, deltas=[0.2, 0.05, 0.02], trials=300, seed=3)
    base.update(kw)
    return ExperimentPlan(**base)


def test_excess_monotone_in_delta():
    rows = estimate_excess_prob(_small_plan(), STATS)
    p = [r.p_hat for r in rows]
    assert p == sorted(p)
    for r in rows:
        assert r.ci_low <= r.p_hat <= r.ci_high
        assert set(CSV_COLUMNS) <= set(r.to_dict())


def test_thread_invariance():
    plan = _small_plan(trials=400)
    a = estimate_excess_prob(plan, STATS, threads=1)
    b = estimate_excess_prob(plan, STATS, threads=4)
    assert [r.to_dict() for r in a] == [r.to_dict() for r in b]


def test_fresh_codebook_mode_reproducible():
    plan = _small_plan(trials=60, fresh_codebook_per_trial=True, deltas=[0.05])
    a = estimate_excess_prob(plan, STATS, threads=1)
    b = estimate_excess_prob(plan, STATS, threads=3)
    assert a == b


def test_uniform_not_above_worst_case():
    kw = dict(deltas=[0.05], trials=200)
    uni = estimate_excess_prob(_small_plan(**kw), STATS)[0]
    worst = estimate_excess_prob(_small_plan(prior=WORST_CASE, **kw), STATS)[0]
    se = math.sqrt(0.25 / 200)
    assert uni.p_hat <= worst.p_hat + 2 * se


def test_noiseless_fixed_state_never_exceeds():
    ch = ChannelSpec.md_bsc(0.2, 0.0, 0.0)
    grid = plan_grid(0.05, 40, 1, 0.0)
    s, v = grid.representative(7)
    plan = ExperimentPlan(ch, 40, 1, 0.0, [0.05], trials=50, prior=FIXED,
                          fixed_state=TargetState(tuple(s), tuple(v)))
    row = estimate_excess_prob(plan)[0]
    assert row.excess_count == 0


def test_compare_with_theory_columns():
    plan = _small_plan(trials=50, deltas=[0.05])
    table = compare_with_theory(plan, stats=STATS)
    assert table[0]["abs_gap"] == pytest.approx(abs(table[0]["p_hat"] - table[0]["eps_hat"]))
