"""
Monte Carlo excess-resolution probability
=========================================

Estimate how often the decoder misses by more than delta, at decay rates
around the critical one, and set the estimates next to the Gaussian
approximation.  n is kept small so the hypothesis grid stays within budget.
"""

# %%
from qtrack import ChannelSpec, channel_stats
from qtrack.limits import critical_rate
from qtrack.montecarlo import REPRESENTATIVE, ExperimentPlan, compare_with_theory

channel = ChannelSpec.md_bsc(0.2, 2.0, 0.5)
stats = channel_stats(channel)
crit = critical_rate(1, stats)

n = 40
plan = ExperimentPlan.from_rates([crit - 0.03, crit, crit + 0.03], n, channel=channel, d=1,
                                 v_max=1 / n, trials=400, seed=0, prior=REPRESENTATIVE)
for row in compare_with_theory(plan, stats=stats, threads=4):
    print(f"rate {row['rate']:.4f}  p_hat {row['p_hat']:.3f} "
          f"[{row['ci_low']:.3f}, {row['ci_high']:.3f}]  gaussian {row['eps_hat']:.3f}")

# %%
# Same experiment from the shell:
#   qtrack simulate --n 40 --rate 0.0438 0.0738 0.1038 --v-max 0.025 \
#       --prior grid-representative --trials 400 --threads 4 --out mc.csv
