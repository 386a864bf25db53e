"""
Second-order resolution limits and the phase transition
=======================================================

With n queries the best resolution behaves like
exp(-(nC + sqrt(nV) Phi^{-1}(eps)) / (2d)).  Reading this the other way,
the excess-resolution probability jumps from 0 to 1 as the decay rate
-log(delta)/n crosses C/(2d).
"""

# %%
from qtrack import ChannelSpec, channel_stats
from qtrack.limits import critical_rate, limit_report, phase_curve, resolution_approx

channel = ChannelSpec.md_bsc(0.2, 2.0, 0.5)
stats = channel_stats(channel)

for n in (50, 100, 200, 500):
    print(n, [f"{resolution_approx(n, 1, eps, stats):.3e}" for eps in (0.01, 0.1, 0.5)])

# %%
report = limit_report(500, 1, 0.1, stats, v_max=1 / 500)
print(report.to_dict())

# %%
# The curve gets steeper with n but always passes through 1/2 at C/2.
crit = critical_rate(1, stats)
for n in (50, 500, 5000):
    curve = phase_curve(n, 1, stats, crit - 0.03, crit + 0.03, 7)
    print(n, " ".join(f"{e:.3f}" for _, e in curve))

# %%
# Try plotting: ``qtrack curve --n 500 --out curve.csv`` writes the same data as CSV.
