"""
Measurement-dependent channels and their capacity
=================================================

An oracle answers "is the target in A?" through a binary symmetric channel
whose crossover grows with the size of A.  Here the size map is
f(q) = 2q + 0.5 and the crossover is 0.2 f(q), so a query covering half the
space flips answers with probability 0.3.
"""

# %%
import numpy as np

from qtrack import ChannelSpec, capacity, channel_stats, mutual_info, transition_matrix
from qtrack.channel import verify_continuity

channel = ChannelSpec.md_bsc(zeta=0.2, slope=2.0, intercept=0.5)
for q in (0.0, 0.25, 0.5, 1.0):
    print(f"measure {q:4.2f}  crossover {channel.crossover_of_measure(q):.3f}")

print(transition_matrix(channel, channel.size_map(0.5)))

# %%
# Mutual information of a Bern(p) query design.  Smaller queries are cleaner,
# so the best p sits well below 1/2.
p = np.linspace(0.01, 0.99, 99)
mi = mutual_info(p, channel)
print("argmax on a coarse grid:", p[np.argmax(mi)])

C, p_star = capacity(channel)
print(f"C = {C:.6f} nats at p* = {p_star[0]:.6f}")
print(f"I(0.5) = {mutual_info(0.5, channel):.6f} nats")

# %%
stats = channel_stats(channel)
print(stats.to_dict(eps=0.1))

# %%
# The log-ratio of transition laws shrinks linearly with the perturbation size.
for xi in (1e-1, 1e-2, 1e-3):
    chk = verify_continuity(channel, 0.4, xi)
    print(f"xi={xi:g}  lhs={chk.lhs:.3e}  lhs/xi={chk.lhs / xi:.4f}  bound={chk.c_ref:.4f}")
