"""
One tracking episode
====================

Draw a random codebook over (time, location cell), let the target move,
pass the oracle's answers through the noisy channel, and decode by
maximising summed information density over a grid of start states and
velocities.
"""

# %%
import numpy as np

from qtrack import ChannelSpec, TargetState, channel_stats
from qtrack.scheme import TrajectoryDecoder, draw_codebook, plan_grid, run_episode

channel = ChannelSpec.md_bsc(0.2, 2.0, 0.5)
p = channel_stats(channel).p_ca_set[0]

n, delta, v_max = 60, 0.02, 1 / 60
grid = plan_grid(delta, n, 1, v_max)
print(grid.to_dict())

codebook = draw_codebook(grid, p, seed=1)
decoder = TrajectoryDecoder(channel, grid, codebook, p)

# %%
rng = np.random.default_rng(5)
for _ in range(5):
    truth = TargetState((rng.random(),), (rng.uniform(-v_max, v_max),), v_max)
    res = run_episode(channel, grid, codebook, truth, delta, rng, decoder)
    print(f"s={truth.s[0]:.4f} v={truth.v[0]:+.5f}  ->  s_hat={res.s_hat[0]:.4f} "
          f"v_hat={res.v_hat[0]:+.5f}  err={res.max_error:.4f}  excess={res.excess}")
