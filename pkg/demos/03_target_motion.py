"""
A target bouncing in the unit cube
==================================

Each coordinate moves at constant speed and reflects at 0 and 1.  The
resolution criterion compares unwrapped straight-line positions instead.
"""

# %%
import numpy as np

from qtrack import TargetState, locate_vector
from qtrack.motion import unwrapped_position

state = TargetState(s=(0.2, 0.9), v=(0.3, -0.45), v_max=0.5)
t = np.arange(8)
print(np.column_stack([t, locate_vector(state, t)]))

# %%
print(unwrapped_position(np.array(state.s), np.array(state.v), 7))
