"""Reflecting-torus motion of a target with constant velocity.

Each coordinate follows the unwrapped line ``u = s + t v``.  The observed
location folds ``u`` back into ``(0, 1]`` like a triangle wave of period 2,
with the convention that every integer ``u`` maps to 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

INTEGER_TOL = 1e-12


@dataclass(frozen=True)
class TargetState:
    """Initial location ``s`` in ``[0,1]^d`` and velocity ``v`` in ``[-v_max, v_max]^d``."""

    s: tuple
    v: tuple
    v_max: float = 0.0

    def __post_init__(self):
        s = tuple(float(c) for c in np.atleast_1d(self.s))
        v = tuple(float(c) for c in np.atleast_1d(self.v))
        if len(s) == 0 or len(s) != len(v):
            raise ValueError(f"s and v must be nonempty and of equal length, got {s}, {v}")
        if any(not 0.0 <= c <= 1.0 for c in s):
            raise ValueError(f"initial location outside [0,1]^d: {s}")
        if self.v_max < 0:
            raise ValueError("v_max must be nonnegative")
        if any(abs(c) > self.v_max * (1 + 1e-12) for c in v):
            raise ValueError(f"velocity {v} exceeds v_max={self.v_max}")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "v", v)

    @property
    def d(self) -> int:
        return len(self.s)


def locate_scalar(s, v, t):
    """Folded location in ``(0, 1]``; vectorised over numpy inputs.

    ``h`` in the fold ranges over all integers, so negative ``u`` reflects
    off 0 the same way ``u > 1`` reflects off 1.
    """
    u = np.asarray(s, dtype=float) + np.asarray(t, dtype=float) * np.asarray(v, dtype=float)
    fl = np.floor(u)
    on_integer = np.abs(u - np.round(u)) <= INTEGER_TOL
    even_strip = np.mod(fl, 2.0) == 0.0
    out = np.where(even_strip, u - fl, np.ceil(u) - u)
    out = np.where(on_integer, 1.0, out)
    return float(out) if out.ndim == 0 else out


def locate_vector(state: TargetState, t):
    """Folded location of every coordinate at time(s) ``t``.

    A scalar ``t`` gives shape ``(d,)``; an array of times gives ``(len(t), d)``.
    """
    s = np.asarray(state.s)
    v = np.asarray(state.v)
    t = np.asarray(t, dtype=float)
    if t.ndim == 0:
        return np.asarray(locate_scalar(s, v, t))
    return locate_scalar(s[None, :], v[None, :], t[:, None])


def unwrapped_position(s, v, t):
    """Affine position ``s + t v`` used when scoring an estimate."""
    return np.asarray(s, dtype=float) + np.asarray(t, dtype=float) * np.asarray(v, dtype=float)
