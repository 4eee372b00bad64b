"""Counter-based random streams for reproducible parallel Monte Carlo.

Every trial owns an independent Philox stream whose key is the master seed
and whose counter encodes ``(point_index, trial_index)``.  Results are thus
independent of how trials are scheduled across workers.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def trial_generator(master_seed: int, trial_index: int, point_index: int = 0) -> np.random.Generator:
    """Return the generator for one trial.

    The low counter word is left at zero so each stream can draw up to
    2**64 Philox blocks before touching its neighbour.
    """
    if trial_index < 0 or point_index < 0:
        raise ValueError("trial and point indices must be non-negative")
    key = [master_seed & _MASK64, (master_seed >> 64) & _MASK64]
    counter = [0, trial_index & _MASK64, point_index & _MASK64, 0]
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def uniform_block(master_seed: int, point_index: int, trials: range, width: int) -> np.ndarray:
    """Uniform draws of shape ``(len(trials), width)``, row k from trial ``trials[k]``.

    Rows are identical to ``trial_generator(master_seed, t, point_index).random(width)``;
    one bit generator is re-seeded per row instead of constructing a new one.
    """
    if point_index < 0 or (len(trials) and min(trials) < 0):
        raise ValueError("trial and point indices must be non-negative")
    out = np.empty((len(trials), width))
    bg = np.random.Philox(key=[master_seed & _MASK64, (master_seed >> 64) & _MASK64])
    gen = np.random.Generator(bg)
    state = bg.state
    counter = np.array([0, 0, point_index & _MASK64, 0], dtype=np.uint64)
    state["state"]["counter"] = counter
    state["buffer_pos"] = 4
    state["has_uint32"] = 0
    for row, t in enumerate(trials):
        counter[1] = t & _MASK64
        bg.state = state
        gen.random(out=out[row])
    return out
