"""Deterministic seed derivation.

Every stochastic step in a run draws from its own stream, derived from
the master seed plus a fixed stream tag and the loop indices involved.
Two runs with the same configuration and master seed therefore replay
bit-identical random sequences, and per-candidate streams can be
evaluated in any order (or in parallel) without changing results.
"""

from __future__ import annotations

import numpy as np

# Stream tags.  Values are arbitrary but frozen: changing them changes
# every derived seed and thus every logged run.
STREAM_EVAL = 1        # plant evaluation seeds, one per consumed budget unit
STREAM_ACQ = 2         # candidate selection, one per loop iteration
STREAM_HYPER = 3       # hyperparameter refits
STREAM_ENTROPY = 4     # before/after entropy records
STREAM_IMPROVE = 5     # paired improvement episodes
STREAM_ROLLOUT = 6     # per-rollout seeds inside an averaged evaluation
STREAM_SEARCH = 7      # random-search baseline
STREAM_PUSH = 8        # push ladder rollouts
STREAM_CANDIDATE = 9   # per-candidate acquisition streams
STREAM_SCORE = 10      # paired benchmark scoring episodes


def substream(master: int, *path: int) -> int:
    """Derive a child seed from ``master`` and an integer path.

    Built on ``numpy.random.SeedSequence`` spawn keys, which are stable
    across platforms and numpy releases.
    """
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(2, np.uint64)[0])
