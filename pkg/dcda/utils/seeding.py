# dcda/utils/seeding.py
"""Master-seed fan-out and keyed random streams.

Every random draw in a run comes from a generator keyed by a tuple of
non-negative integers, so any single draw can be reproduced in isolation
(e.g. the dither for one sender, coordinate and time) without replaying
the rest of the simulation.
"""

from typing import Dict

import numpy as np

# Component labels the master seed fans out to. Codes are part of the
# reproducibility contract: never renumber.
COMPONENT_CODES: Dict[str, int] = {
    "data": 1,
    "graph": 2,
    "schedule": 3,
    "channel": 4,
    "dither": 5,
    "minibatch": 6,
    "testset": 7,
    "lipschitz": 8,
    "power_iteration": 9,
}


def derive_seed(master: int, component: str) -> int:
    """Sub-seed for a component, independent of the other components"""
    try:
        code = COMPONENT_CODES[component]
    except KeyError:
        raise ValueError(f"Unknown seed component: {component}")
    state = np.random.SeedSequence([int(master), code]).generate_state(1, dtype=np.uint64)
    return int(state[0] >> np.uint64(1))


def keyed_rng(*key: int) -> np.random.Generator:
    """Generator whose stream is a pure function of ``key``"""
    return np.random.default_rng([int(k) for k in key])
