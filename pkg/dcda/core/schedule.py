# dcda/core/schedule.py
"""Coordinate-sharing policies: which mixing matrix each coordinate sees at time t"""

from typing import List, Optional, Tuple

import numpy as np

from dcda.core.exceptions import ConfigurationError, DomainError
from dcda.models.domain import (
    MixingMatrix,
    RandomizedPolicy,
    RandomMode,
    RoundRobinPolicy,
    SharePolicy,
    StaticPolicy,
)
from dcda.utils.seeding import keyed_rng

MixingGroup = Tuple[MixingMatrix, np.ndarray]


def make_static(base, d: int, shared: Optional[int] = None) -> StaticPolicy:
    """Static scheme; ``base`` is one matrix or a per-coordinate sequence"""
    matrices = tuple(base) if isinstance(base, (list, tuple)) else (base,)
    return StaticPolicy(matrices=matrices, d=d, shared=shared)


def make_round_robin(base: MixingMatrix, d: int, m: int) -> RoundRobinPolicy:
    return RoundRobinPolicy(m=m, base=base, d=d)


def make_randomized(
    base: MixingMatrix,
    d: int,
    seed: int,
    mode: RandomMode = RandomMode.SUBSET,
    m: Optional[int] = None,
    rho: Optional[float] = None,
) -> RandomizedPolicy:
    return RandomizedPolicy(mode=RandomMode(mode), base=base, d=d, seed=seed, m=m, rho=rho)


def _consensus_matrix(n: int) -> MixingMatrix:
    return MixingMatrix(np.full((n, n), 1.0 / n))


def active_coordinates(policy: SharePolicy, t: int) -> np.ndarray:
    """Coordinates that mix (non-identity) at time t, sorted ascending"""
    d = policy.d
    if isinstance(policy, StaticPolicy):
        return np.arange(policy.n_shared)
    if isinstance(policy, RoundRobinPolicy):
        block = t % policy.period
        return np.arange(block * policy.m, (block + 1) * policy.m)
    if isinstance(policy, RandomizedPolicy):
        rng = keyed_rng(policy.seed, t)
        if policy.mode == RandomMode.SUBSET:
            return np.sort(rng.choice(d, size=policy.m, replace=False))
        return np.flatnonzero(rng.random(d) < policy.rho)
    raise ConfigurationError(f"Unknown policy: {type(policy).__name__}")


def mixing_groups(policy: SharePolicy, t: int) -> List[MixingGroup]:
    """Non-identity mixing of step t as (matrix, coordinates) groups.

    Coordinates absent from every group use the identity.
    """
    active = active_coordinates(policy, t)
    if active.size == 0:
        return []
    if isinstance(policy, StaticPolicy):
        if len(policy.matrices) == 1:
            return [(policy.matrices[0], active)]
        groups = {}
        for k in active:
            mat = policy.matrices[k]
            groups.setdefault(id(mat), (mat, []))[1].append(k)
        return [(mat, np.asarray(ks)) for mat, ks in groups.values()]
    if isinstance(policy, RandomizedPolicy) and policy.mode == RandomMode.ALL_TO_ALL:
        return [(_consensus_matrix(policy.base.n), active)]
    return [(policy.base, active)]


def mixing_at(policy: SharePolicy, t: int, k: int, d: int) -> MixingMatrix:
    """P^k(t) for 0-based coordinate k"""
    if d != policy.d:
        raise DomainError(f"policy was built for d={policy.d}, asked for d={d}")
    if not 0 <= k < d:
        raise DomainError(f"coordinate {k} out of range [0, {d})")
    for mat, coords in mixing_groups(policy, t):
        if k in coords:
            return mat
    n = policy.base.n if not isinstance(policy, StaticPolicy) else policy.matrices[0].n
    return MixingMatrix(np.eye(n))


def expected_squared_mixing(policy: SharePolicy, k: int) -> np.ndarray:
    """E[P^k(t)^2] for a randomized policy"""
    if not isinstance(policy, RandomizedPolicy):
        raise ConfigurationError("expected squared mixing is defined for randomized policies only")
    if not 0 <= k < policy.d:
        raise DomainError(f"coordinate {k} out of range [0, {policy.d})")
    n = policy.base.n
    q = policy.inclusion_probability
    if policy.mode == RandomMode.ALL_TO_ALL:
        atom = np.full((n, n), 1.0 / n)
    else:
        atom = policy.base.P @ policy.base.P
    return q * atom + (1.0 - q) * np.eye(n)


def per_coordinate_matrices(policy: SharePolicy) -> List[MixingMatrix]:
    """P^k of a static policy, one entry per coordinate"""
    if not isinstance(policy, StaticPolicy):
        raise ConfigurationError("per-coordinate matrices exist for static policies only")
    n = policy.matrices[0].n
    eye = MixingMatrix(np.eye(n))
    out = []
    for k in range(policy.d):
        if k >= policy.n_shared:
            out.append(eye)
        else:
            out.append(policy.matrices[0] if len(policy.matrices) == 1 else policy.matrices[k])
    return out
