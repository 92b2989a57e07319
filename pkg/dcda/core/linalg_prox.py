# dcda/core/linalg_prox.py
"""Norms, proximal functions, the proximal projection and step sizes.

All functions operate on the last axis, so a stacked (n, d) array of node
vectors is projected row by row in one call.
"""

import numpy as np
from scipy.special import softmax, xlogy

from dcda.core.exceptions import ConfigurationError, DomainError
from dcda.models.domain import FeasibleSet, FeasibleSetKind, NormKind, ProxFunction, StepSchedule
from dcda.utils.validators import require_finite


def dual_norm(v, norm: NormKind) -> float:
    """||v||_* for the dual of ``norm`` (l2 -> l2, l1 -> l-infinity)"""
    v = require_finite(v, "vector")
    if norm == NormKind.L2:
        return float(np.linalg.norm(v))
    if norm == NormKind.L1:
        return float(np.max(np.abs(v))) if v.size else 0.0
    raise ConfigurationError(f"Unknown norm: {norm}")


def primal_norm(v, norm: NormKind) -> float:
    v = require_finite(v, "vector")
    if norm == NormKind.L2:
        return float(np.linalg.norm(v))
    return float(np.sum(np.abs(v)))


def dual_norms(V: np.ndarray, norm: NormKind) -> np.ndarray:
    """Row-wise dual norms of a stacked array"""
    V = np.asarray(V, dtype=float)
    if norm == NormKind.L2:
        return np.linalg.norm(V, axis=-1)
    return np.max(np.abs(V), axis=-1)


def psi_value(x, psi: ProxFunction) -> np.ndarray:
    """psi(x) along the last axis; 0 log 0 is taken as 0"""
    x = np.asarray(x, dtype=float)
    if psi == ProxFunction.SQUARED:
        return 0.5 * np.sum(x * x, axis=-1)
    if psi == ProxFunction.ENTROPIC:
        if np.any(x < 0):
            raise DomainError("entropic proximal function needs non-negative arguments")
        return np.sum(xlogy(x, x) - x, axis=-1)
    raise ConfigurationError(f"Unknown proximal function: {psi}")


def psi_minimum(psi: ProxFunction, feasible: FeasibleSet, d: int) -> float:
    """min of psi over the feasible set"""
    if psi == ProxFunction.SQUARED:
        return 0.0
    if psi == ProxFunction.ENTROPIC and feasible.kind == FeasibleSetKind.SIMPLEX:
        return -1.0 - float(np.log(d))
    raise ConfigurationError(f"Unsupported prox/set pair: {psi.value} with {feasible.kind.value}")


def prox_project(z, alpha: float, psi: ProxFunction, feasible: FeasibleSet) -> np.ndarray:
    """argmin_x <x, z> + psi(x) / alpha over the feasible set"""
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    z = np.asarray(z, dtype=float)

    if psi == ProxFunction.SQUARED and feasible.kind == FeasibleSetKind.UNCONSTRAINED:
        return -alpha * z

    if psi == ProxFunction.SQUARED and feasible.kind == FeasibleSetKind.BALL:
        x = -alpha * z
        norms = np.linalg.norm(x, axis=-1, keepdims=True)
        scale = np.minimum(1.0, feasible.radius / np.maximum(norms, np.finfo(float).tiny))
        return x * scale

    if psi == ProxFunction.ENTROPIC and feasible.kind == FeasibleSetKind.SIMPLEX:
        # softmax subtracts the row maximum before exponentiating
        return softmax(-alpha * z, axis=-1)

    raise ConfigurationError(f"Unsupported prox/set pair: {psi.value} with {feasible.kind.value}")


def step_size(t: int, sched: StepSchedule) -> float:
    """alpha(t) = C / sqrt(t) for t >= 1 and alpha(0) = C"""
    if t <= 0:
        return float(sched.C)
    return float(sched.C / np.sqrt(t))


def step_sizes(ts, sched: StepSchedule) -> np.ndarray:
    ts = np.asarray(ts, dtype=float)
    return sched.C / np.sqrt(np.maximum(ts, 1.0))
