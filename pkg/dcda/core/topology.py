# dcda/core/topology.py
"""Graph generators, doubly stochastic mixing matrices and spectral quantities"""

import logging
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from dcda.core.exceptions import ConfigurationError, DomainError, NumericalError
from dcda.models.domain import Graph, MixingMatrix
from dcda.utils.seeding import keyed_rng

logger = logging.getLogger(__name__)

MAX_RESAMPLES = 100_000


def is_connected(adjacency: np.ndarray) -> bool:
    n_components, _ = connected_components(adjacency, directed=False)
    return n_components == 1


def _check_adjacency(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ConfigurationError(f"adjacency must be square, got shape {A.shape}")
    if not np.array_equal(A, A.T):
        raise ConfigurationError("adjacency must be symmetric")
    if np.any(np.diag(A) != 0):
        raise ConfigurationError("adjacency must have a zero diagonal")
    if not np.all((A == 0) | (A == 1)):
        raise ConfigurationError("adjacency must be 0/1")
    return A


def make_full(n: int) -> Graph:
    """Complete graph: A = 11^T - I"""
    if n < 2:
        raise ConfigurationError(f"full graph needs n >= 2, got {n}")
    return Graph(np.ones((n, n)) - np.eye(n), kind="full")


def make_ring(n: int, l: int) -> Graph:
    """Circle where each node links to its l nearest neighbours on either side"""
    if l < 1:
        raise ConfigurationError(f"ring half-width l must be >= 1, got {l}")
    if n < 2:
        raise ConfigurationError(f"ring needs n >= 2, got {n}")
    idx = np.arange(n)
    gap = np.abs(idx[:, None] - idx[None, :])
    circular = np.minimum(gap, n - gap)
    A = ((circular <= l) & (circular > 0)).astype(float)
    return Graph(A, kind="ring")


def make_random(n: int, p: float, seed: int) -> Graph:
    """Erdos-Renyi graph, redrawn from the same stream until connected"""
    if not 0 < p <= 1:
        raise ConfigurationError(f"edge probability must lie in (0, 1], got {p}")
    if n < 2:
        raise ConfigurationError(f"random graph needs n >= 2, got {n}")
    rng = keyed_rng(seed)
    upper = np.triu_indices(n, k=1)
    for attempt in range(1, MAX_RESAMPLES + 1):
        A = np.zeros((n, n))
        A[upper] = (rng.random(len(upper[0])) < p).astype(float)
        A = A + A.T
        if is_connected(A):
            if attempt > 1:
                logger.debug(f"Random graph connected after {attempt} draws (n={n}, p={p})")
            return Graph(A, kind="random")
    raise NumericalError(
        f"No connected graph after {MAX_RESAMPLES} draws",
        diagnostics={"n": n, "p": p, "seed": seed},
    )


def mixing_from_adjacency(A, method: str = "max_degree") -> MixingMatrix:
    """Doubly stochastic weights on the graph's edges.

    max_degree: P = I - (D - A) / (max_i D_ii + 1).
    metropolis: P_ij = 1 / (1 + max(deg_i, deg_j)) on edges, diagonal fills rows.
    """
    A = _check_adjacency(A.adjacency if isinstance(A, Graph) else A)
    n = A.shape[0]
    deg = A.sum(axis=1)

    if method == "max_degree":
        P = np.eye(n) - (np.diag(deg) - A) / (deg.max(initial=0.0) + 1.0)
    elif method == "metropolis":
        W = np.where(A > 0, 1.0 / (1.0 + np.maximum(deg[:, None], deg[None, :])), 0.0)
        P = W + np.diag(1.0 - W.sum(axis=1))
    else:
        raise ConfigurationError(f"Unknown mixing method: {method}")
    return MixingMatrix(P)


def is_doubly_stochastic(P: MixingMatrix, tol: float = 1e-12) -> bool:
    M = P.P
    return bool(
        np.all(M >= -tol)
        and np.all(np.abs(M.sum(axis=0) - 1) <= tol)
        and np.all(np.abs(M.sum(axis=1) - 1) <= tol)
    )


def second_singular_value(P, tol: float = 1e-10, max_iter: int = 100_000) -> float:
    """sigma_2(P) by power iteration on P^T P restricted to the complement of 1.

    The leading singular pair of a doubly stochastic matrix is (1, 1/sqrt(n));
    projecting it out each iteration leaves sigma_2^2 as the dominant
    eigenvalue of the deflated operator.
    """
    M = P.P if isinstance(P, MixingMatrix) else np.asarray(P, dtype=float)
    n = M.shape[0]
    if n == 1:
        return 0.0
    G = M.T @ M

    def deflate(v: np.ndarray) -> np.ndarray:
        return v - v.mean()

    v = deflate(keyed_rng(0, n).standard_normal(n))
    v /= np.linalg.norm(v)
    lam = 0.0
    for it in range(1, max_iter + 1):
        w = deflate(G @ v)
        w_norm = np.linalg.norm(w)
        if w_norm <= np.finfo(float).eps:
            return 0.0
        lam = float(v @ w)
        residual = np.linalg.norm(w - lam * v)
        v = w / w_norm
        if residual <= tol:
            return float(np.sqrt(min(max(lam, 0.0), 1.0)))
    raise NumericalError(
        "Power iteration for sigma_2 did not converge",
        diagnostics={"iterations": max_iter, "estimate": float(np.sqrt(max(lam, 0.0))), "residual": float(residual)},
    )


def mixing_product(matrices: Sequence, t: int, s: int) -> np.ndarray:
    """Phi(t, s) = P(t) P(t-1) ... P(s) with matrices indexed by time"""
    if s > t:
        raise DomainError(f"mixing product needs s <= t, got s={s}, t={t}")
    mats = [m.P if isinstance(m, MixingMatrix) else np.asarray(m, dtype=float) for m in matrices]
    if t >= len(mats) or s < 0:
        raise DomainError(f"time range [{s}, {t}] outside the {len(mats)} supplied matrices")
    out = mats[s].copy()
    for r in range(s + 1, t + 1):
        out = mats[r] @ out
    return out
