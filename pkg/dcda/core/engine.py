# dcda/core/engine.py
"""The DCDA iteration, the centralized reference solver and trace metrics"""

import logging
import time
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import linprog
from scipy.sparse.linalg import cg
from scipy.spatial.distance import pdist

from dcda.config import settings
from dcda.core.channel import QuantizerState, link_noise
from dcda.core.exceptions import ConfigurationError, NumericalDivergenceError
from dcda.core.linalg_prox import dual_norms, prox_project, psi_minimum, psi_value, step_size, step_sizes
from dcda.core.objectives import (
    classification_accuracy,
    eval_global,
    eval_global_batch,
    stochastic_subgradients,
    subgradients,
)
from dcda.core.schedule import mixing_groups
from dcda.models.domain import (
    FeasibleSetKind,
    LossKind,
    NetworkState,
    NodeState,
    NoisyChannel,
    NormKind,
    Problem,
    QuantizedChannel,
    Reference,
    RunConfig,
    RunTrace,
)

logger = logging.getLogger(__name__)

STABILITY_TOL = 1e-6


def initial_state(config: RunConfig) -> NetworkState:
    """z_i(1) = z_i(0) = 0 and x_i(1) = prox_project(0, alpha(0)) at every node"""
    problem = config.problem
    n, d = problem.n, problem.d
    Z = np.zeros((n, d))
    X = prox_project(Z, step_size(0, config.schedule), problem.prox, problem.feasible)
    return NetworkState(t=1, Z=Z, X=X, X_sum=np.zeros((n, d)), prev_G=np.zeros((n, d)), prev_Z=np.zeros((n, d)))


def _gradients(config: RunConfig, X: np.ndarray, t: int) -> np.ndarray:
    if config.gradient.is_exact:
        return subgradients(config.problem, X)
    return stochastic_subgradients(config.problem, X, config.gradient, t)


def _links(P: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(receiver, sender) pairs with positive off-diagonal weight"""
    mask = P > 0
    np.fill_diagonal(mask, False)
    return np.nonzero(mask)


def dcda_step(state: NetworkState, t: int, config: RunConfig,
              quantizer: Optional[QuantizerState] = None) -> NetworkState:
    """Advance every node from step t to t + 1.

    Perfect / noisy: [z_i(t+1)]_k = sum_j P^k_ij(t) [u_ij(t)]_k + [g_i(t)]_k.
    Quantized: z_i(t+1) = z_i(t) + g_i(t) - g_i(t-1) + sum_j P^k_ij(t) s(t) u_j(t).
    Then x_i(t+1) = prox_project(z_i(t+1), alpha(t)).
    """
    if t != state.t:
        raise ConfigurationError(f"state is at step {state.t}, asked to run step {t}")
    problem, channel = config.problem, config.channel
    G = _gradients(config, state.X, t)
    groups = mixing_groups(config.policy, t)
    transmissions = state.transmissions

    with np.errstate(over="ignore", invalid="ignore"):
        if isinstance(channel, QuantizedChannel):
            if quantizer is None:
                raise ConfigurationError("quantized channel needs a quantizer state")
            deltas = state.Z - state.prev_Z
            symbols = quantizer.encode(deltas, t)
            recon = quantizer.decode(symbols, t)
            mixed = recon.copy()
            for mat, coords in groups:
                mixed[:, coords] = mat.P @ recon[:, coords]
                receivers, senders = _links(mat.P)
                transmissions += len(receivers) * len(coords)
                if quantizer.audit:
                    per_sender = [tuple(receivers[senders == j]) for j in range(problem.n)]
                    quantizer.log(t, symbols, deltas, coords, per_sender)
            Z_new = state.Z + G - state.prev_G + mixed
        else:
            if len(groups) == 1 and len(groups[0][1]) == problem.d:
                Z_new = groups[0][0].P @ state.Z
            else:
                Z_new = state.Z.copy()
                for mat, coords in groups:
                    Z_new[:, coords] = mat.P @ state.Z[:, coords]
            for mat, coords in groups:
                receivers, senders = _links(mat.P)
                transmissions += len(receivers) * len(coords)
                if isinstance(channel, NoisyChannel) and channel.gamma2 > 0:
                    for i, j in zip(receivers, senders):
                        noise = link_noise(channel, (int(i), int(j)), t, problem.d)
                        Z_new[i, coords] += mat.P[i, j] * noise[coords]
            Z_new = Z_new + G

    if not np.all(np.isfinite(Z_new)):
        bad_nodes, bad_coords = np.nonzero(~np.isfinite(Z_new))
        with np.errstate(over="ignore", invalid="ignore"):
            last_norms = np.linalg.norm(np.where(np.isfinite(state.Z), state.Z, 0.0), axis=1)
        raise NumericalDivergenceError(
            f"Dual state became non-finite at step {t}",
            diagnostics={
                "t": t,
                "nodes": sorted(set(int(i) for i in bad_nodes)),
                "coordinates": sorted(set(int(k) for k in bad_coords))[:10],
                # None where the norm itself overflows
                "last_dual_norms": [float(v) if np.isfinite(v) else None for v in last_norms],
                "alpha": step_size(t, config.schedule),
            },
        )

    X_new = prox_project(Z_new, step_size(t, config.schedule), problem.prox, problem.feasible)
    return NetworkState(
        t=t + 1,
        Z=Z_new,
        X=X_new,
        X_sum=state.X_sum + state.X,
        prev_G=G,
        prev_Z=state.Z,
        transmissions=transmissions,
    )


def consensus_error(states: Union[NetworkState, Sequence[NodeState]], norm: NormKind) -> Tuple[float, float]:
    """(max_i ||z_bar - z_i||_*, max_{i,j} ||x_i - x_j||)"""
    if isinstance(states, NetworkState):
        Z, X = states.Z, states.X
    else:
        Z = np.stack([s.z for s in states])
        X = np.stack([s.x for s in states])
    dual = float(dual_norms(Z - Z.mean(axis=0), norm).max())
    return dual, _primal_spread(X, norm)


def _primal_spread(X: np.ndarray, norm: NormKind) -> float:
    if X.shape[0] < 2:
        return 0.0
    metric = "euclidean" if norm == NormKind.L2 else "cityblock"
    return float(pdist(X, metric=metric).max())


def dcda_run(config: RunConfig, reference: Optional[Reference] = None,
             quantizer: Optional[QuantizerState] = None) -> RunTrace:
    """Run steps 1..T and record the trace"""
    problem, T = config.problem, config.T
    n, d = problem.n, problem.d
    norm = problem.norm
    if reference is None:
        reference = centralized_reference(problem, T)
    if isinstance(config.channel, QuantizedChannel) and quantizer is None:
        quantizer = QuantizerState(model=config.channel, audit=config.record_messages)

    f_gap = np.full((T, n), np.nan)
    accuracy = np.full((T, n), np.nan) if config.test_set is not None else None
    dual_dev = np.zeros((T, n))
    dual_consensus = np.zeros(T)
    primal_spread = np.zeros(T)
    gbar_norm = np.zeros(T)
    max_grad_norm = np.zeros(T)
    transmissions = np.zeros(T, dtype=np.int64)
    dual_mean = np.zeros((T + 1, d))
    gbar = np.zeros((T, d))
    max_primal_norm = 0.0

    logger.info(
        f"Starting DCDA run: {problem.loss.value}, n={n}, d={d}, T={T}, "
        f"policy={config.policy.kind.value}, channel={config.channel.kind.value}, seed={config.seed}"
    )
    started = time.perf_counter()
    state = initial_state(config)
    for t in range(1, T + 1):
        row = t - 1
        z_bar = state.Z.mean(axis=0)
        dual_mean[row] = z_bar
        dual_dev[row] = dual_norms(state.Z - z_bar, norm)
        dual_consensus[row] = dual_dev[row].max()
        primal_spread[row] = _primal_spread(state.X, norm)
        max_primal_norm = max(max_primal_norm, float(np.linalg.norm(state.X, axis=1).max()))

        state = dcda_step(state, t, config, quantizer)

        g_bar = state.prev_G.mean(axis=0)
        gbar[row] = g_bar
        gbar_norm[row] = dual_norms(g_bar, norm)
        max_grad_norm[row] = dual_norms(state.prev_G, norm).max()
        transmissions[row] = state.transmissions

        if t % config.cadence == 0 or t in (1, T):
            x_hat = state.X_sum / t
            f_gap[row] = eval_global_batch(problem, x_hat) - reference.f_star
            if accuracy is not None:
                accuracy[row] = classification_accuracy(x_hat, *config.test_set)
            logger.debug(f"t={t} max gap={f_gap[row].max():.4g} dual consensus={dual_consensus[row]:.3g}")
    dual_mean[T] = state.Z.mean(axis=0)

    elapsed = time.perf_counter() - started
    logger.info(f"Finished DCDA run in {elapsed:.2f}s: final max gap {np.nanmax(f_gap[-1]):.4g}")

    psi_star = float(psi_value(reference.x_star, problem.prox)) - psi_minimum(problem.prox, problem.feasible, d)
    metadata = {
        "T": T,
        "n": n,
        "d": d,
        "seed": config.seed,
        "step_C": config.schedule.C,
        "cadence": config.cadence,
        "family": problem.loss.value,
        "policy": config.policy.kind.value,
        "channel": config.channel.kind.value,
        "gradient": config.gradient.kind,
        "norm": norm.value,
        "f_star": reference.f_star,
        "f_star_provenance": reference.provenance,
        "reference_stable": reference.stable,
        "psi_star": psi_star,
        "reference_norm": float(np.linalg.norm(reference.x_star)),
        "max_primal_norm": max_primal_norm,
        "max_grad_norm": float(max_grad_norm.max()),
        "elapsed_seconds": round(elapsed, 3),
    }
    audited = quantizer is not None and quantizer.audit
    messages = list(quantizer.records) if audited else []
    message_links = list(quantizer.links) if audited else []
    return RunTrace(
        t=np.arange(1, T + 1),
        f_gap=f_gap,
        dual_dev=dual_dev,
        dual_consensus=dual_consensus,
        primal_spread=primal_spread,
        gbar_norm=gbar_norm,
        alpha=step_sizes(np.arange(1, T + 1), config.schedule),
        transmissions=transmissions,
        max_grad_norm=max_grad_norm,
        accuracy=accuracy,
        dual_mean=dual_mean,
        gbar=gbar,
        metadata=metadata,
        messages=messages,
        message_links=message_links,
    )


# ---------------------------------------------------------------------------
# Centralized reference


def _stacked(problem: Problem) -> Tuple[np.ndarray, np.ndarray]:
    return problem.features.reshape(-1, problem.d), problem.targets.reshape(-1)


def _least_squares_reference(problem: Problem) -> Reference:
    A, y = _stacked(problem)
    H = A.T @ A
    b = A.T @ y
    x, info = cg(H, b, rtol=1e-14, atol=0.0, maxiter=50 * problem.d)
    residual = float(np.linalg.norm(H @ x - b))
    if info != 0 or residual > 1e-10 * max(1.0, float(np.linalg.norm(b))):
        logger.warning(f"CG stopped with residual {residual:.3g}; falling back to least squares")
        x = np.linalg.lstsq(A, y, rcond=None)[0]
    return Reference(x_star=x, f_star=eval_global(problem, x), provenance="normal-equations")


def _l1_reference(problem: Problem) -> Optional[Reference]:
    """min sum |A x - z| as a linear program over (x, r)"""
    A, y = _stacked(problem)
    N, d = A.shape
    c = np.concatenate([np.zeros(d), np.ones(N)])
    eye = np.eye(N)
    A_ub = np.block([[A, -eye], [-A, -eye]])
    b_ub = np.concatenate([y, -y])
    if problem.feasible.kind == FeasibleSetKind.SIMPLEX:
        A_eq = np.concatenate([np.ones(d), np.zeros(N)])[None, :]
        bounds = [(0, None)] * d + [(0, None)] * N
        result = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0], bounds=bounds, method="highs")
    else:
        bounds = [(None, None)] * d + [(0, None)] * N
        result = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not result.success:
        logger.warning(f"Linear program failed ({result.message}); using dual averaging")
        return None
    x = result.x[:d]
    if problem.feasible.kind == FeasibleSetKind.SIMPLEX:
        x = np.clip(x, 0.0, None)
        x /= x.sum()
    return Reference(x_star=x, f_star=eval_global(problem, x), provenance="linear-program")


def _global_subgradients(problem: Problem, X: np.ndarray) -> np.ndarray:
    """Row r is a subgradient of f = sum_i f_i at X[r]"""
    A, y = _stacked(problem)
    pred = X @ A.T
    if problem.loss == LossKind.SVM_HINGE:
        weight = -problem.c_svm * (y * pred < 1) * y
        return problem.n * X / problem.d + weight @ A
    residual = pred - y
    weight = residual if problem.loss == LossKind.LEAST_SQUARES else np.sign(residual)
    return weight @ A


def _dual_averaging_reference(problem: Problem, iterations: int, grid: Sequence[float]) -> Reference:
    """Single-node dual averaging on f for every step constant of the grid at once"""
    grid = np.asarray(grid, dtype=float)
    k = len(grid)
    Z = np.zeros((k, problem.d))
    # every supported prox depends on (alpha, z) only through alpha * z
    X = prox_project(Z, 1.0, problem.prox, problem.feasible)
    X_sum = np.zeros_like(Z)
    checkpoint = max(1, iterations // 100)
    tail_start = int(0.9 * iterations)
    best_f, best_x, best_c = np.inf, None, None
    tail_values = []

    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(1, iterations + 1):
            X_sum += X
            Z += _global_subgradients(problem, X)
            alphas = grid / np.sqrt(t)
            X = prox_project(alphas[:, None] * Z, 1.0, problem.prox, problem.feasible)
            if t % checkpoint == 0 or t == iterations:
                x_hat = X_sum / t
                values = eval_global_batch(problem, np.where(np.isfinite(x_hat), x_hat, 0.0))
                values[~np.all(np.isfinite(x_hat), axis=1)] = np.inf
                r = int(np.argmin(values))
                if values[r] < best_f:
                    best_f, best_x, best_c = float(values[r]), x_hat[r].copy(), float(grid[r])
                if t >= tail_start:
                    tail_values.append(best_f)

    stable = True
    if len(tail_values) >= 2 and np.isfinite(tail_values[0]):
        change = abs(tail_values[0] - tail_values[-1]) / max(abs(tail_values[-1]), 1e-12)
        stable = bool(change <= STABILITY_TOL)
        if not stable:
            logger.warning(f"Centralized reference still moving: relative change {change:.3g} over the last 10%")
    logger.info(f"Dual-averaging reference f*={best_f:.6g} with C={best_c} after {iterations} iterations")
    return Reference(x_star=best_x, f_star=best_f, provenance="centralized-dual-averaging",
                     stable=stable, step_constant=best_c)


def centralized_reference(problem: Problem, T: int, method: str = "auto",
                          factor: Optional[int] = None, grid: Optional[Sequence[float]] = None) -> Reference:
    """(x*, f*) for measuring gaps.

    auto: normal equations for unconstrained least squares, a linear
    program for l1 regression on the simplex or without constraints, and a
    long centralized dual-averaging run otherwise. ``dual-averaging`` forces
    the last one.
    """
    if method not in ("auto", "dual-averaging"):
        raise ConfigurationError(f"Unknown reference method: {method}")
    if method == "auto":
        if problem.loss == LossKind.LEAST_SQUARES and problem.feasible.kind == FeasibleSetKind.UNCONSTRAINED:
            return _least_squares_reference(problem)
        if problem.loss == LossKind.L1_REGRESSION and problem.feasible.kind != FeasibleSetKind.BALL:
            ref = _l1_reference(problem)
            if ref is not None:
                return ref
    factor = settings.REFERENCE_ITERS_FACTOR if factor is None else factor
    grid = settings.REFERENCE_GRID if grid is None else grid
    return _dual_averaging_reference(problem, max(1, factor * T), grid)


