# dcda/core/objectives.py
"""Experiment problem families, their subgradient oracles and objective evaluation.

Every node holds m samples; f_i sums a per-sample loss over them and
f = sum_i f_i. Oracles take a single point or a stack of points (one row
per node) so the engine can evaluate all nodes in one call.
"""

import logging
from typing import Optional, Tuple

import numpy as np

from dcda.core.exceptions import ConfigurationError, DomainError
from dcda.core.linalg_prox import dual_norms
from dcda.models.domain import (
    FeasibleSet,
    FeasibleSetKind,
    GradientMode,
    LipschitzEstimate,
    LossKind,
    NormKind,
    Problem,
    ProxFunction,
)
from dcda.utils.seeding import keyed_rng

logger = logging.getLogger(__name__)

SAFETY_MARGIN = 1.1

FAMILY_DEFAULTS = {
    "svm": {"n": 10, "m": 10, "d": 30},
    "linreg": {"n": 10, "m": 20, "d": 30},
    "robust": {"n": 10, "m": 10, "d": 20},
}


def _default_set(loss: LossKind) -> Tuple[ProxFunction, FeasibleSet]:
    if loss == LossKind.L1_REGRESSION:
        return ProxFunction.ENTROPIC, FeasibleSet.simplex()
    return ProxFunction.SQUARED, FeasibleSet.unconstrained()


def _prox_for(feasible: Optional[FeasibleSet], loss: LossKind) -> Tuple[ProxFunction, FeasibleSet]:
    if feasible is None:
        return _default_set(loss)
    if feasible.kind == FeasibleSetKind.SIMPLEX:
        return ProxFunction.ENTROPIC, feasible
    return ProxFunction.SQUARED, feasible


# ---------------------------------------------------------------------------
# Generators


def gen_svm(
    n: int,
    m: int,
    d: int,
    mu_plus=None,
    mu_minus=None,
    sigma: float = 1.0,
    c_svm: float = 1.0,
    seed: int = 0,
    feasible: Optional[FeasibleSet] = None,
) -> Problem:
    """Two Gaussian classes, labels uniform on {-1, +1}.

    Defaults mu_plus = -mu_minus = 1/sqrt(d) * 1 and unit isotropic
    features. ``sigma`` scales the feature standard deviation.
    """
    mu_plus = np.full(d, 1.0 / np.sqrt(d)) if mu_plus is None else np.asarray(mu_plus, dtype=float)
    mu_minus = -np.full(d, 1.0 / np.sqrt(d)) if mu_minus is None else np.asarray(mu_minus, dtype=float)
    if mu_plus.shape != (d,) or mu_minus.shape != (d,):
        raise ConfigurationError(f"class means must have length d={d}")
    rng = keyed_rng(seed)
    labels = rng.choice(np.array([-1.0, 1.0]), size=(n, m))
    means = np.where(labels[..., None] > 0, mu_plus, mu_minus)
    features = means + sigma * rng.standard_normal((n, m, d))
    prox, fset = _prox_for(feasible, LossKind.SVM_HINGE)
    return Problem(
        loss=LossKind.SVM_HINGE,
        features=features,
        targets=labels,
        prox=prox,
        feasible=fset,
        c_svm=float(c_svm),
        params={"mu_plus": mu_plus, "mu_minus": mu_minus, "sigma": float(sigma), "seed": seed},
    )


def gen_svm_test_set(problem: Problem, per_class: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Held-out points drawn from the problem's class distributions"""
    if problem.loss != LossKind.SVM_HINGE:
        raise ConfigurationError("test sets exist for the SVM family only")
    rng = keyed_rng(seed)
    d = problem.d
    sigma = problem.params.get("sigma", 1.0)
    pos = problem.params["mu_plus"] + sigma * rng.standard_normal((per_class, d))
    neg = problem.params["mu_minus"] + sigma * rng.standard_normal((per_class, d))
    labels = np.concatenate([np.ones(per_class), -np.ones(per_class)])
    return np.vstack([pos, neg]), labels


def gen_linreg(n: int, m: int, d: int, noise_sigma: float = 0.1, seed: int = 0,
               feasible: Optional[FeasibleSet] = None) -> Problem:
    """Gaussian measurements of a planted Gaussian x_true plus Gaussian noise"""
    rng = keyed_rng(seed)
    x_true = rng.standard_normal(d)
    A = rng.standard_normal((n, m, d))
    noise = noise_sigma * rng.standard_normal((n, m))
    z = A @ x_true + noise
    prox, fset = _prox_for(feasible, LossKind.LEAST_SQUARES)
    return Problem(
        loss=LossKind.LEAST_SQUARES,
        features=A,
        targets=z,
        prox=prox,
        feasible=fset,
        x_true=x_true,
        params={"noise_sigma": float(noise_sigma), "noise": noise, "seed": seed},
    )


def gen_robust(
    n: int,
    m: int,
    d: int,
    outlier_prob: float = 0.1,
    outlier_sigma: float = 10.0,
    inlier_sigma: float = 0.3,
    seed: int = 0,
    feasible: Optional[FeasibleSet] = None,
) -> Problem:
    """l1 regression on the simplex with Bernoulli-gated outliers.

    z_ij = A_ij x + (1 - b_ij) o_ij + b_ij n_ij with P[b_ij = 0] = outlier_prob.
    """
    if not 0 <= outlier_prob <= 1:
        raise ConfigurationError(f"outlier_prob must lie in [0, 1], got {outlier_prob}")
    rng = keyed_rng(seed)
    x_true = rng.dirichlet(np.ones(d))
    A = rng.standard_normal((n, m, d))
    b = (rng.random((n, m)) >= outlier_prob).astype(float)
    outliers = outlier_sigma * rng.standard_normal((n, m))
    inliers = inlier_sigma * rng.standard_normal((n, m))
    z = A @ x_true + (1 - b) * outliers + b * inliers
    prox, fset = _prox_for(feasible if feasible is not None else FeasibleSet.simplex(), LossKind.L1_REGRESSION)
    return Problem(
        loss=LossKind.L1_REGRESSION,
        features=A,
        targets=z,
        prox=prox,
        feasible=fset,
        x_true=x_true,
        params={
            "outlier_prob": float(outlier_prob),
            "outlier_sigma": float(outlier_sigma),
            "inlier_sigma": float(inlier_sigma),
            "inlier_mask": b,
            "seed": seed,
        },
    )


# ---------------------------------------------------------------------------
# Oracles


def _check_x(problem: Problem, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != problem.d:
        raise DomainError(f"point has dimension {x.shape[-1]}, problem has d={problem.d}")
    return x


def _sample_terms(problem: Problem, i: int, x: np.ndarray, idx=None) -> np.ndarray:
    """Per-sample subgradients of node i's loss term (without regularizer), shape (k, d)"""
    A = problem.features[i] if idx is None else problem.features[i, idx]
    y = problem.targets[i] if idx is None else problem.targets[i, idx]
    if problem.loss == LossKind.SVM_HINGE:
        margin = y * (A @ x)
        active = (margin < 1).astype(float)
        return -problem.c_svm * (active * y)[:, None] * A
    residual = A @ x - y
    if problem.loss == LossKind.LEAST_SQUARES:
        return residual[:, None] * A
    return np.sign(residual)[:, None] * A


def _regularizer_grad(problem: Problem, x: np.ndarray) -> np.ndarray:
    if problem.loss == LossKind.SVM_HINGE:
        return x / problem.d
    return np.zeros_like(x)


def subgradient(problem: Problem, i: int, x) -> np.ndarray:
    """A member of the subdifferential of f_i at x (zero element at kinks)"""
    x = _check_x(problem, x)
    if not 0 <= i < problem.n:
        raise DomainError(f"node {i} out of range [0, {problem.n})")
    return _regularizer_grad(problem, x) + _sample_terms(problem, i, x).sum(axis=0)


def subgradients(problem: Problem, X: np.ndarray) -> np.ndarray:
    """Row i is a subgradient of f_i at X[i]"""
    X = _check_x(problem, X)
    A, y = problem.features, problem.targets
    pred = np.einsum("nmd,nd->nm", A, X)
    if problem.loss == LossKind.SVM_HINGE:
        weight = -problem.c_svm * (y * pred < 1) * y
        return X / problem.d + np.einsum("nm,nmd->nd", weight, A)
    residual = pred - y
    weight = residual if problem.loss == LossKind.LEAST_SQUARES else np.sign(residual)
    return np.einsum("nm,nmd->nd", weight, A)


def stochastic_subgradient(problem: Problem, i: int, x, mode: GradientMode, t: int) -> np.ndarray:
    """Unbiased minibatch estimate: regularizer + (m / b) * sum over b sampled terms"""
    if mode.is_exact:
        raise ConfigurationError("stochastic_subgradient needs a minibatch gradient mode")
    x = _check_x(problem, x)
    m, b = problem.m, mode.batch
    if b > m:
        raise ConfigurationError(f"batch size {b} exceeds m={m}")
    idx = keyed_rng(mode.seed, i, t).choice(m, size=b, replace=False)
    return _regularizer_grad(problem, x) + (m / b) * _sample_terms(problem, i, x, idx).sum(axis=0)


def stochastic_subgradients(problem: Problem, X: np.ndarray, mode: GradientMode, t: int) -> np.ndarray:
    return np.stack([stochastic_subgradient(problem, i, X[i], mode, t) for i in range(problem.n)])


def node_objectives(problem: Problem, x) -> np.ndarray:
    """f_i(x) for every node at a common point x, shape (n,)"""
    x = _check_x(problem, x)
    pred = problem.features @ x
    if problem.loss == LossKind.SVM_HINGE:
        hinge = np.maximum(1.0 - problem.targets * pred, 0.0).sum(axis=1)
        return (x @ x) / (2 * problem.d) + problem.c_svm * hinge
    residual = pred - problem.targets
    if problem.loss == LossKind.LEAST_SQUARES:
        return 0.5 * np.sum(residual ** 2, axis=1)
    return np.sum(np.abs(residual), axis=1)


def eval_global(problem: Problem, x) -> float:
    """f(x) = sum_i f_i(x)"""
    x = _check_x(problem, x)
    if not np.all(np.isfinite(x)):
        raise DomainError("objective needs a finite point")
    return float(node_objectives(problem, x).sum())


def eval_global_batch(problem: Problem, X: np.ndarray) -> np.ndarray:
    """f evaluated at each row of X"""
    X = _check_x(problem, np.atleast_2d(X))
    A = problem.features.reshape(-1, problem.d)
    y = problem.targets.reshape(-1)
    pred = X @ A.T
    if problem.loss == LossKind.SVM_HINGE:
        hinge = np.maximum(1.0 - y * pred, 0.0).sum(axis=1)
        return problem.n * np.sum(X * X, axis=1) / (2 * problem.d) + problem.c_svm * hinge
    residual = pred - y
    if problem.loss == LossKind.LEAST_SQUARES:
        return 0.5 * np.sum(residual ** 2, axis=1)
    return np.sum(np.abs(residual), axis=1)


def classification_accuracy(X: np.ndarray, features: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Share of points with sign(x^T z) == label, per row of X; ties count as errors"""
    X = np.atleast_2d(X)
    return np.mean(np.sign(X @ features.T) == labels, axis=1)


# ---------------------------------------------------------------------------
# Lipschitz constants and step constants


def _sample_feasible(problem: Problem, count: int, seed: int, radius: float) -> np.ndarray:
    rng = keyed_rng(seed)
    d = problem.d
    kind = problem.feasible.kind
    if kind == FeasibleSetKind.SIMPLEX:
        return rng.dirichlet(np.ones(d), size=count)
    directions = rng.standard_normal((count, d))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    if kind == FeasibleSetKind.BALL:
        return directions * problem.feasible.radius * rng.random((count, 1)) ** (1.0 / d)
    return directions * radius * rng.random((count, 1))


def _certified_bound(problem: Problem) -> Optional[float]:
    """Closed-form sup of ||g_i||_* over the feasible set, when one exists"""
    A, y = problem.features, problem.targets
    kind = problem.feasible.kind
    linf = problem.norm == NormKind.L1

    if problem.loss == LossKind.L1_REGRESSION:
        if linf:
            return float(np.abs(A).sum(axis=1).max())
        spectral = np.linalg.norm(A, ord=2, axis=(1, 2))
        return float((spectral * np.sqrt(problem.m)).max())

    if kind == FeasibleSetKind.UNCONSTRAINED:
        return None

    if problem.loss == LossKind.SVM_HINGE:
        if linf:
            reg, sample_norms = 1.0 / problem.d, np.abs(A).sum(axis=1).max(axis=1)
        else:
            reg, sample_norms = problem.feasible.radius / problem.d, np.linalg.norm(A, axis=2).sum(axis=1)
        return float(reg + problem.c_svm * sample_norms.max())

    # least squares
    if kind == FeasibleSetKind.SIMPLEX:
        # ||A^T(Ax - z)||_inf is convex in x, so its max over the simplex sits at a vertex
        vertices = np.eye(problem.d)
        best = 0.0
        for i in range(problem.n):
            grads = (vertices @ A[i].T - y[i]) @ A[i]
            best = max(best, float(np.abs(grads).max()))
        return best
    H = np.einsum("nmd,nme->nde", A, A)
    bound = np.linalg.norm(H, ord=2, axis=(1, 2)) * problem.feasible.radius + np.linalg.norm(
        np.einsum("nmd,nm->nd", A, y), axis=1
    )
    return float(bound.max())


def lipschitz_estimate(problem: Problem, samples: int = 10_000, seed: int = 0,
                       radius: Optional[float] = None) -> LipschitzEstimate:
    """Upper bound L on ||g_i||_* over the feasible set.

    Closed form where the set (or the loss) bounds the subgradients;
    otherwise the largest dual norm over ``samples`` random points of a
    ball of ``radius`` around the origin, inflated by 10%.
    """
    certified = _certified_bound(problem)
    if certified is not None:
        return LipschitzEstimate(value=certified, certified=True)

    if radius is None:
        scale = np.linalg.norm(problem.x_true) if problem.x_true is not None else problem.params.get("sample_radius", 5.0)
        radius = 2.0 * max(1.0, float(scale))
    points = _sample_feasible(problem, samples, seed, radius)
    A, y = problem.features, problem.targets
    best = 0.0
    for i in range(problem.n):
        pred = points @ A[i].T
        if problem.loss == LossKind.SVM_HINGE:
            weight = -problem.c_svm * (y[i] * pred < 1) * y[i]
            grads = points / problem.d + weight @ A[i]
        else:
            grads = (pred - y[i]) @ A[i]
        best = max(best, float(dual_norms(grads, problem.norm).max()))
    logger.info(f"Empirical Lipschitz estimate {best * SAFETY_MARGIN:.4g} from {samples} samples (radius {radius:.3g})")
    return LipschitzEstimate(value=best * SAFETY_MARGIN, certified=False)


def suggest_step_constant(problem: Problem, fraction: float = 0.25) -> float:
    """Step constant C for alpha(t) = C / sqrt(t).

    Least squares: ``fraction`` of 2 / lambda_max of the mean local Hessian,
    the largest C for which the accumulated-gradient recursion does not
    grow at the first step. Other families: 1.
    """
    if not 0 < fraction <= 1:
        raise ConfigurationError(f"fraction must lie in (0, 1], got {fraction}")
    if problem.loss != LossKind.LEAST_SQUARES:
        return 1.0
    H = np.einsum("nmd,nme->de", problem.features, problem.features) / problem.n
    lam = float(np.linalg.eigvalsh(H)[-1])
    return 2.0 * fraction / lam if lam > 0 else 1.0
