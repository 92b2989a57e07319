# tests/test_objectives.py

import numpy as np
import pytest

from dcda.core.exceptions import ConfigurationError
from dcda.core.linalg_prox import dual_norms
from dcda.core.objectives import (
    classification_accuracy,
    eval_global,
    eval_global_batch,
    gen_linreg,
    gen_robust,
    gen_svm,
    gen_svm_test_set,
    lipschitz_estimate,
    node_objectives,
    stochastic_subgradient,
    subgradient,
    subgradients,
    suggest_step_constant,
)
from dcda.models.domain import FeasibleSet, FeasibleSetKind, GradientMode, LossKind, Problem, ProxFunction


def _numeric_grad(problem, i, x, eps=1e-6):
    g = np.zeros_like(x)
    for k in range(len(x)):
        e = np.zeros_like(x)
        e[k] = eps
        g[k] = (node_objectives(problem, x + e)[i] - node_objectives(problem, x - e)[i]) / (2 * eps)
    return g


def test_generators_are_seeded():
    a, b = gen_linreg(3, 5, 4, seed=1), gen_linreg(3, 5, 4, seed=1)
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.targets, b.targets)
    assert not np.array_equal(a.features, gen_linreg(3, 5, 4, seed=2).features)


def test_robust_defaults_to_simplex():
    p = gen_robust(3, 4, 5, seed=0)
    assert p.feasible.kind == FeasibleSetKind.SIMPLEX
    assert p.prox == ProxFunction.ENTROPIC
    assert p.x_true.sum() == pytest.approx(1.0)


def test_svm_labels_are_signs(svm_small):
    assert set(np.unique(svm_small.targets)) <= {-1.0, 1.0}


def test_least_squares_gradient_matches_finite_differences(linreg_small, rng):
    x = rng.normal(size=linreg_small.d)
    for i in range(linreg_small.n):
        np.testing.assert_allclose(subgradient(linreg_small, i, x), _numeric_grad(linreg_small, i, x), rtol=1e-5, atol=1e-6)


def test_svm_gradient_away_from_kinks(svm_small, rng):
    x = rng.normal(size=svm_small.d) * 0.1
    for i in range(svm_small.n):
        np.testing.assert_allclose(subgradient(svm_small, i, x), _numeric_grad(svm_small, i, x), rtol=1e-5, atol=1e-6)


def test_hinge_tie_gives_zero_loss_term():
    # margin exactly 1: subgradient of the hinge term is 0
    problem = Problem(
        loss=LossKind.SVM_HINGE,
        features=np.array([[[1.0, 0.0]]]),
        targets=np.array([[1.0]]),
        prox=ProxFunction.SQUARED,
        feasible=FeasibleSet.unconstrained(),
    )
    x = np.array([1.0, 0.0])
    np.testing.assert_allclose(subgradient(problem, 0, x), x / 2)


def test_vectorised_oracle_matches_per_node(robust_small, rng):
    X = rng.dirichlet(np.ones(robust_small.d), size=robust_small.n)
    G = subgradients(robust_small, X)
    for i in range(robust_small.n):
        np.testing.assert_allclose(G[i], subgradient(robust_small, i, X[i]))


def test_minibatch_is_unbiased(linreg_small, rng):
    x = rng.normal(size=linreg_small.d)
    mode = GradientMode("minibatch", batch=2, seed=8)
    mean = np.mean([stochastic_subgradient(linreg_small, 1, x, mode, t) for t in range(20000)], axis=0)
    exact = subgradient(linreg_small, 1, x)
    assert np.linalg.norm(mean - exact) <= 0.1 * np.linalg.norm(exact) + 0.1


def test_full_batch_equals_exact(linreg_small, rng):
    x = rng.normal(size=linreg_small.d)
    mode = GradientMode("minibatch", batch=linreg_small.m, seed=0)
    np.testing.assert_allclose(stochastic_subgradient(linreg_small, 0, x, mode, 3), subgradient(linreg_small, 0, x))


def test_minibatch_larger_than_m_rejected(linreg_small):
    mode = GradientMode("minibatch", batch=linreg_small.m + 1)
    with pytest.raises(ConfigurationError):
        stochastic_subgradient(linreg_small, 0, np.zeros(linreg_small.d), mode, 1)


def test_global_objective_is_node_sum(svm_small, rng):
    X = rng.normal(size=(3, svm_small.d))
    batch = eval_global_batch(svm_small, X)
    for r in range(3):
        assert batch[r] == pytest.approx(eval_global(svm_small, X[r]))
        assert batch[r] == pytest.approx(node_objectives(svm_small, X[r]).sum())


def test_zero_noise_linreg_optimum_is_planted():
    p = gen_linreg(3, 10, 4, noise_sigma=0.0, seed=2)
    assert eval_global(p, p.x_true) == pytest.approx(0.0, abs=1e-20)


def test_accuracy_counts_ties_as_errors():
    features = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
    labels = np.array([1.0, 1.0, -1.0])
    acc = classification_accuracy(np.array([[1.0, 0.0]]), features, labels)
    assert acc[0] == pytest.approx(2 / 3)


def test_test_set_balanced(svm_small):
    X, y = gen_svm_test_set(svm_small, 50, seed=1)
    assert X.shape == (100, svm_small.d)
    assert (y == 1).sum() == 50


def test_certified_lipschitz_bounds_sampled_gradients(robust_small, rng):
    est = lipschitz_estimate(robust_small)
    assert est.certified
    X = rng.dirichlet(np.ones(robust_small.d), size=(500,))
    for i in range(robust_small.n):
        G = np.stack([subgradient(robust_small, i, x) for x in X[:50]])
        assert dual_norms(G, robust_small.norm).max() <= est.value + 1e-12


def test_empirical_lipschitz_is_flagged(linreg_small):
    est = lipschitz_estimate(linreg_small, samples=500)
    assert not est.certified
    assert est.value > 0


def test_zero_data_has_zero_lipschitz():
    p = Problem(
        loss=LossKind.LEAST_SQUARES,
        features=np.zeros((2, 3, 4)),
        targets=np.zeros((2, 3)),
        prox=ProxFunction.SQUARED,
        feasible=FeasibleSet.unconstrained(),
    )
    assert lipschitz_estimate(p, samples=100).value == 0.0


def test_step_constant_for_least_squares(linreg_small):
    H = np.einsum("nmd,nme->de", linreg_small.features, linreg_small.features) / linreg_small.n
    assert suggest_step_constant(linreg_small) == pytest.approx(0.5 / np.linalg.eigvalsh(H)[-1])


def test_step_constant_scales_with_fraction(linreg_small):
    H = np.einsum("nmd,nme->de", linreg_small.features, linreg_small.features) / linreg_small.n
    lam = np.linalg.eigvalsh(H)[-1]
    assert suggest_step_constant(linreg_small, fraction=0.9) == pytest.approx(1.8 / lam)


@pytest.mark.parametrize("fraction", [0.0, -0.5, 1.5])
def test_step_constant_rejects_fraction_outside_unit_interval(linreg_small, fraction):
    with pytest.raises(ConfigurationError):
        suggest_step_constant(linreg_small, fraction=fraction)


@pytest.mark.parametrize("fixture", ["svm_small", "linreg_small", "robust_small"])
def test_local_objectives_are_convex(fixture, request, rng):
    problem = request.getfixturevalue(fixture)
    for _ in range(1000):
        x, y = rng.normal(scale=2.0, size=(2, problem.d))
        theta = rng.uniform()
        mixed = node_objectives(problem, theta * x + (1 - theta) * y)
        chord = theta * node_objectives(problem, x) + (1 - theta) * node_objectives(problem, y)
        assert np.all(mixed <= chord + 1e-9 * (1 + np.abs(chord)))


@pytest.mark.parametrize("fixture", ["svm_small", "linreg_small", "robust_small"])
def test_subgradients_support_the_local_objectives(fixture, request, rng):
    problem = request.getfixturevalue(fixture)
    for _ in range(1000):
        x, y = rng.normal(scale=2.0, size=(2, problem.d))
        G = subgradients(problem, np.tile(x, (problem.n, 1)))
        linear = node_objectives(problem, x) + G @ (y - x)
        actual = node_objectives(problem, y)
        assert np.all(linear <= actual + 1e-9 * (1 + np.abs(actual)))
