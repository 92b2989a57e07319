# tests/test_linalg_prox.py

import numpy as np
import pytest

from dcda.core.exceptions import ConfigurationError, DomainError
from dcda.core.linalg_prox import (
    dual_norm,
    primal_norm,
    prox_project,
    psi_minimum,
    psi_value,
    step_size,
    step_sizes,
)
from dcda.models.domain import FeasibleSet, NormKind, ProxFunction, StepSchedule


class TestNorms:
    def test_l2_dual(self):
        assert dual_norm([3.0, 4.0], NormKind.L2) == pytest.approx(5.0)

    def test_l1_dual_is_max_abs(self):
        assert dual_norm([1.0, -7.0, 2.0], NormKind.L1) == pytest.approx(7.0)
        assert primal_norm([1.0, -7.0, 2.0], NormKind.L1) == pytest.approx(10.0)

    def test_non_finite_rejected(self):
        with pytest.raises(DomainError):
            dual_norm([np.nan, 1.0], NormKind.L2)


class TestProx:
    def test_unconstrained_is_scaled_negative(self):
        z = np.array([1.0, -2.0])
        np.testing.assert_allclose(prox_project(z, 0.5, ProxFunction.SQUARED, FeasibleSet.unconstrained()), [-0.5, 1.0])

    def test_ball_rescales_onto_sphere(self):
        x = prox_project(np.array([30.0, 40.0]), 1.0, ProxFunction.SQUARED, FeasibleSet.ball(10.0))
        assert np.linalg.norm(x) == pytest.approx(10.0)
        np.testing.assert_allclose(x, [-6.0, -8.0])

    def test_ball_interior_untouched(self):
        x = prox_project(np.array([0.1, 0.2]), 1.0, ProxFunction.SQUARED, FeasibleSet.ball(10.0))
        np.testing.assert_allclose(x, [-0.1, -0.2])

    def test_entropic_zero_gives_uniform(self):
        x = prox_project(np.zeros(4), 3.0, ProxFunction.ENTROPIC, FeasibleSet.simplex())
        np.testing.assert_allclose(x, np.full(4, 0.25))

    def test_entropic_large_dual_stays_on_simplex(self):
        z = np.array([-1e6, 0.0, 1e6])
        x = prox_project(z, 1.0, ProxFunction.ENTROPIC, FeasibleSet.simplex())
        assert np.all(np.isfinite(x))
        assert x.sum() == pytest.approx(1.0, abs=1e-12)
        assert x[0] == pytest.approx(1.0)

    def test_rowwise_on_stacks(self, rng):
        Z = rng.normal(size=(5, 7))
        X = prox_project(Z, 0.7, ProxFunction.ENTROPIC, FeasibleSet.simplex())
        np.testing.assert_allclose(X.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(X >= 0)

    def test_projection_is_lipschitz_in_alpha_scaled_dual(self, rng):
        # ||prox(z) - prox(z')||_1 <= alpha ||z - z'||_inf for the entropic prox
        for _ in range(1000):
            z, w = rng.normal(size=(2, 6)) * 3
            alpha = rng.uniform(0.01, 2.0)
            x = prox_project(z, alpha, ProxFunction.ENTROPIC, FeasibleSet.simplex())
            y = prox_project(w, alpha, ProxFunction.ENTROPIC, FeasibleSet.simplex())
            assert np.abs(x - y).sum() <= alpha * np.abs(z - w).max() + 1e-12

    def test_entropic_prox_ignores_constant_shift(self, rng):
        for _ in range(100):
            z = rng.normal(size=6) * 5
            shift = rng.uniform(-50, 50)
            alpha = rng.uniform(0.01, 2.0)
            np.testing.assert_allclose(
                prox_project(z + shift, alpha, ProxFunction.ENTROPIC, FeasibleSet.simplex()),
                prox_project(z, alpha, ProxFunction.ENTROPIC, FeasibleSet.simplex()),
                atol=1e-12,
            )

    @pytest.mark.parametrize("feasible", [FeasibleSet.unconstrained(), FeasibleSet.ball(1.0)])
    def test_squared_prox_is_alpha_lipschitz(self, feasible, rng):
        for _ in range(1000):
            z, w = rng.normal(size=(2, 6)) * 3
            alpha = rng.uniform(0.01, 2.0)
            x = prox_project(z, alpha, ProxFunction.SQUARED, feasible)
            y = prox_project(w, alpha, ProxFunction.SQUARED, feasible)
            assert np.linalg.norm(x - y) <= alpha * np.linalg.norm(z - w) + 1e-12

    def test_unsupported_pair(self):
        with pytest.raises(ConfigurationError):
            prox_project(np.zeros(2), 1.0, ProxFunction.ENTROPIC, FeasibleSet.unconstrained())

    def test_alpha_must_be_positive(self):
        with pytest.raises(DomainError):
            prox_project(np.zeros(2), 0.0, ProxFunction.SQUARED, FeasibleSet.unconstrained())


class TestPsi:
    def test_entropic_minimum_at_uniform(self):
        d = 5
        assert float(psi_value(np.full(d, 1 / d), ProxFunction.ENTROPIC)) == pytest.approx(
            psi_minimum(ProxFunction.ENTROPIC, FeasibleSet.simplex(), d)
        )

    def test_zero_log_zero(self):
        assert float(psi_value(np.array([1.0, 0.0]), ProxFunction.ENTROPIC)) == pytest.approx(-1.0)

    def test_squared_is_strongly_convex_in_l2(self, rng):
        for _ in range(1000):
            x, y = rng.normal(scale=3.0, size=(2, 6))
            excess = psi_value(y, ProxFunction.SQUARED) - psi_value(x, ProxFunction.SQUARED) - x @ (y - x)
            assert excess >= 0.5 * np.sum((y - x) ** 2) - 1e-9

    def test_entropic_is_strongly_convex_in_l1_on_the_simplex(self, rng):
        for _ in range(1000):
            x, y = rng.dirichlet(np.ones(6), size=2)
            excess = psi_value(y, ProxFunction.ENTROPIC) - psi_value(x, ProxFunction.ENTROPIC) - np.log(x) @ (y - x)
            assert excess >= 0.5 * np.abs(y - x).sum() ** 2 - 1e-9


class TestSteps:
    def test_inverse_sqrt(self):
        sched = StepSchedule(C=2.0)
        assert step_size(0, sched) == 2.0
        assert step_size(4, sched) == pytest.approx(1.0)
        np.testing.assert_allclose(step_sizes([0, 1, 4, 9], sched), [2.0, 2.0, 1.0, 2.0 / 3.0])

    def test_non_positive_constant_rejected(self):
        with pytest.raises(ConfigurationError):
            StepSchedule(C=0.0)
