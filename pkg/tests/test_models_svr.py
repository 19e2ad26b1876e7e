#!/usr/bin/env python3
"""Kernel SVR dual solver."""

import unittest

import numpy as np

from fixtures import linear_dataset, numeric_schema
from readiness_core import Dataset
from readiness_models import SVRParams, fit_svr
from readiness_models._svr import rbf_kernel, solve_dual
from readiness_shared import ConvergenceError, DataError


def _sine(n=40, seed=0) -> Dataset:
    rng = np.random.default_rng(seed)
    x = np.sort(rng.uniform(-3.0, 3.0, n))
    return Dataset(numeric_schema(["x"]), {"x": x, "y": np.sin(x)})


class KernelTests(unittest.TestCase):
    def test_rbf_diagonal_and_symmetry(self):
        A = np.random.default_rng(0).normal(size=(5, 3))
        K = rbf_kernel(A, A, 0.5)
        np.testing.assert_allclose(np.diag(K), np.ones(5))
        np.testing.assert_allclose(K, K.T)


class SolverTests(unittest.TestCase):
    def test_dual_constraints_hold(self):
        ds = _sine()
        model = fit_svr(ds, ["x"], {"C": 10.0, "epsilon": 0.05})
        self.assertLessEqual(model.violation, model.params.tol)
        self.assertTrue(np.all(np.abs(model.coef) <= 10.0 + 1e-9))
        self.assertAlmostEqual(float(np.sum(model.coef)), 0.0, places=6)

    def test_fits_within_epsilon_tube_mostly(self):
        ds = _sine(n=60)
        model = fit_svr(ds, ["x"], {"C": 100.0, "epsilon": 0.05, "gamma": 1.0})
        resid = np.abs(model.predict(ds) - ds.response)
        self.assertLess(float(np.mean(resid)), 0.1)

    def test_wide_tube_gives_midrange_constant(self):
        y = np.array([1.0, 2.0, 4.0, 7.0])
        K = np.eye(4)
        sol = solve_dual(K, y, C=1.0, epsilon=10.0, tol=1e-3, max_iter=100)
        self.assertEqual(sol.iterations, 0)
        np.testing.assert_array_equal(sol.coef, np.zeros(4))
        self.assertAlmostEqual(sol.bias, 4.0)

    def test_sine_on_regular_grid(self):
        t = np.linspace(0.0, 2.0 * np.pi, 100)
        ds = Dataset(numeric_schema(["t"]), {"t": t, "y": np.sin(t)})
        model = fit_svr(ds, ["t"], {"C": 10.0, "gamma": 1.0, "epsilon": 0.01})
        rmse = float(np.sqrt(np.mean((model.predict(ds) - ds.response) ** 2)))
        self.assertLess(rmse, 0.05)

    def test_constant_response_has_no_active_coefficients(self):
        ds = Dataset(numeric_schema(["t"]), {"t": np.linspace(0.0, 1.0, 12), "y": np.full(12, 4.2)})
        model = fit_svr(ds, ["t"], {"C": 1.0, "epsilon": 0.1})
        self.assertTrue(np.all(model.coef == 0.0))
        self.assertAlmostEqual(model.bias, 4.2)
        np.testing.assert_allclose(model.predict(ds), np.full(12, 4.2))

    def test_iteration_budget_raises_convergence_error(self):
        ds = _sine()
        with self.assertRaises(ConvergenceError) as ctx:
            fit_svr(ds, ["x"], {"C": 100.0, "epsilon": 0.01, "tol": 1e-6, "max_iter": 1})
        self.assertEqual(ctx.exception.iterations, 1)
        self.assertGreater(ctx.exception.violation, 1e-6)

    def test_default_gamma_is_inverse_width(self):
        model = fit_svr(linear_dataset(n=20), ["a", "b", "c"])
        self.assertAlmostEqual(model.gamma, 1.0 / 3.0)

    def test_invalid_params(self):
        with self.assertRaises(DataError):
            SVRParams(C=0.0)
        with self.assertRaises(DataError):
            SVRParams(epsilon=-1.0)


if __name__ == "__main__":
    unittest.main()
