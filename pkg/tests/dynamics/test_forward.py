from unittest.mock import patch

import numpy as np
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

from dynamics.exceptions import NumericalBlowUpError
from dynamics.forward import (
    BrownianPath, ControlPath, TimeGrid, check_invariants, diffusion, drift,
    euler_maruyama, euler_update, simulate, simulate_batch, step,
)
from dynamics.models import I, StateVector, force_of_infection
from tests.helpers import INITIAL_STATE, quiet_path, baseline_params


class DriftTests(SimpleTestCase):
    """Drift of the controlled system."""

    def setUp(self):
        self.params = baseline_params()

    def test_empty_population_only_recruits(self):
        np.testing.assert_array_equal(
            drift(np.zeros(5), 0.0, self.params), [self.params.lambda_recruit, 0.0, 0.0, 0.0, 0.0]
        )

    def test_initial_condition_without_prep(self):
        """baseline rates, psi = 0, u = 0 at (10000, 200, 0, 0, 0)."""
        p = self.params
        infection = p.beta * 200.0 * 10000.0
        expected = [
            p.lambda_recruit - infection - p.mu * 10000.0,
            infection - p.xi3 * 200.0,
            p.phi * 200.0,
            p.rho * 200.0,
            0.0,
        ]
        result = drift(np.asarray(INITIAL_STATE), 0.0, p)
        np.testing.assert_allclose(result, expected, rtol=1e-12)
        np.testing.assert_allclose(result, [-144.575, -75.425, 200.0, 20.0, 0.0], atol=1e-3)

    def test_total_population_balance(self):
        """Summed drift is Lambda - mu*N - d*A for any state and control."""
        rng = np.random.default_rng(11)
        x = rng.uniform(0, 10000, size=(1000, 5))
        u = rng.uniform(0, 1, size=1000)
        params = baseline_params(psi=0.3)
        total = drift(x, u, params).sum(axis=-1)
        expected = params.lambda_recruit - params.mu * x.sum(axis=-1) - params.d * x[:, 3]
        np.testing.assert_allclose(total, expected, rtol=1e-9, atol=1e-6)

    def test_control_moves_susceptibles_to_prep(self):
        x = np.asarray(INITIAL_STATE)
        difference = drift(x, 0.5, self.params) - drift(x, 0.0, self.params)
        np.testing.assert_allclose(difference, [-5000.0, 0.0, 0.0, 0.0, 5000.0])

    def test_batch_matches_single_states(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(0, 5000, size=(4, 5))
        u = np.array([0.0, 0.2, 0.7, 1.0])
        batch = drift(x, u, self.params)
        for row in range(4):
            np.testing.assert_array_equal(batch[row], drift(x[row], u[row], self.params))


class DiffusionTests(SimpleTestCase):

    def setUp(self):
        self.params = baseline_params()

    def test_initial_condition_loading(self):
        """sigma*F*S = 0.2/10200 * 200 * 10000."""
        g = diffusion(np.asarray(INITIAL_STATE), self.params)
        self.assertAlmostEqual(g[1], 400000.0 / 10200.0, places=9)
        self.assertAlmostEqual(g[1], 39.216, places=3)
        self.assertEqual(g[0], -g[1])
        np.testing.assert_array_equal(g[2:], 0.0)

    def test_noise_leaves_total_unchanged(self):
        rng = np.random.default_rng(5)
        g = diffusion(rng.uniform(0, 10000, size=(200, 5)), self.params)
        np.testing.assert_array_equal(g[:, 0] + g[:, 1], 0.0)

    def test_no_noise_without_infection(self):
        x = StateVector(s=10000.0, i=0.0, c=0.0, a=0.0, e=50.0)
        np.testing.assert_array_equal(diffusion(np.asarray(x), self.params), np.zeros(5))


class StepTests(SimpleTestCase):

    def setUp(self):
        self.params = baseline_params()

    def test_recruitment_step_from_empty(self):
        x, clipped = step(np.zeros(5), 0.0, 0.0, 0.01, self.params)
        np.testing.assert_allclose(x, [self.params.lambda_recruit * 0.01, 0.0, 0.0, 0.0, 0.0])
        self.assertEqual(clipped, 0)

    def test_matches_hand_written_update(self):
        x0 = np.asarray(INITIAL_STATE)
        dw = 0.0317
        dt = 0.001
        expected = x0 + drift(x0, 0.4, self.params) * dt
        expected[0] -= self.params.sigma * force_of_infection(x0, self.params) * x0[0] * dw
        expected[1] += self.params.sigma * force_of_infection(x0, self.params) * x0[0] * dw
        x, _ = step(x0, 0.4, dw, dt, self.params)
        np.testing.assert_allclose(x, expected, rtol=1e-13)

    def test_negative_coordinates_are_clamped(self):
        """A large shock empties S instead of making it negative."""
        x0 = np.array([100.0, 500.0, 0.0, 0.0, 0.0])
        x, clipped = step(x0, 0.0, 500.0, 0.01, self.params)
        self.assertEqual(x[0], 0.0)
        self.assertEqual(clipped, 1)
        self.assertTrue(np.all(x >= 0))

    def test_non_finite_state_raises(self):
        x0 = np.array([np.inf, 200.0, 0.0, 0.0, 0.0])
        with self.assertRaises(NumericalBlowUpError) as ctx:
            step(x0, 0.0, 0.0, 0.01, self.params, index=7)
        self.assertEqual(ctx.exception.step, 7)


class SimulateTests(SimpleTestCase):
    """Forward integration on a grid."""

    def test_empty_population_without_recruitment_stays_empty(self):
        params = baseline_params(lambda_recruit=0.0)
        grid = TimeGrid(t_end=1.0, n_steps=50)
        w = BrownianPath.generate(1, grid)
        result = simulate(ControlPath.constant(0.3, grid), w, np.zeros(5), grid, params)
        np.testing.assert_array_equal(result.states, 0.0)

    def test_deterministic_recruitment_only(self):
        """With sigma = 0 and only susceptibles, S follows S + (Lambda - mu*S)*dt."""
        params = baseline_params(sigma_tilde=0.0)
        grid = TimeGrid(t_end=2.0, n_steps=20)
        result = simulate(
            ControlPath.constant(0.0, grid), quiet_path(grid),
            StateVector(500.0, 0.0, 0.0, 0.0, 0.0), grid, params,
        )
        s = 500.0
        for k in range(1, grid.n_steps + 1):
            s = s + (params.lambda_recruit - params.mu * s) * grid.dt
            self.assertAlmostEqual(result.states[k, 0], s, places=9)
        np.testing.assert_array_equal(result.states[:, 1:], 0.0)

    def test_same_seed_same_trajectory(self):
        params = baseline_params()
        grid = TimeGrid(t_end=5.0, n_steps=500)
        u = ControlPath.constant(0.2, grid)
        first = simulate(u, BrownianPath.generate(42, grid, 3), INITIAL_STATE, grid, params)
        second = simulate(u, BrownianPath.generate(42, grid, 3), INITIAL_STATE, grid, params)
        np.testing.assert_array_equal(first.states, second.states)

    def test_batch_rows_do_not_depend_on_each_other(self):
        params = baseline_params()
        grid = TimeGrid(t_end=5.0, n_steps=200)
        paths = [BrownianPath.generate(9, grid, k) for k in range(3)]
        controls = np.full((3, grid.n_steps + 1), 0.1)
        batch, _ = simulate_batch(controls, np.stack([w.increments for w in paths]), INITIAL_STATE, grid, params)
        alone = simulate(ControlPath.constant(0.1, grid), paths[2], INITIAL_STATE, grid, params)
        np.testing.assert_array_equal(batch[2], alone.states)

    def test_mismatched_arrays_rejected(self):
        grid = TimeGrid(t_end=1.0, n_steps=10)
        with self.assertRaises(ValueError):
            simulate_batch(np.zeros((2, 10)), np.zeros((2, 10)), INITIAL_STATE, grid, baseline_params())


class LongRunTests(SimpleTestCase):
    """Qualitative behaviour over 25 years with baseline rates."""

    def run_ensemble(self, psi, n_paths=10):
        params = baseline_params(psi=psi)
        grid = TimeGrid(t_end=25.0, n_steps=25000)
        increments = np.stack([BrownianPath.generate(42, grid, k).increments for k in range(n_paths)])
        controls = np.zeros((n_paths, grid.n_steps + 1))
        states, clamps = simulate_batch(controls, increments, INITIAL_STATE, grid, params)
        return states, clamps, params

    def test_positive_and_bounded(self):
        for psi in (0.0, 0.1, 0.5):
            with self.subTest(psi=psi):
                states, clamps, params = self.run_ensemble(psi)
                report = check_invariants(states, clamps, INITIAL_STATE, params)
                self.assertEqual(report.negative_outputs, 0)
                self.assertTrue(report.bound_ok)
                self.assertLessEqual(report.clamp_fraction, 1e-3)

    def test_infection_spreads_without_prep(self):
        states, _, _ = self.run_ensemble(0.0)
        self.assertGreater(states[:, -1, I].mean(), 200.0)

    def test_prep_uptake_suppresses_infection(self):
        states, _, _ = self.run_ensemble(0.5)
        self.assertLess(states[:, -1, I].mean(), 0.1 * 200.0)


class GridAndPathTests(SimpleTestCase):

    def test_grid_needs_a_step(self):
        with self.assertRaises(ValidationError) as ctx:
            TimeGrid(t_end=25.0, n_steps=0)
        self.assertIn('n_steps', ctx.exception.message_dict)

    def test_grid_from_step(self):
        grid = TimeGrid.from_step(25.0, 0.001)
        self.assertEqual(grid.n_steps, 25000)
        self.assertAlmostEqual(grid.times()[-1], 25.0, places=12)

    def test_control_outside_unit_interval_rejected(self):
        with self.assertRaises(ValidationError):
            ControlPath(values=np.array([0.0, 1.2]))

    def test_increments_are_read_only(self):
        w = BrownianPath.generate(1, TimeGrid(t_end=1.0, n_steps=10))
        with self.assertRaises(ValueError):
            w.increments[0] = 1.0

    def test_distinct_indices_give_distinct_paths(self):
        grid = TimeGrid(t_end=1.0, n_steps=100)
        first = BrownianPath.generate(42, grid, 0)
        second = BrownianPath.generate(42, grid, 1)
        self.assertFalse(np.array_equal(first.increments, second.increments))


class EulerMaruyamaTests(SimpleTestCase):

    def test_linear_drift_without_noise(self):
        """x_{k+1} = x_k * (1 + a*dt) exactly."""
        increments = np.zeros((1, 4))
        paths = euler_maruyama(lambda x: 0.5 * x, lambda x: 0.0 * x, 2.0, increments, 0.25)
        expected = 2.0 * 1.125 ** np.arange(5)
        np.testing.assert_allclose(paths[0], expected, rtol=1e-14)

    def test_shares_the_update_with_the_clamped_stepper(self):
        with patch('dynamics.forward.euler_update', wraps=euler_update) as update:
            step(INITIAL_STATE, 0.0, 0.0, 0.001, baseline_params())
            euler_maruyama(lambda x: 0.5 * x, lambda x: 0.0 * x, 2.0, np.zeros((1, 4)), 0.25)
        self.assertEqual(update.call_count, 5)

    def test_update_matches_one_unclamped_step(self):
        params = baseline_params()
        x, dw = np.asarray(INITIAL_STATE, dtype=float), 0.01
        new, clipped = step(x, 0.2, dw, 0.001, params)
        np.testing.assert_array_equal(
            new, euler_update(x, drift(x, 0.2, params), diffusion(x, params), dw, 0.001),
        )
        self.assertEqual(clipped, 0)
