import numpy as np
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

from dynamics.models import (
    BASELINE_RATES, CostWeights, ModelParams, StateVector, derived_rates, force_of_infection,
)
from tests.helpers import baseline_params

ZERO_RATES = dict(
    lambda_recruit=0.0, beta=0.0, eta_c=0.0, eta_a=0.0, mu=0.0, psi=0.0, theta=0.0,
    phi=0.0, rho=0.0, omega=0.0, alpha=0.0, d=0.0, sigma=0.0, n_ref=1.0,
)


class ModelParamsTests(SimpleTestCase):
    """Parameter construction, scaling and validation."""

    def test_baseline_scales_beta_and_sigma(self):
        """beta and sigma are divided by the reference population once."""
        params = baseline_params()
        self.assertEqual(params.beta, 0.752 / 10200.0)
        self.assertEqual(params.sigma, 0.2 / 10200.0)
        self.assertEqual(params.n_ref, 10200.0)

    def test_recruitment_defaults_to_equilibrium(self):
        """Lambda = n_ref * mu unless given, so Lambda/mu = n_ref."""
        params = baseline_params()
        self.assertAlmostEqual(params.lambda_recruit, 10200.0 / 69.54, places=9)
        self.assertAlmostEqual(params.equilibrium_population, 10200.0, places=6)

    def test_explicit_recruitment_is_kept(self):
        params = baseline_params(lambda_recruit=0.0)
        self.assertEqual(params.lambda_recruit, 0.0)

    def test_negative_rate_rejected(self):
        """A negative rate is reported under its field name."""
        with self.assertRaises(ValidationError) as ctx:
            ModelParams(**{**ZERO_RATES, 'theta': -0.1})
        self.assertIn('theta', ctx.exception.message_dict)

    def test_reference_population_must_be_positive(self):
        with self.assertRaises(ValidationError) as ctx:
            ModelParams(**{**ZERO_RATES, 'n_ref': 0.0})
        self.assertIn('n_ref', ctx.exception.message_dict)

    def test_params_are_immutable(self):
        params = baseline_params()
        with self.assertRaises(AttributeError):
            params.mu = 1.0


class DerivedRatesTests(SimpleTestCase):

    def test_baseline_exit_rates(self):
        """xi1 = alpha+mu+d, xi2 = omega+mu, xi3 = rho+phi+mu, xi4 = mu+theta."""
        params = baseline_params()
        xi1, xi2, xi3, xi4 = derived_rates(params)
        mu = BASELINE_RATES['mu']
        self.assertAlmostEqual(xi1, 1.3443802128, places=9)
        self.assertAlmostEqual(xi3, 1.1143802128, places=9)
        self.assertEqual(xi1, 0.33 + mu + 1.0)
        self.assertEqual(xi2, 0.09 + mu)
        self.assertEqual(xi3, 0.1 + 1.0 + mu)
        self.assertEqual(xi4, mu + 0.001)

    def test_all_zero_rates(self):
        self.assertEqual(derived_rates(ModelParams(**ZERO_RATES)), (0.0, 0.0, 0.0, 0.0))

    def test_repeated_calls_are_identical(self):
        params = baseline_params()
        self.assertEqual(derived_rates(params), derived_rates(baseline_params()))


class ForceOfInfectionTests(SimpleTestCase):

    def setUp(self):
        self.params = baseline_params()

    def test_no_infectious_individuals(self):
        x = StateVector(s=5000.0, i=0.0, c=0.0, a=0.0, e=300.0)
        self.assertEqual(force_of_infection(x, self.params), 0.0)

    def test_initial_condition(self):
        x = StateVector(s=10000.0, i=200.0, c=0.0, a=0.0, e=0.0)
        self.assertEqual(force_of_infection(x, self.params), 200.0)

    def test_weighted_classes(self):
        """10 + 0.04*100 + 1.35*10 = 27.5."""
        x = StateVector(s=0.0, i=10.0, c=100.0, a=10.0, e=0.0)
        self.assertAlmostEqual(force_of_infection(x, self.params), 27.5, places=12)

    def test_linear_in_infectious_classes(self):
        rng = np.random.default_rng(7)
        x = rng.uniform(0, 1000, size=(50, 5))
        y = rng.uniform(0, 1000, size=(50, 5))
        np.testing.assert_allclose(
            force_of_infection(x + y, self.params),
            force_of_infection(x, self.params) + force_of_infection(y, self.params),
            rtol=1e-13,
        )


class StateAndWeightsTests(SimpleTestCase):

    def test_total(self):
        self.assertEqual(StateVector(1.0, 2.0, 3.0, 4.0, 5.0).total(), 15.0)

    def test_array_round_trip(self):
        x = StateVector(10000.0, 200.0, 0.0, 0.0, 0.0)
        np.testing.assert_array_equal(np.asarray(x), [10000.0, 200.0, 0.0, 0.0, 0.0])
        self.assertEqual(StateVector.from_array(np.asarray(x)), x)

    def test_negative_compartment_rejected(self):
        with self.assertRaises(ValidationError) as ctx:
            StateVector(1.0, -2.0, 0.0, 0.0, 0.0)
        self.assertIn('i', ctx.exception.message_dict)

    def test_control_weight_must_be_positive(self):
        with self.assertRaises(ValidationError) as ctx:
            CostWeights(w1=20.0, w2=0.0)
        self.assertIn('w2', ctx.exception.message_dict)

    def test_baseline_weights(self):
        weights = CostWeights.baseline(n_ref=10200.0)
        self.assertEqual(weights.w1, 20.0)
        self.assertAlmostEqual(weights.w2, 3060.0, places=9)
