"""Parameters, state points and cost weights of the HIV/PReP compartment model.

These are plain immutable value objects, not database models: every run is
file based. Arrays of states use the compartment order below on their last
axis.
"""
from dataclasses import dataclass, fields

import numpy as np
from django.core.exceptions import ValidationError

# Compartment order on the last axis of every state array
COMPARTMENTS = ('S', 'I', 'C', 'A', 'E')
S, I, C, A, E = range(5)

# Default epidemiological rates (per year)
BASELINE_RATES = {
    'beta_tilde': 0.752,
    'sigma_tilde': 0.2,
    'n_ref': 10200.0,
    'mu': 1 / 69.54,
    'eta_a': 1.35,
    'eta_c': 0.04,
    'phi': 1.0,
    'rho': 0.1,
    'alpha': 0.33,
    'omega': 0.09,
    'd': 1.0,
    'psi': 0.0,
    'theta': 0.001,
}


@dataclass(frozen=True)
class ModelParams:
    lambda_recruit: float
    beta: float
    eta_c: float
    eta_a: float
    mu: float
    psi: float
    theta: float
    phi: float
    rho: float
    omega: float
    alpha: float
    d: float
    sigma: float
    n_ref: float

    def __post_init__(self):
        self.clean()

    def clean(self):
        errors = {}
        for field in fields(self):
            value = getattr(self, field.name)
            if not np.isfinite(value):
                errors[field.name] = 'Must be a finite number.'
            elif value < 0:
                errors[field.name] = 'Rates must be non-negative.'
        if 'n_ref' not in errors and self.n_ref <= 0:
            errors['n_ref'] = 'Reference population must be positive.'
        if errors:
            raise ValidationError(errors)

    @classmethod
    def from_unscaled(cls, beta_tilde, sigma_tilde, n_ref, lambda_recruit=None, **rates):
        """Build parameters from per-population rates.

        beta and sigma are divided by n_ref once here so the drift stays
        literal. Recruitment defaults to n_ref * mu, which makes n_ref the
        demographic equilibrium.
        """
        if n_ref <= 0:
            raise ValidationError({'n_ref': 'Reference population must be positive.'})
        if lambda_recruit is None:
            lambda_recruit = n_ref * rates['mu']
        return cls(
            lambda_recruit=lambda_recruit,
            beta=beta_tilde / n_ref,
            sigma=sigma_tilde / n_ref,
            n_ref=n_ref,
            **rates,
        )

    @classmethod
    def baseline(cls, **overrides):
        values = {**BASELINE_RATES, **overrides}
        return cls.from_unscaled(**values)

    @property
    def xi1(self):
        return self.alpha + self.mu + self.d

    @property
    def xi2(self):
        return self.omega + self.mu

    @property
    def xi3(self):
        return self.rho + self.phi + self.mu

    @property
    def xi4(self):
        return self.mu + self.theta

    @property
    def equilibrium_population(self):
        return self.lambda_recruit / self.mu if self.mu > 0 else np.inf


@dataclass(frozen=True)
class StateVector:
    s: float
    i: float
    c: float
    a: float
    e: float

    def __post_init__(self):
        self.clean()

    def clean(self):
        errors = {
            field.name: 'Compartment sizes must be finite and non-negative.'
            for field in fields(self)
            if not (np.isfinite(getattr(self, field.name)) and getattr(self, field.name) >= 0)
        }
        if errors:
            raise ValidationError(errors)

    def __array__(self, dtype=None, copy=None):
        return np.array([self.s, self.i, self.c, self.a, self.e], dtype=dtype or float)

    @classmethod
    def from_array(cls, values):
        return cls(*(float(v) for v in values))

    def total(self):
        return self.s + self.i + self.c + self.a + self.e


@dataclass(frozen=True)
class CostWeights:
    w1: float
    w2: float

    def __post_init__(self):
        self.clean()

    def clean(self):
        errors = {}
        if not (np.isfinite(self.w1) and self.w1 >= 0):
            errors['w1'] = 'Infection weight must be non-negative.'
        if not (np.isfinite(self.w2) and self.w2 > 0):
            errors['w2'] = 'Control weight must be positive.'
        if errors:
            raise ValidationError(errors)

    @classmethod
    def baseline(cls, n_ref=BASELINE_RATES['n_ref'], w1=20.0):
        return cls(w1=w1, w2=0.3 * n_ref)


def derived_rates(params):
    """Return the exit rates (xi1, xi2, xi3, xi4) of the A, C, I and E classes."""
    return params.xi1, params.xi2, params.xi3, params.xi4


def force_of_infection(x, params):
    """Infectious pressure I + eta_C*C + eta_A*A for one state or an array of states.

    beta and sigma are applied by the callers.
    """
    x = np.asarray(x, dtype=float)
    return x[..., I] + params.eta_c * x[..., C] + params.eta_a * x[..., A]
