"""Hamiltonian of the PReP control problem and the backward adjoint solver.

The adjoint drift is the analytic state gradient of the Hamiltonian as
implemented here, so the two can be cross-checked with finite differences.
Along each forward path the backward pass runs with q = 0 in the drift:
a pathwise explicit Euler scheme in reversed time from p(T) = 0.
"""
import logging
from dataclasses import dataclass

import numpy as np

from dynamics.exceptions import NumericalBlowUpError
from dynamics.forward import diffusion, drift
from dynamics.models import A, C, E, I, S, force_of_infection

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AdjointState:
    p: np.ndarray
    q: np.ndarray

    @classmethod
    def zeros(cls, shape=()):
        return cls(p=np.zeros(shape + (5,)), q=np.zeros(shape + (5,)))


@dataclass(frozen=True, eq=False)
class AdjointTrajectory:
    """Costates on the forward grid, shape (n_steps + 1, 5) each."""

    p: np.ndarray
    q: np.ndarray

    def state(self, k):
        return AdjointState(p=self.p[k], q=self.q[k])

    @property
    def terminal(self):
        return self.state(-1)


def hamiltonian(x, u, adj, weights, lambda_mult, cost_rate, params):
    """w1*I + w2*u^2 + lambda*S*u*c + b(x, u).p + g(x).q, per state."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    running = weights.w1 * x[..., I] + weights.w2 * u ** 2
    budget = lambda_mult * x[..., S] * u * cost_rate
    transport = np.sum(drift(x, u, params) * adj.p, axis=-1)
    noise = np.sum(diffusion(x, params) * adj.q, axis=-1)
    return running + budget + transport + noise


def grad_hamiltonian_x(x, u, adj, weights, lambda_mult, cost_rate, params):
    """Analytic gradient of the Hamiltonian with respect to (S, I, C, A, E)."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    p = np.asarray(adj.p, dtype=float)
    q = np.asarray(adj.q, dtype=float)
    s = x[..., S]
    force = force_of_infection(x, params)
    # Value of moving one individual from S to I, through the drift and the noise
    infection_gain = params.beta * (p[..., I] - p[..., S]) + params.sigma * (q[..., I] - q[..., S])
    uptake = params.psi + u

    d_s = (
        lambda_mult * u * cost_rate
        + force * infection_gain
        - (params.mu + uptake) * p[..., S]
        + uptake * p[..., E]
    )
    d_i = (
        weights.w1
        + s * infection_gain
        - params.xi3 * p[..., I]
        + params.phi * p[..., C]
        + params.rho * p[..., A]
    )
    d_c = params.eta_c * s * infection_gain + params.omega * p[..., I] - params.xi2 * p[..., C]
    d_a = params.eta_a * s * infection_gain + params.alpha * p[..., I] - params.xi1 * p[..., A]
    d_e = params.theta * p[..., S] - params.xi4 * p[..., E]
    return np.stack(np.broadcast_arrays(d_s, d_i, d_c, d_a, d_e), axis=-1)


def solve_backward_batch(states, controls, grid, weights, lambda_mult, cost_rate, params):
    """Backward Euler sweep for a batch of forward paths.

    states has shape (n_paths, n_steps + 1, 5) and controls (n_paths, n_steps + 1);
    lambda_mult is a scalar or one value per path, cost_rate a grid sample array
    (optionally per path). Returns p and q with the shape of states.
    """
    states = np.asarray(states, dtype=float)
    controls = np.asarray(controls, dtype=float)
    n_paths = states.shape[0]
    lambda_mult = np.broadcast_to(np.asarray(lambda_mult, dtype=float), (n_paths,))
    cost_rate = np.broadcast_to(np.asarray(cost_rate, dtype=float), controls.shape)
    dt = grid.dt

    p = np.zeros_like(states)
    q = np.zeros_like(states)
    no_noise = np.zeros((n_paths, 5))
    for k in range(grid.n_steps - 1, -1, -1):
        adj = AdjointState(p=p[:, k + 1], q=no_noise)
        gradient = grad_hamiltonian_x(
            states[:, k + 1], controls[:, k + 1], adj, weights, lambda_mult, cost_rate[:, k + 1], params
        )
        p[:, k] = p[:, k + 1] + gradient * dt
        if not np.all(np.isfinite(p[:, k])):
            raise NumericalBlowUpError(k, where='costate')
    return p, q


def solve_backward(xtraj, u, w, grid, weights, lambda_mult, cost_rate, params):
    """Adjoint trajectory along one forward path.

    The Brownian path w is part of the signature for q estimators that need
    it; with q = 0 in the drift it is not read.
    """
    p, q = solve_backward_batch(
        xtraj.states[np.newaxis], u.values[np.newaxis], grid, weights, lambda_mult, cost_rate, params
    )
    return AdjointTrajectory(p=p[0], q=q[0])
