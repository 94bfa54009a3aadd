"""Drift, diffusion and Euler-Maruyama integration of the controlled PReP SDE.

State arrays carry the compartments (S, I, C, A, E) on the last axis, so the
same functions serve a single state of shape (5,) and a batch of paths of
shape (n_paths, 5).
"""
import logging
from dataclasses import dataclass

import numpy as np
from django.core.exceptions import ValidationError

from .exceptions import NumericalBlowUpError
from .models import A, C, E, I, S, StateVector, force_of_infection

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TimeGrid:
    t_end: float
    n_steps: int

    def __post_init__(self):
        self.clean()

    def clean(self):
        errors = {}
        if not (isinstance(self.n_steps, (int, np.integer)) and self.n_steps >= 1):
            errors['n_steps'] = 'At least one time step is required.'
        if not (np.isfinite(self.t_end) and self.t_end > 0):
            errors['t_end'] = 'Terminal time must be positive.'
        if errors:
            raise ValidationError(errors)

    @classmethod
    def from_step(cls, t_end, dt):
        return cls(t_end=t_end, n_steps=int(round(t_end / dt)))

    @property
    def dt(self):
        return self.t_end / self.n_steps

    def times(self):
        return np.arange(self.n_steps + 1) * self.dt


@dataclass(frozen=True, eq=False)
class BrownianPath:
    """Gaussian increments of one Brownian path, reproducible from (seed, index)."""

    increments: np.ndarray
    seed: int
    index: int = 0

    @classmethod
    def generate(cls, seed, grid, index=0):
        sequence = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
        rng = np.random.default_rng(sequence)
        increments = rng.standard_normal(grid.n_steps) * np.sqrt(grid.dt)
        increments.setflags(write=False)
        return cls(increments=increments, seed=seed, index=index)

    @property
    def n_steps(self):
        return self.increments.shape[0]


@dataclass(frozen=True, eq=False)
class ControlPath:
    """Control levels u(t_k), held constant on [t_k, t_k+1)."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'values', np.asarray(self.values, dtype=float))
        self.clean()

    def clean(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise ValidationError({'values': 'Control path must be one-dimensional.'})
        if not np.all(np.isfinite(values)) or values.min() < 0 or values.max() > 1:
            raise ValidationError({'values': 'Control levels must lie in [0, 1].'})

    @classmethod
    def constant(cls, level, grid):
        return cls(values=np.full(grid.n_steps + 1, float(level)))


@dataclass(frozen=True, eq=False)
class StateTrajectory:
    states: np.ndarray
    clamp_events: int = 0

    def state(self, k):
        return StateVector.from_array(self.states[k])

    def totals(self):
        return self.states.sum(axis=-1)

    @property
    def initial(self):
        return self.states[0]


@dataclass(frozen=True)
class InvariantReport:
    negative_outputs: int
    clamp_events: int
    clamp_fraction: float
    max_total: float
    population_bound: float
    bound_ok: bool

    def as_dict(self):
        return {
            'negative_outputs': self.negative_outputs,
            'clamp_events': self.clamp_events,
            'clamp_fraction': self.clamp_fraction,
            'max_total': self.max_total,
            'population_bound': self.population_bound,
            'bound_ok': self.bound_ok,
        }


def drift(x, u, params):
    """Drift of the controlled system, individuals per year."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    s, i, c, a, e = x[..., S], x[..., I], x[..., C], x[..., A], x[..., E]
    infection = params.beta * force_of_infection(x, params) * s
    uptake = (params.psi + u) * s
    ds = params.lambda_recruit - infection - params.mu * s - uptake + params.theta * e
    di = infection - params.xi3 * i + params.alpha * a + params.omega * c
    dc = params.phi * i - params.xi2 * c
    da = params.rho * i - params.xi1 * a
    de = uptake - params.xi4 * e
    return np.stack(np.broadcast_arrays(ds, di, dc, da, de), axis=-1)


def diffusion(x, params):
    """Noise loading of the force of infection; only S and I are driven, with opposite signs."""
    x = np.asarray(x, dtype=float)
    loading = params.sigma * force_of_infection(x, params) * x[..., S]
    zero = np.zeros_like(loading)
    return np.stack([-loading, loading, zero, zero, zero], axis=-1)


def euler_update(x, f, g, dw, dt):
    """x + f*dt + g*dW, the update shared by the clamped stepper and the generic integrator."""
    return x + f * dt + g * dw


def step(x, u, dw, dt, params, index=0):
    """One Euler-Maruyama step clamped at zero.

    Returns the new state(s) and the number of coordinates clipped per row.
    """
    x = np.asarray(x, dtype=float)
    dw = np.asarray(dw, dtype=float)
    raw = euler_update(x, drift(x, u, params), diffusion(x, params), dw[..., np.newaxis], dt)
    if not np.all(np.isfinite(raw)):
        raise NumericalBlowUpError(index)
    negative = raw < 0
    clipped = negative.sum(axis=-1)
    return np.where(negative, 0.0, raw), clipped


def simulate_batch(controls, increments, x0, grid, params):
    """Integrate every path of a batch together.

    controls has shape (n_paths, n_steps + 1), increments (n_paths, n_steps).
    Returns the states, shape (n_paths, n_steps + 1, 5), and the clamp count
    of every path. Row p only depends on controls[p] and increments[p].
    """
    controls = np.atleast_2d(np.asarray(controls, dtype=float))
    increments = np.atleast_2d(np.asarray(increments, dtype=float))
    n_paths = increments.shape[0]
    if increments.shape[1] != grid.n_steps or controls.shape != (n_paths, grid.n_steps + 1):
        raise ValueError(
            f"Arrays do not match the grid: controls {controls.shape}, "
            f"increments {increments.shape}, n_steps {grid.n_steps}"
        )
    dt = grid.dt
    states = np.empty((n_paths, grid.n_steps + 1, 5))
    states[:, 0] = np.asarray(x0, dtype=float)
    clamp_events = np.zeros(n_paths, dtype=int)
    for k in range(grid.n_steps):
        states[:, k + 1], clipped = step(states[:, k], controls[:, k], increments[:, k], dt, params, k)
        clamp_events += clipped
    if clamp_events.any():
        logger.debug("Clamped %d coordinates at zero across %d paths", clamp_events.sum(), n_paths)
    return states, clamp_events


def simulate(u, w, x0, grid, params):
    states, clamp_events = simulate_batch(u.values[np.newaxis], w.increments[np.newaxis], x0, grid, params)
    return StateTrajectory(states=states[0], clamp_events=int(clamp_events[0]))


def euler_maruyama(drift_fn, diffusion_fn, x0, increments, dt):
    """Generic Euler-Maruyama integration, without clamping.

    increments has the time axis last; the returned paths have one more
    point on that axis.
    """
    increments = np.asarray(increments, dtype=float)
    paths = np.empty(increments.shape[:-1] + (increments.shape[-1] + 1,))
    paths[..., 0] = x0
    for k in range(increments.shape[-1]):
        x = paths[..., k]
        paths[..., k + 1] = euler_update(x, drift_fn(x), diffusion_fn(x), increments[..., k], dt)
    return paths


def check_invariants(states, clamp_events, x0, params, tolerance=0.05):
    """Check positivity and the population bound max(N(0), Lambda/mu) on simulated states."""
    states = np.asarray(states, dtype=float)
    clamp_events = int(np.sum(clamp_events))
    n_steps = states.shape[-2] - 1
    n_paths = int(np.prod(states.shape[:-2])) if states.ndim > 2 else 1
    coordinate_steps = n_paths * n_steps * states.shape[-1]
    bound = max(float(np.sum(x0)), params.equilibrium_population) * (1 + tolerance)
    max_total = float(states.sum(axis=-1).max())
    return InvariantReport(
        negative_outputs=int((states < 0).sum()),
        clamp_events=clamp_events,
        clamp_fraction=clamp_events / coordinate_steps,
        max_total=max_total,
        population_bound=bound,
        bound_ok=max_total <= bound,
    )
