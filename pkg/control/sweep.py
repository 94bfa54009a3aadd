"""Forward-backward sweep for the PReP control problem.

Each iteration simulates the state forward under the current control,
solves the adjoint backward along the same Brownian path, evaluates the
clamped first-order condition and relaxes the control towards it. Paths are
swept together but converge independently: once a path meets the tolerance
its bundle is frozen. A converged path finishes with one more forward and
backward pass under the clamped candidate control, so bounds such as
u(0) = 1 are met exactly.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from django.conf import settings
from django.core.exceptions import ValidationError

from dynamics.forward import ControlPath, StateTrajectory, simulate_batch
from dynamics.models import E, I, S

from .adjoint import AdjointTrajectory, solve_backward_batch

logger = logging.getLogger(__name__)

OBJECTIVE_CHOICES = [
    ('running', 'Running cost w1*I + w2*u^2'),
    ('terminal', 'Running cost plus terminal cost'),
    ('infinite_horizon', 'Discounted infinite horizon'),
]
IMPLEMENTED_OBJECTIVES = ('running',)


@dataclass(frozen=True)
class SweepConfig:
    lambda1: float = 0.9
    lambda2: float = 0.1
    tol_rel: float = 1e-4
    max_iters: int = 500
    u_init: float = 0.0
    objective: str = 'running'

    def __post_init__(self):
        self.clean()

    def clean(self):
        errors = {}
        for name in ('lambda1', 'lambda2'):
            if not 0 <= getattr(self, name) <= 1:
                errors[name] = 'Relaxation weights must lie in [0, 1].'
        if not errors and abs(self.lambda1 + self.lambda2 - 1) > 1e-12:
            errors['lambda2'] = 'Relaxation weights must sum to one.'
        if not self.tol_rel > 0:
            errors['tol_rel'] = 'Tolerance must be positive.'
        if self.max_iters < 1:
            errors['max_iters'] = 'At least one iteration is required.'
        if not 0 <= self.u_init <= 1:
            errors['u_init'] = 'Initial control must lie in [0, 1].'
        if self.objective not in IMPLEMENTED_OBJECTIVES:
            errors['objective'] = f"Objective '{self.objective}' is not implemented."
        if errors:
            raise ValidationError(errors)

    @classmethod
    def from_settings(cls, **overrides):
        defaults = settings.PREP_CONTROL
        values = {
            'lambda1': defaults['RELAXATION_OLD'],
            'lambda2': defaults['RELAXATION_NEW'],
            'tol_rel': defaults['SWEEP_TOL_REL'],
            'max_iters': defaults['SWEEP_MAX_ITERS'],
        }
        values.update(overrides)
        return cls(**values)


@dataclass(frozen=True, eq=False)
class SweepResult:
    control: ControlPath
    xtraj: StateTrajectory
    adjtraj: AdjointTrajectory
    iterations: int
    final_residual: float
    converged: bool
    cost: float
    lambda_mult: float = 0.0
    residual_history: list = field(default_factory=list)


def candidate_control(s, p1, p5, w2, lambda_mult=0.0, cost_rate=0.0):
    """Maximum-principle control S*(p1 - p5 - lambda*c)/(2*w2), clamped to [0, 1]."""
    unclamped = np.asarray(s) * (np.asarray(p1) - np.asarray(p5) - lambda_mult * np.asarray(cost_rate)) / (2 * w2)
    clamped = np.clip(unclamped, 0.0, 1.0)
    return float(clamped) if clamped.ndim == 0 else clamped


def performance(xtraj, u, weights, grid):
    """Trapezoidal integral of w1*I + w2*u^2 along one or more paths."""
    states = xtraj.states if isinstance(xtraj, StateTrajectory) else np.asarray(xtraj)
    controls = u.values if isinstance(u, ControlPath) else np.asarray(u)
    integrand = weights.w1 * states[..., I] + weights.w2 * controls ** 2
    value = np.trapezoid(integrand, dx=grid.dt, axis=-1)
    return float(value) if np.ndim(value) == 0 else value


def _relative_change(new, old):
    """Sup-norm change of every tracked process relative to its new size, worst process per path."""
    change = np.abs(new - old).max(axis=1)
    size = np.abs(new).max(axis=1)
    return (change / (size + 1e-12)).max(axis=-1)


def run_sweeps(x0, grid, params, weights, paths, cfg, lambda_mult=0.0, cost_rate=1.0):
    """Run the sweep on every Brownian path, one SweepResult per path.

    lambda_mult is a scalar or one multiplier per path; cost_rate is a scalar,
    a grid sample array, or one sample array per path.
    """
    n_paths = len(paths)
    n_points = grid.n_steps + 1
    increments = np.stack([path.increments for path in paths])
    lambdas = np.broadcast_to(np.asarray(lambda_mult, dtype=float), (n_paths,))
    costs = np.broadcast_to(np.asarray(cost_rate, dtype=float), (n_paths, n_points))

    controls = np.full((n_paths, n_points), float(cfg.u_init))
    accepted = controls.copy()
    candidates = controls.copy()
    states = np.zeros((n_paths, n_points, 5))
    p = np.zeros_like(states)
    q = np.zeros_like(states)
    clamp_events = np.zeros(n_paths, dtype=int)
    iterations = np.zeros(n_paths, dtype=int)
    residuals = np.full(n_paths, np.inf)
    histories = [[] for _ in range(n_paths)]
    active = np.ones(n_paths, dtype=bool)

    for iteration in range(1, cfg.max_iters + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        u_old = controls[idx]
        x_new, clamps = simulate_batch(u_old, increments[idx], x0, grid, params)
        p_new, q_new = solve_backward_batch(x_new, u_old, grid, weights, lambdas[idx], costs[idx], params)
        u_hat = candidate_control(
            x_new[..., S], p_new[..., S], p_new[..., E], weights.w2, lambdas[idx][:, np.newaxis], costs[idx]
        )
        u_new = np.clip(cfg.lambda1 * u_old + cfg.lambda2 * u_hat, 0.0, 1.0)

        if iteration == 1:
            residual = np.full(idx.size, np.inf)
        else:
            tracked_new = np.concatenate([x_new, p_new, q_new, u_new[..., np.newaxis]], axis=-1)
            tracked_old = np.concatenate([states[idx], p[idx], q[idx], u_old[..., np.newaxis]], axis=-1)
            residual = _relative_change(tracked_new, tracked_old)

        states[idx], p[idx], q[idx] = x_new, p_new, q_new
        accepted[idx] = u_old
        candidates[idx] = u_hat
        controls[idx] = u_new
        clamp_events[idx] = clamps
        iterations[idx] = iteration
        residuals[idx] = residual
        for row, value in zip(idx, residual):
            histories[row].append(float(value))

        active[idx[residual < cfg.tol_rel]] = False
        logger.debug(
            "Sweep iteration %d: %d paths active, worst residual %.3e",
            iteration, active.sum(), residual.max(),
        )

    done = np.flatnonzero(residuals < cfg.tol_rel)
    if done.size:
        # Converged paths report the clamped candidate itself, with the bundle it induces.
        u_final = candidates[done]
        x_final, clamps = simulate_batch(u_final, increments[done], x0, grid, params)
        p_final, q_final = solve_backward_batch(x_final, u_final, grid, weights, lambdas[done], costs[done], params)
        states[done], p[done], q[done] = x_final, p_final, q_final
        accepted[done] = u_final
        clamp_events[done] = clamps

    costs_out = performance(states, accepted, weights, grid)
    results = []
    for k in range(n_paths):
        converged = bool(residuals[k] < cfg.tol_rel)
        if not converged:
            logger.warning(
                "Sweep on path %d stopped after %d iterations with residual %.3e",
                paths[k].index, iterations[k], residuals[k],
            )
        _check_residual_tail(histories[k], paths[k].index)
        results.append(SweepResult(
            control=ControlPath(values=accepted[k]),
            xtraj=StateTrajectory(states=states[k], clamp_events=int(clamp_events[k])),
            adjtraj=AdjointTrajectory(p=p[k], q=q[k]),
            iterations=int(iterations[k]),
            final_residual=float(residuals[k]),
            converged=converged,
            cost=float(costs_out[k]),
            lambda_mult=float(lambdas[k]),
            residual_history=histories[k],
        ))
    return results


def run_sweep(x0, grid, params, weights, w, cfg, lambda_mult=0.0, cost_rate=1.0):
    return run_sweeps(x0, grid, params, weights, [w], cfg, lambda_mult, cost_rate)[0]


def _check_residual_tail(history, path_index, window=5):
    tail = history[-window:]
    if len(tail) == window and any(later > earlier for earlier, later in zip(tail, tail[1:])):
        logger.info("Sweep residual on path %d was not monotone over the last %d iterations", path_index, window)


def evaluate_fixed_control(x0, grid, params, weights, paths, level):
    """Per-path performance of the constant control u = level on the given paths."""
    increments = np.stack([path.increments for path in paths])
    controls = np.full((len(paths), grid.n_steps + 1), float(level))
    states, _ = simulate_batch(controls, increments, x0, grid, params)
    return performance(states, controls, weights, grid)
