"""Budget-constrained sweeps.

The budget functional is the treatment spend integral of S(t)*u(t)*c(t).
A Type I constraint caps its expectation with one deterministic multiplier;
a Type II constraint caps it on every path, realised as one multiplier per
path. Both are found by doubling an upper bracket and bisecting, with the
Brownian paths frozen across every evaluation.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from django.conf import settings
from django.core.exceptions import ValidationError

from dynamics.exceptions import InfeasibleBudgetError, NonMonotoneBudgetError
from dynamics.forward import ControlPath, StateTrajectory
from dynamics.models import S

from .sweep import run_sweeps

logger = logging.getLogger(__name__)

KIND_NONE = 'none'
KIND_TYPE_I = 'type1'
KIND_TYPE_II = 'type2'
KIND_CHOICES = [
    (KIND_NONE, 'Unconstrained'),
    (KIND_TYPE_I, 'Expected budget (Type I)'),
    (KIND_TYPE_II, 'Pathwise budget (Type II)'),
]


@dataclass(frozen=True, eq=False)
class BudgetSpec:
    kind: str = KIND_NONE
    cost: object = 1.0
    cap: float = 0.0
    tol_rel: float = 0.01
    lambda_max0: float = 1.0
    max_doublings: int = 60
    max_bisections: int = 60

    def __post_init__(self):
        object.__setattr__(self, 'cost', np.asarray(self.cost, dtype=float))
        self.clean()

    def clean(self):
        errors = {}
        if self.kind not in dict(KIND_CHOICES):
            errors['kind'] = f"Unknown budget kind '{self.kind}'."
        if not (np.all(np.isfinite(self.cost)) and np.all(self.cost >= 0)):
            errors['cost'] = 'Cost samples must be finite and non-negative.'
        if not (np.isfinite(self.cap) and self.cap >= 0):
            errors['cap'] = 'Budget cap must be non-negative.'
        if not self.tol_rel > 0:
            errors['tol_rel'] = 'Tolerance must be positive.'
        if not self.lambda_max0 > 0:
            errors['lambda_max0'] = 'Initial bracket must be positive.'
        if errors:
            raise ValidationError(errors)

    @classmethod
    def from_settings(cls, **overrides):
        defaults = settings.PREP_CONTROL
        values = {
            'tol_rel': defaults['BUDGET_TOL_REL'],
            'lambda_max0': defaults['BUDGET_LAMBDA_MAX0'],
            'max_doublings': defaults['BUDGET_MAX_DOUBLINGS'],
            'max_bisections': defaults['BUDGET_MAX_BISECTIONS'],
        }
        values.update(overrides)
        return cls(**values)

    def cost_samples(self, grid):
        return np.broadcast_to(self.cost, (grid.n_steps + 1,))

    @property
    def scale(self):
        # Absolute tolerance band when the cap is zero
        return self.cap if self.cap > 0 else 1.0

    def within_band(self, budget):
        return np.abs(np.asarray(budget) - self.cap) <= self.tol_rel * self.scale


@dataclass(frozen=True, eq=False)
class MultiplierResult:
    kind: str
    cap: float
    lambdas: np.ndarray
    budgets: np.ndarray
    evaluations: list = field(default_factory=list)

    @property
    def lambda0(self):
        """Deterministic multiplier (Type I) or the per-path array (Type II)."""
        return float(self.lambdas[0]) if self.kind != KIND_TYPE_II else self.lambdas

    @property
    def binding(self):
        if self.kind == KIND_TYPE_II:
            return self.lambdas > 0
        return bool(self.lambdas[0] > 0)

    @property
    def expected_budget(self):
        return float(np.mean(self.budgets))

    @property
    def residual(self):
        """Budget minus cap, in aggregate (Type I) or per path (Type II)."""
        if self.kind == KIND_TYPE_II:
            return self.budgets - self.cap
        return self.expected_budget - self.cap

    @property
    def slackness(self):
        """Product multiplier * (budget - cap)."""
        return (self.lambdas if self.kind == KIND_TYPE_II else self.lambdas[0]) * self.residual

    @property
    def slackness_residual(self):
        """Relative complementary-slackness violation.

        A positive multiplier must come with a binding budget; a zero
        multiplier only with a budget at or below the cap.
        """
        scale = self.cap if self.cap > 0 else 1.0
        residual = np.asarray(self.residual, dtype=float)
        lambdas = self.lambdas if self.kind == KIND_TYPE_II else self.lambdas[0]
        violation = np.where(lambdas > 0, np.abs(residual), np.maximum(residual, 0.0)) / scale
        return float(violation) if violation.ndim == 0 else violation


def budget_functional(xtraj, u, cost_rate, grid):
    """Trapezoidal integral of S(t)*u(t)*c(t) along one or more paths."""
    states = xtraj.states if isinstance(xtraj, StateTrajectory) else np.asarray(xtraj)
    controls = u.values if isinstance(u, ControlPath) else np.asarray(u)
    value = np.trapezoid(states[..., S] * controls * cost_rate, dx=grid.dt, axis=-1)
    return float(value) if np.ndim(value) == 0 else value


def _path_budgets(results, cost_rate, grid):
    return np.array([budget_functional(r.xtraj, r.control, cost_rate, grid) for r in results])


def _warn_unconverged(results, lambdas, paths, label):
    """Warn about sweeps stopped at the iteration cap; returns the per-path converged flags."""
    failing = [(path.index, float(lam)) for result, lam, path in zip(results, lambdas, paths) if not result.converged]
    if failing:
        logger.warning(
            "%s: sweeps did not converge on paths %s at multipliers %s; their budgets are used as they stand",
            label, [index for index, _ in failing], sorted({lam for _, lam in failing}),
        )
    return [result.converged for result in results]


def _check_monotone(samples, spec, path=None):
    """Abort when the sampled budget grows with the multiplier beyond the tolerance band."""
    ordered = sorted(samples)
    slack = spec.tol_rel * spec.scale
    for lower, upper in zip(ordered, ordered[1:]):
        if upper[0] > lower[0] and upper[1] > lower[1] + slack:
            raise NonMonotoneBudgetError(lower, upper, path=path)


def solve_unconstrained(x0, grid, params, weights, paths, cfg, spec):
    cost = spec.cost_samples(grid)
    results = run_sweeps(x0, grid, params, weights, paths, cfg, 0.0, cost)
    budgets = _path_budgets(results, cost, grid)
    multiplier = MultiplierResult(kind=KIND_NONE, cap=spec.cap, lambdas=np.zeros(1), budgets=budgets)
    return multiplier, results


def solve_type1(x0, grid, params, weights, paths, cfg, spec):
    """One deterministic multiplier bringing the mean budget over the paths to the cap."""
    cost = spec.cost_samples(grid)
    samples = []

    def evaluate(lambda_mult):
        results = run_sweeps(x0, grid, params, weights, paths, cfg, lambda_mult, cost)
        budgets = _path_budgets(results, cost, grid)
        converged = _warn_unconverged(results, [lambda_mult] * len(paths), paths, 'Type I')
        samples.append((float(lambda_mult), float(budgets.mean()), all(converged)))
        _check_monotone(samples, spec)
        logger.debug("Type I: g(%.6g) = %.6g (cap %.6g)", lambda_mult, budgets.mean(), spec.cap)
        return results, budgets

    def finish(lambda_mult, results, budgets):
        logger.info(
            "Type I multiplier %.6g, expected budget %.6g against cap %.6g after %d evaluations",
            lambda_mult, budgets.mean(), spec.cap, len(samples),
        )
        multiplier = MultiplierResult(
            kind=KIND_TYPE_I, cap=spec.cap, lambdas=np.array([float(lambda_mult)]),
            budgets=budgets, evaluations=samples,
        )
        return multiplier, results

    results, budgets = evaluate(0.0)
    if budgets.mean() <= spec.cap:
        return finish(0.0, results, budgets)

    lo, hi = 0.0, spec.lambda_max0
    for _ in range(spec.max_doublings):
        results, budgets = evaluate(hi)
        if budgets.mean() <= spec.cap:
            break
        lo, hi = hi, 2 * hi
    else:
        raise InfeasibleBudgetError(spec.cap, samples[-1][1], samples[-1][0])

    best = (hi, results, budgets)
    if spec.within_band(budgets.mean()):
        return finish(*best)

    for _ in range(spec.max_bisections):
        mid = 0.5 * (lo + hi)
        results, budgets = evaluate(mid)
        if spec.within_band(budgets.mean()):
            return finish(mid, results, budgets)
        if budgets.mean() <= spec.cap:
            hi, best = mid, (mid, results, budgets)
        else:
            lo = mid

    logger.warning("Type I bisection stopped at the iteration cap; keeping the feasible end %.6g", best[0])
    return finish(*best)


def solve_type2(x0, grid, params, weights, paths, cfg, spec):
    """One multiplier per path bringing every path's budget to the cap.

    All unresolved paths are swept together in each round; a path's result
    does not depend on which other paths share the batch.
    """
    cost = spec.cost_samples(grid)
    n_paths = len(paths)
    samples = [[] for _ in range(n_paths)]

    def evaluate(idx, lambdas):
        batch = [paths[k] for k in idx]
        results = run_sweeps(x0, grid, params, weights, batch, cfg, lambdas, cost)
        budgets = _path_budgets(results, cost, grid)
        converged = _warn_unconverged(results, lambdas, batch, 'Type II')
        for k, lambda_mult, budget, ok in zip(idx, lambdas, budgets, converged):
            samples[k].append((float(lambda_mult), float(budget), bool(ok)))
            _check_monotone(samples[k], spec, path=paths[k].index)
        return results, budgets

    all_paths = np.arange(n_paths)
    results0, budgets0 = evaluate(all_paths, np.zeros(n_paths))
    chosen = np.zeros(n_paths)
    final_results = list(results0)
    final_budgets = budgets0.copy()

    done = budgets0 <= spec.cap
    bracketed = done.copy()
    lo = np.zeros(n_paths)
    hi = np.full(n_paths, spec.lambda_max0)

    for _ in range(spec.max_doublings):
        idx = np.flatnonzero(~bracketed)
        if idx.size == 0:
            break
        results, budgets = evaluate(idx, hi[idx])
        for row, k in enumerate(idx):
            if budgets[row] <= spec.cap:
                bracketed[k] = True
                chosen[k], final_results[k], final_budgets[k] = hi[k], results[row], budgets[row]
                done[k] = bool(spec.within_band(budgets[row]))
            else:
                lo[k], hi[k] = hi[k], 2 * hi[k]
    else:
        if not bracketed.all():
            k = int(np.flatnonzero(~bracketed)[0])
            raise InfeasibleBudgetError(spec.cap, samples[k][-1][1], samples[k][-1][0], path=paths[k].index)

    for _ in range(spec.max_bisections):
        idx = np.flatnonzero(~done)
        if idx.size == 0:
            break
        mid = 0.5 * (lo[idx] + hi[idx])
        results, budgets = evaluate(idx, mid)
        for row, k in enumerate(idx):
            if spec.within_band(budgets[row]):
                done[k] = True
                chosen[k], final_results[k], final_budgets[k] = mid[row], results[row], budgets[row]
            elif budgets[row] <= spec.cap:
                hi[k] = mid[row]
                chosen[k], final_results[k], final_budgets[k] = mid[row], results[row], budgets[row]
            else:
                lo[k] = mid[row]

    if not done.all():
        logger.warning("Type II bisection hit the iteration cap on %d paths; keeping feasible ends", (~done).sum())
    logger.info(
        "Type II multipliers found: %d of %d paths binding, max budget %.6g against cap %.6g",
        int((chosen > 0).sum()), n_paths, final_budgets.max(), spec.cap,
    )
    multiplier = MultiplierResult(
        kind=KIND_TYPE_II, cap=spec.cap, lambdas=chosen, budgets=final_budgets, evaluations=samples,
    )
    return multiplier, final_results


def solve_budget(x0, grid, params, weights, paths, cfg, spec):
    """Dispatch on the constraint kind; returns the multiplier result and the per-path sweeps."""
    solvers = {
        KIND_NONE: solve_unconstrained,
        KIND_TYPE_I: solve_type1,
        KIND_TYPE_II: solve_type2,
    }
    return solvers[spec.kind](x0, grid, params, weights, paths, cfg, spec)
