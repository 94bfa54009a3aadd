"""The simulate / optimize / optimize-budget / convergence pipelines.

Each pipeline takes a validated Scenario, writes its files into the
scenario's output directory and returns a RunOutcome whose summary is the
content of run.json.
"""
import logging
from dataclasses import dataclass

import numpy as np
from rest_framework import serializers

from control.budget import KIND_NONE, solve_budget
from control.sweep import evaluate_fixed_control, run_sweeps
from dynamics.forward import check_invariants, simulate_batch
from dynamics.models import COMPARTMENTS

from . import exporters
from .montecarlo import EnsembleStats, convergence_order, make_paths, tracked_array

logger = logging.getLogger(__name__)

BENCHMARK_CONTROLS = (0.0, 0.5, 1.0)


@dataclass
class RunOutcome:
    summary: dict
    converged: bool = True


def _invariants(states, clamp_events, scenario):
    report = check_invariants(states, clamp_events, scenario.initial_state, scenario.params)
    if report.clamp_events:
        logger.warning(
            "Clamped %d coordinates at zero (%.4f%% of coordinate steps)",
            report.clamp_events, 100 * report.clamp_fraction,
        )
    if not report.bound_ok:
        logger.warning("Total population %.1f exceeded the bound %.1f", report.max_total, report.population_bound)
    return report


def _write_sweeps(scenario, results):
    times = scenario.grid.times()
    values, columns = tracked_array(results)
    exporters.write_paths(scenario.output_dir, times, values, columns)
    stats = EnsembleStats.from_array(values, columns, scenario.master_seed)
    exporters.write_ensemble(scenario.output_dir, stats, times)
    states = np.stack([r.xtraj.states for r in results])
    clamps = np.array([r.xtraj.clamp_events for r in results])
    return _invariants(states, clamps, scenario)


def _sweep_summary(results):
    return {
        'converged': all(r.converged for r in results),
        'mean_cost': float(np.mean([r.cost for r in results])),
        'paths': [
            {
                'index': k,
                'iterations': r.iterations,
                'final_residual': r.final_residual,
                'converged': r.converged,
                'cost': r.cost,
                'u_start': float(r.control.values[0]),
                'u_end': float(r.control.values[-1]),
                'u_max': float(r.control.values.max()),
            }
            for k, r in enumerate(results)
        ],
    }


def cmd_simulate(scenario):
    grid = scenario.grid
    paths = make_paths(scenario.master_seed, scenario.n_paths, grid)
    increments = np.stack([path.increments for path in paths])
    controls = np.full((scenario.n_paths, grid.n_steps + 1), scenario.control)
    states, clamp_events = simulate_batch(controls, increments, scenario.initial_state, grid, scenario.params)

    times = grid.times()
    exporters.write_paths(scenario.output_dir, times, states, COMPARTMENTS)
    stats = EnsembleStats.from_array(states, COMPARTMENTS, scenario.master_seed)
    exporters.write_ensemble(scenario.output_dir, stats, times)
    report = _invariants(states, clamp_events, scenario)

    summary = {
        'command': 'simulate',
        'scenario': scenario.describe(),
        'control': scenario.control,
        'invariants': report.as_dict(),
        'clamp_events': clamp_events,
        'final_mean': dict(zip(COMPARTMENTS, stats.mean[-1])),
        'final_variance': dict(zip(COMPARTMENTS, stats.variance[-1])),
    }
    exporters.write_summary(scenario.output_dir, summary)
    return RunOutcome(summary=summary)


def cmd_optimize(scenario):
    grid = scenario.grid
    paths = make_paths(scenario.master_seed, scenario.n_paths, grid)
    cost = scenario.budget.cost_samples(grid)
    results = run_sweeps(
        scenario.initial_state, grid, scenario.params, scenario.weights, paths, scenario.sweep, 0.0, cost,
    )
    report = _write_sweeps(scenario, results)

    benchmarks = {
        str(level): float(np.mean(evaluate_fixed_control(
            scenario.initial_state, grid, scenario.params, scenario.weights, paths, level,
        )))
        for level in BENCHMARK_CONTROLS
    }
    summary = {
        'command': 'optimize',
        'scenario': scenario.describe(),
        'sweep': _sweep_summary(results),
        'benchmark_costs': benchmarks,
        'invariants': report.as_dict(),
    }
    exporters.write_summary(scenario.output_dir, summary)
    return RunOutcome(summary=summary, converged=summary['sweep']['converged'])


def cmd_optimize_budget(scenario):
    spec = scenario.budget
    if spec.kind == KIND_NONE:
        raise serializers.ValidationError({'budget_kind': 'optimize-budget needs type1 or type2.'})
    grid = scenario.grid
    paths = make_paths(scenario.master_seed, scenario.n_paths, grid)
    multiplier, results = solve_budget(
        scenario.initial_state, grid, scenario.params, scenario.weights, paths, scenario.sweep, spec,
    )
    report = _write_sweeps(scenario, results)

    summary = {
        'command': 'optimize-budget',
        'scenario': scenario.describe(),
        'sweep': _sweep_summary(results),
        'budget': {
            'kind': spec.kind,
            'cap': spec.cap,
            'lambda0': multiplier.lambda0,
            'binding': multiplier.binding,
            'path_budgets': multiplier.budgets,
            'expected_budget': multiplier.expected_budget,
            'residual': multiplier.residual,
            'slackness': multiplier.slackness,
            'slackness_residual': multiplier.slackness_residual,
            'evaluations': multiplier.evaluations,
        },
        'invariants': report.as_dict(),
    }
    exporters.write_summary(scenario.output_dir, summary)
    return RunOutcome(summary=summary, converged=summary['sweep']['converged'])


def cmd_convergence(output_dir, drift=0.05, noise=0.2, x0=1.0, t_end=1.0, n_paths=2000, seed=2024):
    report = convergence_order(a=drift, b=noise, x0=x0, t_end=t_end, n_paths=n_paths, seed=seed)
    output_dir.mkdir(parents=True, exist_ok=True)
    exporters.write_csv(report.to_frame(), output_dir / 'convergence.csv')
    summary = {
        'command': 'convergence',
        'drift': drift,
        'noise': noise,
        'x0': x0,
        't_end': t_end,
        'n_paths': n_paths,
        'seed': seed,
        'slope': report.slope,
        'monotone': report.monotone,
    }
    exporters.write_summary(output_dir, summary)
    return RunOutcome(summary=summary)
