"""Path sets, ensemble statistics and the strong-order harness."""
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from control.sweep import SweepResult
from dynamics.forward import BrownianPath, StateTrajectory, euler_maruyama
from dynamics.models import COMPARTMENTS

logger = logging.getLogger(__name__)

COSTATES = tuple(f'p{k}' for k in range(1, 6)) + tuple(f'q{k}' for k in range(1, 6))
SWEEP_COLUMNS = COMPARTMENTS + ('u',) + COSTATES


def make_paths(master_seed, n_paths, grid):
    """Brownian paths whose k-th stream depends only on (master_seed, k)."""
    if n_paths < 1:
        raise ValueError('At least one path is required.')
    paths = [BrownianPath.generate(master_seed, grid, index=k) for k in range(n_paths)]
    logger.info("Generated %d Brownian paths of %d steps from seed %d", n_paths, grid.n_steps, master_seed)
    return paths


def tracked_array(results):
    """Stack per-path results into (n_paths, n_steps + 1, n_columns) with the matching column names."""
    first = results[0]
    if isinstance(first, SweepResult):
        values = np.stack([
            np.concatenate([r.xtraj.states, r.control.values[:, np.newaxis], r.adjtraj.p, r.adjtraj.q], axis=-1)
            for r in results
        ])
        return values, SWEEP_COLUMNS
    if isinstance(first, StateTrajectory):
        return np.stack([r.states for r in results]), COMPARTMENTS
    return np.asarray(results, dtype=float), None


@dataclass(frozen=True, eq=False)
class EnsembleStats:
    """Pointwise mean and sum of squared deviations of every tracked process."""

    columns: tuple
    count: int
    mean: np.ndarray
    m2: np.ndarray
    master_seed: object = None

    @classmethod
    def from_array(cls, values, columns, master_seed=None):
        values = np.asarray(values, dtype=float)
        mean = values.mean(axis=0)
        m2 = ((values - mean) ** 2).sum(axis=0)
        return cls(columns=tuple(columns), count=values.shape[0], mean=mean, m2=m2, master_seed=master_seed)

    @property
    def variance_defined(self):
        return self.count > 1

    @property
    def variance(self):
        """Unbiased variance; zero, and flagged undefined, for a single path."""
        if not self.variance_defined:
            return np.zeros_like(self.mean)
        return self.m2 / (self.count - 1)

    def merge(self, other):
        """Combine the statistics of two disjoint path sets."""
        if self.columns != other.columns:
            raise ValueError('Cannot merge statistics of different processes.')
        count = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / count
        m2 = self.m2 + other.m2 + delta ** 2 * self.count * other.count / count
        return EnsembleStats(self.columns, count, mean, m2, self.master_seed)

    def to_frame(self, times):
        frame = pd.DataFrame({'t': times})
        variance = self.variance
        for k, column in enumerate(self.columns):
            frame[f'mean_{column}'] = self.mean[:, k]
            frame[f'var_{column}'] = variance[:, k]
        return frame


def ensemble(results, columns=None, master_seed=None):
    values, detected = tracked_array(results)
    columns = columns or detected or tuple(f'x{k}' for k in range(values.shape[-1]))
    return EnsembleStats.from_array(values, columns, master_seed)


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    dts: np.ndarray
    errors: np.ndarray
    slope: float

    @property
    def monotone(self):
        """Mean error shrinks with every halving of the step."""
        return bool(np.all(np.diff(self.errors) < 0))

    def to_frame(self):
        return pd.DataFrame({'dt': self.dts, 'mean_abs_error': self.errors})


def convergence_order(a=0.05, b=0.2, x0=1.0, t_end=1.0, n_paths=2000, seed=2024, levels=range(5, 11)):
    """Strong order of the Euler-Maruyama stepper on dX = aX dt + bX dB.

    Every level reuses the finest Brownian increments, summed in blocks, and
    is compared with the exact terminal value X0*exp((a - b^2/2)T + bB(T)).
    """
    levels = list(levels)
    finest = max(levels)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    fine_dt = t_end / 2 ** finest
    increments = rng.standard_normal((n_paths, 2 ** finest)) * np.sqrt(fine_dt)
    exact = x0 * np.exp((a - b ** 2 / 2) * t_end + b * increments.sum(axis=1))

    dts, errors = [], []
    for level in levels:
        block = 2 ** (finest - level)
        coarse = increments.reshape(n_paths, 2 ** level, block).sum(axis=2)
        dt = t_end / 2 ** level
        paths = euler_maruyama(lambda x: a * x, lambda x: b * x, x0, coarse, dt)
        dts.append(dt)
        errors.append(np.mean(np.abs(paths[:, -1] - exact)))

    dts, errors = np.array(dts), np.array(errors)
    slope = float(np.polyfit(np.log(dts), np.log(errors), 1)[0])
    logger.info("Strong order estimate %.3f from %d paths over %d levels", slope, n_paths, len(levels))
    return ConvergenceReport(dts=dts, errors=errors, slope=slope)
