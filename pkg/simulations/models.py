from dataclasses import dataclass
from pathlib import Path

import numpy as np

from control.budget import BudgetSpec
from control.sweep import SweepConfig
from dynamics.forward import TimeGrid
from dynamics.models import CostWeights, ModelParams, StateVector


@dataclass(frozen=True, eq=False)
class Scenario:
    """A validated run configuration, ready for the pipelines."""

    params: ModelParams
    x0: StateVector
    grid: TimeGrid
    weights: CostWeights
    control: float
    sweep: SweepConfig
    budget: BudgetSpec
    master_seed: int
    n_paths: int
    output_dir: Path

    @property
    def initial_state(self):
        return np.asarray(self.x0)

    def describe(self):
        return {
            'params': {name: getattr(self.params, name) for name in self.params.__dataclass_fields__},
            'initial_state': dict(zip('SICAE', self.initial_state.tolist())),
            't_end': self.grid.t_end,
            'n_steps': self.grid.n_steps,
            'dt': self.grid.dt,
            'w1': self.weights.w1,
            'w2': self.weights.w2,
            'master_seed': self.master_seed,
            'n_paths': self.n_paths,
        }
