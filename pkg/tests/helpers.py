import numpy as np

from dynamics.forward import BrownianPath, TimeGrid
from dynamics.models import CostWeights, ModelParams, StateVector

INITIAL_STATE = StateVector(s=10000.0, i=200.0, c=0.0, a=0.0, e=0.0)


def baseline_params(**overrides):
    return ModelParams.baseline(**overrides)


def baseline_weights(n_ref=10200.0, w1=20.0):
    return CostWeights.baseline(n_ref=n_ref, w1=w1)


def quiet_path(grid):
    """A Brownian path with all increments zero."""
    return BrownianPath(increments=np.zeros(grid.n_steps), seed=0)


def coarse_grid(t_end=25.0, n_steps=500):
    return TimeGrid(t_end=t_end, n_steps=n_steps)
