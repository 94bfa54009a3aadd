class SolverError(Exception):
    """Base class for numerical failures raised by the solver apps."""


class NumericalBlowUpError(SolverError):
    """A state or costate became non-finite."""

    def __init__(self, step, where='state'):
        self.step = step
        self.where = where
        super().__init__(f"Non-finite {where} at grid step {step}")


class MultiplierSearchError(SolverError):
    """The Lagrange multiplier search for a budget constraint failed."""


class InfeasibleBudgetError(MultiplierSearchError):
    """No multiplier bracket reaches the budget cap."""

    def __init__(self, cap, budget, lambda_max, path=None):
        self.cap = cap
        self.budget = budget
        self.lambda_max = lambda_max
        self.path = path
        where = f" on path {path}" if path is not None else ''
        super().__init__(
            f"Budget cap {cap:g} not reached{where}: budget {budget:g} "
            f"at lambda {lambda_max:g}"
        )


class NonMonotoneBudgetError(MultiplierSearchError):
    """The sampled budget functional increased with the multiplier."""

    def __init__(self, lower, upper, path=None):
        self.lower = lower
        self.upper = upper
        self.path = path
        where = f" on path {path}" if path is not None else ''
        super().__init__(
            f"Budget increased with the multiplier{where}: "
            f"g({lower[0]:g}) = {lower[1]:g} < g({upper[0]:g}) = {upper[1]:g}"
        )
