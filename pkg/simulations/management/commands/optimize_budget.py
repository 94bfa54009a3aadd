from simulations.management.base import ScenarioCommand
from simulations.pipelines import cmd_optimize_budget


class Command(ScenarioCommand):
    help = 'Optimal PReP control under a Type I (expected) or Type II (pathwise) budget cap'
    pipeline = staticmethod(cmd_optimize_budget)
