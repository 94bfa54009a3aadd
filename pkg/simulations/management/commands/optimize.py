from simulations.management.base import ScenarioCommand
from simulations.pipelines import cmd_optimize


class Command(ScenarioCommand):
    help = 'Find the optimal PReP control on every path with the forward-backward sweep'
    pipeline = staticmethod(cmd_optimize)
