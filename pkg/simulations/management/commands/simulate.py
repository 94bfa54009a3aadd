from simulations.management.base import ScenarioCommand
from simulations.pipelines import cmd_simulate


class Command(ScenarioCommand):
    help = 'Simulate the PReP SDE under a fixed control on a set of Monte Carlo paths'
    pipeline = staticmethod(cmd_simulate)
