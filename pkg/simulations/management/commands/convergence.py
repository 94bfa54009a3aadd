from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand

from simulations.pipelines import cmd_convergence


class Command(BaseCommand):
    help = 'Estimate the strong order of the Euler-Maruyama stepper on geometric Brownian motion'

    def add_arguments(self, parser):
        parser.add_argument('--out', default=settings.PREP_CONTROL['OUTPUT_DIR'])
        parser.add_argument('--paths', type=int, default=2000)
        parser.add_argument('--seed', type=int, default=2024)
        parser.add_argument('--drift', type=float, default=0.05)
        parser.add_argument('--noise', type=float, default=0.2)

    def handle(self, *args, **options):
        outcome = cmd_convergence(
            Path(options['out']),
            drift=options['drift'],
            noise=options['noise'],
            n_paths=options['paths'],
            seed=options['seed'],
        )
        self.stdout.write(self.style.SUCCESS(f"Estimated strong order {outcome.summary['slope']:.3f}"))
