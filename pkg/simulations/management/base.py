from pathlib import Path

from django.core.management.base import BaseCommand, CommandError
from rest_framework import serializers

from dynamics.exceptions import MultiplierSearchError, NumericalBlowUpError

from ..serializers import ScenarioConfigSerializer, format_errors, parse_config_text

EXIT_CONFIG_ERROR = 2
EXIT_NOT_CONVERGED = 3
EXIT_INFEASIBLE_BUDGET = 4
EXIT_BLOW_UP = 5


class ScenarioCommand(BaseCommand):
    """Load a scenario config, run one pipeline and map failures to exit codes."""

    pipeline = None

    def add_arguments(self, parser):
        parser.add_argument('--config', help='Scenario file of `key = value` lines (baseline defaults if omitted)')
        parser.add_argument('--seed', type=int, help='Master seed for the Brownian paths')
        parser.add_argument('--out', help='Output directory')
        parser.add_argument('--paths', type=int, help='Number of Monte Carlo paths')

    def load_scenario(self, options):
        raw, base_dir = {}, Path('.')
        if options.get('config'):
            config_path = Path(options['config'])
            try:
                text = config_path.read_text()
            except OSError as exc:
                raise CommandError(f'Cannot read config: {exc}', returncode=EXIT_CONFIG_ERROR)
            try:
                raw = parse_config_text(text)
            except serializers.ValidationError as exc:
                raise CommandError(format_errors(exc.detail), returncode=EXIT_CONFIG_ERROR)
            base_dir = config_path.parent

        overrides = {'seed': options.get('seed'), 'output_dir': options.get('out'), 'n_paths': options.get('paths')}
        raw.update({key: value for key, value in overrides.items() if value is not None})

        serializer = ScenarioConfigSerializer(data=raw, context={'base_dir': base_dir})
        if not serializer.is_valid():
            raise CommandError(format_errors(serializer.errors), returncode=EXIT_CONFIG_ERROR)
        return serializer.save()

    def handle(self, *args, **options):
        scenario = self.load_scenario(options)
        try:
            outcome = self.pipeline(scenario)
        except serializers.ValidationError as exc:
            raise CommandError(format_errors(exc.detail), returncode=EXIT_CONFIG_ERROR)
        except MultiplierSearchError as exc:
            raise CommandError(str(exc), returncode=EXIT_INFEASIBLE_BUDGET)
        except NumericalBlowUpError as exc:
            raise CommandError(str(exc), returncode=EXIT_BLOW_UP)

        if not outcome.converged:
            raise CommandError(
                f'Sweep did not converge; partial results written to {scenario.output_dir}',
                returncode=EXIT_NOT_CONVERGED,
            )
        self.stdout.write(self.style.SUCCESS(f'Results written to {scenario.output_dir}'))
