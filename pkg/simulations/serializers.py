from contextlib import contextmanager
from pathlib import Path

import pandas as pd
from django.conf import settings
from django.core.exceptions import ValidationError as DjangoValidationError
from rest_framework import serializers

from control.budget import KIND_CHOICES, KIND_NONE, BudgetSpec
from control.sweep import IMPLEMENTED_OBJECTIVES, OBJECTIVE_CHOICES, SweepConfig
from dynamics.forward import TimeGrid
from dynamics.models import BASELINE_RATES, CostWeights, ModelParams, StateVector

from .models import Scenario

MAX_SEED = 2 ** 64 - 1


def _setting(key):
    return lambda: settings.PREP_CONTROL[key]


def parse_config_text(text):
    """Read flat `key = value` lines; `#` starts a comment."""
    data = {}
    errors = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition('=')
        key, value = key.strip(), value.strip()
        if not sep or not key:
            errors[f'line {number}'] = 'Expected `key = value`.'
        elif key in data:
            errors[key] = f'Duplicate key on line {number}.'
        else:
            data[key] = value
    if errors:
        raise serializers.ValidationError(errors)
    return data


@contextmanager
def config_keys(**renames):
    """Report domain validation errors under the config key that set the field."""
    try:
        yield
    except DjangoValidationError as exc:
        raise serializers.ValidationError(
            {renames.get(field, field): messages for field, messages in exc.message_dict.items()}
        )


def rate_field(default):
    return serializers.FloatField(min_value=0, default=default)


class ScenarioConfigSerializer(serializers.Serializer):
    # Epidemiology (beta and sigma unscaled; divided by n_ref at load)
    beta_tilde = rate_field(BASELINE_RATES['beta_tilde'])
    sigma_tilde = rate_field(BASELINE_RATES['sigma_tilde'])
    n_ref = serializers.FloatField(min_value=1e-9, default=BASELINE_RATES['n_ref'])
    lambda_recruit = serializers.FloatField(min_value=0, required=False, allow_null=True)
    mu = rate_field(BASELINE_RATES['mu'])
    eta_c = rate_field(BASELINE_RATES['eta_c'])
    eta_a = rate_field(BASELINE_RATES['eta_a'])
    psi = rate_field(BASELINE_RATES['psi'])
    theta = rate_field(BASELINE_RATES['theta'])
    phi = rate_field(BASELINE_RATES['phi'])
    rho = rate_field(BASELINE_RATES['rho'])
    omega = rate_field(BASELINE_RATES['omega'])
    alpha = rate_field(BASELINE_RATES['alpha'])
    d = rate_field(BASELINE_RATES['d'])

    # Initial condition
    s0 = serializers.FloatField(min_value=0, default=10000.0)
    i0 = serializers.FloatField(min_value=0, default=200.0)
    c0 = serializers.FloatField(min_value=0, default=0.0)
    a0 = serializers.FloatField(min_value=0, default=0.0)
    e0 = serializers.FloatField(min_value=0, default=0.0)

    # Time grid
    t_end = serializers.FloatField(min_value=1e-9, default=_setting('TERMINAL_TIME'))
    n_steps = serializers.IntegerField(min_value=1, required=False)

    # Objective
    w1 = serializers.FloatField(min_value=0, default=20.0)
    w2 = serializers.FloatField(required=False, allow_null=True)
    objective = serializers.ChoiceField(choices=OBJECTIVE_CHOICES, default='running')
    control = serializers.FloatField(min_value=0, max_value=1, default=0.0)

    # Sweep
    relax_old = serializers.FloatField(min_value=0, max_value=1, default=_setting('RELAXATION_OLD'))
    relax_new = serializers.FloatField(min_value=0, max_value=1, default=_setting('RELAXATION_NEW'))
    tol_rel = serializers.FloatField(default=_setting('SWEEP_TOL_REL'))
    max_iters = serializers.IntegerField(min_value=1, default=_setting('SWEEP_MAX_ITERS'))
    u_init = serializers.FloatField(min_value=0, max_value=1, default=0.0)

    # Budget
    budget_kind = serializers.ChoiceField(choices=KIND_CHOICES, default=KIND_NONE)
    budget_cap = serializers.FloatField(min_value=0, required=False, allow_null=True)
    budget_cost = serializers.FloatField(min_value=0, default=1.0)
    budget_cost_file = serializers.CharField(required=False, allow_blank=True)
    budget_tol_rel = serializers.FloatField(default=_setting('BUDGET_TOL_REL'))
    budget_lambda_max0 = serializers.FloatField(default=_setting('BUDGET_LAMBDA_MAX0'))

    # Run
    seed = serializers.IntegerField(min_value=0, max_value=MAX_SEED, default=_setting('MASTER_SEED'))
    n_paths = serializers.IntegerField(min_value=1, default=_setting('N_PATHS'))
    output_dir = serializers.CharField(default=_setting('OUTPUT_DIR'))

    def validate(self, data):
        unknown = set(self.initial_data) - set(self.fields)
        if unknown:
            raise serializers.ValidationError({key: 'Unknown configuration key.' for key in sorted(unknown)})

        if data['objective'] not in IMPLEMENTED_OBJECTIVES:
            raise serializers.ValidationError(
                {'objective': f"Objective '{data['objective']}' is reserved but not implemented."}
            )

        if data.get('n_steps') is None:
            data['n_steps'] = max(1, round(data['t_end'] * settings.PREP_CONTROL['TIME_STEP_DENOMINATOR']))

        if data.get('w2') is None:
            data['w2'] = 0.3 * data['n_ref']

        if data['budget_kind'] != KIND_NONE and data.get('budget_cap') is None:
            raise serializers.ValidationError({'budget_cap': 'A budget cap is required for constrained runs.'})

        if data.get('budget_cost_file'):
            data['budget_cost'] = self._read_cost_file(data['budget_cost_file'], data['n_steps'])

        data['scenario'] = self._build(data)
        return data

    def _read_cost_file(self, name, n_steps):
        path = Path(name)
        if not path.is_absolute():
            path = Path(self.context.get('base_dir', '.')) / path
        try:
            frame = pd.read_csv(path)
        except (OSError, pd.errors.EmptyDataError, pd.errors.ParserError) as exc:
            raise serializers.ValidationError({'budget_cost_file': f'Cannot read cost samples: {exc}'})
        if 'c' not in frame.columns:
            raise serializers.ValidationError({'budget_cost_file': "Cost file needs a `c` column."})
        if len(frame) != n_steps + 1:
            raise serializers.ValidationError(
                {'budget_cost_file': f'Expected {n_steps + 1} cost samples, found {len(frame)}.'}
            )
        return frame['c'].to_numpy(dtype=float)

    def _build(self, data):
        rates = {name: data[name] for name in ('mu', 'eta_c', 'eta_a', 'psi', 'theta', 'phi', 'rho', 'omega', 'alpha', 'd')}
        with config_keys(beta='beta_tilde', sigma='sigma_tilde'):
            params = ModelParams.from_unscaled(
                beta_tilde=data['beta_tilde'],
                sigma_tilde=data['sigma_tilde'],
                n_ref=data['n_ref'],
                lambda_recruit=data.get('lambda_recruit'),
                **rates,
            )
        with config_keys(s='s0', i='i0', c='c0', a='a0', e='e0'):
            x0 = StateVector(data['s0'], data['i0'], data['c0'], data['a0'], data['e0'])
        with config_keys(lambda1='relax_old', lambda2='relax_new'):
            sweep = SweepConfig(
                lambda1=data['relax_old'],
                lambda2=data['relax_new'],
                tol_rel=data['tol_rel'],
                max_iters=data['max_iters'],
                u_init=data['u_init'],
                objective=data['objective'],
            )
        with config_keys(kind='budget_kind', cost='budget_cost', cap='budget_cap',
                         tol_rel='budget_tol_rel', lambda_max0='budget_lambda_max0'):
            budget = BudgetSpec.from_settings(
                kind=data['budget_kind'],
                cost=data['budget_cost'],
                cap=data.get('budget_cap') or 0.0,
                tol_rel=data['budget_tol_rel'],
                lambda_max0=data['budget_lambda_max0'],
            )
        with config_keys():
            grid = TimeGrid(t_end=data['t_end'], n_steps=data['n_steps'])
            weights = CostWeights(w1=data['w1'], w2=data['w2'])
        return Scenario(
            params=params,
            x0=x0,
            grid=grid,
            weights=weights,
            control=data['control'],
            sweep=sweep,
            budget=budget,
            master_seed=data['seed'],
            n_paths=data['n_paths'],
            output_dir=Path(data['output_dir']),
        )

    def create(self, validated_data):
        return validated_data['scenario']


def format_errors(errors):
    """Flatten serializer errors into `field: message` lines."""
    lines = []
    for field, messages in errors.items():
        if isinstance(messages, (list, tuple)):
            messages = '; '.join(str(message) for message in messages)
        lines.append(f'{field}: {messages}')
    return '\n'.join(lines)
