"""CSV and JSON writers for run outputs.

Per-path files are `path_<k>.csv` with columns t, S, I, C, A, E and, for
optimised runs, u, p1..p5, q1..q5. Ensemble files carry mean_<X>/var_<X>
pairs. Floats are written with 17 significant digits.
"""
import json
import logging
import math

import numpy as np
import pandas as pd
from django.conf import settings
from django.core.serializers.json import DjangoJSONEncoder

logger = logging.getLogger(__name__)


class SummaryEncoder(DjangoJSONEncoder):
    def default(self, o):
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        return super().default(o)


def _finite(value):
    """JSON has no inf/nan; report them as null."""
    if isinstance(value, dict):
        return {key: _finite(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(item) for item in value]
    if isinstance(value, np.ndarray):
        return _finite(value.tolist())
    if isinstance(value, (float, np.floating)) and not math.isfinite(value):
        return None
    return value


def path_frame(times, values, columns):
    frame = pd.DataFrame(values, columns=list(columns))
    frame.insert(0, 't', times)
    return frame


def write_csv(frame, path):
    frame.to_csv(path, index=False, float_format=settings.PREP_CONTROL['CSV_FLOAT_FORMAT'], lineterminator='\n')


def write_paths(output_dir, times, values, columns):
    """One CSV per path from an array of shape (n_paths, n_steps + 1, n_columns)."""
    output_dir.mkdir(parents=True, exist_ok=True)
    for k, path_values in enumerate(values):
        write_csv(path_frame(times, path_values, columns), output_dir / f'path_{k}.csv')
    logger.info("Wrote %d path files to %s", len(values), output_dir)


def write_ensemble(output_dir, stats, times):
    output_dir.mkdir(parents=True, exist_ok=True)
    write_csv(stats.to_frame(times), output_dir / 'ensemble.csv')


def write_summary(output_dir, summary):
    output_dir.mkdir(parents=True, exist_ok=True)
    payload = {'schema_version': settings.PREP_CONTROL['SUMMARY_SCHEMA_VERSION'], **summary}
    with open(output_dir / 'run.json', 'w') as handle:
        json.dump(_finite(payload), handle, cls=SummaryEncoder, indent=2, sort_keys=True)
        handle.write('\n')
