"""
CSV datasets and the run manifest.

CSV files are UTF-8 with LF line endings; floats use the shortest decimal that
round-trips (Python's repr), so re-reading a file reproduces the values bitwise.
Configurations inside a single column are written as occupation numbers joined by ';'.
"""
import csv
import json
import logging
from pathlib import Path

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

ENSEMBLE_COLUMNS = ['t', 'x_mean', 'y_mean', 'z_mean', 'x_exact', 'y_exact', 'z_exact',
                    'x_se', 'y_se', 'z_se', 'trace_distance']
JUMP_COLUMNS = ['t', 'from', 'to']
CTAU_COLUMNS = ['t', 'tau', 'label', 'c_re', 'c_im', 'c_abs2']
RATE_COLUMNS = ['t', 'source', 'target', 'current', 'rate']


def fmt(value):
    return repr(float(value))


def format_config(config):
    return ';'.join(str(int(n)) for n in config)


def trajectory_columns(num_modes):
    return (['t'] + [f'config_{k}' for k in range(1, num_modes + 1)]
            + ['x', 'y', 'z', 'norm', 'jump_flag'])


def born_columns(num_modes):
    return [f'config_{k}' for k in range(1, num_modes + 1)] + ['probability']


def _write_rows(path, header, rows):
    path = Path(path)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        writer.writerows(rows)
    logger.info(f"Wrote {path}")
    return path


def write_trajectory_csv(path, trajectory):
    """One row per grid point: config, conditioned Bloch vector, Pr(config), jump flag"""
    flags = trajectory.jump_flags
    rows = ([fmt(t)] + [int(n) for n in config] + [fmt(v) for v in bloch] + [fmt(p), int(flag)]
            for t, config, bloch, p, flag in zip(trajectory.times, trajectory.configs,
                                                  trajectory.bloch, trajectory.probabilities, flags))
    return _write_rows(path, trajectory_columns(trajectory.configs.shape[1]), rows)


def write_jumps_csv(path, trajectory):
    rows = ([fmt(t), format_config(source), format_config(target)]
            for t, source, target in trajectory.jumps)
    return _write_rows(path, JUMP_COLUMNS, rows)


def write_ensemble_csv(path, ensemble, difference):
    rows = ([fmt(t)] + [fmt(v) for v in mean] + [fmt(v) for v in exact] + [fmt(v) for v in se] + [fmt(d)]
            for t, mean, exact, se, d in zip(difference.times, ensemble.mean_bloch, difference.exact,
                                             ensemble.standard_error, difference.trace_distance))
    return _write_rows(path, ENSEMBLE_COLUMNS, rows)


def write_ctau_csv(path, times, profiles):
    """profiles: list of (tau, label, complex series)"""
    rows = ([fmt(t), tau, label, fmt(c.real), fmt(c.imag), fmt(abs(c) ** 2)]
            for tau, label, series in profiles for t, c in zip(times, series))
    return _write_rows(path, CTAU_COLUMNS, rows)


def write_rates_csv(path, t, table):
    """Neighbours with a nonzero rate out of the table's source configuration"""
    rows = ([fmt(t), format_config(table.source), format_config(target), fmt(j), fmt(rate)]
            for target, j, rate in zip(table.targets, table.currents, table.rates) if rate > 0)
    return _write_rows(path, RATE_COLUMNS, rows)


def write_born_csv(path, configs, probabilities):
    rows = ([int(n) for n in config] + [fmt(p)] for config, p in zip(configs, probabilities))
    return _write_rows(path, born_columns(len(configs[0])), rows)


def write_manifest(path, manifest):
    path = Path(path)
    manifest = {'schema_version': SCHEMA_VERSION, **manifest}
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(manifest, f, indent=2, sort_keys=True, default=_json_default)
        f.write('\n')
    logger.info(f"Wrote {path}")
    return path


def _json_default(value):
    if hasattr(value, 'tolist'):
        return value.tolist()
    if isinstance(value, complex):
        return [value.real, value.imag]
    raise TypeError(f"cannot serialise {type(value).__name__}")
