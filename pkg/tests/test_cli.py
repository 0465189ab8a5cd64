import csv
import json
import logging

import pytest

from modaljump import cli, output
from modaljump.config import run_config
from modaljump.config.model_config import PRESETS

SMALL = """\
[model]
num_modes = 1
couplings = 1.0
detunings = 0.0
rabi = 5.0

[numerics]
cutoff = 6
dt = 0.001
t_final = 1.0

[run]
seed = 11
n_trajectories = 20
"""

FREE = SMALL.replace('couplings = 1.0', 'couplings = 0.0')


def write_config(tmp_path, text, name='run.ini'):
    path = tmp_path / name
    path.write_text(text, encoding='utf-8')
    return str(path)


def read_rows(path):
    with open(path, newline='', encoding='utf-8') as f:
        return list(csv.reader(f))


def test_no_command_prints_help(capsys):
    assert cli.main([]) == cli.EXIT_OK
    assert 'trajectory' in capsys.readouterr().out


def test_template(capsys):
    assert cli.main(['template', '--preset', 'three-mode-temporal']) == cli.EXIT_OK
    text = capsys.readouterr().out
    assert 'preset = three-mode-temporal' in text
    assert '[probe]' in text


def test_trajectory_writes_outputs(tmp_path):
    config = write_config(tmp_path, SMALL)
    out = tmp_path / 'out'
    assert cli.main(['trajectory', '--config', config, '--out', str(out), '--quiet']) == cli.EXIT_OK
    rows = read_rows(out / 'trajectory.csv')
    assert rows[0] == output.trajectory_columns(1)
    assert rows[0] == ['t', 'config_1', 'x', 'y', 'z', 'norm', 'jump_flag']
    assert len(rows) == 1 + 1001
    assert read_rows(out / 'jumps.csv')[0] == ['t', 'from', 'to']
    manifest = json.loads((out / 'run_manifest.json').read_text(encoding='utf-8'))
    assert manifest['command'] == 'trajectory'
    assert manifest['seed'] == 11
    assert manifest['files'] == ['trajectory.csv', 'jumps.csv']


def test_trajectory_is_byte_identical_on_rerun(tmp_path):
    config = write_config(tmp_path, SMALL)
    for name in ('a', 'b'):
        assert cli.main(['trajectory', '--config', config, '--out', str(tmp_path / name), '-q']) == 0
    for name in ('trajectory.csv', 'jumps.csv'):
        assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()


def test_manifest_reproduces_the_run(tmp_path):
    config = write_config(tmp_path, SMALL)
    first = tmp_path / 'first'
    assert cli.main(['trajectory', '--config', config, '--out', str(first), '-q']) == 0
    second = tmp_path / 'second'
    manifest = str(first / 'run_manifest.json')
    assert cli.main(['trajectory', '--config', manifest, '--out', str(second), '-q']) == 0
    assert (first / 'trajectory.csv').read_bytes() == (second / 'trajectory.csv').read_bytes()


def test_seed_override_changes_manifest(tmp_path):
    config = write_config(tmp_path, SMALL)
    out = tmp_path / 'out'
    assert cli.main(['trajectory', '--config', config, '--seed', '99', '--out', str(out), '-q']) == 0
    manifest = json.loads((out / 'run_manifest.json').read_text(encoding='utf-8'))
    assert manifest['config']['run']['seed'] == 99


def test_trajectory_warns_about_ensemble_size(tmp_path, caplog):
    caplog.set_level(logging.WARNING, logger='modaljump')
    config = write_config(tmp_path, SMALL)
    cli.main(['trajectory', '--config', config, '--out', str(tmp_path / 'out'), '-q'])
    assert 'n_trajectories is ignored' in caplog.text


def test_free_ensemble_passes(tmp_path):
    config = write_config(tmp_path, FREE)
    out = tmp_path / 'out'
    assert cli.main(['ensemble', '--config', config, '-n', '8', '--threads', '2',
                     '--out', str(out), '-q']) == cli.EXIT_OK
    rows = read_rows(out / 'ensemble.csv')
    assert rows[0] == output.ENSEMBLE_COLUMNS
    assert len(rows) == 1 + 1001
    manifest = json.loads((out / 'run_manifest.json').read_text(encoding='utf-8'))
    assert manifest['diagnostics']['acceptance'] is True
    assert manifest['diagnostics']['trajectories'] == 8


def test_ensemble_manifest_pins_the_batch_size(tmp_path, monkeypatch):
    config = write_config(tmp_path, SMALL.replace('seed = 11', 'seed = 11\nbatch_size = 3'))
    first = tmp_path / 'first'
    cli.main(['ensemble', '--config', config, '-n', '10', '--out', str(first), '-q'])
    manifest = json.loads((first / 'run_manifest.json').read_text(encoding='utf-8'))
    assert manifest['config']['run']['batch_size'] == 3
    assert manifest['diagnostics']['batch_size'] == 3

    monkeypatch.setattr(run_config, 'BATCH_SIZE', 7)
    second = tmp_path / 'second'
    cli.main(['ensemble', '--config', str(first / 'run_manifest.json'), '--out', str(second), '-q'])
    assert (first / 'ensemble.csv').read_bytes() == (second / 'ensemble.csv').read_bytes()


def test_batch_size_defaults_from_environment_setting(tmp_path, monkeypatch):
    monkeypatch.setattr(run_config, 'BATCH_SIZE', 5)
    config = write_config(tmp_path, FREE)
    out = tmp_path / 'out'
    assert cli.main(['ensemble', '--config', config, '-n', '6', '--out', str(out), '-q']) == cli.EXIT_OK
    manifest = json.loads((out / 'run_manifest.json').read_text(encoding='utf-8'))
    assert manifest['config']['run']['batch_size'] == 5


@pytest.mark.slow
@pytest.mark.parametrize('preset', sorted(PRESETS))
def test_preset_defaults_stay_below_the_hard_limit(preset, preset_run):
    config, model, result = preset_run(preset)
    assert model.spec.cutoff == PRESETS[preset]['cutoff']
    assert result.grid.t_final == pytest.approx(PRESETS[preset]['t_final'])
    assert result.peak_leakage < 1e-2 < config.numerics.leakage_hard_limit
    assert result.max_norm_error < 1e-6


@pytest.mark.slow
def test_single_mode_preset_trajectory(tmp_path):
    out = tmp_path / 'out'
    assert cli.main(['trajectory', '--preset', 'single-mode', '--out', str(out), '-q']) == cli.EXIT_OK
    assert len(read_rows(out / 'trajectory.csv')) == 1 + 20001
    manifest = json.loads((out / 'run_manifest.json').read_text(encoding='utf-8'))
    assert manifest['diagnostics']['leakage_flag'] is False


def test_born_at_start(tmp_path):
    config = write_config(tmp_path, SMALL)
    out = tmp_path / 'out'
    assert cli.main(['probe', '--config', config, '--what', 'born-at', '--probe-time', '0',
                     '--out', str(out), '-q']) == 0
    rows = read_rows(out / 'probe_born.csv')
    assert rows[0] == ['config_1', 'probability']
    assert float(rows[1][1]) == 1.0
    assert all(float(row[1]) == 0.0 for row in rows[2:])


def test_rates_at_without_coupling(tmp_path):
    config = write_config(tmp_path, FREE)
    out = tmp_path / 'out'
    assert cli.main(['probe', '--config', config, '--what', 'rates-at', '--probe-time', '0.5',
                     '--out', str(out), '-q']) == 0
    assert read_rows(out / 'probe_rates.csv') == [output.RATE_COLUMNS]


def test_rates_at_with_coupling(tmp_path):
    config = write_config(tmp_path, SMALL)
    out = tmp_path / 'out'
    assert cli.main(['probe', '--config', config, '--what', 'rates-at', '--probe-time', '0.5',
                     '--out', str(out), '-q']) == 0
    rows = read_rows(out / 'probe_rates.csv')
    assert len(rows) <= 3
    for row in rows[1:]:
        assert float(row[3]) > 0
        assert float(row[4]) > 0


def test_ctau_series(tmp_path, capsys):
    out = tmp_path / 'out'
    assert cli.main(['probe', '--preset', 'three-mode-temporal', '--what', 'ctau', '--tau', '2',
                     '--out', str(out)]) == 0
    rows = read_rows(out / 'probe_ctau.csv')
    assert rows[0] == output.CTAU_COLUMNS
    assert len(rows) == 1 + 10001
    assert rows[1][1:3] == ['2', '0']
    assert float(rows[1][5]) == pytest.approx(3.0)
    assert 'peaks at' in capsys.readouterr().out


def test_diagnostic_time_outside_grid(tmp_path, capsys):
    config = write_config(tmp_path, SMALL)
    assert cli.main(['probe', '--config', config, '--what', 'born-at', '--probe-time', '5',
                     '--out', str(tmp_path / 'out'), '-q']) == cli.EXIT_USAGE
    assert 'outside grid' in capsys.readouterr().err


def test_config_error_exit_code(tmp_path, capsys):
    config = write_config(tmp_path, SMALL.replace('dt = 0.001', 'dt = -0.001'))
    assert cli.main(['trajectory', '--config', config, '-q']) == cli.EXIT_USAGE
    assert 'run.ini:9' in capsys.readouterr().err


def test_leakage_above_hard_limit(tmp_path, capsys):
    text = SMALL.replace('cutoff = 6', 'cutoff = 1').replace('t_final = 1.0', 't_final = 3.0')
    text = text.replace('t_final = 3.0', 't_final = 3.0\nleakage_hard_limit = 1e-6')
    config = write_config(tmp_path, text)
    assert cli.main(['trajectory', '--config', config, '--out', str(tmp_path / 'out'),
                     '-q']) == cli.EXIT_NUMERICAL
    assert 'hard limit' in capsys.readouterr().err


def test_output_dir_from_environment(tmp_path, monkeypatch):
    config = write_config(tmp_path, SMALL)
    monkeypatch.setenv('MODALJUMP_OUTPUT_DIR', str(tmp_path / 'env-out'))
    assert cli.main(['trajectory', '--config', config, '-q']) == 0
    assert (tmp_path / 'env-out' / 'trajectory.csv').exists()
