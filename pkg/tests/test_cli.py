import json

import pytest
from click.testing import CliRunner

from nolmswitch import __version__
from nolmswitch.cli import main
from nolmswitch.output import SUMMARY_FILE
from nolmswitch.records import write_records
from nolmswitch.tomography import NoiseParams, expected_records, standard_settings


@pytest.fixture
def runner(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv('NOLMSIM_OUTPUT_DIR', raising=False)
    monkeypatch.delenv('NOLMSIM_SEED', raising=False)
    return CliRunner()


def test_version(runner):
    result = runner.invoke(main, ['--version'])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_help_lists_every_scenario(runner):
    result = runner.invoke(main, ['-h'])
    assert result.exit_code == 0
    for command in ('contrast', 'window', 'background', 'switch-tomography', 'sep-colors', 'tdm-demux', 'eye',
                    'reconstruct'):
        assert command in result.output


def test_passing_run(runner, tmp_path):
    result = runner.invoke(main, ['--quiet', 'sep-colors', '--out', 'colors', '--seed', '3'])
    assert result.exit_code == 0, result.output
    summary = json.loads((tmp_path / 'colors' / SUMMARY_FILE).read_text())
    assert summary['seed'] == 3
    assert summary['passed'] is True


def test_default_output_directory(runner, tmp_path, monkeypatch):
    monkeypatch.setenv('NOLMSIM_OUTPUT_DIR', str(tmp_path / 'runs'))
    monkeypatch.setenv('NOLMSIM_SEED', '8')
    result = runner.invoke(main, ['sep-colors'])
    assert result.exit_code == 0, result.output
    summary = json.loads((tmp_path / 'runs' / 'sep-colors' / SUMMARY_FILE).read_text())
    assert summary['seed'] == 8


def test_config_output_directory(runner, tmp_path):
    (tmp_path / 'config.json').write_text(json.dumps({'seed': 2, 'output_dir': 'from-config'}))
    result = runner.invoke(main, ['sep-colors', '--config', 'config.json'])
    assert result.exit_code == 0, result.output
    assert (tmp_path / 'from-config' / SUMMARY_FILE).exists()


def test_failed_verdict_exits_with_2(runner, tmp_path):
    (tmp_path / 'config.json').write_text(json.dumps({'sweep': {'edfa_nj_per_mw': 0.01}}))
    result = runner.invoke(main, ['sep-colors', '-c', 'config.json', '-o', 'weak'])
    assert result.exit_code == 2
    summary = json.loads((tmp_path / 'weak' / SUMMARY_FILE).read_text())
    assert summary['passed'] is False


def test_bad_configuration_exits_with_1(runner, tmp_path):
    (tmp_path / 'config.json').write_text(json.dumps({'sweep': {'lengths': [100]}}))
    result = runner.invoke(main, ['sep-colors', '-c', 'config.json', '-o', 'bad'])
    assert result.exit_code == 1
    assert not (tmp_path / 'bad').exists()


def test_missing_config_file(runner):
    result = runner.invoke(main, ['eye', '-c', 'no-such-file.json'])
    assert result.exit_code == 1
    assert 'no-such-file.json' in result.output


@pytest.mark.parametrize(
    'args',
    [
        ['eye', '--seed', '-1'],
        ['eye', '--seed', 'seven'],
        ['eye', '--no-such-option'],
        ['no-such-scenario'],
        ['reconstruct'],
        ['reconstruct', '--counts', 'counts.csv', '--resamples', '1'],
    ]
)
def test_usage_errors_exit_with_1(runner, tmp_path, args):
    (tmp_path / 'counts.csv').write_text('')
    result = runner.invoke(main, args)
    assert result.exit_code == 1, result.output
    assert 'Error' in result.output
    assert not (tmp_path / 'output').exists()


def test_reconstruct(runner, tmp_path, phi_plus):
    settings = standard_settings()
    records = expected_records(phi_plus, settings, 20_000_000, 0.01, NoiseParams())
    with (tmp_path / 'counts.csv').open('w') as fh:
        write_records(records, settings, fh)

    result = runner.invoke(main, ['reconstruct', '--counts', 'counts.csv', '--resamples', '3', '-o', 'rho'])
    assert result.exit_code == 0, result.output
    document = json.loads((tmp_path / 'rho' / 'rho.json').read_text())
    assert document['metrics']['fidelity_max'] > 0.999
    assert document['n_resamples'] == 3


def test_reconstruct_rejects_malformed_counts(runner, tmp_path):
    (tmp_path / 'counts.csv').write_text('setting_id,raw\n0,12\n')
    result = runner.invoke(main, ['reconstruct', '--counts', 'counts.csv'])
    assert result.exit_code == 1
