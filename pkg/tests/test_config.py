from io import StringIO

import pytest

from nolmswitch.config import (
    DEFAULT_SWEEPS,
    ConfigurationError,
    ExperimentConfig,
    Scenario,
    load_config,
    parse_config,
)
from nolmswitch.switch import SwitchConfig


@pytest.mark.parametrize('scenario', list(Scenario))
def test_defaults(scenario):
    config = load_config(None, scenario)
    assert config.scenario is scenario
    assert config.seed == 0
    assert config.sweep == DEFAULT_SWEEPS[scenario]
    assert config.sweep is not DEFAULT_SWEEPS[scenario]
    assert config.output_dir is None


def test_default_seed():
    assert load_config(None, Scenario.EYE, default_seed=9).seed == 9
    assert parse_config({'seed': 3}, Scenario.EYE, default_seed=9).seed == 3


def test_load_json(datadir):
    config = load_config(str(datadir / 'window.json'), Scenario.WINDOW)
    assert config.seed == 42
    assert config.switch.extinction == 0.01
    assert config.switch.fiber.length_m == 100
    assert config.switch.pump.fwhm_ps == 4.0
    assert config.switch.pump.energy_nj == 2.0
    assert config.switch.loss_t_db == SwitchConfig().loss_t_db
    assert config.source.visibility == 0.98
    assert config.noise.dark_prob_per_gate == 2e-5
    assert config.sweep['lengths_m'] == [100]
    assert config.sweep['delay_step_ps'] == 10
    assert config.sweep['probe_fwhm_ps'] == DEFAULT_SWEEPS[Scenario.WINDOW]['probe_fwhm_ps']
    assert config.output_dir == 'runs/window'


def test_load_yaml_from_open_file(datadir):
    with (datadir / 'tomography.yml').open() as fh:
        config = load_config(fh, Scenario.SWITCH_TOMO)
    assert config.seed == 7
    assert config.sweep['n_pulses'] == 1_000_000
    assert config.sweep['n_resamples'] == 4
    assert config.sweep['gate_ps'] == DEFAULT_SWEEPS[Scenario.SWITCH_TOMO]['gate_ps']


def test_unknown_nested_key(datadir):
    with pytest.raises(ConfigurationError, match='switch.fiber'):
        load_config(str(datadir / 'unknown_key.json'), Scenario.CONTRAST)


def test_unparseable_file(datadir):
    with pytest.raises(ConfigurationError, match='Unable to parse'):
        load_config(str(datadir / 'not_yaml.yml'), Scenario.CONTRAST)


def test_scenario_mismatch(datadir):
    with pytest.raises(ConfigurationError, match='not "eye"'):
        load_config(str(datadir / 'window.json'), Scenario.EYE)


def test_empty_document_takes_defaults():
    assert load_config(StringIO(''), Scenario.EYE).sweep == DEFAULT_SWEEPS[Scenario.EYE]


@pytest.mark.parametrize(
    'document',
    [
        ['not', 'a', 'mapping'],
        {'colour': 'blue'},
        {'seed': -1},
        {'seed': 1.5},
        {'seed': True},
        {'output_dir': 5},
        {'switch': {'extinction': 0.7}},
        {'switch': {'pump': {'profile': [1, 2, 3]}}},
        {'source': {'visibility': 2}},
        {'noise': {'efficiency_signal': 0}},
        {'sweep': {'lengths_m': []}},
        {'sweep': {'lengths_m': [100, 'long']}},
        {'sweep': {'delay_step_ps': -5}},
        {'sweep': {'delay_step_ps': 'fast'}},
        {'sweep': {'n_pulses': 10}},
    ]
)
def test_invalid_documents(document):
    with pytest.raises(ConfigurationError):
        parse_config(document, Scenario.WINDOW)


def test_experiment_config_fills_in_the_sweep():
    config = ExperimentConfig(Scenario.TDM_DEMUX)
    assert config.sweep['delay_ps'] == 225.0
    assert config.sweep['multiplexed_visibility'] == 0.9485
