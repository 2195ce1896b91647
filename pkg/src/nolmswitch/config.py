import json
import logging
from copy import deepcopy
from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Any, Optional, TextIO

import yaml

from nolmswitch.source import SourceConfig
from nolmswitch.switch import FiberParams, PumpPulse, SwitchConfig
from nolmswitch.tomography import NoiseParams

logger = logging.getLogger(__name__)


class ConfigurationError(ValueError):
    pass


class Scenario(Enum):
    CONTRAST = 'contrast'
    WINDOW = 'window'
    BACKGROUND = 'background'
    SWITCH_TOMO = 'switch-tomography'
    SEP_COLORS = 'sep-colors'
    TDM_DEMUX = 'tdm-demux'
    EYE = 'eye'


TEST_PULSE = {
    'probe_fwhm_ps': 100.0,
    'probe_width_ps': 370.0,
    'probe_tail_fraction': 0.1,
    'probe_tail_decay_ps': 120.0,
}

DEFAULT_SWEEPS = {
    Scenario.CONTRAST: {
        'lengths_m': [100, 500],
        'energies_nj': [0.25 * k for k in range(21)],
        **TEST_PULSE,
    },
    Scenario.WINDOW: {
        'lengths_m': [2, 100, 500],
        'delay_step_ps': 5.0,
        **TEST_PULSE,
    },
    Scenario.BACKGROUND: {
        'lengths_m': [50, 100, 250, 500],
        'edfa_powers_mw': [20.0, 40.0, 60.0, 80.0, 100.0],
        'edfa_nj_per_mw': 0.025,
        'n_pulses': 10_000_000_000,
        'gate_ps': 200.0,
    },
    Scenario.SWITCH_TOMO: {
        'lengths_m': [100, 500],
        'n_pulses': 850_000,
        'n_resamples': 100,
        'gate_ps': 200.0,
    },
    Scenario.SEP_COLORS: {
        'length_m': 500,
        'edfa_powers_mw': [0.0, 20.0, 40.0, 60.0, 80.0, 100.0],
        'edfa_nj_per_mw': 0.025,
    },
    Scenario.TDM_DEMUX: {
        'length_m': 100,
        'delay_ps': 225.0,
        'n_pulses': 20_000_000,
        'n_resamples': 100,
        'gate_ps': 200.0,
        'multiplexed_visibility': 0.9485,
    },
    Scenario.EYE: {
        'length_m': 100,
        'delay_start_ps': 0.0,
        'delay_stop_ps': 800.0,
        'delay_step_ps': 5.0,
        'n_pulses': 100_000_000,
    },
}

TOP_LEVEL_KEYS = {'scenario', 'seed', 'switch', 'source', 'noise', 'sweep', 'output_dir'}


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: Scenario
    seed: int = 0
    switch: SwitchConfig = field(default_factory=SwitchConfig)
    source: SourceConfig = field(default_factory=SourceConfig)
    noise: NoiseParams = field(default_factory=NoiseParams)
    sweep: dict[str, Any] = field(default_factory=dict)
    output_dir: Optional[str] = None

    def __post_init__(self):
        if not self.sweep:
            object.__setattr__(self, 'sweep', deepcopy(DEFAULT_SWEEPS[self.scenario]))


def _field_names(cls) -> set[str]:
    return {f.name for f in fields(cls)}


def _check_keys(section: str, values: Any, allowed: set[str]):
    if not isinstance(values, dict):
        raise ConfigurationError(f'"{section}" must be a mapping, got {type(values).__name__}')
    unknown = set(values) - allowed
    if unknown:
        raise ConfigurationError(f'Unknown keys in "{section}": {", ".join(sorted(map(str, unknown)))}')


def _build(cls, section: str, values: dict[str, Any], **nested):
    _check_keys(section, values, _field_names(cls) - set(nested))
    try:
        return cls(**{**values, **nested})
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f'Invalid "{section}" configuration: {e}') from e


def build_switch(values: dict[str, Any]) -> SwitchConfig:
    _check_keys('switch', values, _field_names(SwitchConfig))
    values = dict(values)
    fiber = _build(FiberParams, 'switch.fiber', values.pop('fiber', {}))
    pump = _build(PumpPulse, 'switch.pump', values.pop('pump', {}), profile=None)
    return _build(SwitchConfig, 'switch', values, fiber=fiber, pump=pump)


def build_sweep(scenario: Scenario, values: dict[str, Any]) -> dict[str, Any]:
    defaults = DEFAULT_SWEEPS[scenario]
    _check_keys('sweep', values, set(defaults))
    sweep = deepcopy(defaults)
    for key, value in values.items():
        if isinstance(defaults[key], list):
            if not isinstance(value, list) or not value:
                raise ConfigurationError(f'"sweep.{key}" must be a non-empty list')
            if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
                raise ConfigurationError(f'"sweep.{key}" must contain only numbers')
        elif isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f'"sweep.{key}" must be a number')
        elif value < 0:
            raise ConfigurationError(f'"sweep.{key}" must be nonnegative')
        sweep[key] = value
    return sweep


def parse_config(document: Optional[dict[str, Any]], scenario: Scenario, default_seed: int = 0) -> ExperimentConfig:
    """
    Build an ExperimentConfig for `scenario` from a parsed configuration document.
    Missing keys take their defaults; unknown keys at any level are rejected.
    """
    document = {} if document is None else document
    _check_keys('configuration', document, TOP_LEVEL_KEYS)

    declared = document.get('scenario')
    if declared is not None and declared != scenario.value:
        raise ConfigurationError(f'Configuration is for scenario "{declared}", not "{scenario.value}"')

    seed = document.get('seed', default_seed)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigurationError(f'"seed" must be a nonnegative integer, got {seed!r}')
    output_dir = document.get('output_dir')
    if output_dir is not None and not isinstance(output_dir, str):
        raise ConfigurationError('"output_dir" must be a string')

    config = ExperimentConfig(
        scenario=scenario,
        seed=seed,
        switch=build_switch(document.get('switch', {})),
        source=_build(SourceConfig, 'source', document.get('source', {})),
        noise=_build(NoiseParams, 'noise', document.get('noise', {})),
        sweep=build_sweep(scenario, document.get('sweep', {})),
        output_dir=output_dir,
    )
    logger.debug(f'Experiment configuration: {config}')
    return config


def load_config(config_source: Optional[str | TextIO], scenario: Scenario, default_seed: int = 0) -> ExperimentConfig:
    """
    Load the configuration for `scenario` from a path or an open file. The file is
    a JSON document; YAML is accepted as well. With no source, every value takes
    its default.
    """
    if config_source is None:
        return parse_config(None, scenario, default_seed)
    if isinstance(config_source, str):
        with open(config_source) as fh:
            text = fh.read()
    else:
        text = config_source.read()
    return parse_config(parse_document(text), scenario, default_seed)


def parse_document(text: str) -> Any:
    # YAML 1.1 reads exponent numbers without a decimal point (1e-5) as strings
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigurationError(f'Unable to parse configuration: {e}') from e
