from dataclasses import MISSING
from os import environ
from typing import Any, Optional

import numpy as np


class EnvAttribute:
    """
    Descriptor class that maps an attribute of a class to an environment variable.
    The value is read on every access, so changes to the environment are picked up
    without re-creating the settings object.
    """
    def __init__(self, env_var: str, default: Optional[Any] = MISSING):
        self.env_var = env_var
        self.default = default

    def __set_name__(self, owner, name):
        self.name = name

    def __get__(self, instance, owner):
        if self.default is not MISSING:
            value = environ.get(self.env_var, self.default)
        else:
            value = environ.get(self.env_var)

        # use the attribute's type annotation, if any, to cast the string
        # value from the environment variable
        annotations = getattr(owner, '__annotations__', {})
        if value is not None and self.name in annotations:
            return annotations[self.name](value)
        return value


class Settings:
    output_dir = EnvAttribute('NOLMSIM_OUTPUT_DIR', 'output')
    log_level = EnvAttribute('NOLMSIM_LOG_LEVEL', 'INFO')
    seed: int = EnvAttribute('NOLMSIM_SEED', '0')


def derive_seed(root_seed: int, index: int) -> int:
    """Seed for the sweep point or resample at `index` under `root_seed`."""
    return int(root_seed) + int(index)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)
