from dataclasses import dataclass
from os.path import dirname
from pathlib import Path
from typing import Mapping, Optional

import yaml

TARGETS_FILE = Path(dirname(__file__)) / 'targets.yml'
CHECKS = {'abs', 'rel', 'min', 'max', 'range'}

# relative slack on min/max/range bounds, so round-off at a bound is not a failure
BOUND_SLACK = 1e-9


@dataclass(frozen=True)
class Target:
    reference: float
    check: str
    tolerance: float = 0.0
    low: Optional[float] = None
    high: Optional[float] = None
    description: str = ''

    def __post_init__(self):
        if self.check not in CHECKS:
            raise ValueError(f'Unknown check "{self.check}"; expected one of {", ".join(sorted(CHECKS))}')
        if self.check in {'min', 'range'} and self.low is None:
            raise ValueError(f'A "{self.check}" target needs "low"')
        if self.check in {'max', 'range'} and self.high is None:
            raise ValueError(f'A "{self.check}" target needs "high"')

    @property
    def criterion(self) -> str:
        """Human-readable acceptance criterion."""
        match self.check:
            case 'abs':
                return f'|value - {self.reference}| <= {self.tolerance}'
            case 'rel':
                return f'|value - {self.reference}| <= {self.tolerance} * {abs(self.reference)}'
            case 'min':
                return f'value >= {self.low}'
            case 'max':
                return f'value <= {self.high}'
            case _:
                return f'{self.low} <= value <= {self.high}'

    def passes(self, value: float) -> bool:
        match self.check:
            case 'abs':
                return abs(value - self.reference) <= self.tolerance
            case 'rel':
                return abs(value - self.reference) <= self.tolerance * abs(self.reference)
        low_ok = self.low is None or value >= self.low - BOUND_SLACK * abs(self.low)
        high_ok = self.high is None or value <= self.high + BOUND_SLACK * abs(self.high)
        return low_ok and high_ok


@dataclass(frozen=True)
class TargetTable:
    version: int
    scenarios: Mapping[str, Mapping[str, Target]]

    def for_scenario(self, scenario: str) -> Mapping[str, Target]:
        return self.scenarios.get(scenario, {})


def load_targets(path: Path = TARGETS_FILE) -> TargetTable:
    with path.open() as fh:
        document = yaml.safe_load(fh)
    return TargetTable(
        version=int(document['version']),
        scenarios={
            scenario: {name: Target(**entry) for name, entry in metrics.items()}
            for scenario, metrics in document['scenarios'].items()
        },
    )
