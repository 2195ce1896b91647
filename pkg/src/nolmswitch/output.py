import json
import logging
import os
from csv import DictWriter
from dataclasses import dataclass, field
from pathlib import Path
from tempfile import mkstemp
from typing import Any, Callable, Iterable, Mapping, Sequence, TextIO

import numpy as np

from nolmswitch.records import write_records
from nolmswitch.targets import Target
from nolmswitch.tomography import AnalyzerSetting, CountRecord, ReconstructionResult

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SUMMARY_FILE = 'summary.json'


@dataclass(frozen=True)
class Metric:
    name: str
    value: float
    reference: float
    criterion: str
    passed: bool

    def as_dict(self) -> dict[str, Any]:
        return {
            'name': self.name,
            'value': self.value,
            'reference': self.reference,
            'criterion': self.criterion,
            'passed': self.passed,
        }


@dataclass
class RunSummary:
    """
    Headline metrics of one scenario run with their verdicts. The wall time is
    kept for logging and left out of the written summary, so that reruns with
    the same configuration and seed produce identical files.
    """
    scenario: str
    seed: int
    targets_version: int
    metrics: list[Metric] = field(default_factory=list)
    details: dict[str, Any] = field(default_factory=dict)
    files: list[str] = field(default_factory=list)
    wall_time_s: float = 0.0

    @property
    def passed(self) -> bool:
        return all(metric.passed for metric in self.metrics)

    @property
    def failures(self) -> list[Metric]:
        return [metric for metric in self.metrics if not metric.passed]

    def check(self, name: str, value: float, targets: Mapping[str, Target]) -> Metric:
        target = targets[name]
        value = float(value)
        metric = Metric(name, value, target.reference, target.criterion, bool(target.passes(value)))
        self.metrics.append(metric)
        log = logger.info if metric.passed else logger.warning
        log(f'{self.scenario}: {name} = {value:.6g} ({"pass" if metric.passed else "FAIL"}: {metric.criterion})')
        return metric

    def record(self, name: str, value: float, targets: Mapping[str, Target]):
        """Check `value` when `name` has a target; otherwise keep it as a detail."""
        if name in targets:
            self.check(name, value, targets)
        else:
            self.details[name] = float(value)

    def as_dict(self) -> dict[str, Any]:
        return {
            'schema_version': SCHEMA_VERSION,
            'scenario': self.scenario,
            'seed': self.seed,
            'targets_version': self.targets_version,
            'passed': self.passed,
            'metrics': [metric.as_dict() for metric in self.metrics],
            'details': self.details,
            'files': sorted(self.files),
        }


def atomic_write(path: Path, write: Callable[[TextIO], None]):
    """Write a file through `write` into a temporary sibling, then rename it into place."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, temp_name = mkstemp(dir=path.parent, prefix=f'.{path.name}.', suffix='.tmp')
    try:
        with os.fdopen(fd, 'w', newline='') as fh:
            write(fh)
        os.replace(temp_name, path)
    except BaseException:
        if os.path.exists(temp_name):
            os.unlink(temp_name)
        raise


def _plain(value: Any) -> Any:
    """Convert numpy scalars so that CSV and JSON carry full-precision Python numbers."""
    if isinstance(value, np.generic):
        return value.item()
    return value


def density_matrix_document(result: ReconstructionResult) -> dict[str, Any]:
    entries = result.rho.entries
    return {
        'schema_version': SCHEMA_VERSION,
        'real': entries.real.tolist(),
        'imag': entries.imag.tolist(),
        'metrics': result.metrics.as_dict(),
        'metric_uncertainties': result.metric_uncertainties,
        'n_resamples': result.n_resamples,
        'objective_value': result.objective_value,
        'normalization': result.normalization,
    }


class RunOutput:
    """Writes the files of one run into `directory`, remembering their names."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.files: list[str] = []

    def _path(self, name: str) -> Path:
        self.files.append(name)
        return self.directory / name

    def write_csv(self, name: str, fieldnames: Sequence[str], rows: Iterable[Mapping[str, Any]]):
        rows = [{key: _plain(value) for key, value in row.items()} for row in rows]

        def write(fh: TextIO):
            writer = DictWriter(fh, fieldnames=fieldnames, lineterminator='\n')
            writer.writeheader()
            writer.writerows(rows)

        atomic_write(self._path(name), write)

    def write_json(self, name: str, document: Mapping[str, Any]):
        def write(fh: TextIO):
            json.dump(document, fh, indent=2, sort_keys=True, default=_plain)
            fh.write('\n')

        atomic_write(self._path(name), write)

    def write_records(self, name: str, records: Sequence[CountRecord], settings: Sequence[AnalyzerSetting]):
        atomic_write(self._path(name), lambda fh: write_records(records, settings, fh))

    def write_density_matrix(self, name: str, result: ReconstructionResult):
        self.write_json(name, density_matrix_document(result))

    def write_summary(self, summary: RunSummary):
        summary.files = list(self.files)
        self.write_json(SUMMARY_FILE, summary.as_dict())
        logger.info(f'Wrote {len(self.files)} files to {self.directory}')
