import logging
from csv import DictReader, DictWriter
from typing import Mapping, Sequence, TextIO

from nolmswitch.tomography import AnalyzerSetting, CountRecord

logger = logging.getLogger(__name__)

FIELDNAMES = [
    'setting_id',
    'qwp_s',
    'hwp_s',
    'qwp_i',
    'hwp_i',
    'n_pulses',
    'raw',
    'singles_s',
    'singles_i',
    'accidentals',
    'corrected',
]


class RecordFormatError(ValueError):
    pass


def _number(value: float | str) -> int | float:
    value = float(value)
    return int(value) if value.is_integer() else value


def record_row(record: CountRecord, setting: AnalyzerSetting) -> dict[str, int | float]:
    return {
        'setting_id': record.setting_id,
        'qwp_s': float(setting.qwp_signal_deg),
        'hwp_s': float(setting.hwp_signal_deg),
        'qwp_i': float(setting.qwp_idler_deg),
        'hwp_i': float(setting.hwp_idler_deg),
        'n_pulses': record.n_pulses,
        'raw': _number(record.coincidences_raw),
        'singles_s': _number(record.singles_signal),
        'singles_i': _number(record.singles_idler),
        'accidentals': float(record.accidentals_est),
        'corrected': float(record.coincidences_corrected),
    }


def write_records(records: Sequence[CountRecord],
                  settings: Sequence[AnalyzerSetting] | Mapping[int, AnalyzerSetting],
                  output_file: TextIO):
    """Write one CSV row per record, in setting id order."""
    writer = DictWriter(output_file, fieldnames=FIELDNAMES, lineterminator='\n')
    writer.writeheader()
    for record in sorted(records, key=lambda r: r.setting_id):
        writer.writerow(record_row(record, settings[record.setting_id]))


def read_records(input_file: TextIO) -> tuple[list[CountRecord], dict[int, AnalyzerSetting]]:
    """
    Parse a count CSV. Returns the records and the analyzer settings they were
    taken with, keyed by setting id.
    """
    reader = DictReader(input_file)
    missing = set(FIELDNAMES) - set(reader.fieldnames or [])
    if missing:
        raise RecordFormatError(f'Count file is missing columns: {", ".join(sorted(missing))}')

    records = []
    settings = {}
    for line_number, row in enumerate(reader, start=2):
        try:
            setting_id = int(row['setting_id'])
            if setting_id in settings:
                raise RecordFormatError(f'Duplicate setting id {setting_id}')
            settings[setting_id] = AnalyzerSetting(
                float(row['qwp_s']), float(row['hwp_s']), float(row['qwp_i']), float(row['hwp_i']),
            )
            records.append(CountRecord(
                setting_id=setting_id,
                n_pulses=int(row['n_pulses']),
                coincidences_raw=_number(row['raw']),
                singles_signal=_number(row['singles_s']),
                singles_idler=_number(row['singles_i']),
                accidentals_est=float(row['accidentals']),
                coincidences_corrected=float(row['corrected']),
            ))
        except (TypeError, ValueError) as e:
            raise RecordFormatError(f'Line {line_number}: {e}') from e

    if not records:
        raise RecordFormatError('Count file contains no records')
    logger.debug(f'Read {len(records)} count records')
    return records, settings
