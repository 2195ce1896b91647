import logging
from dataclasses import replace
from pathlib import Path
from typing import Optional, TextIO

import click
from dotenv import load_dotenv

from nolmswitch import __version__
from nolmswitch.config import ConfigurationError, Scenario, load_config
from nolmswitch.experiments import run
from nolmswitch.output import RunOutput
from nolmswitch.records import RecordFormatError, read_records
from nolmswitch.switch import WindowFitError
from nolmswitch.tomography import DEFAULT_RESAMPLES, ReconstructionError, reconstruct
from nolmswitch.utils import Settings

logger = logging.getLogger(__name__)

EXIT_VERDICT_FAILURE = 2

RUN_ERRORS = (ConfigurationError, RecordFormatError, ReconstructionError, WindowFitError, OSError, ValueError)


class SimulatorGroup(click.Group):
    """Command group whose usage errors exit with 1, leaving 2 to failed verdicts."""

    def main(self, *args, **kwargs):
        kwargs.pop('standalone_mode', None)
        try:
            result = super().main(*args, standalone_mode=False, **kwargs)
        except click.ClickException as e:
            e.show()
            logger.error(f'Exiting: {e.format_message()}')
            raise SystemExit(1) from e
        except click.Abort as e:
            logger.error('Exiting: aborted')
            raise SystemExit(1) from e
        raise SystemExit(result if isinstance(result, int) else 0)


def output_directory(out: Optional[str], configured: Optional[str], name: str) -> Path:
    """`--out`, else the configuration's output_dir, else a directory per scenario under NOLMSIM_OUTPUT_DIR."""
    if out is not None:
        return Path(out)
    if configured is not None:
        return Path(configured)
    return Path(Settings.output_dir) / name


def scenario_command(scenario: Scenario, help_text: str):
    """Register a subcommand of `main` that runs `scenario`."""

    @main.command(name=scenario.value, help=help_text)
    @click.option(
        '--config', '-c', 'config_file',
        type=click.File(),
        help='JSON (or YAML) configuration file. Defaults to the built-in configuration.',
    )
    @click.option('--seed', type=click.IntRange(min=0), help='Root seed; overrides the configuration.')
    @click.option('--out', '-o', help='Output directory.', metavar='DIR')
    @click.help_option('--help', '-h')
    def command(config_file: Optional[TextIO], seed: Optional[int], out: Optional[str]):
        try:
            config = load_config(config_file, scenario, default_seed=Settings.seed)
            if seed is not None:
                config = replace(config, seed=seed)
            summary = run(config, output_directory(out, config.output_dir, scenario.value))
        except RUN_ERRORS as e:
            logger.error(f'Exiting: {e}')
            raise SystemExit(1) from e
        if not summary.passed:
            failed = ', '.join(metric.name for metric in summary.failures)
            logger.warning(f'Scenario {scenario.value} failed verdicts: {failed}')
            raise SystemExit(EXIT_VERDICT_FAILURE)

    return command


@click.group(name='nolm-sim', cls=SimulatorGroup)
@click.option('--quiet', '-q', is_flag=True, help='Only log warnings and errors.')
@click.version_option(__version__, '--version', '-V')
@click.help_option('--help', '-h')
def main(quiet: bool):
    """Simulate a Sagnac-loop single-photon switch and the experiments run on it."""
    load_dotenv()
    logging.basicConfig(
        level=logging.WARNING if quiet else Settings.log_level.upper(),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
        force=True,
    )


scenario_command(Scenario.CONTRAST, 'Switching contrast against pump energy.')
scenario_command(Scenario.WINDOW, 'Intrinsic and measured switching windows, with deconvolution.')
scenario_command(Scenario.BACKGROUND, 'Raman background against loop length and pump energy.')
scenario_command(Scenario.SWITCH_TOMO, 'Two-photon tomography through the passive and active switch.')
scenario_command(Scenario.SEP_COLORS, 'Per-color cross-phase of a two-color pump.')
scenario_command(Scenario.TDM_DEMUX, 'Demultiplexing of a two-channel time-multiplexed source.')
scenario_command(Scenario.EYE, 'Transmitted coincidences against the pump delay.')


@main.command(name='reconstruct')
@click.option(
    '--counts', 'counts_file',
    type=click.File(),
    required=True,
    help='Count CSV file, in the format written by the tomography scenarios.',
)
@click.option('--seed', type=click.IntRange(min=0), help='Root seed for the bootstrap resamples.')
@click.option(
    '--resamples', 'n_resamples',
    type=click.IntRange(min=2),
    default=DEFAULT_RESAMPLES,
    show_default=True,
    help='Number of bootstrap resamples.',
)
@click.option('--out', '-o', help='Output directory.', metavar='DIR')
@click.help_option('--help', '-h')
def reconstruct_counts(counts_file: TextIO, seed: Optional[int], n_resamples: int, out: Optional[str]):
    """Reconstruct a two-qubit density matrix from a count file."""
    try:
        records, settings = read_records(counts_file)
        result = reconstruct(records, settings, n_resamples=n_resamples,
                             seed=Settings.seed if seed is None else seed)
        output = RunOutput(output_directory(out, None, 'reconstruct'))
        output.write_density_matrix('rho.json', result)
    except RUN_ERRORS as e:
        logger.error(f'Exiting: {e}')
        raise SystemExit(1) from e
    logger.info(f'Wrote {output.directory / "rho.json"}')
