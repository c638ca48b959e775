"""
Run the Monte Carlo L-sweep and write the results.

Usage examples:
  python manage.py simulate_fronthaul
  python manage.py simulate_fronthaul --users 64 --scheme vc --scheme ec --memory fap --capacity-kb 64 --with-infinite --plot fap64.svg
  python manage.py simulate_fronthaul --memory ft --capacity-mb 1 --capacity-mb 4 --trials 20 --workers 4
  python manage.py simulate_fronthaul --config scenario.conf --seed 7
"""
from typing import Any, Dict, List, Optional, Sequence, Tuple

from django.core.management.base import BaseCommand, CommandError

from fronthaul.services.errors import ConfigurationError, SeqFrontError
from fronthaul.services.experiment import run_experiment
from fronthaul.services.network_config import (
    ALLOCATION_RULES, CORRELATION_MODELS, SCHEMES, ExperimentPlan, describe_plan,
    plan_from_options, read_config_file,
)
from fronthaul.services.results_io import emit_csv, emit_plot, plot_series, resolve_output_path


def build_plan(options: Dict[str, Any]) -> Tuple[ExperimentPlan, Dict[str, Any]]:
    """Defaults < --config file < flags."""
    file_values = read_config_file(options['config']) if options.get('config') else None
    return plan_from_options(options, file_values)


def parse_cli(argv: Sequence[str]) -> ExperimentPlan:
    """Parse simulate_fronthaul flags into a plan; bad input raises CommandError with returncode 2."""
    parser = Command().create_parser('manage.py', 'simulate_fronthaul')
    try:
        options = vars(parser.parse_args(list(argv)))
        plan, _ = build_plan(options)
    except (CommandError, ConfigurationError) as e:
        raise CommandError(str(e), returncode=2)
    return plan


class Command(BaseCommand):
    help = 'Simulate sequential fronthaul with limited AP memory over an L-sweep; writes CSV and optional SVG.'

    def add_arguments(self, parser):
        # Value flags default to None so config-file and settings values are not masked.
        parser.add_argument('--config', type=str, help='key = value file with the same keys as the flags')
        parser.add_argument('--l-list', type=str, help='Comma-separated AP counts, e.g. 2,4,8,16,32,64,128')
        parser.add_argument('--total-antennas', type=int, help='Total antennas N*L (default 128)')
        parser.add_argument('--users', type=int, help='Number of users K')
        parser.add_argument('--scheme', action='append', choices=SCHEMES, help='Compression scheme (repeatable)')
        parser.add_argument('--memory', choices=('fap', 'ft', 'inf', 'infinite'), help='Memory model')
        capacity = parser.add_mutually_exclusive_group()
        capacity.add_argument('--capacity-kb', type=float, action='append',
                              help='C_AP (fap) or C_T (ft) in KB (repeatable)')
        capacity.add_argument('--capacity-mb', type=float, action='append',
                              help='C_AP (fap) or C_T (ft) in MB (repeatable)')
        parser.add_argument('--with-infinite', action='store_true', default=None,
                            help='Add the infinite-memory reference curve')
        parser.add_argument('--alloc', choices=ALLOCATION_RULES, help='Bit allocation rule along the chain')
        parser.add_argument('--subcarriers', type=int, help='Subcarriers F per coherence block')
        parser.add_argument('--trials', type=int, help='Monte Carlo trials per (scheme, policy, L)')
        parser.add_argument('--seed', type=int, help='Master seed')
        parser.add_argument('--independent-streams', action='store_true', default=None,
                            help='Draw separate channels per scheme and policy instead of common ones')
        parser.add_argument('--power-dbm', type=float, help='User transmit power [dBm]')
        parser.add_argument('--noise-dbm', type=float, help='Receiver noise power [dBm]')
        parser.add_argument('--perimeter-m', type=float, help='AP square perimeter [m]')
        parser.add_argument('--inner-perimeter-m', type=float, help='User square perimeter [m]')
        parser.add_argument('--height-m', type=float, help='AP height above users [m]')
        parser.add_argument('--tau-factor', type=float, help='Uplink share of the coherence block')
        parser.add_argument('--correlation', choices=CORRELATION_MODELS, help='Spatial correlation model')
        parser.add_argument('--rho', type=float, help='Exponential correlation coefficient')
        parser.add_argument('--workers', type=int, help='Concurrent trials')
        parser.add_argument('--out', type=str, help='CSV output path')
        parser.add_argument('--plot', type=str, help='SVG output path (optional)')

    def handle(self, *args, **options):
        try:
            plan, values = build_plan(options)
        except ConfigurationError as e:
            raise CommandError(str(e), returncode=2)

        verbosity = options.get('verbosity', 1)
        if verbosity >= 1:
            for line in describe_plan(plan):
                self.stdout.write(line)

        step = max(1, plan.trial_count // 10)

        def progress(done: int, total: int):
            if verbosity >= 2 and (done % step == 0 or done == total):
                self.stdout.write(f"  {done}/{total} trials")

        try:
            records = run_experiment(plan, progress=progress)
            out = emit_csv(records, resolve_output_path(values['out']))
            plot: Optional[str] = None
            if values.get('plot'):
                plot = emit_plot(records, resolve_output_path(values['plot']))
        except ConfigurationError as e:
            raise CommandError(str(e), returncode=2)
        except SeqFrontError as e:
            raise CommandError(f"Simulation failed: {e}", returncode=1)
        except Exception as e:
            raise CommandError(f"Unexpected failure: {e}", returncode=1)

        if verbosity >= 1:
            for label, (Ls, means) in plot_series(records).items():
                cells: List[str] = [f"L={L}:{m:.3f}" for L, m in zip(Ls, means)]
                self.stdout.write(f"{label}: {' '.join(cells)}")
            self.stdout.write(self.style.SUCCESS(f"Finished. Records: {len(records)} -> {out}"))
            if plot:
                self.stdout.write(self.style.SUCCESS(f"Plot -> {plot}"))
