"""
Re-plot a CSV written by simulate_fronthaul.

Usage:
  python manage.py plot_results results.csv --out results.svg
  python manage.py plot_results results.csv --out k64.svg --users 64 --scheme vc
"""
from django.core.management.base import BaseCommand, CommandError

from fronthaul.services.errors import SeqFrontError
from fronthaul.services.network_config import SCHEMES
from fronthaul.services.results_io import emit_plot, load_records, resolve_output_path


class Command(BaseCommand):
    help = 'Plot mean per-user SE against L from an existing results CSV.'

    def add_arguments(self, parser):
        parser.add_argument('csv_path', type=str, help='CSV produced by simulate_fronthaul')
        parser.add_argument('--out', type=str, required=True, help='SVG output path')
        parser.add_argument('--users', type=int, help='Keep only records with this K')
        parser.add_argument('--scheme', action='append', choices=SCHEMES, help='Keep only these schemes (repeatable)')

    def handle(self, *args, **options):
        try:
            records = load_records(options['csv_path'])
        except SeqFrontError as e:
            raise CommandError(str(e), returncode=2)

        if options.get('users') is not None:
            records = [r for r in records if r.K == options['users']]
        if options.get('scheme'):
            records = [r for r in records if r.scheme in options['scheme']]
        if not records:
            raise CommandError('No records left to plot after filtering', returncode=2)

        try:
            path = emit_plot(records, resolve_output_path(options['out']))
        except SeqFrontError as e:
            raise CommandError(str(e), returncode=1)
        self.stdout.write(self.style.SUCCESS(f"Plotted {len(records)} records -> {path}"))
