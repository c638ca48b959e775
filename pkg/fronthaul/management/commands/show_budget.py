from django.core.management.base import BaseCommand, CommandError

from fronthaul.services.errors import ConfigurationError
from fronthaul.services.memory_model import per_ap_bytes, per_vector_bits, stored_vectors
from fronthaul.services.network_config import ALLOCATION_RULES, plan_from_options


class Command(BaseCommand):
    help = 'Print the per-AP memory split and bits per stored vector for each L and memory policy.'

    def add_arguments(self, parser):
        parser.add_argument('--l-list', type=str, help='Comma-separated AP counts')
        parser.add_argument('--total-antennas', type=int, help='Total antennas N*L')
        parser.add_argument('--memory', choices=('fap', 'ft', 'inf', 'infinite'), help='Memory model')
        capacity = parser.add_mutually_exclusive_group()
        capacity.add_argument('--capacity-kb', type=float, action='append', help='Capacity in KB (repeatable)')
        capacity.add_argument('--capacity-mb', type=float, action='append', help='Capacity in MB (repeatable)')
        parser.add_argument('--subcarriers', type=int, help='Subcarriers F')
        parser.add_argument('--alloc', choices=ALLOCATION_RULES, help='Bit allocation rule')
        parser.add_argument('--all-aps', action='store_true', help='List every AP instead of the last one only')

    def handle(self, *args, **options):
        try:
            plan, _ = plan_from_options(options)
        except ConfigurationError as e:
            raise CommandError(str(e), returncode=2)

        F = plan.base.F
        for policy in plan.policies:
            self.stdout.write(self.style.SUCCESS(f"{policy.label} ({policy.allocation_rule}), F={F}"))
            for L in plan.l_sweep:
                budget = per_vector_bits(policy, L, F)
                pools = per_ap_bytes(policy, L)
                aps = range(1, L + 1) if options.get('all_aps') else [L]
                for l in aps:
                    bits = budget.per_ap[l - 1]
                    pool = pools[l - 1]
                    bits_txt = 'unlimited' if bits is None else f"{bits:.4f} bits/vector"
                    pool_txt = 'unlimited' if pool is None else f"{pool:.0f} B"
                    self.stdout.write(
                        f"  L={L:<4d} AP {l:<4d} stores {stored_vectors(l, F):>7d} vectors  pool {pool_txt:>10}  {bits_txt}"
                    )
