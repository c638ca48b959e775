"""
Compare the daisy-chain RLS estimate with the centralized closed form.

Usage:
  python manage.py check_oracle --instances 200 --seed 0
"""
import time

import numpy as np
from django.core.management.base import BaseCommand, CommandError

from fronthaul.services.compression import build_whitener, waterfill
from fronthaul.services.sequential_rls import centralized_ls, rls_run, simulate_whitened_observation


def oracle_gap(rng: np.random.Generator) -> float:
    """Relative error between both estimators on one random instance."""
    L = int(rng.integers(1, 9))
    N = int(rng.integers(1, 5))
    K = int(rng.integers(1, 9))
    scheme = ('vc', 'ec')[int(rng.integers(0, 2))]
    p = 1.0
    sigma2 = float(rng.uniform(0.1, 1.0))

    H = []
    whiteners = []
    for l in range(L):
        gain = 10.0 ** rng.uniform(-1.0, 1.0)
        H_l = np.sqrt(gain / 2.0) * (rng.standard_normal((N, K)) + 1j * rng.standard_normal((N, K)))
        C_s = None if l == 0 else float(rng.uniform(0.5, 8.0 * N))
        H.append(H_l)
        whiteners.append(build_whitener(waterfill(scheme, H_l, p, sigma2, C_s), sigma2, N=N))

    s = np.sqrt(p / 2.0) * (rng.standard_normal(K) + 1j * rng.standard_normal(K))
    observations = [simulate_whitened_observation(h, w, s, rng).y_tilde for h, w in zip(H, whiteners)]
    s_rls, _ = rls_run(H, whiteners, observations, p)
    s_ls = centralized_ls(H, whiteners, observations, p)
    return float(np.linalg.norm(s_rls - s_ls) / max(np.linalg.norm(s_ls), np.finfo(float).tiny))


class Command(BaseCommand):
    help = 'Check that the sequential RLS estimate matches the centralized LS estimate on random instances.'

    def add_arguments(self, parser):
        parser.add_argument('--instances', type=int, default=200, help='Random instances (default 200)')
        parser.add_argument('--seed', type=int, default=0, help='Seed (default 0)')
        parser.add_argument('--tolerance', type=float, default=1e-8, help='Maximum relative error (default 1e-8)')

    def handle(self, *args, **options):
        if options['instances'] < 1:
            raise CommandError('--instances must be >= 1', returncode=2)
        rng = np.random.default_rng(options['seed'])
        started = time.monotonic()
        gaps = [oracle_gap(rng) for _ in range(options['instances'])]
        worst = max(gaps)
        self.stdout.write(
            f"instances={len(gaps)} worst={worst:.3e} median={float(np.median(gaps)):.3e} "
            f"elapsed={time.monotonic() - started:.2f}s"
        )
        if worst > options['tolerance']:
            raise CommandError(f"Worst relative error {worst:.3e} exceeds {options['tolerance']:.1e}", returncode=1)
        self.stdout.write(self.style.SUCCESS('RLS chain matches the centralized estimate'))
