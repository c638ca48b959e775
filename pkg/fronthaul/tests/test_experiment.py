import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np
from numpy.testing import assert_allclose
from django.test import SimpleTestCase

from fronthaul.services.errors import ConfigurationError
from fronthaul.services.experiment import derive_seed, run_experiment, run_trial
from fronthaul.services.network_config import DEFAULTS, ExperimentPlan, MemoryPolicy, plan_from_options
from fronthaul.services.results_io import emit_csv


def small_plan(**cli):
    options = {
        'l_list': '2,4',
        'total_antennas': 8,
        'users': 2,
        'trials': 3,
        'subcarriers': 64,
        'scheme': ['vc', 'ec'],
        'capacity_kb': [1.0],
    }
    options.update(cli)
    plan, _ = plan_from_options(options, defaults=dict(DEFAULTS))
    return plan


class SeedTests(SimpleTestCase):
    def test_deterministic_and_distinct(self):
        self.assertEqual(derive_seed(0, 2, 5), derive_seed(0, 2, 5))
        self.assertNotEqual(derive_seed(0, 2, 5), derive_seed(0, 5, 2))
        self.assertNotEqual(derive_seed(0, 2, 5), derive_seed(1, 2, 5))


class RunExperimentTests(SimpleTestCase):
    def test_record_count(self):
        plan = small_plan(l_list='2,4,8', trials=2)
        records = run_experiment(plan)
        self.assertEqual(len(records), plan.trial_count)
        self.assertEqual(len(records), 3 * 2 * 2)

    def test_records_are_sorted_and_consistent(self):
        records = run_experiment(small_plan())
        keys = [(('none', 'vc', 'ec').index(r.scheme), r.L, r.trial_index) for r in records]
        self.assertEqual(keys, sorted(keys))
        for r in records:
            self.assertEqual(r.N * r.L, 8)
            self.assertAlmostEqual(r.per_user_exact, r.sum_se_exact / r.K)
            self.assertGreaterEqual(r.sum_se_bound, r.sum_se_exact - 1e-9)

    def test_same_plan_same_bytes(self):
        plan = small_plan()
        with tempfile.TemporaryDirectory() as tmp:
            a = emit_csv(run_experiment(plan), str(Path(tmp) / 'a.csv'))
            b = emit_csv(run_experiment(plan), str(Path(tmp) / 'b.csv'))
            self.assertEqual(Path(a).read_bytes(), Path(b).read_bytes())

    def test_parallel_matches_serial(self):
        plan = small_plan()
        self.assertEqual(run_experiment(plan), run_experiment(replace(plan, workers=4)))

    def test_uncompressed_ignores_capacity(self):
        plan = small_plan(scheme=['none'], capacity_kb=[0.5, 64.0])
        records = run_experiment(plan)
        small = {(r.L, r.trial_index): r.sum_se_exact for r in records if r.capacity_bytes == 512}
        large = {(r.L, r.trial_index): r.sum_se_exact for r in records if r.capacity_bytes == 65536}
        self.assertEqual(small, large)

    def test_infinite_memory_dominates_limited(self):
        records = run_experiment(small_plan(scheme=['vc'], with_infinite=True))
        infinite = {(r.L, r.trial_index): r.sum_se_exact for r in records if r.memory_kind == 'infinite'}
        for r in records:
            if r.memory_kind == 'fap':
                self.assertLessEqual(r.sum_se_exact, infinite[(r.L, r.trial_index)] + 1e-9)

    def test_independent_streams_change_seeds(self):
        common = run_experiment(small_plan(scheme=['vc', 'ec'], trials=1))
        independent = run_experiment(small_plan(scheme=['vc', 'ec'], trials=1, independent_streams=True))
        self.assertEqual(len({r.seed for r in common}), 2)
        self.assertEqual(len({r.seed for r in independent}), 4)

    def test_more_memory_helps(self):
        plan = small_plan(scheme=['vc'], capacity_kb=[0.25, 4.0], trials=2)
        records = run_experiment(plan)
        by_cap = {}
        for r in records:
            by_cap.setdefault(r.capacity_bytes, []).append(r.sum_se_exact)
        self.assertGreaterEqual(np.mean(by_cap[4096.0]), np.mean(by_cap[256.0]) - 1e-9)

    def test_infeasible_plan_rejected(self):
        plan = small_plan()
        with self.assertRaises(ConfigurationError):
            ExperimentPlan(base=plan.base, l_sweep=(3,), schemes=('vc',), policies=plan.policies)


class RunTrialTests(SimpleTestCase):
    def test_trial_is_reproducible(self):
        plan = small_plan()
        config = replace(plan.base.with_aps(4), scheme='ec', memory_policy=MemoryPolicy('ft', 2048.0))
        self.assertEqual(run_trial(config, 1234, 0), run_trial(config, 1234, 0))

    def test_single_antenna_aps_at_reference_size(self):
        # NL = 128, L = 128: one antenna per AP, about 4.03 bits per vector at the last AP
        plan = small_plan(l_list='128', total_antennas=128, users=4, subcarriers=1024)
        base = replace(plan.base.with_aps(128), memory_policy=MemoryPolicy('fap', 64 * 1024))
        for t in range(10):
            seed = derive_seed(0, 128, t)
            vc = run_trial(replace(base, scheme='vc'), seed, t)
            ec = run_trial(replace(base, scheme='ec'), seed, t)
            self.assertTrue(np.isfinite(vc.sum_se_exact))
            self.assertGreater(vc.sum_se_exact, 0.0)
            self.assertAlmostEqual(vc.sum_se_exact, ec.sum_se_exact, delta=1e-10)

    def test_large_fixed_total_budget(self):
        # 32 MB over two APs gives AP 2 131072 bits per stored vector
        plan = small_plan(l_list='2', total_antennas=128, users=4, subcarriers=64)
        base = replace(plan.base.with_aps(2), memory_policy=MemoryPolicy('ft', 32 * 1024 * 1024))
        seed = derive_seed(0, 2, 0)
        reference = run_trial(replace(base, scheme='none'), seed, 0)
        for scheme in ('vc', 'ec'):
            record = run_trial(replace(base, scheme=scheme), seed, 0)
            self.assertAlmostEqual(record.sum_se_exact, reference.sum_se_exact, delta=1e-6)


REFERENCE_L = (2, 4, 8, 16, 32, 64, 128)


def reference_plan(**cli):
    options = dict(l_list=','.join(map(str, REFERENCE_L)), total_antennas=128, users=4, trials=8,
                   subcarriers=1024, capacity_kb=[64.0])
    options.update(cli)
    return small_plan(**options)


def paired_sweep(scheme, policy, trials=10):
    """Per-user SE, trials x L, with the same user drop reused across L for each trial."""
    base = reference_plan().base
    values = np.empty((trials, len(REFERENCE_L)))
    for t in range(trials):
        seed = derive_seed(base.master_seed, t)
        for j, L in enumerate(REFERENCE_L):
            config = replace(base.with_aps(L), scheme=scheme, memory_policy=policy)
            values[t, j] = run_trial(config, seed, t).per_user_exact
    return values


def standard_error(samples):
    return float(np.std(samples, ddof=1) / np.sqrt(len(samples)))


class ReferenceSweepTests(SimpleTestCase):
    def test_infinite_memory_is_nondecreasing_in_l(self):
        values = paired_sweep('vc', MemoryPolicy('infinite'))
        for j in range(1, len(REFERENCE_L)):
            step = values[:, j] - values[:, j - 1]
            margin = max(0.02, 3.0 * standard_error(step))
            self.assertGreaterEqual(step.mean(), -margin, f"L={REFERENCE_L[j - 1]} -> {REFERENCE_L[j]}")

    def test_limited_memory_has_interior_optimum(self):
        values = paired_sweep('vc', MemoryPolicy('fap', 64 * 1024))
        best = int(np.argmax(values.mean(axis=0)))
        self.assertNotEqual(REFERENCE_L[best], 128)
        gap = values[:, best] - values[:, -1]
        self.assertGreater(gap.mean(), standard_error(gap))

    def test_limited_memory_never_beats_infinite(self):
        limited = paired_sweep('vc', MemoryPolicy('fap', 64 * 1024), trials=4)
        infinite = paired_sweep('vc', MemoryPolicy('infinite'), trials=4)
        self.assertTrue(np.all(limited <= infinite + 1e-9))

    def test_vector_beats_element_wise_under_fap(self):
        records = run_experiment(reference_plan(scheme=['vc', 'ec']))
        by_key = {(r.scheme, r.L, r.trial_index): r.per_user_exact for r in records}
        for L in REFERENCE_L:
            gap = np.array([by_key[('vc', L, t)] - by_key[('ec', L, t)] for t in range(8)])
            if L == 128:
                assert_allclose(gap, 0.0, atol=1e-10)
            else:
                self.assertGreaterEqual(gap.mean(), -standard_error(gap), f"L={L}")

    def test_fixed_total_sweep_runs_everywhere(self):
        plan = reference_plan(scheme=['vc', 'ec'], trials=2, memory='ft', capacity_kb=None,
                              capacity_mb=[8.0, 32.0])
        records = run_experiment(plan)
        self.assertEqual(len(records), plan.trial_count)
        for r in records:
            self.assertTrue(np.isfinite(r.sum_se_exact) and np.isfinite(r.sum_se_bound), r)
            self.assertGreater(r.sum_se_exact, 0.0)
            self.assertGreaterEqual(r.sum_se_bound, r.sum_se_exact - 1e-9)
