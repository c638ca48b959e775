"""
Monte Carlo harness: one TrialRecord per (policy, scheme, L, trial).

Every trial owns a random stream derived from the master seed, so trials can
run in any order or on any worker and the sorted record list is the same.
"""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Tuple

import numpy as np

from . import geometry
from .compression import build_whitener, waterfill
from .memory_model import per_vector_bits
from .metrics import se_report
from .network_config import SCHEMES, ExperimentPlan, MemoryPolicy, NetworkConfig

logger = logging.getLogger(__name__)

SCHEME_ORDER = {s: i for i, s in enumerate(SCHEMES)}


@dataclass(frozen=True)
class TrialRecord:
    scheme: str
    memory_kind: str
    capacity_bytes: float
    L: int
    N: int
    K: int
    F: int
    trial_index: int
    seed: int
    sum_se_exact: float
    sum_se_bound: float
    per_user_exact: float
    per_user_bound: float


@dataclass(frozen=True)
class _TrialJob:
    policy_index: int
    policy: MemoryPolicy
    scheme: str
    L: int
    trial: int
    seed: int

    @property
    def sort_key(self) -> Tuple[int, int, int, int]:
        return (self.policy_index, SCHEME_ORDER[self.scheme], self.L, self.trial)


def derive_seed(master_seed: int, *key: int) -> int:
    """64-bit seed for one trial, independent of every other key."""
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(int(k) for k in key))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def _trial_seed(plan: ExperimentPlan, policy: MemoryPolicy, scheme: str, L: int, trial: int) -> int:
    if plan.common_streams:
        return derive_seed(plan.base.master_seed, L, trial)
    return derive_seed(plan.base.master_seed, *policy.stream_key, SCHEME_ORDER[scheme], L, trial)


def run_trial(config: NetworkConfig, seed: int, trial_index: int = 0) -> TrialRecord:
    """Placement, channel, bit budget, allocations, whiteners and SE for one realization."""
    rng = np.random.default_rng(seed)
    realization = geometry.generate(config, rng)
    budget = per_vector_bits(config.memory_policy, config.L, config.F)

    H = [realization.H[l] for l in range(config.L)]
    whiteners = []
    for l, H_l in enumerate(H):
        alloc = waterfill(config.scheme, H_l, config.p, config.sigma2, budget.per_ap[l])
        whiteners.append(build_whitener(alloc, config.sigma2, N=config.N))

    report = se_report(H, whiteners, config.p, config.scheme, config.tau_factor)
    return TrialRecord(
        scheme=config.scheme,
        memory_kind=config.memory_policy.kind,
        capacity_bytes=float(config.memory_policy.capacity_bytes),
        L=config.L,
        N=config.N,
        K=config.K,
        F=config.F,
        trial_index=trial_index,
        seed=seed,
        sum_se_exact=report.sum_se_exact,
        sum_se_bound=report.sum_se_bound,
        per_user_exact=report.per_user_exact,
        per_user_bound=report.per_user_bound,
    )


def _jobs(plan: ExperimentPlan) -> List[_TrialJob]:
    jobs = []
    for pi, policy in enumerate(plan.policies):
        for scheme in plan.schemes:
            for L in plan.l_sweep:
                for t in range(plan.base.trials):
                    jobs.append(_TrialJob(pi, policy, scheme, L, t, _trial_seed(plan, policy, scheme, L, t)))
    return jobs


def run_experiment(
    plan: ExperimentPlan,
    progress: Optional[Callable[[int, int], None]] = None,
) -> List[TrialRecord]:
    """
    Run every (policy, scheme, L, trial) of ``plan`` and return the records
    sorted by policy, scheme, L and trial.

    By default each trial stream is keyed on (master_seed, L, trial) only, so
    every scheme and memory policy at a given (L, trial) sees the same AP
    placement, user drop and channel; CSV rows that differ only in scheme or
    capacity are paired comparisons. With ``plan.common_streams`` off the key
    also carries the policy and scheme, giving independent draws.
    ``progress`` is called with (done, total) after each trial.
    """
    # infeasible sweeps raise here, before any trial runs
    configs = {L: plan.base.with_aps(L) for L in plan.l_sweep}
    jobs = _jobs(plan)
    total = len(jobs)
    logger.info(f"Running {total} trials on {plan.workers} worker(s)")
    started = time.monotonic()

    def work(job: _TrialJob) -> Tuple[Tuple[int, int, int, int], TrialRecord]:
        config = replace(configs[job.L], scheme=job.scheme, memory_policy=job.policy)
        record = run_trial(config, job.seed, job.trial)
        logger.debug(f"{job.policy.label} {job.scheme} L={job.L} trial={job.trial}: "
                     f"{record.per_user_exact:.4f} bit/s/Hz per user")
        return job.sort_key, record

    results: List[Tuple[Tuple[int, int, int, int], TrialRecord]] = []
    if plan.workers == 1:
        for job in jobs:
            results.append(work(job))
            if progress:
                progress(len(results), total)
    else:
        with ThreadPoolExecutor(max_workers=plan.workers, thread_name_prefix='seqfront') as pool:
            for item in pool.map(work, jobs):
                results.append(item)
                if progress:
                    progress(len(results), total)

    results.sort(key=lambda item: item[0])
    logger.info(f"Finished {total} trials in {time.monotonic() - started:.1f}s")
    return [record for _, record in results]

