"""
CSV and SVG artifacts for experiment results.
"""
from __future__ import annotations

import csv
import logging
import os
from collections import OrderedDict
from typing import Dict, List, Sequence, Tuple

import matplotlib

matplotlib.use('Agg')

import numpy as np  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

from .errors import ResultsError  # noqa: E402
from .experiment import TrialRecord  # noqa: E402
from .network_config import MemoryPolicy  # noqa: E402

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    'scheme', 'memory_kind', 'capacity_bytes', 'L', 'N', 'K', 'F', 'trial', 'seed',
    'sum_se_exact', 'sum_se_bound', 'per_user_exact', 'per_user_bound',
)
CSV_HEADER = ','.join(CSV_COLUMNS)
REAL_FORMAT = '.12g'

SCHEME_LABELS = {'none': 'No compression', 'vc': 'VC', 'ec': 'EC'}
MARKERS = ('o', 's', 'd', '^', 'v', '>', '<', 'p', 'h', '*')


def _real(value: float) -> str:
    return format(float(value), REAL_FORMAT)


def _row(r: TrialRecord) -> List[str]:
    return [
        r.scheme, r.memory_kind, _real(r.capacity_bytes), str(r.L), str(r.N), str(r.K), str(r.F),
        str(r.trial_index), str(r.seed),
        _real(r.sum_se_exact), _real(r.sum_se_bound), _real(r.per_user_exact), _real(r.per_user_bound),
    ]


def resolve_output_path(path: str) -> str:
    """Relative paths land in ``settings.SEQFRONT_RESULTS_DIR`` when it is set."""
    if os.path.isabs(path):
        return path
    try:
        from django.conf import settings as django_settings
        base = getattr(django_settings, 'SEQFRONT_RESULTS_DIR', None)
    except Exception as e:
        logger.debug(f"Django settings unavailable, keeping {path} relative: {e}")
        base = None
    return os.path.join(base, path) if base else path


def _ensure_parent(path: str):
    parent = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(parent, exist_ok=True)
    except OSError as e:
        raise ResultsError(f"Cannot create directory for {path}: {e}")


def emit_csv(records: Sequence[TrialRecord], path: str) -> str:
    _ensure_parent(path)
    try:
        with open(path, 'w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(CSV_COLUMNS)
            for r in records:
                writer.writerow(_row(r))
    except OSError as e:
        raise ResultsError(f"Cannot write results to {path}: {e}")
    logger.info(f"Wrote {len(records)} records to {path}")
    return path


def load_records(path: str) -> List[TrialRecord]:
    """Parse a CSV written by ``emit_csv``."""
    try:
        with open(path, 'r', encoding='utf-8-sig', newline='') as f:
            reader = csv.reader(f)
            try:
                header = next(reader)
            except StopIteration:
                raise ResultsError(f"{path}: file is empty")
            if tuple(h.strip() for h in header) != CSV_COLUMNS:
                raise ResultsError(f"{path}: unexpected header {','.join(header)}")
            records = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(CSV_COLUMNS):
                    raise ResultsError(f"{path}:{lineno}: expected {len(CSV_COLUMNS)} fields, got {len(row)}")
                try:
                    records.append(TrialRecord(
                        scheme=row[0],
                        memory_kind=row[1],
                        capacity_bytes=float(row[2]),
                        L=int(row[3]),
                        N=int(row[4]),
                        K=int(row[5]),
                        F=int(row[6]),
                        trial_index=int(row[7]),
                        seed=int(row[8]),
                        sum_se_exact=float(row[9]),
                        sum_se_bound=float(row[10]),
                        per_user_exact=float(row[11]),
                        per_user_bound=float(row[12]),
                    ))
                except ValueError as e:
                    raise ResultsError(f"{path}:{lineno}: {e}")
    except OSError as e:
        raise ResultsError(f"Cannot read results from {path}: {e}")
    return records


def group_label(r: TrialRecord) -> str:
    policy = MemoryPolicy(r.memory_kind, r.capacity_bytes)
    if policy.is_infinite:
        return f"{SCHEME_LABELS.get(r.scheme, r.scheme)}, infinite memory"
    return f"{SCHEME_LABELS.get(r.scheme, r.scheme)}, {policy.label}"


def plot_series(records: Sequence[TrialRecord]) -> 'OrderedDict[str, Tuple[np.ndarray, np.ndarray]]':
    """Group label -> (sorted L values, mean per-user exact SE), groups in first-seen order."""
    samples: 'OrderedDict[str, Dict[int, List[float]]]' = OrderedDict()
    for r in records:
        samples.setdefault(group_label(r), {}).setdefault(r.L, []).append(r.per_user_exact)
    series = OrderedDict()
    for label, by_L in samples.items():
        Ls = np.array(sorted(by_L))
        series[label] = (Ls, np.array([np.mean(by_L[L]) for L in Ls]))
    return series


def emit_plot(records: Sequence[TrialRecord], path: str) -> str:
    """Mean per-user SE against L, one line per (scheme, memory policy), written as SVG."""
    if not records:
        raise ResultsError('No records to plot')
    users = {r.K for r in records}
    if len(users) > 1:
        raise ResultsError(f"Records mix user counts {sorted(users)}; plot one K at a time")
    K = users.pop()

    series = plot_series(records)
    fig = Figure(figsize=(7.0, 4.5))
    ax = fig.add_subplot(1, 1, 1)
    all_L = set()
    for i, (label, (Ls, means)) in enumerate(series.items()):
        ax.plot(Ls, means, marker=MARKERS[i % len(MARKERS)], lw=1.5, label=label)
        all_L.update(int(L) for L in Ls)
    ticks = sorted(all_L)
    ax.set_xscale('log', base=2)
    ax.set_xticks(ticks)
    ax.set_xticklabels([f"L={L}" for L in ticks])
    ax.minorticks_off()
    ax.set_xlabel('Number of APs')
    ax.set_ylabel('Average per-user SE [bit/s/Hz]')
    ax.set_title(f"K = {K}")
    ax.grid(True, alpha=0.4)
    ax.legend()
    fig.tight_layout()

    _ensure_parent(path)
    try:
        fig.savefig(path, format='svg')
    except OSError as e:
        raise ResultsError(f"Cannot write plot to {path}: {e}")
    logger.info(f"Wrote plot with {len(series)} curve(s) to {path}")
    return path
