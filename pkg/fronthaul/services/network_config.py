"""
Experiment parameters: NetworkConfig, MemoryPolicy and ExperimentPlan.

Values are assembled in three layers: ``settings.SEQFRONT_DEFAULTS`` (the
reference scenario), an optional ``key = value`` config file, then
command-line options. Later layers override earlier ones.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterable, List, Optional, Tuple

from .errors import ConfigurationError

logger = logging.getLogger(__name__)


SCHEMES = ('none', 'vc', 'ec')
MEMORY_KINDS = ('infinite', 'fap', 'ft')
ALLOCATION_RULES = ('per-ap-load', 'uniform-worst-case')
CORRELATION_MODELS = ('iid', 'exponential')

KIB = 1024
MIB = 1024 * 1024

# Reference scenario; settings.SEQFRONT_DEFAULTS may override any key.
DEFAULTS: Dict[str, Any] = {
    'l_list': [2, 4, 8, 16, 32, 64, 128],
    'total_antennas': 128,
    'users': 4,
    'scheme': ['vc'],
    'memory': 'fap',
    'capacity_kb': [64.0],
    'capacity_mb': None,
    'alloc': 'per-ap-load',
    'subcarriers': 1024,
    'trials': 100,
    'seed': 0,
    'power_dbm': 10.0,
    'noise_dbm': -85.0,
    'perimeter_m': 500.0,
    'inner_perimeter_m': 400.0,
    'height_m': 5.0,
    'tau_factor': 1.0,
    'correlation': 'iid',
    'rho': 0.0,
    'workers': 1,
    'with_infinite': False,
    'independent_streams': False,
    'out': 'results.csv',
    'plot': None,
}


def dbm_to_mw(value_dbm: float) -> float:
    return 10.0 ** (value_dbm / 10.0)


@dataclass(frozen=True)
class MemoryPolicy:
    kind: str = 'infinite'
    capacity_bytes: float = 0.0  # C_AP for fap, C_T for ft
    allocation_rule: str = 'per-ap-load'

    def __post_init__(self):
        if self.kind not in MEMORY_KINDS:
            raise ConfigurationError(f"Unknown memory kind '{self.kind}' (expected one of {', '.join(MEMORY_KINDS)})")
        if self.allocation_rule not in ALLOCATION_RULES:
            raise ConfigurationError(f"Unknown allocation rule '{self.allocation_rule}'")
        if self.kind != 'infinite':
            if not math.isfinite(self.capacity_bytes) or self.capacity_bytes <= 0:
                raise ConfigurationError(f"Memory kind '{self.kind}' needs a positive capacity, got {self.capacity_bytes}")

    @property
    def is_infinite(self) -> bool:
        return self.kind == 'infinite'

    @property
    def label(self) -> str:
        if self.is_infinite:
            return 'infinite memory'
        cap = self.capacity_bytes
        if cap >= MIB and cap % MIB == 0:
            size = f"{int(cap // MIB)}MB"
        elif cap % KIB == 0:
            size = f"{int(cap // KIB)}KB"
        else:
            size = f"{cap:g}B"
        return f"{self.kind.upper()} {size}"

    @property
    def stream_key(self) -> Tuple[int, int, int]:
        """Integer key identifying the policy inside a seed derivation."""
        return (
            MEMORY_KINDS.index(self.kind),
            int(round(self.capacity_bytes)),
            ALLOCATION_RULES.index(self.allocation_rule),
        )


@dataclass(frozen=True)
class NetworkConfig:
    L: int
    N: int
    K: int
    total_antennas: int
    p: float
    sigma2: float
    D: float = 500.0
    inner_perimeter: float = 400.0
    height: float = 5.0
    F: int = 1024
    tau_factor: float = 1.0
    memory_policy: MemoryPolicy = field(default_factory=MemoryPolicy)
    scheme: str = 'vc'
    trials: int = 100
    master_seed: int = 0
    correlation: str = 'iid'
    rho: float = 0.0

    def __post_init__(self):
        if self.L < 1:
            raise ConfigurationError(f"L must be >= 1, got {self.L}")
        if self.N < 1:
            raise ConfigurationError(f"N must be >= 1, got {self.N}")
        if self.N * self.L != self.total_antennas:
            raise ConfigurationError(
                f"N*L = {self.N}*{self.L} does not equal total_antennas = {self.total_antennas}"
            )
        if self.K < 1:
            raise ConfigurationError(f"K must be >= 1, got {self.K}")
        if not self.p > 0:
            raise ConfigurationError(f"Transmit power must be positive, got {self.p}")
        if not self.sigma2 > 0:
            raise ConfigurationError(f"Noise power must be positive, got {self.sigma2}")
        if not self.D > 0:
            raise ConfigurationError(f"Perimeter must be positive, got {self.D}")
        if not 0 < self.inner_perimeter < self.D:
            raise ConfigurationError(
                f"Inner perimeter must lie in (0, {self.D}), got {self.inner_perimeter}"
            )
        if self.height < 0:
            raise ConfigurationError(f"Height must be non-negative, got {self.height}")
        if self.F < 1:
            raise ConfigurationError(f"Subcarrier count must be >= 1, got {self.F}")
        if not 0 < self.tau_factor <= 1:
            raise ConfigurationError(f"tau_factor must lie in (0, 1], got {self.tau_factor}")
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"Unknown scheme '{self.scheme}'")
        if self.trials < 1:
            raise ConfigurationError(f"trials must be >= 1, got {self.trials}")
        if self.master_seed < 0:
            raise ConfigurationError(f"Seed must be non-negative, got {self.master_seed}")
        if self.correlation not in CORRELATION_MODELS:
            raise ConfigurationError(f"Unknown correlation model '{self.correlation}'")
        if not 0 <= self.rho < 1:
            raise ConfigurationError(f"rho must lie in [0, 1), got {self.rho}")

    def with_aps(self, L: int) -> 'NetworkConfig':
        """Same network with the antennas spread over ``L`` APs."""
        if L < 1 or self.total_antennas % L:
            raise ConfigurationError(f"L = {L} does not divide total_antennas = {self.total_antennas}")
        return replace(self, L=L, N=self.total_antennas // L)


@dataclass(frozen=True)
class ExperimentPlan:
    base: NetworkConfig
    l_sweep: Tuple[int, ...]
    schemes: Tuple[str, ...]
    policies: Tuple[MemoryPolicy, ...]
    workers: int = 1
    common_streams: bool = True

    def __post_init__(self):
        if not self.l_sweep:
            raise ConfigurationError('L sweep is empty')
        if not self.schemes:
            raise ConfigurationError('No scheme selected')
        if not self.policies:
            raise ConfigurationError('No memory policy selected')
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigurationError(f"Unknown scheme '{s}'")
        bad = [L for L in self.l_sweep if L < 1 or self.base.total_antennas % L]
        if bad:
            raise ConfigurationError(
                f"L values {bad} do not divide total_antennas = {self.base.total_antennas}"
            )
        if self.workers < 1:
            raise ConfigurationError(f"workers must be >= 1, got {self.workers}")

    @property
    def trial_count(self) -> int:
        return len(self.policies) * len(self.schemes) * len(self.l_sweep) * self.base.trials


# -----------------------------
# Option parsing helpers
# -----------------------------

def _to_float(value: Any, key: str) -> float:
    if isinstance(value, (int, float)):
        return float(value)
    s = str(value).strip().replace(' ', '')
    try:
        return float(s)
    except ValueError:
        raise ConfigurationError(f"{key}: cannot parse number from '{value}'")


def _to_int(value: Any, key: str) -> int:
    if isinstance(value, int) and not isinstance(value, bool):
        return value
    f = _to_float(value, key)
    if not f.is_integer():
        raise ConfigurationError(f"{key}: expected an integer, got '{value}'")
    return int(f)


def _to_bool(value: Any, key: str) -> bool:
    if isinstance(value, bool):
        return value
    low = str(value).strip().lower()
    if low in ('1', 'true', 'yes', 'on'):
        return True
    if low in ('0', 'false', 'no', 'off', ''):
        return False
    raise ConfigurationError(f"{key}: expected a boolean, got '{value}'")


def _split(value: Any) -> List[str]:
    if isinstance(value, (list, tuple)):
        items: List[str] = []
        for v in value:
            items.extend(_split(v))
        return items
    return [part.strip() for part in str(value).split(',') if part.strip()]


def _int_list(value: Any, key: str) -> List[int]:
    return [_to_int(v, key) for v in _split(value)]


def _float_list(value: Any, key: str) -> List[float]:
    return [_to_float(v, key) for v in _split(value)]


def _str_list(value: Any, key: str) -> List[str]:
    return [v.lower() for v in _split(value)]


def _str(value: Any, key: str) -> str:
    return str(value).strip()


_CONVERTERS = {
    'l_list': _int_list,
    'total_antennas': _to_int,
    'users': _to_int,
    'scheme': _str_list,
    'memory': lambda v, k: _str(v, k).lower(),
    'capacity_kb': _float_list,
    'capacity_mb': _float_list,
    'alloc': lambda v, k: _str(v, k).lower(),
    'subcarriers': _to_int,
    'trials': _to_int,
    'seed': _to_int,
    'power_dbm': _to_float,
    'noise_dbm': _to_float,
    'perimeter_m': _to_float,
    'inner_perimeter_m': _to_float,
    'height_m': _to_float,
    'tau_factor': _to_float,
    'correlation': lambda v, k: _str(v, k).lower(),
    'rho': _to_float,
    'workers': _to_int,
    'with_infinite': _to_bool,
    'independent_streams': _to_bool,
    'out': _str,
    'plot': _str,
}


def normalize_key(key: str) -> str:
    return key.strip().lstrip('-').replace('-', '_').lower()


def read_config_file(path: str) -> Dict[str, Any]:
    """Parse a ``key = value`` file. Blank lines and ``#`` comments are skipped."""
    values: Dict[str, Any] = {}
    try:
        with open(path, 'r', encoding='utf-8-sig') as f:
            lines = f.readlines()
    except OSError as e:
        raise ConfigurationError(f"Cannot read config file {path}: {e}")
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split('=', 1)
        key = normalize_key(key)
        if key not in _CONVERTERS:
            raise ConfigurationError(f"{path}:{lineno}: unknown key '{key}'")
        values[key] = _CONVERTERS[key](value, key)
    return values


def settings_defaults() -> Dict[str, Any]:
    """Module defaults overlaid with ``settings.SEQFRONT_DEFAULTS``."""
    values = dict(DEFAULTS)
    try:
        from django.conf import settings as django_settings
        configured = getattr(django_settings, 'SEQFRONT_DEFAULTS', {}) or {}
        workers = getattr(django_settings, 'SEQFRONT_WORKERS', None)
    except Exception as e:
        logger.debug(f"Django settings unavailable, using built-in defaults: {e}")
        configured, workers = {}, None
    for key, value in configured.items():
        key = normalize_key(key)
        if key not in _CONVERTERS:
            raise ConfigurationError(f"SEQFRONT_DEFAULTS: unknown key '{key}'")
        values[key] = None if value is None else _CONVERTERS[key](value, key)
    if workers:
        values['workers'] = _to_int(workers, 'SEQFRONT_WORKERS')
    return values


def _memory_kind(value: str) -> str:
    kind = 'infinite' if value in ('inf', 'infinite') else value
    if kind not in MEMORY_KINDS:
        raise ConfigurationError(f"Unknown memory kind '{value}' (expected fap, ft or inf)")
    return kind


def plan_from_options(
    cli: Dict[str, Any],
    file_values: Optional[Dict[str, Any]] = None,
    defaults: Optional[Dict[str, Any]] = None,
) -> Tuple[ExperimentPlan, Dict[str, Any]]:
    """
    Merge defaults, config file values and CLI options into an ExperimentPlan.

    ``cli`` maps option names to values; ``None`` means "not given".
    Returns the plan and the merged option dict (output paths live there).
    """
    values = dict(defaults if defaults is not None else settings_defaults())
    explicit_capacity = False
    for layer in (file_values or {}, {k: v for k, v in cli.items() if v is not None and v != []}):
        layer = {normalize_key(k): v for k, v in layer.items()}
        if 'capacity_kb' in layer or 'capacity_mb' in layer:
            explicit_capacity = True
            values['capacity_kb'] = None
            values['capacity_mb'] = None
        for key, value in layer.items():
            if key not in _CONVERTERS:
                continue
            values[key] = _CONVERTERS[key](value, key)

    kind = _memory_kind(values['memory'])
    capacities: List[float] = []
    if values.get('capacity_kb'):
        capacities.extend(c * KIB for c in values['capacity_kb'])
    if values.get('capacity_mb'):
        capacities.extend(c * MIB for c in values['capacity_mb'])

    policies: List[MemoryPolicy] = []
    if kind == 'infinite':
        if explicit_capacity and capacities:
            logger.warning('Memory kind is infinite; the given capacity is ignored')
        policies.append(MemoryPolicy('infinite', 0.0, values['alloc']))
    else:
        if not capacities:
            raise ConfigurationError(f"Memory kind '{kind}' needs --capacity-kb or --capacity-mb")
        if values.get('with_infinite'):
            policies.append(MemoryPolicy('infinite', 0.0, values['alloc']))
        policies.extend(MemoryPolicy(kind, cap, values['alloc']) for cap in capacities)

    schemes = tuple(dict.fromkeys(values['scheme']))
    l_sweep = tuple(values['l_list'])
    total = values['total_antennas']
    bad = [L for L in l_sweep if L < 1 or total % L]
    if bad:
        raise ConfigurationError(f"L values {bad} do not divide total antennas {total}")

    base = NetworkConfig(
        L=l_sweep[0] if l_sweep else 1,
        N=total // l_sweep[0] if l_sweep else total,
        K=values['users'],
        total_antennas=total,
        p=dbm_to_mw(values['power_dbm']),
        sigma2=dbm_to_mw(values['noise_dbm']),
        D=values['perimeter_m'],
        inner_perimeter=values['inner_perimeter_m'],
        height=values['height_m'],
        F=values['subcarriers'],
        tau_factor=values['tau_factor'],
        memory_policy=policies[0],
        scheme=schemes[0] if schemes else 'vc',
        trials=values['trials'],
        master_seed=values['seed'],
        correlation=values['correlation'],
        rho=values['rho'],
    )
    plan = ExperimentPlan(
        base=base,
        l_sweep=l_sweep,
        schemes=schemes,
        policies=tuple(policies),
        workers=values['workers'],
        common_streams=not values['independent_streams'],
    )
    return plan, values


def describe_plan(plan: ExperimentPlan) -> Iterable[str]:
    base = plan.base
    yield (f"NL={base.total_antennas} K={base.K} F={base.F} trials={base.trials} seed={base.master_seed} "
           f"p={base.p:g}mW sigma2={base.sigma2:.3e}mW")
    yield f"L sweep: {', '.join(str(L) for L in plan.l_sweep)}"
    yield f"schemes: {', '.join(plan.schemes)}"
    yield f"policies: {'; '.join(p.label for p in plan.policies)}"
