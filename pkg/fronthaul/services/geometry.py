"""
Network geometry, large-scale fading and per-AP channel matrices.

APs sit on the perimeter of a square of perimeter D, equally spaced in
arclength starting at corner (0, 0) and moving counterclockwise. Users are
dropped uniformly inside a concentric square. The path loss follows the
urban-microcell law beta_dB = -30.5 - 36.7 log10(d / 1 m), with d the 3-D
distance including the AP height offset.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from .errors import ConfigurationError, NumericError
from .network_config import NetworkConfig

logger = logging.getLogger(__name__)

PATHLOSS_INTERCEPT_DB = -30.5
PATHLOSS_SLOPE_DB = 36.7


@dataclass(frozen=True)
class Placement:
    ap_positions: np.ndarray    # L x 2, meters
    user_positions: np.ndarray  # K x 2, meters


@dataclass(frozen=True)
class ChannelRealization:
    beta: np.ndarray         # K x L, linear
    correlation: np.ndarray  # N x N, unit-trace-per-antenna shape shared by all (k, l)
    H: np.ndarray            # L x N x K, complex
    distances: np.ndarray    # K x L, meters
    placement: Optional[Placement] = None

    @property
    def L(self) -> int:
        return self.H.shape[0]

    @property
    def N(self) -> int:
        return self.H.shape[1]

    @property
    def K(self) -> int:
        return self.H.shape[2]

    def R(self, k: int, l: int) -> np.ndarray:
        """Spatial correlation matrix of user ``k`` at AP ``l``."""
        return self.beta[k, l] * self.correlation

    def stacked(self) -> np.ndarray:
        """Network-wide NL x K channel, AP blocks in chain order."""
        return self.H.reshape(self.L * self.N, self.K)


def place_aps(L: int, D: float) -> np.ndarray:
    if L < 1:
        raise ConfigurationError(f"L must be >= 1, got {L}")
    if not D > 0:
        raise ConfigurationError(f"Perimeter must be positive, got {D}")
    side = D / 4.0
    arclength = np.arange(L) * (D / L)
    edge = np.floor(arclength / side).astype(int) % 4
    offset = arclength - np.floor(arclength / side) * side
    positions = np.empty((L, 2))
    # counterclockwise: bottom, right, top, left
    for idx in range(L):
        t = offset[idx]
        e = edge[idx]
        if e == 0:
            positions[idx] = (t, 0.0)
        elif e == 1:
            positions[idx] = (side, t)
        elif e == 2:
            positions[idx] = (side - t, side)
        else:
            positions[idx] = (0.0, side - t)
    return positions


def place_users(K: int, config: NetworkConfig, rng: np.random.Generator) -> np.ndarray:
    if config.inner_perimeter >= config.D:
        raise ConfigurationError(
            f"Inner perimeter {config.inner_perimeter} must be smaller than perimeter {config.D}"
        )
    center = config.D / 8.0
    half = config.inner_perimeter / 8.0
    return rng.uniform(center - half, center + half, size=(K, 2))


def large_scale_fading(d):
    """Linear large-scale coefficient for 3-D distance ``d`` (meters); accepts arrays."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise NumericError('Distance must be positive for the path-loss law')
    beta_db = PATHLOSS_INTERCEPT_DB - PATHLOSS_SLOPE_DB * np.log10(d)
    out = 10.0 ** (beta_db / 10.0)
    return float(out) if out.ndim == 0 else out


def correlation_matrix(N: int, model: str = 'iid', rho: float = 0.0) -> np.ndarray:
    """Normalized correlation shape (trace N); R_kl = beta_kl times this."""
    if model == 'iid':
        return np.eye(N)
    if model == 'exponential':
        return linalg.toeplitz(rho ** np.arange(N))
    raise ConfigurationError(f"Unknown correlation model '{model}'")


def psd_sqrt(R: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Hermitian square root of a PSD matrix; fails on materially negative eigenvalues."""
    R = np.asarray(R)
    if not np.allclose(R, R.conj().T, atol=tol * max(1.0, np.abs(R).max())):
        raise NumericError('Correlation matrix is not Hermitian')
    w, V = linalg.eigh(R)
    scale = max(1.0, float(np.abs(w).max(initial=0.0)))
    if w.min(initial=0.0) < -tol * scale:
        raise NumericError(f"Correlation matrix is not PSD (min eigenvalue {w.min():.3e})")
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.conj().T


def distances(placement: Placement, height: float) -> np.ndarray:
    diff = placement.user_positions[:, None, :] - placement.ap_positions[None, :, :]
    horizontal2 = np.sum(diff ** 2, axis=-1)
    return np.sqrt(horizontal2 + height ** 2)


def draw_channel(
    config: NetworkConfig,
    placement: Placement,
    rng: np.random.Generator,
    correlation: Optional[np.ndarray] = None,
) -> ChannelRealization:
    L, N, K = config.L, config.N, config.K
    if placement.ap_positions.shape != (L, 2) or placement.user_positions.shape != (K, 2):
        raise ConfigurationError('Placement does not match the configured L and K')
    if correlation is None:
        correlation = correlation_matrix(N, config.correlation, config.rho)
    root = psd_sqrt(correlation)
    d = distances(placement, config.height)
    beta = large_scale_fading(d)
    g = (rng.standard_normal((L, N, K)) + 1j * rng.standard_normal((L, N, K))) / np.sqrt(2.0)
    # column k of H_l = R_kl^{1/2} g with R_kl^{1/2} = sqrt(beta_kl) * root
    H = np.einsum('ij,ljk->lik', root, g) * np.sqrt(beta.T)[:, None, :]
    return ChannelRealization(
        beta=beta, correlation=np.asarray(correlation), H=H, distances=d, placement=placement,
    )


def generate(config: NetworkConfig, rng: np.random.Generator) -> ChannelRealization:
    """Placement plus channel for one coherence block."""
    placement = Placement(
        ap_positions=place_aps(config.L, config.D),
        user_positions=place_users(config.K, config, rng),
    )
    return draw_channel(config, placement, rng)
