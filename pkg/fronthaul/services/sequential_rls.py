"""
Sequential RLS estimation along the daisy chain and its closed-form oracle.

Each AP works on whitened quantities: H_hat_l = Z_l^{-1/2} H_l and
y_tilde_l = Z_l^{-1/2} y_hat_l, both expressed in the whitener's basis.
Directions with a zero Z^{-1} eigenvalue were discarded by the compressor
and contribute exact zeros.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .compression import Whitener
from .errors import ContractViolation, NumericError

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-10


@dataclass(frozen=True)
class RlsState:
    gamma: np.ndarray   # K x K
    s_hat: np.ndarray   # K or K x S
    stage: int = 0

    @classmethod
    def initial(cls, K: int, p: float, samples: Optional[int] = None) -> 'RlsState':
        shape = (K,) if samples is None else (K, samples)
        return cls(gamma=p * np.eye(K, dtype=complex), s_hat=np.zeros(shape, dtype=complex), stage=0)


@dataclass(frozen=True)
class WhitenedObservation:
    y_tilde: np.ndarray  # N or N x S


def _check_dims(H_l: np.ndarray, whitener: Whitener, K: Optional[int] = None):
    if H_l.ndim != 2:
        raise ContractViolation(f"Channel must be N x K, got shape {H_l.shape}")
    if H_l.shape[0] != whitener.N:
        raise ContractViolation(f"Channel has {H_l.shape[0]} rows, whitener expects {whitener.N}")
    if K is not None and H_l.shape[1] != K:
        raise ContractViolation(f"Channel has {H_l.shape[1]} columns, expected K = {K}")


def simulate_whitened_observation(
    H_l: np.ndarray,
    whitener: Whitener,
    s: np.ndarray,
    rng: Optional[np.random.Generator],
    noise: bool = True,
) -> WhitenedObservation:
    """
    y_tilde = Z^{-1/2} H_l s + w, where w is unit complex Gaussian on the kept
    directions and exactly zero on the discarded ones.
    """
    _check_dims(H_l, whitener, K=s.shape[0])
    y = whitener.whiten(H_l @ s)
    if noise:
        if rng is None:
            raise ContractViolation('A random generator is needed to draw observation noise')
        w = (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)) / np.sqrt(2.0)
        mask = whitener.kept if y.ndim == 1 else whitener.kept[:, None]
        y = y + np.where(mask, w, 0.0)
    return WhitenedObservation(y_tilde=y)


def _hermitian_checked(gamma: np.ndarray) -> np.ndarray:
    scale = max(1.0, float(np.abs(gamma).max(initial=0.0)))
    if np.abs(gamma - gamma.conj().T).max(initial=0.0) > HERMITIAN_TOL * scale:
        raise NumericError('RLS state is not Hermitian')
    return gamma


def rls_step(state: RlsState, H_l: np.ndarray, whitener: Whitener, y_tilde: np.ndarray) -> RlsState:
    _check_dims(H_l, whitener, K=state.gamma.shape[0])
    gamma = _hermitian_checked(state.gamma)
    Hw = whitener.whiten(H_l)
    y_tilde = np.asarray(y_tilde)
    if y_tilde.shape[0] != whitener.N:
        raise ContractViolation(f"Observation has {y_tilde.shape[0]} rows, expected {whitener.N}")

    G = Hw @ gamma                      # N x K
    M = np.eye(whitener.N) + G @ Hw.conj().T
    M = 0.5 * (M + M.conj().T)
    factor = linalg.cho_factor(M, lower=True)
    gamma_next = gamma - G.conj().T @ linalg.cho_solve(factor, G)
    gamma_next = 0.5 * (gamma_next + gamma_next.conj().T)

    innovation = y_tilde - Hw @ state.s_hat
    s_next = state.s_hat + gamma_next @ (Hw.conj().T @ innovation)
    return RlsState(gamma=gamma_next, s_hat=s_next, stage=state.stage + 1)


def rls_run(
    H: Sequence[np.ndarray],
    whiteners: Sequence[Whitener],
    observations: Sequence[np.ndarray],
    p: float,
) -> Tuple[np.ndarray, List[np.ndarray]]:
    """
    Fold ``rls_step`` over the chain.

    Returns the final estimate and the Gamma trajectory [Gamma_0, ..., Gamma_L].
    """
    L = len(H)
    if len(whiteners) != L or len(observations) != L:
        raise ContractViolation(
            f"Inconsistent chain length: {L} channels, {len(whiteners)} whiteners, {len(observations)} observations"
        )
    if L == 0:
        raise ContractViolation('Empty chain')
    K = H[0].shape[1]
    first = np.asarray(observations[0])
    state = RlsState.initial(K, p, samples=None if first.ndim == 1 else first.shape[1])
    trajectory = [state.gamma]
    for l in range(L):
        state = rls_step(state, H[l], whiteners[l], observations[l])
        trajectory.append(state.gamma)
    logger.debug(f"RLS chain finished after {state.stage} stages")
    return state.s_hat, trajectory


def whitened_stack(H: Sequence[np.ndarray], whiteners: Sequence[Whitener]) -> np.ndarray:
    if len(H) != len(whiteners):
        raise ContractViolation(f"{len(H)} channels but {len(whiteners)} whiteners")
    return np.vstack([w.whiten(np.atleast_2d(h)) for h, w in zip(H, whiteners)])


def _regularized_solve(Hw: np.ndarray, rhs: np.ndarray, p: float) -> np.ndarray:
    K = Hw.shape[1]
    A = Hw.conj().T @ Hw + np.eye(K) / p
    A = 0.5 * (A + A.conj().T)
    return linalg.cho_solve(linalg.cho_factor(A, lower=True), rhs)


def centralized_ls(
    H: Sequence[np.ndarray],
    whiteners: Sequence[Whitener],
    observations: Sequence[np.ndarray],
    p: float,
    whitened: bool = True,
) -> np.ndarray:
    """
    s_hat = (H^H Z^{-1} H + I/p)^{-1} H^H Z^{-1} y_hat, evaluated in whitened
    coordinates. With ``whitened=False`` the observations are the raw stored
    vectors y_hat_l and are whitened here.
    """
    Hw = whitened_stack(H, whiteners)
    if whitened:
        y = np.concatenate([np.asarray(o) for o in observations], axis=0)
    else:
        y = np.concatenate([w.whiten(np.asarray(o)) for o, w in zip(observations, whiteners)], axis=0)
    if y.shape[0] != Hw.shape[0]:
        raise ContractViolation(f"Observations have {y.shape[0]} rows, channel has {Hw.shape[0]}")
    return _regularized_solve(Hw, Hw.conj().T @ y, p)


def combiner_matrix(H: Sequence[np.ndarray], whiteners: Sequence[Whitener], p: float) -> np.ndarray:
    """V = (H^H Z^{-1} H + I/p)^{-1} H^H Z^{-1}, acting on the raw stacked vector y_hat (K x NL)."""
    Hw = whitened_stack(H, whiteners)
    whitening = linalg.block_diag(*[(w.basis * w.zinv_sqrt_eigs).conj().T for w in whiteners])
    return _regularized_solve(Hw, Hw.conj().T @ whitening, p)
