"""
Rate-constrained compression of the stored received vectors.

Both schemes reduce to reverse water-filling over a set of per-direction
SNRs g_i: eigen-directions of H_l H_l^H for vector-wise compression (VC),
antennas for element-wise compression (EC). Writing the Lagrange
multiplier as mu = 1 / (1 + 2**x), the KKT solution

    lambda_i = [ (1/mu) (1/sigma2 - 1/c_i) - 1/sigma2 ]^+ ,   c_i = p e_i + sigma2

spends log2(lambda_i c_i + 1) = max(0, log2 g_i + x) bits on direction i,
so the total rate is piecewise linear and increasing in the water level x.
The level is found by bisection in x, which stays well conditioned for
budgets of thousands of bits where mu itself would underflow. Per-direction
bits and the whitener eigenvalues are derived from x directly, so 2**x is
never formed.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy import linalg, optimize
from scipy.special import expit

from .errors import ContractViolation, NumericError

logger = logging.getLogger(__name__)

RATE_TOL_BITS = 1e-6
MAX_BISECTION_ITER = 200
LN2 = math.log(2.0)
TINY = float(np.finfo(float).tiny)
MAX_LOG2_INVERSE_NOISE = 1000.0


@dataclass(frozen=True)
class VcAllocation:
    U: np.ndarray                     # N x N eigenvectors of H_l H_l^H
    lambda_h2: np.ndarray             # eigenvalues of H_l H_l^H, null space clipped to 0
    lambda_q: Optional[np.ndarray]    # eigenvalues of Q_vl^{-1}; None when unlimited
    mu: float
    achieved_bits: float
    water_level: float = -math.inf
    unlimited: bool = False
    rate_unreachable: bool = False
    bits: Optional[np.ndarray] = None       # bits per eigen-direction
    zinv: Optional[np.ndarray] = None       # eigenvalues of (Q_vl + sigma2 I)^{-1}

    scheme = 'vc'


@dataclass(frozen=True)
class EcAllocation:
    inv_sigma2_e: Optional[np.ndarray]       # diagonal of (Q_el^d)^{-1}; None when unlimited
    bits_per_element: Optional[np.ndarray]
    P_diag: np.ndarray
    W_diag: np.ndarray
    mu: float
    achieved_bits: float
    water_level: float = -math.inf
    unlimited: bool = False
    rate_unreachable: bool = False
    zinv: Optional[np.ndarray] = None       # diagonal of (Q_el^d + sigma2 I)^{-1}

    scheme = 'ec'


Allocation = Union[VcAllocation, EcAllocation]


@dataclass(frozen=True)
class Whitener:
    basis: np.ndarray           # N x N unitary
    zinv_eigs: np.ndarray       # eigenvalues of Z^{-1} in ``basis``
    zinv_sqrt_eigs: np.ndarray

    @property
    def N(self) -> int:
        return self.basis.shape[0]

    @property
    def kept(self) -> np.ndarray:
        return self.zinv_eigs > 0

    def whiten(self, X: np.ndarray) -> np.ndarray:
        """Apply Z^{-1/2} in the whitener's basis to the rows of ``X`` (N x ...)."""
        if X.shape[0] != self.N:
            raise ContractViolation(f"Expected {self.N} rows, got {X.shape[0]}")
        rotated = self.basis.conj().T @ X
        if X.ndim == 1:
            return self.zinv_sqrt_eigs * rotated
        return self.zinv_sqrt_eigs[:, None] * rotated

    def zinv_matrix(self) -> np.ndarray:
        return (self.basis * self.zinv_eigs) @ self.basis.conj().T


def _null_space_tol(values: np.ndarray) -> float:
    top = float(np.max(values, initial=0.0))
    return top * max(values.size, 1) * np.finfo(float).eps * 10.0


def _clip_null(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float).copy()
    values[values <= _null_space_tol(values)] = 0.0
    return values


def _rate_at_level(log2_gains: np.ndarray, x: float) -> float:
    return float(np.sum(np.maximum(0.0, log2_gains + x)))


def _solve_water_level(gains: np.ndarray, C_s: float) -> Tuple[float, float, bool]:
    """
    Water level x with sum_i max(0, log2 g_i + x) = C_s.

    Only strictly positive gains take part. Returns (x, achieved_bits, converged).
    """
    log2_gains = np.log2(gains[gains > 0])
    top = float(log2_gains.max())
    if log2_gains.size == 1:
        return C_s - top, C_s, True

    x_lo = -top                  # rate 0
    x_hi = C_s - top + 1.0       # the strongest direction alone exceeds C_s by a bit
    f_lo = _rate_at_level(log2_gains, x_lo) - C_s
    f_hi = _rate_at_level(log2_gains, x_hi) - C_s
    if f_lo > 0 or f_hi < 0:
        raise NumericError(f"Water level not bracketed: f({x_lo:.6g})={f_lo:.3g}, f({x_hi:.6g})={f_hi:.3g}")

    # rate has slope <= number of active directions
    xtol = RATE_TOL_BITS / (10.0 * log2_gains.size)
    x, info = optimize.bisect(
        lambda t: _rate_at_level(log2_gains, t) - C_s,
        x_lo, x_hi,
        xtol=xtol,
        maxiter=MAX_BISECTION_ITER,
        full_output=True,
        disp=False,
    )
    achieved = _rate_at_level(log2_gains, x)
    converged = bool(info.converged) and abs(achieved - C_s) <= RATE_TOL_BITS
    if not converged:
        logger.warning(f"Bisection stopped after {info.iterations} iterations: "
                       f"achieved {achieved:.9g} bits for target {C_s:.9g}")
    return x, achieved, converged


def _mu_from_level(x: float) -> float:
    # 1 / (1 + 2**x), floored at the smallest normal float for very high levels
    return max(float(expit(-x * LN2)), TINY)


def _direction_bits(gains: np.ndarray, x: float) -> np.ndarray:
    """log2(lambda_i c_i + 1) = max(0, log2 g_i + x); zero-gain directions get nothing."""
    bits = np.zeros_like(gains)
    active = gains > 0
    bits[active] = np.maximum(0.0, np.log2(gains[active]) + x)
    return bits


def _inverse_noise(bits: np.ndarray, signal_var: np.ndarray) -> np.ndarray:
    """(2**b_i - 1) / c_i, saturating at 2**MAX_LOG2_INVERSE_NOISE instead of overflowing."""
    return np.expm1(np.minimum(bits, MAX_LOG2_INVERSE_NOISE) * LN2) / signal_var


def _zinv_from_level(bits: np.ndarray, x: float, sigma2: float) -> np.ndarray:
    """
    lambda / (1 + sigma2 lambda) per direction, written as
    (1 - 2**-b) / (sigma2 (1 + 2**-x)) so that neither 2**b nor lambda is formed.
    """
    return -np.expm1(-bits * LN2) / (sigma2 * (1.0 + np.exp2(-x)))


def _log2_inverse_noise(bits: np.ndarray, signal_var: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    # (log2 lambda, 1/lambda) for strictly positive bits, both finite at any budget
    kept_fraction = -np.expm1(-bits * LN2)
    log2_lam = bits + np.log2(kept_fraction) - np.log2(signal_var)
    inv_lam = signal_var * np.exp2(-bits) / kept_fraction
    return log2_lam, inv_lam


def _check_budget(C_s: Optional[float]):
    if C_s is not None and (math.isnan(C_s) or C_s < 0):
        raise ContractViolation(f"Bit budget must be non-negative or unlimited, got {C_s}")


def vc_waterfill(H_l: np.ndarray, p: float, sigma2: float, C_s: Optional[float]) -> VcAllocation:
    """Vector-wise compression at one AP. ``C_s=None`` means unlimited."""
    _check_budget(C_s)
    H_l = np.atleast_2d(H_l)
    N = H_l.shape[0]
    w, U = linalg.eigh(H_l @ H_l.conj().T)
    lambda_h2 = _clip_null(w)

    if C_s is None:
        return VcAllocation(U=U, lambda_h2=lambda_h2, lambda_q=None, mu=0.0,
                            achieved_bits=math.inf, water_level=math.inf, unlimited=True)

    gains = p * lambda_h2 / sigma2
    if C_s == 0 or not np.any(gains > 0):
        unreachable = C_s > 0
        if unreachable:
            logger.warning('Channel is zero at this AP; the bit budget cannot be spent')
        top = float(gains.max(initial=0.0))
        return VcAllocation(U=U, lambda_h2=lambda_h2, lambda_q=np.zeros(N),
                            mu=top / (1.0 + top) if top > 0 else 1.0, achieved_bits=0.0,
                            rate_unreachable=unreachable, bits=np.zeros(N), zinv=np.zeros(N))

    x, achieved, _ = _solve_water_level(gains, C_s)
    bits = _direction_bits(gains, x)
    return VcAllocation(U=U, lambda_h2=lambda_h2, lambda_q=_inverse_noise(bits, p * lambda_h2 + sigma2),
                        mu=_mu_from_level(x), achieved_bits=achieved, water_level=x,
                        bits=bits, zinv=_zinv_from_level(bits, x, sigma2))


def ec_waterfill(H_l: np.ndarray, p: float, sigma2: float, C_s: Optional[float]) -> EcAllocation:
    """Element-wise compression at one AP. ``C_s=None`` means unlimited."""
    _check_budget(C_s)
    H_l = np.atleast_2d(H_l)
    N = H_l.shape[0]
    W_diag = np.sum(np.abs(H_l) ** 2, axis=1)
    P_diag = p * W_diag + sigma2

    if C_s is None:
        return EcAllocation(inv_sigma2_e=None, bits_per_element=None, P_diag=P_diag, W_diag=W_diag,
                            mu=0.0, achieved_bits=math.inf, water_level=math.inf, unlimited=True)

    gains = p * W_diag / sigma2
    if C_s == 0 or not np.any(gains > 0):
        unreachable = C_s > 0
        if unreachable:
            logger.warning('All channel rows are zero at this AP; the bit budget cannot be spent')
        top = float(gains.max(initial=0.0))
        return EcAllocation(inv_sigma2_e=np.zeros(N), bits_per_element=np.zeros(N), P_diag=P_diag,
                            W_diag=W_diag, mu=top / (1.0 + top) if top > 0 else 1.0,
                            achieved_bits=0.0, rate_unreachable=unreachable, zinv=np.zeros(N))

    x, _, _ = _solve_water_level(gains, C_s)
    bits = _direction_bits(gains, x)
    return EcAllocation(inv_sigma2_e=_inverse_noise(bits, P_diag), bits_per_element=bits,
                        P_diag=P_diag, W_diag=W_diag, mu=_mu_from_level(x),
                        achieved_bits=float(np.sum(bits)), water_level=x,
                        zinv=_zinv_from_level(bits, x, sigma2))


def waterfill(scheme: str, H_l: np.ndarray, p: float, sigma2: float, C_s: Optional[float]) -> Optional[Allocation]:
    if scheme == 'vc':
        return vc_waterfill(H_l, p, sigma2, C_s)
    if scheme == 'ec':
        return ec_waterfill(H_l, p, sigma2, C_s)
    if scheme == 'none':
        return None
    raise ContractViolation(f"Unknown scheme '{scheme}'")


def build_whitener(alloc: Optional[Allocation], sigma2: float, N: Optional[int] = None) -> Whitener:
    """Z^{-1} and Z^{-1/2} for an allocation, or receiver noise only when ``alloc`` is None."""
    if alloc is None or alloc.unlimited:
        if alloc is not None:
            N = alloc.U.shape[0] if isinstance(alloc, VcAllocation) else alloc.P_diag.size
        if N is None:
            raise ContractViolation('Antenna count is needed to build an uncompressed whitener')
        basis = alloc.U if isinstance(alloc, VcAllocation) else np.eye(N)
        zinv = np.full(N, 1.0 / sigma2)
    elif isinstance(alloc, VcAllocation):
        basis = alloc.U
        zinv = alloc.zinv
    else:
        basis = np.eye(alloc.P_diag.size)
        zinv = alloc.zinv
    return Whitener(basis=basis, zinv_eigs=zinv, zinv_sqrt_eigs=np.sqrt(zinv))


def _log2det_pd(M: np.ndarray) -> float:
    M = 0.5 * (M + M.conj().T)
    c, _ = linalg.cho_factor(M, lower=True)
    return float(2.0 * np.sum(np.log(np.real(np.diag(c)))) / LN2)


def log2det_eye_plus(A: np.ndarray) -> float:
    """log2 det(I + A) for Hermitian PSD ``A`` via Cholesky."""
    return _log2det_pd(np.eye(A.shape[0]) + A)


def achieved_rate(alloc: Optional[Allocation], H_l: np.ndarray, p: float, sigma2: float) -> float:
    """
    Mutual information I(y_l; y_hat_l | H_l) in bits recomputed from H_l:
    log2 det(Q^{-1}(pHH^H + sigma2 I) + I) for VC, the P_l form for EC.

    Evaluated as sum log2 lambda_i + log2 det(Lambda^{-1} + R) over the kept
    directions, which stays finite when lambda_i exceeds the float range.
    """
    if alloc is None or alloc.unlimited:
        return math.inf
    H_l = np.atleast_2d(H_l)
    N = H_l.shape[0]
    if isinstance(alloc, VcAllocation):
        kept = alloc.bits > 0
        if not kept.any():
            return 0.0
        Ry = p * (H_l @ H_l.conj().T) + sigma2 * np.eye(N)
        U = alloc.U[:, kept]
        log2_lam, inv_lam = _log2_inverse_noise(alloc.bits[kept], p * alloc.lambda_h2[kept] + sigma2)
        return float(np.sum(log2_lam)) + _log2det_pd(np.diag(inv_lam) + U.conj().T @ Ry @ U)
    kept = alloc.bits_per_element > 0
    if not kept.any():
        return 0.0
    P = p * np.sum(np.abs(H_l[kept]) ** 2, axis=1) + sigma2
    log2_lam, inv_lam = _log2_inverse_noise(alloc.bits_per_element[kept], alloc.P_diag[kept])
    return float(np.sum(log2_lam + np.log2(P + inv_lam)))



def compression_objective(alloc: Optional[Allocation], H_l: np.ndarray, p: float, sigma2: float) -> float:
    """Per-AP objective: log2 det(p H H^H Z^{-1} + I) for VC, the diagonal W_l form for EC."""
    H_l = np.atleast_2d(H_l)
    whitener = build_whitener(alloc, sigma2, N=H_l.shape[0])
    if isinstance(alloc, EcAllocation):
        W = np.sum(np.abs(H_l) ** 2, axis=1)
        return float(np.sum(np.log2(1.0 + p * W * whitener.zinv_eigs)))
    Hw = whitener.whiten(H_l)
    return log2det_eye_plus(p * (Hw.conj().T @ Hw))
