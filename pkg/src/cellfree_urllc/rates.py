"""SINR, Shannon rate and the normal-approximation URLLC rate.

Rates are in nats/s/Hz internally; :func:`nats_to_bits` converts for reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

LN2 = math.log(2.0)


def gram(H: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Inner products ``G[k, i] = h_k^H w_i``."""
    return H.conj().T @ W


def sinr_all(H: np.ndarray, W: np.ndarray, sigma2: float) -> np.ndarray:
    """Per-user SINR for precoder ``W`` (columns ``w_i``) over channel ``H``."""
    P = np.abs(gram(H, W)) ** 2
    signal = np.diag(P)
    interference = P.sum(axis=1) - signal
    return signal / (interference + sigma2)


def sinr(H: np.ndarray, W: np.ndarray, k: int, sigma2: float) -> float:
    g = H[:, k].conj() @ W
    p = np.abs(g) ** 2
    return float(p[k] / (p.sum() - p[k] + sigma2))


def shannon_rate(phi):
    """``ln(1 + phi)`` [nats/s/Hz]."""
    return np.log1p(phi)


def dispersion(phi):
    """Channel dispersion ``1 - (1 + phi)^-2``."""
    phi = np.asarray(phi, dtype=float)
    # -expm1(-2 log1p) keeps precision for small phi
    return -np.expm1(-2.0 * np.log1p(phi))


def q_function(x):
    """Gaussian tail probability ``Q(x)``."""
    return special.ndtr(-np.asarray(x, dtype=float))


def q_inverse(epsilon):
    """Inverse Gaussian Q-function, ``x`` such that ``Q(x) = epsilon``."""
    eps = np.asarray(epsilon, dtype=float)
    if np.any((eps <= 0.0) | (eps >= 1.0)) or np.any(np.isnan(eps)):
        raise ValueError("q_inverse is defined on (0, 1)")
    x = -special.ndtri(eps)
    return float(x) if x.ndim == 0 else x


def penalty_factor(t: float, B: float, epsilon: float) -> float:
    """``a = Q^-1(epsilon) / sqrt(t B)``, the weight of sqrt(V) in the rate."""
    if t * B <= 0:
        raise ValueError("t*B must be positive")
    return q_inverse(epsilon) / math.sqrt(t * B)


def urllc_rate(phi, t: float, B: float, epsilon: float):
    """Normal-approximation rate ``ln(1+phi) - sqrt(V/(tB)) Q^-1(eps)``.

    The value may be negative for very small ``phi``; it is not clamped.
    """
    return shannon_rate(phi) - penalty_factor(t, B, epsilon) * np.sqrt(dispersion(phi))


def nats_to_bits(rate):
    return np.multiply(rate, 1.0 / LN2)


@dataclass(frozen=True)
class RateVector:
    """Per-user rates for one channel/precoder pair (nats unless noted)."""

    sinr: np.ndarray
    shannon: np.ndarray
    dispersion: np.ndarray
    urllc: np.ndarray

    @property
    def shannon_bits(self) -> np.ndarray:
        return self.shannon / LN2

    @property
    def urllc_bits(self) -> np.ndarray:
        return self.urllc / LN2

    @property
    def min_urllc(self) -> float:
        return float(self.urllc.min())

    @property
    def min_shannon(self) -> float:
        return float(self.shannon.min())


def evaluate_rates(H, W, sigma2: float, t: float, B: float, epsilon: float) -> RateVector:
    phi = sinr_all(H, W, sigma2)
    return RateVector(
        sinr=phi,
        shannon=shannon_rate(phi),
        dispersion=dispersion(phi),
        urllc=urllc_rate(phi, t, B, epsilon),
    )


def per_ap_power(W: np.ndarray, L: int) -> np.ndarray:
    """``sum_k ||w_kl||^2`` for each AP ``l``."""
    N = W.shape[0] // L
    return (np.abs(W.reshape(L, N, -1)) ** 2).sum(axis=(1, 2))
