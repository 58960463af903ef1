"""Duality-based MMSE precoding baseline and closed-form complexity counts."""

from __future__ import annotations

from typing import Optional

import numpy as np
from scipy import linalg


def mmse_directions(H: np.ndarray, p: float, sigma2: float) -> np.ndarray:
    """Uplink MMSE combiners ``v_k = p (p H H^H + sigma2 I)^-1 h_k`` as columns."""
    if not p > 0:
        raise ValueError("per-user power p must be positive")
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    LN = H.shape[0]
    C = p * (H @ H.conj().T) + sigma2 * np.eye(LN)
    return p * linalg.solve(C, H, assume_a="her")


def mmse_precoding(
    H: np.ndarray,
    p: float,
    sigma2: float,
    p_max: float,
    N: Optional[int] = None,
    L: Optional[int] = None,
) -> np.ndarray:
    """MMSE directions normalized per AP block.

    ``w_kl = sqrt(p_max / K) v_kl / ||v_kl||`` so every AP spends exactly
    ``p_max`` split equally over users. Give ``N`` (antennas per AP) or
    ``L`` (AP count).
    """
    LN, K = H.shape
    if N is None:
        if L is None:
            raise ValueError("need N or L to locate AP blocks")
        N = LN // L
    L = LN // N
    V = mmse_directions(H, p, sigma2).reshape(L, N, K)
    norms = np.linalg.norm(V, axis=1, keepdims=True)
    # a zero block (all-zero channel column) gets an arbitrary unit direction
    zero = norms == 0
    if np.any(zero):
        V = np.where(zero, 1.0 / np.sqrt(N), V)
        norms = np.where(zero, 1.0, norms)
    W = np.sqrt(p_max / K) * V / norms
    return W.reshape(LN, K)


def mmse_flops(L: int, N: int, K: int) -> int:
    """Complex multiplications of the MMSE precoder:
    ``(N^2 L^2 K + N L K)/2 + (N^3 L^3 - N L)/3 + N^2 L^2``."""
    n = N * L
    first = (n * n * K + n * K) // 2
    second = (n**3 - n) // 3
    return first + second + n * n


def pfa_iteration_order(L: int, N: int, K: int) -> int:
    """Per-iteration interior-point order ``(L N K)^3 (2K + 1)``."""
    return (L * N * K) ** 3 * (2 * K + 1)


def flop_report(config, mode: str = "centralized", iterations: Optional[float] = None,
                cluster_size: Optional[int] = None) -> dict:
    """Closed-form cost figures at the configuration's dimensions.

    ``mode`` selects which optimizer the PFA figures refer to: for
    ``"decentralized"`` the per-iteration order uses ``cluster_size`` APs
    (default ``config.M``). ``iterations`` (measured mean outer iterations)
    scales the per-iteration order into a per-run estimate when given.
    """
    L, N, K = config.L, config.N, config.K
    aps = L
    if mode == "decentralized":
        aps = config.M if cluster_size is None else cluster_size
    per_iter = pfa_iteration_order(aps, N, K)
    report = {
        "mode": mode,
        "mmse_multiplications": mmse_flops(L, N, K),
        "pfa_per_iteration_order": per_iter,
        "pfa_centralized_per_iteration_order": pfa_iteration_order(L, N, K),
        "measured_iterations": iterations,
    }
    if iterations is not None:
        report["pfa_run_order"] = per_iter * iterations
    return report
