"""Clustered precoding: each cluster of APs optimizes its own block.

A cluster only knows the channels from its own APs. Out-of-cluster channels
are zero-mean, so the cluster's SINR model simply drops them (the "virtual"
SINR). The cluster problems are solved independently with the same
path-following machinery and the blocks are stacked back in AP order; rates
are always reported with the true global SINR.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import pfa
from .config import ConfigError
from .rates import RateVector, evaluate_rates, sinr


@dataclass(frozen=True)
class ClusterPartition:
    assignment: tuple  # AP index -> cluster index
    members: tuple  # per-cluster sorted AP index arrays (as tuples)

    @property
    def n_clusters(self) -> int:
        return len(self.members)

    @property
    def L(self) -> int:
        return len(self.assignment)

    def rows(self, c: int, N: int) -> np.ndarray:
        """Channel/precoder rows of cluster ``c`` (AP-major, ``N`` per AP)."""
        aps = np.asarray(self.members[c])
        return (aps[:, None] * N + np.arange(N)[None, :]).reshape(-1)


def _from_assignment(assignment: Sequence[int]) -> ClusterPartition:
    assignment = tuple(int(c) for c in assignment)
    labels = sorted(set(assignment))
    if labels != list(range(len(labels))):
        raise ConfigError("cluster labels must be 0..C-1")
    members = tuple(tuple(l for l, c in enumerate(assignment) if c == lab) for lab in labels)
    return ClusterPartition(assignment, members)


def partition_aps(geometry, M: int, cluster_map: Optional[Sequence[int]] = None) -> ClusterPartition:
    """Split the APs into clusters of ``M`` grid-contiguous APs.

    APs are indexed columns-first, so consecutive index ranges are blocks of
    whole grid columns when ``M`` is a multiple of the column height.
    ``geometry`` may be a :class:`~cellfree_urllc.scenario.NetworkGeometry`
    or the AP count. ``cluster_map`` overrides the grouping (every cluster
    must still hold exactly ``M`` APs).
    """
    L = geometry if isinstance(geometry, (int, np.integer)) else geometry.L
    if M < 1 or L % M:
        raise ConfigError(f"cluster size M={M} does not divide L={L}")
    if cluster_map is not None:
        if len(cluster_map) != L:
            raise ConfigError("cluster_map must assign every AP")
        part = _from_assignment(cluster_map)
        if any(len(m) != M for m in part.members):
            raise ConfigError(f"every cluster must contain M={M} APs")
        return part
    return _from_assignment([l // M for l in range(L)])


def virtual_sinr(H_cluster: np.ndarray, W_cluster: np.ndarray, k: int, sigma2: float) -> float:
    """SINR of user ``k`` when only the cluster's APs transmit."""
    return sinr(H_cluster, W_cluster, k, sigma2)


def run_cluster(H_cluster, config, rng=None, start=None, a=None):
    """Path-following run on one cluster's channel rows -> ``(W_cluster, trace)``."""
    return pfa.run(H_cluster, config, rng, start=start, a=a)


def assemble(cluster_precoders: Sequence[np.ndarray], partition: ClusterPartition, N: int) -> np.ndarray:
    """Stack cluster blocks into the global ``(L*N, K)`` precoder in AP order."""
    if len(cluster_precoders) != partition.n_clusters:
        raise ValueError("one precoder per cluster is required")
    K = {np.shape(W)[1] for W in cluster_precoders}
    if len(K) != 1:
        raise ValueError("cluster precoders disagree on K")
    out = np.zeros((partition.L * N, K.pop()), dtype=complex)
    for c, Wc in enumerate(cluster_precoders):
        rows = partition.rows(c, N)
        if Wc.shape[0] != rows.size:
            raise ValueError(f"cluster {c} block has {Wc.shape[0]} rows, expected {rows.size}")
        out[rows] = Wc
    return out


def _cluster_job(args):
    H_c, config, W0_c, a = args
    return run_cluster(H_c, config, start=W0_c, a=a)


def run_decentralized(
    H: np.ndarray,
    partition: ClusterPartition,
    config,
    rng: np.random.Generator,
    a: Optional[float] = None,
    workers: int = 1,
    return_traces: bool = False,
):
    """Solve every cluster, assemble, and evaluate the global rates.

    One random start is drawn for the whole network (exactly as the
    centralized run draws it) and sliced per cluster, so a single cluster
    of all APs reproduces the centralized result. Returns ``(W, rates)``
    or ``(W, rates, traces)``.
    """
    N = config.N
    L = H.shape[0] // N
    if partition.L != L:
        raise ValueError("partition does not match the channel's AP count")
    W0 = pfa._draw_start(H, config, rng)
    jobs = []
    for c in range(partition.n_clusters):
        rows = partition.rows(c, N)
        jobs.append((H[rows], config, W0[rows], a))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_cluster_job, jobs))
    else:
        results = [_cluster_job(j) for j in jobs]
    W = assemble([r[0] for r in results], partition, N)
    rates = evaluate_rates(H, W, config.sigma2, config.t, config.B, config.epsilon)
    if return_traces:
        return W, rates, [r[1] for r in results]
    return W, rates


def flop_ratio(config, partition: ClusterPartition, K: Optional[int] = None) -> dict:
    """Per-iteration interior-point cost of one cluster vs. the centralized problem.

    Uses the ``(dim)^3 (2K+1)`` order with ``dim = (APs) * N * K``; reports the
    per-cluster ratio and the ratio for all clusters solved sequentially.
    """
    K = config.K if K is None else K
    cent = (config.L * config.N * K) ** 3 * (2 * K + 1)
    sizes = [len(m) for m in partition.members]
    per = [(s * config.N * K) ** 3 * (2 * K + 1) for s in sizes]
    return {
        "centralized": cent,
        "per_cluster": max(per),
        "all_clusters": sum(per),
        "ratio_per_cluster": max(per) / cent,
        "ratio_all_clusters": sum(per) / cent,
    }
