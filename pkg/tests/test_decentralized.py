import numpy as np
import pytest

from cellfree_urllc.config import ConfigError, ScenarioConfig
from cellfree_urllc.decentralized import (assemble, flop_ratio, partition_aps, run_cluster,
                                          run_decentralized, virtual_sinr)
from cellfree_urllc.pfa import run
from cellfree_urllc.rates import evaluate_rates
from cellfree_urllc.scenario import build_geometry
from conftest import random_channel
from oracles import sinr_scalar


def test_partition_is_columns_first():
    cfg = ScenarioConfig()
    geo = build_geometry(cfg, np.random.default_rng(0))
    part = partition_aps(geo, 4)
    assert part.n_clusters == 4 and part.L == 16
    assert part.assignment == tuple(l // 4 for l in range(16))
    for members in part.members:
        xs = geo.ap_positions[list(members), 0]
        assert np.ptp(xs) == 0.0  # one grid column per cluster
    two = partition_aps(16, 8)
    assert two.members == (tuple(range(8)), tuple(range(8, 16)))
    np.testing.assert_array_equal(two.rows(1, 2), np.arange(16, 32))


def test_partition_errors():
    with pytest.raises(ConfigError):
        partition_aps(16, 3)
    with pytest.raises(ConfigError):
        partition_aps(16, 0)
    with pytest.raises(ConfigError):
        partition_aps(4, 2, cluster_map=[0, 0, 0, 1])
    with pytest.raises(ConfigError):
        partition_aps(4, 2, cluster_map=[0, 0, 2, 2])
    with pytest.raises(ConfigError):
        partition_aps(4, 2, cluster_map=[0, 1])
    custom = partition_aps(4, 2, cluster_map=[1, 0, 1, 0])
    assert custom.members == ((1, 3), (0, 2))


def test_virtual_sinr_ignores_other_clusters(rng):
    H = random_channel(rng, 4, 2)
    W = random_channel(rng, 4, 2)
    part = partition_aps(2, 1)
    rows = part.rows(0, 2)
    got = virtual_sinr(H[rows], W[rows], 1, 0.1)
    assert got == pytest.approx(sinr_scalar(H[rows].tolist(), W[rows].tolist(), 1, 0.1), rel=1e-12)


def test_assemble_places_blocks(rng):
    part = partition_aps(4, 2, cluster_map=[1, 0, 1, 0])
    blocks = [random_channel(rng, 4, 3), random_channel(rng, 4, 3)]
    W = assemble(blocks, part, 2)
    np.testing.assert_array_equal(W[2:4], blocks[0][:2])
    np.testing.assert_array_equal(W[6:8], blocks[0][2:])
    np.testing.assert_array_equal(W[0:2], blocks[1][:2])
    with pytest.raises(ValueError):
        assemble(blocks[:1], part, 2)
    with pytest.raises(ValueError):
        assemble([blocks[0], blocks[1][:2]], part, 2)


@pytest.mark.parametrize("seed", range(3))
def test_one_cluster_is_centralized(seed):
    cfg = ScenarioConfig(L=3, N=2, K=3, M=3, sigma2=0.05)
    H = random_channel(np.random.default_rng(seed), 6, 3)
    Wc, _ = run(H, cfg, np.random.default_rng(seed))
    Wd, rates = run_decentralized(H, partition_aps(3, 3), cfg, np.random.default_rng(seed))
    np.testing.assert_array_equal(Wc, Wd)
    ref = evaluate_rates(H, Wc, cfg.sigma2, cfg.t, cfg.B, cfg.epsilon)
    np.testing.assert_array_equal(rates.urllc, ref.urllc)


def test_rates_use_global_sinr():
    cfg = ScenarioConfig(L=4, N=1, K=2, M=2, sigma2=0.05)
    H = random_channel(np.random.default_rng(4), 4, 2)
    W, rates, traces = run_decentralized(H, partition_aps(4, 2), cfg, np.random.default_rng(0),
                                         return_traces=True)
    assert len(traces) == 2
    for k in range(2):
        assert rates.sinr[k] == pytest.approx(sinr_scalar(H.tolist(), W.tolist(), k, cfg.sigma2), rel=1e-10)


def test_single_antenna_clusters_ignore_phase():
    # a one-AP cluster only sees |h_l w_l|, so it transmits at full power but
    # with whatever phase it started from: no coherent combining is implied
    cfg = ScenarioConfig(L=4, N=1, K=1, M=1, sigma2=0.1)
    H = random_channel(np.random.default_rng(6), 4, 1)
    part = partition_aps(4, 1)
    W, rates = run_decentralized(H, part, cfg, np.random.default_rng(0))
    np.testing.assert_allclose(np.abs(W[:, 0]) ** 2, cfg.p_max, rtol=1e-5)
    for l in range(4):
        rows = part.rows(l, 1)
        v = virtual_sinr(H[rows], W[rows], 0, cfg.sigma2)
        assert v == pytest.approx(cfg.p_max * abs(H[l, 0]) ** 2 / cfg.sigma2, rel=1e-5)
    coherent = cfg.p_max * np.abs(H[:, 0]).sum() ** 2 / cfg.sigma2
    assert rates.sinr[0] <= coherent * (1 + 1e-9)
    assert rates.sinr[0] == pytest.approx(abs(H[:, 0].conj() @ W[:, 0]) ** 2 / cfg.sigma2, rel=1e-12)


def test_run_cluster_is_pfa():
    cfg = ScenarioConfig(L=2, N=2, K=2, M=2, sigma2=0.05)
    H = random_channel(np.random.default_rng(2), 4, 2)
    W1, _ = run_cluster(H, cfg, np.random.default_rng(1))
    W2, _ = run(H, cfg, np.random.default_rng(1))
    np.testing.assert_array_equal(W1, W2)


def test_partition_mismatch():
    cfg = ScenarioConfig(L=4, N=1, K=1, M=2, sigma2=0.1)
    H = random_channel(np.random.default_rng(0), 4, 1)
    with pytest.raises(ValueError):
        run_decentralized(H, partition_aps(8, 2), cfg, np.random.default_rng(0))


def test_flop_ratio_cubic_in_cluster_size():
    cfg = ScenarioConfig(L=16, N=2, K=6)
    r = flop_ratio(cfg, partition_aps(16, 8))
    assert r["ratio_per_cluster"] == pytest.approx(1 / 8)
    assert r["ratio_all_clusters"] == pytest.approx(1 / 4)
    assert r["centralized"] == (16 * 2 * 6) ** 3 * 13
