import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import linalg

from cellfree_urllc.config import ScenarioConfig
from cellfree_urllc.mmse import flop_report, mmse_directions, mmse_flops, mmse_precoding, pfa_iteration_order
from cellfree_urllc.rates import per_ap_power
from conftest import random_channel
from oracles import matched_filter_angle, mmse_flops_formula


def test_scalar_case():
    h = np.array([[0.6 - 0.8j]])
    v = mmse_directions(h, 2.0, 0.5)
    assert v[0, 0] == pytest.approx(2.0 * h[0, 0] / (2.0 * 1.0 + 0.5))
    w = mmse_precoding(h, 2.0, 0.5, 3.0, N=1)
    assert w[0, 0] == pytest.approx(np.sqrt(3.0) * h[0, 0])


@given(st.integers(0, 10_000))
def test_directions_maximize_uplink_sinr(seed):
    # the MMSE combiner is the principal generalized eigenvector of
    # (h_k h_k^H, interference-plus-noise covariance)
    rng = np.random.default_rng(seed)
    LN, K, p, s2 = 5, 3, 0.7, 0.2
    H = random_channel(rng, LN, K)
    V = mmse_directions(H, p, s2)
    for k in range(K):
        others = [i for i in range(K) if i != k]
        C = p * H[:, others] @ H[:, others].conj().T + s2 * np.eye(LN)
        _, vecs = linalg.eigh(p * np.outer(H[:, k], H[:, k].conj()), C)
        assert matched_filter_angle(V[:, k], vecs[:, -1]) < 1e-6


@given(st.integers(0, 10_000))
def test_per_ap_power_and_joint_scaling(seed):
    rng = np.random.default_rng(seed)
    L, N, K = 4, 2, 3
    H = random_channel(rng, L * N, K)
    W = mmse_precoding(H, 0.5, 0.1, 2.0, N=N)
    np.testing.assert_allclose(per_ap_power(W, L), 2.0, rtol=1e-12)
    blocks = np.linalg.norm(W.reshape(L, N, K), axis=1)
    np.testing.assert_allclose(blocks, np.sqrt(2.0 / K), rtol=1e-12)
    # scaling p and sigma2 together leaves the precoder unchanged
    np.testing.assert_allclose(mmse_precoding(H, 5.0, 1.0, 2.0, L=L), W, atol=1e-12)


def test_noise_limited_is_matched_filter(rng):
    L, N, K = 3, 2, 2
    H = random_channel(rng, L * N, K)
    W = mmse_precoding(H, 1.0, 1e6, 1.0, N=N)
    for l in range(L):
        for k in range(K):
            blk = slice(l * N, (l + 1) * N)
            assert matched_filter_angle(W[blk, k], H[blk, k]) < 1e-5


def test_zero_block_still_full_power():
    H = np.zeros((4, 1), dtype=complex)
    H[:2, 0] = [1.0, 1j]
    W = mmse_precoding(H, 1.0, 0.1, 1.0, N=2)
    np.testing.assert_allclose(per_ap_power(W, 2), 1.0)


def test_argument_errors():
    H = np.ones((2, 1), dtype=complex)
    with pytest.raises(ValueError):
        mmse_directions(H, 0.0, 1.0)
    with pytest.raises(ValueError):
        mmse_directions(H, 1.0, 0.0)
    with pytest.raises(ValueError):
        mmse_precoding(H, 1.0, 1.0, 1.0)


def test_flop_counts():
    assert mmse_flops(16, 4, 6) == 103936
    assert mmse_flops(1, 1, 1) == 2
    for L, N, K in [(16, 4, 6), (16, 2, 15), (3, 5, 7), (1, 2, 1)]:
        assert mmse_flops(L, N, K) == mmse_flops_formula(L, N, K)
    assert pfa_iteration_order(16, 4, 6) == 384**3 * 13


def test_flop_report():
    cfg = ScenarioConfig()
    rep = flop_report(cfg, iterations=3.0)
    assert rep["mmse_multiplications"] == 103936
    assert rep["pfa_run_order"] == 3.0 * 384**3 * 13
    dec = flop_report(cfg, mode="decentralized", cluster_size=8)
    assert dec["pfa_per_iteration_order"] == (8 * 4 * 6) ** 3 * 13
    assert dec["pfa_centralized_per_iteration_order"] == 384**3 * 13
    assert "pfa_run_order" not in dec
