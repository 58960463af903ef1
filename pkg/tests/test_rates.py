import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cellfree_urllc.rates import (
    dispersion,
    evaluate_rates,
    nats_to_bits,
    penalty_factor,
    per_ap_power,
    q_function,
    q_inverse,
    shannon_rate,
    sinr,
    sinr_all,
    urllc_rate,
)
from conftest import random_channel
from oracles import q_inverse_bisect, sinr_scalar, urllc_scalar

T, B, EPS = 5e-5, 1e6, 1e-5


def test_single_user_sinr():
    h = np.array([[1.0], [0.0]], complex)
    w = np.array([[math.sqrt(3.0)], [0.0]], complex)
    assert sinr(h, w, 0, 1.0) == pytest.approx(3.0)
    assert sinr(h, np.zeros((2, 1)), 0, 1.0) == 0.0


def test_sinr_matches_scalar_oracle(rng):
    H = random_channel(rng, 6, 2)
    W = random_channel(rng, 6, 2)
    for k in range(2):
        assert sinr(H, W, k, 0.3) == pytest.approx(sinr_scalar(H.tolist(), W.tolist(), k, 0.3), rel=1e-12)
    np.testing.assert_allclose(sinr_all(H, W, 0.3), [sinr(H, W, k, 0.3) for k in range(2)], rtol=1e-12)


def test_sinr_phase_invariance(rng):
    H = random_channel(rng, 8, 3)
    W = random_channel(rng, 8, 3)
    rot = W * np.exp(1j * np.array([0.3, -2.0, 1.1]))
    np.testing.assert_allclose(sinr_all(H, rot, 0.1), sinr_all(H, W, 0.1), rtol=1e-12)


def test_shannon_and_dispersion_values():
    assert shannon_rate(0.0) == 0.0
    assert shannon_rate(1.0) == pytest.approx(math.log(2))
    assert shannon_rate(math.e - 1) == pytest.approx(1.0)
    assert dispersion(0.0) == 0.0
    assert dispersion(1.0) == pytest.approx(0.75)
    assert abs(dispersion(1e9) - 1.0) < 1e-8
    assert dispersion(1e-12) == pytest.approx(2e-12, rel=1e-6)


@given(st.floats(0, 1e6), st.floats(0, 1e6))
def test_dispersion_monotone_bounded(x, y):
    lo, hi = sorted((x, y))
    assert 0.0 <= dispersion(lo) <= dispersion(hi) < 1.0


def test_q_inverse_values():
    assert q_inverse(0.5) == 0.0
    assert q_inverse(1e-5) == pytest.approx(4.2649, abs=1e-4)
    assert q_inverse(1e-5) == pytest.approx(q_inverse_bisect(1e-5), abs=1e-10)
    for p in range(1, 10):
        eps = 10.0**-p
        assert abs(q_function(q_inverse(eps)) - eps) / eps <= 1e-10


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_q_inverse_domain(bad):
    with pytest.raises(ValueError):
        q_inverse(bad)


def test_urllc_examples():
    assert urllc_rate(1.0, T, B, 0.5) == shannon_rate(1.0)
    expected = math.log(2) - penalty_factor(T, B, EPS) * math.sqrt(0.75)
    assert urllc_rate(1.0, T, B, EPS) == pytest.approx(expected, rel=1e-12)
    assert urllc_rate(1.0, T, B, EPS) == pytest.approx(0.1708, abs=1e-4)
    assert urllc_rate(1.0, T, B, EPS) == pytest.approx(urllc_scalar(1.0, T, B, EPS), rel=1e-10)
    assert urllc_rate(1.0, 1e9, B, EPS) == pytest.approx(math.log(2), abs=1e-6)
    assert penalty_factor(T, B, EPS) == pytest.approx(0.6032, abs=1e-4)


@given(st.floats(1e-6, 1e4), st.floats(1e-3, 0.49))
def test_urllc_below_shannon(phi, eps):
    assert urllc_rate(phi, T, B, eps) < shannon_rate(phi)


@given(st.floats(1e-3, 1e4))
def test_urllc_increasing_in_t_and_B(phi):
    assert urllc_rate(phi, 1e-5, B, EPS) < urllc_rate(phi, 2e-5, B, EPS)
    assert urllc_rate(phi, T, 1e6, EPS) < urllc_rate(phi, T, 2e6, EPS)


def test_urllc_zero_sinr():
    assert urllc_rate(0.0, T, B, EPS) == 0.0


def test_nats_to_bits():
    assert nats_to_bits(0.0) == 0.0
    assert nats_to_bits(math.log(2)) == pytest.approx(1.0)
    assert nats_to_bits(1.0) == pytest.approx(1.4427, abs=1e-4)


def test_rate_vector(rng):
    H = random_channel(rng, 4, 3)
    W = random_channel(rng, 4, 3)
    rv = evaluate_rates(H, W, 0.2, T, B, EPS)
    np.testing.assert_allclose(rv.urllc, urllc_rate(rv.sinr, T, B, EPS))
    np.testing.assert_allclose(rv.urllc_bits, rv.urllc / math.log(2))
    assert rv.min_urllc == rv.urllc.min()
    assert rv.min_shannon == rv.shannon.min()
    assert np.all(rv.dispersion < 1.0)


def test_per_ap_power():
    W = np.zeros((4, 2), complex)
    W[0, 0] = 1.0
    W[1, 1] = 2j
    W[3, 0] = 3.0
    np.testing.assert_allclose(per_ap_power(W, 2), [5.0, 9.0])
