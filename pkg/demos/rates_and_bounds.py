"""
Finite-blocklength rates and their surrogate bounds
===================================================

A short tour of the rate model: how much a 50-symbol blocklength costs
relative to the Shannon rate, and how the concave minorant used by the
optimizer touches the true URLLC rate at the expansion point and stays
below it elsewhere.
"""

import numpy as np

from cellfree_urllc import surrogates as sg
from cellfree_urllc.rates import dispersion, nats_to_bits, penalty_factor, q_inverse, urllc_rate

# t = 0.05 ms and B = 1 MHz give a blocklength of 50 channel uses
t, B, eps = 5e-5, 1e6, 1e-5
a = penalty_factor(t, B, eps)
print(f"Q^-1({eps:g}) = {q_inverse(eps):.4f}, penalty factor a = {a:.4f}")

# the penalty a*sqrt(V) saturates at a nats once the SINR is large
for snr_db in (-5, 0, 10, 20, 40):
    phi = 10 ** (snr_db / 10)
    shannon = np.log1p(phi)
    print(f"SINR {snr_db:>3} dB: Shannon {nats_to_bits(shannon):6.3f} bits, "
          f"URLLC {nats_to_bits(urllc_rate(phi, t, B, eps)):6.3f} bits, "
          f"sqrt(V) = {np.sqrt(dispersion(phi)):.4f}")

# a two-user toy channel and a random expansion point
rng = np.random.default_rng(0)
H = (rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))) / np.sqrt(2)
Wn = (rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))) / np.sqrt(2)
sigma2 = 0.1
state = sg.freeze_state(H, Wn, sigma2, a)

# walk along a line through the expansion point and compare
print("\n  step   true URLLC   minorant   (user 0)")
direction = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
for step in (-0.3, -0.1, 0.0, 0.1, 0.3):
    W = Wn + step * direction
    G = H.conj().T @ W
    P = np.abs(G) ** 2
    phi = P[0, 0] / (P[0].sum() - P[0, 0] + sigma2)
    inside = sg.in_trust_region(state, G[None])[0]
    bound = sg.r_lower_from_gram(state, G)[0] if inside else float("nan")
    print(f"{step:6.2f}   {urllc_rate(phi, t, B, eps):10.5f}   {bound:8.5f}"
          + ("" if inside else "   (outside trust region)"))
