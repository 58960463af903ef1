"""
How the URLLC rate grows with the transmission time
===================================================

A longer transmission time means a longer code and a smaller dispersion
penalty, so the 95%-likely URLLC rate climbs toward the Shannon rate,
which does not depend on ``t``. More users share the same APs and get
less each.
"""

from cellfree_urllc import ScenarioConfig
from cellfree_urllc.harness import sweep_t

TRIALS = 10
t_values = (1e-5, 2e-5, 5e-5, 1e-4)

for K in (6, 15):
    rows = sweep_t(ScenarioConfig(N=2, K=K, seed=3), t_values, trials=TRIALS)
    print(f"K = {K}")
    for r in rows:
        print(f"  t = {1e3 * r['t']:.2f} ms: URLLC {r['urllc_95_likely_bits']:6.2f}, "
              f"Shannon {r['shannon_95_likely_bits']:6.2f} bits/s/Hz (95%-likely)")
