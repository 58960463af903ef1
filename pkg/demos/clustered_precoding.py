"""
Trading rate for computation with AP clusters
=============================================

Each cluster of ``M`` APs optimizes its own precoder from its own channels
only; the clusters never exchange anything. Smaller clusters mean much
smaller cone programs but blind interference between clusters. A single
AP cluster also cannot align its phase with the others, which is why the
16-cluster design collapses.
"""

from cellfree_urllc import ScenarioConfig
from cellfree_urllc.harness import sweep_clusters

TRIALS = 5
rows = sweep_clusters(ScenarioConfig(N=2, K=6, seed=5), (1, 2, 4, 16), trials=TRIALS)
for r in rows:
    print(f"{r['clusters']:>2} cluster(s) of {r['M']:>2} APs: 95%-likely {r['urllc_95_likely_bits']:6.2f}, "
          f"mean {r['urllc_mean_bits']:6.2f} bits/s/Hz; per-iteration order "
          f"{100 * r['order_ratio_per_cluster']:6.2f}% of centralized, measured "
          f"{1e3 * r['seconds_per_solver_iteration']:.2f} ms per IPM iteration")
