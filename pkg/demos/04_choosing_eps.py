"""
Why the clustering radius matters
=================================

Two ways to turn the distance matrix into a DBSCAN radius:

* ``knn_median``: the median over clients of the distance to their
  min_pts-th nearest neighbour. Roughly half of the clients become core
  points, so a dense benign majority always forms a group.
* ``smallest_pairs``: the median of the min_pts smallest pairwise distances.
  Only about min_pts/2 pairs fit inside that radius while a core point needs
  min_pts - 1 neighbours, so with five or more distinct clients nothing is
  ever core and every round falls back to accepting everyone.
"""

from fedward.defense import DefenseSpec
from fedward.harness import ExperimentConfig, run_experiment

for rule in ("knn_median", "smallest_pairs"):
    s = run_experiment(ExperimentConfig(defense=DefenseSpec("fedward", eps_rule=rule), seed=1))
    print(f"{rule:>15}: AASR {s.aasr:.3f}  AER {s.aer:.3f}  fallback rounds {s.fallback_rounds}/{len(s.rounds)}")
