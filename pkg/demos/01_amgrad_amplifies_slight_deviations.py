"""
AmGrad and adaptive OPTICS on hand-made updates
===============================================

AmGrad keeps each layer's sign pattern at the layer's peak magnitude. Here we
look at how that reshapes distances between ten benign updates and three
forged ones, then let adaptive OPTICS pick the majority group.
"""

import numpy as np

from fedward.attacks import forge_update
from fedward.defense import amgrad, auto_optics
from fedward.updates import LayeredUpdate, pairwise_distances

rng = np.random.default_rng(0)

# Ten benign clients around a shared direction, one layer of 200 values.
shared = rng.normal(size=200)
benign = [LayeredUpdate.from_layers([("w", shared + rng.normal(scale=0.3, size=200))]) for _ in range(10)]

# Three forged updates: 40 degrees off the benign mean, same norm.
mean = LayeredUpdate.from_layers([("w", np.mean([b["w"] for b in benign], axis=0))])
forged = [forge_update(mean, 40.0, 1.0, seed=s) for s in range(3)]
ws = benign + forged


def report(name, d, ben, mal):
    bb = d[np.ix_(ben, ben)][np.triu_indices(len(ben), 1)].mean()
    fb = d[np.ix_(mal, ben)].mean()
    print(f"{name:>7}: mean benign-benign {bb:6.2f}, mean forged-benign {fb:6.2f}, ratio {fb / bb:.2f}")


ben, mal = list(range(10)), [10, 11, 12]
report("raw", pairwise_distances(ws), ben, mal)
report("AmGrad", pairwise_distances([amgrad(w) for w in ws]), ben, mal)

# %%
# Adaptive OPTICS picks its radius from the distance matrix and returns the
# majority group. min_pts is ceil(m/2)+1, so only a majority can form a group.
res = auto_optics([amgrad(w) for w in ws])
print("accepted:", res.inds, "eps=%.2f min_pts=%d fallback=%s" % (res.eps_used, res.mins_used, res.fallback))
