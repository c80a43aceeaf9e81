# Two parallel arcs 0.3 apart, sampled every 0.1 along the arc.
# Euclidean k-NN near the gap reaches across to the other arc; diffused
# affinities follow the arc instead.
import numpy as np

from manifold_restore.agnn import AgnnSearcher
from manifold_restore.experiments import ARCS_PARAMS, euclidean_sets
from manifold_restore.synthetic import two_arcs

X, lab = two_arcs()
print("points", X.shape, "arc sizes", np.bincount(lab))

searcher = AgnnSearcher(X, ARCS_PARAMS)
masks = searcher.query_masks(X)
sizes = masks.sum(axis=1)
print("agnn neighbourhood sizes: min %d  median %d  max %d" % (sizes.min(), np.median(sizes), sizes.max()))

eu = euclidean_sets(X, X, sizes)
agnn_cross = np.array([np.sum(lab[m] != lab[i]) for i, m in enumerate(masks)])
eu_cross = np.array([np.sum(lab[s] != lab[i]) for i, s in enumerate(eu)])
print("queries with cross-arc neighbours:  agnn %d / 200   euclid %d / 200" % ((agnn_cross > 0).sum(), (eu_cross > 0).sum()))

# a single query in the middle of the inner arc
i = 50
print("query", i, "agnn:", np.flatnonzero(masks[i]).tolist())
print("query", i, "euclid:", sorted(eu[i].tolist()))
