# Tangent planes of a noisy swiss roll from local PCA over AGNN vs Euclidean
# neighbourhoods of the same size.
import numpy as np

from manifold_restore.experiments import SWISS_PARAMS, swiss_experiment

for seed in range(3):
    a, e = swiss_experiment(SWISS_PARAMS, n_queries=200, seed=seed)
    print("seed %d  agnn %.4f rad  euclid %.4f rad  (%.1f deg vs %.1f deg)" % (seed, a, e, np.degrees(a), np.degrees(e)))
