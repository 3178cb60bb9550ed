"""Fit a bagged regression forest and read off its local weights.

The forest is trained on (X, Y) pairs exactly as if nothing were
censored. Its role is purely geometric: for a test point x it yields a
probability vector over the training rows (how often each row shares a
leaf with x, normalized by leaf size), and every later step consumes
only that vector.
"""

import numpy as np

from cqforest import ForestConfig, SimConfig, fit, forest_weights, simulate, weighted_mean

data = simulate(SimConfig(model="sine1d", n=400, censor_rate_param=0.2, seed=3))
forest = fit(data, ForestConfig(min_node_size=40, n_trees=100, seed=0))

for xv in (1.0, 4.5):
    w = forest_weights(forest, [xv])
    xs = data.features[w.index, 0]
    print(f"x={xv}: {w.support_size} rows carry weight, "
          f"sum {w.value.sum():.12f}, max {w.value.max():.4f}")
    print(f"       their feature values span [{xs.min():.2f}, {xs.max():.2f}] "
          f"(weights concentrate near x)")
    print(f"       weighted mean response {weighted_mean(forest, [xv]):.3f} "
          f"vs signal {2.5 + np.sin(xv):.3f}")

# weights are a smoother: nearby test points share most of their support
wa, wb = forest_weights(forest, [1.0]), forest_weights(forest, [1.05])
shared = np.intersect1d(wa.index, wb.index).size
print(f"x=1.00 vs x=1.05 share {shared} of {wa.support_size}/{wb.support_size} support rows")
