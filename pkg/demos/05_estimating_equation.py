"""Look inside the root finder.

The estimated quantile solves S(q) = (1 - tau) G(q) - sum w_i 1(Y_i > q)
over q. S is a step function that can only change value at observed
responses of positive-weight rows, so the solver scans that finite
candidate set and takes the first candidate where S turns nonnegative.
With no censoring G is constant 1 and the same scan reads the quantile
straight off the weighted CDF.
"""

import numpy as np

from cqforest import WeightVector, beran_rf, candidate_set, score
from cqforest.data import Dataset

y = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
event = np.array([1, 0, 1, 1, 0, 1])
data = Dataset(features=np.zeros((6, 1)), response=y, event=event)
w = WeightVector.uniform(6)
curve = beran_rf(data, w)
tau = 0.5

cands = candidate_set(w, y, "beran-rf")
print(f"tau={tau}; candidates are the distinct supported responses: {cands}")
print(f"{'q':>4} {'G(q)':>7} {'mass>q':>7} {'S(q)':>8}")
s = score(cands, tau, w, curve, y)
g = curve.evaluate(cands)
for q, gv, sv in zip(cands, g, s):
    above = (1.0 - tau) * gv - sv
    marker = "  <- first S >= 0, selected" if q == cands[np.flatnonzero(s >= 0)[0]] else ""
    print(f"{q:4.1f} {gv:7.3f} {above:7.3f} {sv:8.3f}{marker}")

# uncensored special case: the root is the plain weighted quantile
all_events = Dataset(features=np.zeros((6, 1)), response=y, event=np.ones(6, dtype=int))
flat = beran_rf(all_events, w)
s0 = score(cands, tau, w, flat, y)
print(f"\nno censoring: S(q) = (1-tau) - mass_above = {np.round(s0, 3)}")
print(f"first nonnegative at q={cands[np.flatnonzero(s0 >= 0)[0]]} "
      f"= the weighted 50% point of six equal rows")
