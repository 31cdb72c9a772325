"""
Affinity propagation against exhaustive search
==============================================

On small inputs every exemplar set can be enumerated, which gives the
best achievable net similarity. We compare the message passing result to
that optimum and look at how the preference controls the cluster count.
"""

import numpy as np

from chatter_atlas import APParams, affinity_propagation, brute_force_exemplars
from chatter_atlas.cluster import APState, update_availabilities, update_responsibilities

# two tight pairs on the unit circle
points = np.array([[1.0, 0.0], [0.95, 0.31], [0.0, 1.0], [0.31, 0.95]])
points /= np.linalg.norm(points, axis=1, keepdims=True)
s = points @ points.T
np.fill_diagonal(s, np.median(s[~np.eye(4, dtype=bool)]))

# a few rounds of raw message passing
state = APState.zeros(4)
for it in range(5):
    state = update_responsibilities(s, state, damping=0.5)
    state = update_availabilities(s, state, damping=0.5)
    print(it, "self-evidence", np.round(np.diag(state.r + state.a), 3))

ap = affinity_propagation(s)
best = brute_force_exemplars(s)
print("AP       ", ap.assignments, "net %.4f" % ap.net_similarity)
print("optimum  ", best.assignments, "net %.4f" % best.net_similarity)

# random instances: how often does AP hit the optimum?
rng = np.random.default_rng(1)
hits = 0
trials = 50
for _ in range(trials):
    x = rng.normal(size=(8, 4))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    m = x @ x.T
    np.fill_diagonal(m, np.median(m[~np.eye(8, dtype=bool)]))
    a = affinity_propagation(m, APParams(max_iter=500))
    b = brute_force_exemplars(m)
    hits += a.converged and abs(a.net_similarity - b.net_similarity) < 1e-9
print(f"AP matched the optimum on {hits}/{trials} random instances")

# raising the preference makes every point more willing to be an exemplar
off = s[~np.eye(4, dtype=bool)]
for pref in (off.min() - 1, np.median(off), 1.0):
    m = s.copy()
    np.fill_diagonal(m, pref)
    print("preference %+.2f ->" % pref, len(affinity_propagation(m).clusters), "clusters")
