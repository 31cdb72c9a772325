"""
Pruning and merging clusters
============================

Raw affinity propagation output tends to have too many small clusters.
This walk-through shows singleton pruning, a hand-written merge spec and
the automatic centroid-level merge, with the lineage each step records.
"""

import json

import numpy as np

from chatter_atlas import MergeSpec, apply_merge_spec, auto_merge, prune_singletons
from chatter_atlas.cluster import clustering_from_assignments, rescore

# six directions: two near x, two near y, one in between, one outlier
vectors = np.array(
    [
        [1.0, 0.0, 0.0],
        [0.98, 0.2, 0.0],
        [0.2, 0.98, 0.0],
        [0.0, 1.0, 0.0],
        [0.7, 0.7, 0.1],
        [0.0, 0.0, 1.0],
    ]
)
vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
s = vectors @ vectors.T

# pretend AP produced four clusters, two of them singletons
c = clustering_from_assignments(s, [0, 0, 3, 3, 4, 5], converged=True, iterations=12)
print("start:", [cl.members for cl in c.clusters])

pruned = prune_singletons(c)
print("pruned:", [cl.members for cl in pruned.clusters], "removed", pruned.removed)

# a moderator decides both remaining clusters are one community
spec = MergeSpec.from_dict({"groups": [{"name": "everyone", "members": [0, 1]}]})
merged = rescore(apply_merge_spec(pruned, spec), s)
print("merged:", [(cl.name, cl.members) for cl in merged.clusters])
print(json.dumps(merged.lineage))

# the automatic pass decides by itself
auto = auto_merge(pruned, vectors)
print("auto:", [cl.members for cl in auto.clusters], "rounds", len(auto.lineage))
