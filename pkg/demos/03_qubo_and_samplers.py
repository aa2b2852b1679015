"""Segment a tiny patch as a max-cut QUBO, locally and through the sampler adapter.

The adapter talks JSON to any command or HTTP endpoint. Here it drives the
bundled exhaustive-search stub, which is small enough to be an exact oracle.
"""

import sys

import numpy as np

from crackbench.core import GrayPatch
from crackbench.qseg import (
    AnnealSchedule,
    anneal,
    build_grid_graph,
    decode_mask,
    maxcut_to_qubo,
    sample_external,
)

d = np.full((4, 5), 0.75)
d[2, :] = 0.1  # a horizontal crack
d[1, 3] = 0.15
patch = GrayPatch(d)

graph = build_grid_graph(patch)
qubo = maxcut_to_qubo(graph)
print(f"{graph.n_nodes} nodes, {len(graph.edges)} edges, {len(qubo.quadratic)} couplings")
print("edge weights (positive = wants to be cut):", np.round(graph.weights, 3))

local = anneal(qubo, AnnealSchedule(seed=7))
stub = f"cmd:{sys.executable} -m crackbench.sampler_stub"
exact = sample_external(qubo, stub)
print(f"annealer energy {local.energy:.4f}, exhaustive energy {exact.energy:.4f}")

for name, res in (("annealer", local), ("exhaustive", exact)):
    print(f"\n{name} crack mask:")
    for row in decode_mask(res, patch).data:
        print("".join("#" if v else "." for v in row))
