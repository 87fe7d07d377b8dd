"""Chain measurements into global poses, then let the optimizer clean up.

A spanning tree gives every panorama a pose by composing measurements
along one path, so errors accumulate with distance from the root. The
robust optimizer uses all edges at once, which distributes the error and
shrugs off a planted outlier measurement.

    python3 demos/04_pose_graph.py
"""

import math

import numpy as np

from panoplan.geom import Pose2, between, compose, fit_rigid
from panoplan.posegraph import (
    PoseGraphEdge,
    RobustConfig,
    build_graph,
    connected_components,
    optimize,
    robust_edge_cost,
    spanning_tree_init,
)

rng = np.random.default_rng(1)

# Ground truth: cameras around a ring, plus a few cross-room shortcuts.
n = 10
gt = {
    i: Pose2(3.0 * math.cos(2 * math.pi * i / n), 3.0 * math.sin(2 * math.pi * i / n), rng.uniform(-math.pi, math.pi))
    for i in range(n)
}
pairs = [(i, (i + 1) % n) for i in range(n)] + [(0, 5), (2, 7)]

sigma = (0.04, 0.04, math.radians(1.5))
edges = []
for i, j in pairs:
    z = between(gt[i], gt[j])
    d = rng.normal(0.0, sigma)
    edges.append(PoseGraphEdge(i, j, Pose2(z.x + d[0], z.y + d[1], z.theta + d[2]), sigma=sigma))

graph = build_graph(edges)
component = connected_components(graph)[0]
print(f"graph: {len(graph.nodes)} nodes, {len(graph.edges)} edges, largest component {len(component)}")

init = spanning_tree_init(graph, component)
result = optimize(graph, init)
print(f"optimizer: cost {result.initial_cost:.2f} -> {result.final_cost:.2f} in {result.iterations} iterations")


def rmse_vs_truth(poses):
    ids = sorted(poses)
    src = np.array([poses[i].translation for i in ids])
    dst = np.array([gt[i].translation for i in ids])
    t = fit_rigid(src, dst)
    return float(np.sqrt(np.mean(np.sum((t.apply(src) - dst) ** 2, axis=1))))


print(f"position RMSE: spanning tree {rmse_vs_truth(init):.4f} m, optimized {rmse_vs_truth(result.poses):.4f} m")

# Now poison the graph with one edge whose rotation is off by 90 degrees,
# as a verifier false positive would produce.
bad = PoseGraphEdge(1, 6, compose(between(gt[1], gt[6]), Pose2(0, 0, math.pi / 2)), sigma=sigma)
poisoned = build_graph(edges + [bad])

robust = optimize(poisoned, init)
quadratic = optimize(poisoned, init, RobustConfig(huber_delta=None))
print("\nwith a 90 degree outlier edge:")
print(f"  huber kernel     RMSE {rmse_vs_truth(robust.poses):.4f} m")
print(f"  quadratic kernel RMSE {rmse_vs_truth(quadratic.poses):.4f} m")

# The robust cost of the surviving edges tells the same story.
print(f"  edge cost, huber solution: {robust_edge_cost(poisoned, robust.poses):.2f}")
print(f"  edge cost, quadratic solution: {robust_edge_cost(poisoned, quadratic.poses):.2f}")
