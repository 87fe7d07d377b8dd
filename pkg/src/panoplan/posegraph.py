"""Robust pose-graph optimization over verified pairwise alignments.

Nodes are panoramas, edges carry measured relative poses. The solver
minimizes a Huber-robustified sum of squared whitened residuals

    r_ij = Log(z_ij^-1 * (T_i^-1 * T_j))

with Levenberg-Marquardt steps applied through the manifold retraction
``T <- T * exp(delta)``. The gauge is fixed by a tight prior on the
component's root node, so optimized solutions stay in the frame the
initialization chose. Edge scores from verification are carried on the
edges for bookkeeping but do not modulate the weighting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DegenerateInputError, SolverFailureError
from .geom import Pose2, between, exp, log, retract, Twist2

__all__ = [
    "PoseGraphEdge",
    "PoseGraph",
    "RobustConfig",
    "OptimizeResult",
    "build_graph",
    "connected_components",
    "spanning_tree_init",
    "optimize",
    "write_graph",
    "read_graph",
]

DEFAULT_EDGE_SIGMA = (0.05, 0.05, math.radians(1.0))


@dataclass(frozen=True)
class PoseGraphEdge:
    """A relative-pose measurement: ``z`` is the pose of ``j`` in ``i``'s frame."""

    i: int
    j: int
    z: Pose2
    sigma: tuple[float, float, float] = DEFAULT_EDGE_SIGMA
    score: float = 1.0

    def __post_init__(self):
        if self.i == self.j:
            raise DegenerateInputError(f"self-edge on node {self.i}")
        if any(s <= 0 for s in self.sigma):
            raise DegenerateInputError(f"edge ({self.i},{self.j}): sigmas must be positive")


@dataclass(frozen=True)
class PoseGraph:
    nodes: tuple[int, ...]
    edges: tuple[PoseGraphEdge, ...]

    def neighbors(self, node: int) -> list[tuple[int, PoseGraphEdge, bool]]:
        """(neighbor, edge, forward) triples; forward means node == edge.i."""
        out = []
        for e in self.edges:
            if e.i == node:
                out.append((e.j, e, True))
            elif e.j == node:
                out.append((e.i, e, False))
        return sorted(out, key=lambda t: t[0])


def build_graph(edges: Iterable[PoseGraphEdge]) -> PoseGraph:
    """Collapse parallel measurements into a simple graph.

    For each unordered node pair only the highest-scoring edge survives;
    on ties the earliest one in input order wins. Node ids are collected
    from the edges.
    """
    best: dict[tuple[int, int], PoseGraphEdge] = {}
    for e in edges:
        key = (min(e.i, e.j), max(e.i, e.j))
        if key not in best or e.score > best[key].score:
            best[key] = e
    nodes = sorted({n for key in best for n in key})
    kept = tuple(best[key] for key in sorted(best))
    return PoseGraph(tuple(nodes), kept)


def connected_components(graph: PoseGraph) -> list[list[int]]:
    """Components as sorted node lists, largest first (ties: smaller min id)."""
    seen: set[int] = set()
    comps: list[list[int]] = []
    adjacency: dict[int, set[int]] = {n: set() for n in graph.nodes}
    for e in graph.edges:
        adjacency[e.i].add(e.j)
        adjacency[e.j].add(e.i)
    for start in graph.nodes:
        if start in seen:
            continue
        stack, comp = [start], []
        seen.add(start)
        while stack:
            n = stack.pop()
            comp.append(n)
            for m in sorted(adjacency[n]):
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
        comps.append(sorted(comp))
    comps.sort(key=lambda c: (-len(c), c[0]))
    return comps


def spanning_tree_init(graph: PoseGraph, component: Sequence[int]) -> dict[int, Pose2]:
    """Breadth-first composition of edge measurements from the root.

    The smallest node id in the component sits at the identity; every other
    node gets the measurement chain along its shortest (fewest-hops) path
    from the root, with ties broken by ascending neighbor id.
    """
    members = set(component)
    root = min(members)
    poses: dict[int, Pose2] = {root: Pose2.identity()}
    queue = [root]
    while queue:
        n = queue.pop(0)
        for m, e, forward in graph.neighbors(n):
            if m not in members or m in poses:
                continue
            poses[m] = poses[n].compose(e.z) if forward else poses[n].compose(e.z.inverse())
            queue.append(m)
    missing = members - set(poses)
    if missing:
        raise DegenerateInputError(f"component is not connected; unreachable nodes {sorted(missing)}")
    return poses


@dataclass(frozen=True)
class RobustConfig:
    """Robust-solver settings.

    ``huber_delta`` applies to the whitened residual norm; ``None`` gives
    the pure quadratic kernel. The damping parameter starts at
    ``lm_lambda0``, grows tenfold on rejected steps and shrinks tenfold on
    accepted ones.
    """

    huber_delta: Optional[float] = 1.345
    max_iterations: int = 100
    lm_lambda0: float = 1e-4
    lm_factor: float = 10.0
    convergence_tol: float = 1e-12
    prior_sigma: float = 1e-6


@dataclass(frozen=True)
class OptimizeResult:
    poses: dict[int, Pose2]
    initial_cost: float
    final_cost: float
    iterations: int
    converged: bool


def _rho(u: float, delta: Optional[float]) -> float:
    """Huber loss of a residual norm (quadratic when delta is None)."""
    if delta is None or u <= delta:
        return 0.5 * u * u
    return delta * (u - 0.5 * delta)


def _robust_weight(u: float, delta: Optional[float]) -> float:
    if delta is None or u <= delta or u == 0.0:
        return 1.0
    return delta / u


def _log_coeffs(theta: float) -> tuple[np.ndarray, np.ndarray]:
    """W(theta) = V(theta)^-1 of the planar exponential map, and dW/dtheta."""
    if abs(theta) < 1e-5:
        a = 1.0 - theta * theta / 6.0
        b = theta / 2.0 - theta**3 / 24.0
        da = -theta / 3.0 + theta**3 / 30.0
        db = 0.5 - theta * theta / 8.0
    else:
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / theta
        da = (theta * math.cos(theta) - math.sin(theta)) / theta**2
        db = (theta * math.sin(theta) - 1.0 + math.cos(theta)) / theta**2
    c = 1.0 / (a * a + b * b)
    dc = -(2.0 * a * da + 2.0 * b * db) * c * c
    w = c * np.array([[a, b], [-b, a]])
    dw = dc * np.array([[a, b], [-b, a]]) + c * np.array([[da, db], [-db, da]])
    return w, dw


_S = np.array([[0.0, -1.0], [1.0, 0.0]])


def _edge_residual_jacobian(ti: Pose2, tj: Pose2, z: Pose2):
    """Residual Log(z^-1 t_i^-1 t_j) and its Jacobians wrt manifold increments."""
    h = between(ti, tj)
    e = z.inverse().compose(h)
    r = log(e).as_array()

    w, dw = _log_coeffs(e.theta)
    rz_ri = z.rotation.T @ ti.rotation.T
    dvt = w @ rz_ri  # d r_v / d t_j (raw)
    dv_dtheta_shared = dw @ np.array([e.x, e.y])

    jj = np.zeros((3, 3))
    jj[:2, :2] = dvt
    jj[:2, 2] = dv_dtheta_shared
    jj[2, 2] = 1.0

    ji = np.zeros((3, 3))
    ji[:2, :2] = -dvt
    dt = tj.translation - ti.translation
    ji[:2, 2] = -(w @ (rz_ri @ (_S @ dt))) - dv_dtheta_shared
    ji[2, 2] = -1.0

    # chain through the retraction: raw translation moves with the node's rotation
    mi = np.eye(3)
    mi[:2, :2] = ti.rotation
    mj = np.eye(3)
    mj[:2, :2] = tj.rotation
    return r, ji @ mi, jj @ mj


def _total_cost(
    poses: dict[int, Pose2],
    edges: Sequence[PoseGraphEdge],
    config: RobustConfig,
    root: int,
    root_target: Pose2,
) -> float:
    cost = 0.0
    for e in edges:
        r = log(e.z.inverse().compose(between(poses[e.i], poses[e.j]))).as_array()
        u = float(np.linalg.norm(r / np.asarray(e.sigma)))
        cost += _rho(u, config.huber_delta)
    rp = log(root_target.inverse().compose(poses[root])).as_array()
    cost += 0.5 * float(np.sum((rp / config.prior_sigma) ** 2))
    return cost


def robust_edge_cost(
    graph: PoseGraph,
    poses: dict[int, Pose2],
    config: RobustConfig = RobustConfig(),
) -> float:
    """Sum of robustified edge terms at the given poses (no gauge prior).

    Useful for comparing pose sets produced by different aggregation
    strategies on the same graph; edges with an endpoint missing from
    ``poses`` are skipped.
    """
    cost = 0.0
    for e in graph.edges:
        if e.i not in poses or e.j not in poses:
            continue
        r = log(e.z.inverse().compose(between(poses[e.i], poses[e.j]))).as_array()
        u = float(np.linalg.norm(r / np.asarray(e.sigma)))
        cost += _rho(u, config.huber_delta)
    return cost


def optimize(
    graph: PoseGraph,
    init: dict[int, Pose2],
    config: RobustConfig = RobustConfig(),
) -> OptimizeResult:
    """Levenberg-Marquardt refinement of one connected component.

    ``init`` names the nodes to optimize (a connected component of the
    graph) and provides their starting poses; only edges with both ends in
    ``init`` participate. The component's smallest node id is pinned to its
    initial pose by a tight prior, which both fixes the gauge and keeps the
    result in the initialization's frame.

    Raises:
        SolverFailureError: a non-finite cost or step appeared.
    """
    nodes = sorted(init)
    if not nodes:
        raise DegenerateInputError("empty initialization")
    index = {n: k for k, n in enumerate(nodes)}
    members = set(nodes)
    edges = [e for e in graph.edges if e.i in members and e.j in members]
    root = nodes[0]
    root_target = init[root]

    poses = dict(init)
    cost = _total_cost(poses, edges, config, root, root_target)
    if not math.isfinite(cost):
        raise SolverFailureError("initial cost is not finite", iteration=0)
    initial_cost = cost
    if len(nodes) == 1 or not edges:
        return OptimizeResult(poses, initial_cost, cost, 0, True)

    lam = config.lm_lambda0
    iterations = 0
    converged = False
    n3 = 3 * len(nodes)

    for iteration in range(config.max_iterations):
        h = np.zeros((n3, n3))
        g = np.zeros(n3)

        def accumulate(r, blocks, sigma):
            white = 1.0 / np.asarray(sigma)
            rw = r * white
            u = float(np.linalg.norm(rw))
            scale = math.sqrt(_robust_weight(u, config.huber_delta))
            rw = rw * scale
            for idx_a, ja in blocks:
                jw_a = (ja * white[:, None]) * scale
                g[3 * idx_a : 3 * idx_a + 3] += jw_a.T @ rw
                for idx_b, jb in blocks:
                    jw_b = (jb * white[:, None]) * scale
                    h[3 * idx_a : 3 * idx_a + 3, 3 * idx_b : 3 * idx_b + 3] += jw_a.T @ jw_b

        for e in edges:
            r, ji, jj = _edge_residual_jacobian(poses[e.i], poses[e.j], e.z)
            accumulate(r, [(index[e.i], ji), (index[e.j], jj)], e.sigma)

        # gauge prior on the root node
        rp, _, jp = _edge_residual_jacobian(Pose2.identity(), poses[root], root_target)
        accumulate(rp, [(index[root], jp)], (config.prior_sigma,) * 3)

        if not np.all(np.isfinite(h)) or not np.all(np.isfinite(g)):
            raise SolverFailureError("non-finite normal equations", iteration=iteration)

        accepted = False
        for _attempt in range(40):
            damped = h + lam * np.diag(np.maximum(np.diag(h), 1e-12))
            try:
                delta = np.linalg.solve(damped, -g)
            except np.linalg.LinAlgError:
                delta = np.linalg.lstsq(damped, -g, rcond=None)[0]
            if not np.all(np.isfinite(delta)):
                raise SolverFailureError("non-finite step", iteration=iteration)
            candidate = {
                n: retract(poses[n], delta[3 * index[n] : 3 * index[n] + 3]) for n in nodes
            }
            new_cost = _total_cost(candidate, edges, config, root, root_target)
            if not math.isfinite(new_cost):
                raise SolverFailureError("non-finite cost during line search", iteration=iteration)
            if new_cost < cost:
                poses = candidate
                lam = max(lam / config.lm_factor, 1e-15)
                improvement = cost - new_cost
                cost = new_cost
                accepted = True
                break
            lam *= config.lm_factor
            if lam > 1e14:
                break
        iterations = iteration + 1
        if not accepted:
            converged = True
            break
        if improvement < config.convergence_tol * max(1.0, cost):
            converged = True
            break

    return OptimizeResult(poses, initial_cost, cost, iterations, converged)


def write_graph(path: str, graph: PoseGraph, poses: Optional[dict[int, Pose2]] = None):
    """Dump a pose graph (and optional solution) as a plain-text edge list."""
    from .scene import atomic_write_text

    lines = ["# panoplan pose-graph v1"]
    if poses:
        for n in sorted(poses):
            p = poses[n]
            lines.append(f"NODE {n} {p.x!r} {p.y!r} {p.theta!r}")
    for e in graph.edges:
        sx, sy, st = e.sigma
        lines.append(
            f"EDGE {e.i} {e.j} {e.z.x!r} {e.z.y!r} {e.z.theta!r} {sx!r} {sy!r} {st!r} {e.score!r}"
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_graph(path: str) -> tuple[PoseGraph, dict[int, Pose2]]:
    """Read a graph written by :func:`write_graph`."""
    poses: dict[int, Pose2] = {}
    edges: list[PoseGraphEdge] = []
    nodes: set[int] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "NODE":
                poses[int(parts[1])] = Pose2(float(parts[2]), float(parts[3]), float(parts[4]))
            elif parts[0] == "EDGE":
                i, j = int(parts[1]), int(parts[2])
                edges.append(
                    PoseGraphEdge(
                        i, j,
                        Pose2(float(parts[3]), float(parts[4]), float(parts[5])),
                        (float(parts[6]), float(parts[7]), float(parts[8])),
                        float(parts[9]),
                    )
                )
                nodes.update((i, j))
    return PoseGraph(tuple(sorted(nodes)), tuple(edges)), poses
