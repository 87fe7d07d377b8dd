"""Pose-graph construction, initialization, and robust optimization."""

import math

import networkx as nx
import numpy as np
import pytest

from panoplan.errors import DegenerateInputError, SolverFailureError
from panoplan.geom import Pose2, between, log, retract, wrap_angle
from panoplan.posegraph import (
    DEFAULT_EDGE_SIGMA,
    OptimizeResult,
    PoseGraph,
    PoseGraphEdge,
    RobustConfig,
    build_graph,
    connected_components,
    optimize,
    read_graph,
    robust_edge_cost,
    spanning_tree_init,
    write_graph,
)
from panoplan.posegraph import _edge_residual_jacobian


def random_pose(rng, span=2.0):
    return Pose2(rng.uniform(-span, span), rng.uniform(-span, span), rng.uniform(-math.pi, math.pi))


def pose_close(a, b, tol=1e-9):
    return (
        abs(a.x - b.x) <= tol
        and abs(a.y - b.y) <= tol
        and abs(wrap_angle(a.theta - b.theta)) <= tol
    )


def ring_truth(n, radius=3.0):
    return {
        k: Pose2(
            radius * math.cos(2 * math.pi * k / n),
            radius * math.sin(2 * math.pi * k / n),
            2 * math.pi * k / n,
        )
        for k in range(n)
    }


def consistent_edges(gt, pairs, **kw):
    return [PoseGraphEdge(i, j, between(gt[i], gt[j]), **kw) for i, j in pairs]


def noisy_edges(gt, pairs, rng, sx=0.03, st=0.01):
    out = []
    for i, j in pairs:
        z = between(gt[i], gt[j])
        out.append(
            PoseGraphEdge(
                i, j,
                Pose2(z.x + rng.normal(0, sx), z.y + rng.normal(0, sx), z.theta + rng.normal(0, st)),
            )
        )
    return out


class TestJacobians:
    @pytest.mark.parametrize("seed", range(5))
    def test_matches_central_differences(self, seed):
        rng = np.random.default_rng(seed)
        ti, tj, z = (random_pose(rng) for _ in range(3))
        r0, ji, jj = _edge_residual_jacobian(ti, tj, z)

        eps = 1e-6
        for block, pose, other in ((ji, ti, "i"), (jj, tj, "j")):
            fd = np.zeros((3, 3))
            for k in range(3):
                d = np.zeros(3)
                d[k] = eps
                if other == "i":
                    rp = log(z.inverse().compose(between(retract(pose, d), tj))).as_array()
                    rm = log(z.inverse().compose(between(retract(pose, -d), tj))).as_array()
                else:
                    rp = log(z.inverse().compose(between(ti, retract(pose, d)))).as_array()
                    rm = log(z.inverse().compose(between(ti, retract(pose, -d)))).as_array()
                fd[:, k] = (rp - rm) / (2 * eps)
            np.testing.assert_allclose(block, fd, rtol=1e-5, atol=1e-7)

    def test_small_angle_branch(self):
        # residual rotation below the series switch point
        ti = Pose2(0.0, 0.0, 0.3)
        tj = Pose2(1.0, 0.5, 0.3 + 1e-7)
        z = between(ti, tj)
        z = Pose2(z.x + 0.01, z.y, z.theta)
        r0, ji, jj = _edge_residual_jacobian(ti, tj, z)
        eps = 1e-4  # residual terms are ~1e-9 here; smaller steps drown in rounding
        fd = np.zeros((3, 3))
        for k in range(3):
            d = np.zeros(3)
            d[k] = eps
            rp = log(z.inverse().compose(between(ti, retract(tj, d)))).as_array()
            rm = log(z.inverse().compose(between(ti, retract(tj, -d)))).as_array()
            fd[:, k] = (rp - rm) / (2 * eps)
        np.testing.assert_allclose(jj, fd, rtol=1e-6, atol=1e-9)

    def test_zero_residual_at_truth(self):
        rng = np.random.default_rng(1)
        ti, tj = random_pose(rng), random_pose(rng)
        r, _, _ = _edge_residual_jacobian(ti, tj, between(ti, tj))
        np.testing.assert_allclose(r, 0.0, atol=1e-12)


class TestBuildGraph:
    def test_highest_score_wins(self):
        za, zb, zc = Pose2(1, 0, 0), Pose2(2, 0, 0), Pose2(3, 0, 0)
        g = build_graph(
            [
                PoseGraphEdge(0, 1, za, score=0.5),
                PoseGraphEdge(1, 0, zb, score=0.8),
                PoseGraphEdge(0, 1, zc, score=0.8),  # tie: earlier edge stays
            ]
        )
        assert len(g.edges) == 1
        assert g.edges[0].z == zb
        assert g.edges[0].i == 1  # the winning edge keeps its orientation

    def test_nodes_collected_and_sorted(self):
        g = build_graph(
            [
                PoseGraphEdge(7, 2, Pose2.identity()),
                PoseGraphEdge(2, 5, Pose2.identity()),
            ]
        )
        assert g.nodes == (2, 5, 7)
        assert len(g.edges) == 2

    def test_self_edge_rejected(self):
        with pytest.raises(DegenerateInputError):
            PoseGraphEdge(3, 3, Pose2.identity())

    def test_nonpositive_sigma_rejected(self):
        with pytest.raises(DegenerateInputError):
            PoseGraphEdge(0, 1, Pose2.identity(), sigma=(0.05, 0.0, 0.01))


class TestComponents:
    @pytest.mark.parametrize("seed", range(10))
    def test_matches_networkx(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 15))
        pairs = set()
        for _ in range(int(rng.integers(2, 16))):
            i, j = rng.integers(0, n, size=2)
            if i != j:
                pairs.add((min(int(i), int(j)), max(int(i), int(j))))
        edges = [PoseGraphEdge(i, j, Pose2.identity()) for i, j in sorted(pairs)]
        nodes = tuple(range(n))
        graph = PoseGraph(nodes, tuple(edges))

        ref = nx.Graph()
        ref.add_nodes_from(nodes)
        ref.add_edges_from(sorted(pairs))
        want = sorted(
            (sorted(c) for c in nx.connected_components(ref)),
            key=lambda c: (-len(c), c[0]),
        )
        assert connected_components(graph) == want

    def test_ordering_contract(self):
        g = PoseGraph((0, 1, 2, 3, 4), (PoseGraphEdge(3, 4, Pose2.identity()),))
        assert connected_components(g) == [[3, 4], [0], [1], [2]]


class TestSpanningTree:
    def test_exact_on_consistent_tree(self):
        gt = ring_truth(6)
        pairs = [(0, 1), (2, 1), (2, 3), (4, 3), (4, 5)]  # mixed orientations
        graph = build_graph(consistent_edges(gt, pairs))
        init = spanning_tree_init(graph, list(range(6)))
        anchor = gt[0]
        for n, p in init.items():
            expect = between(anchor, gt[n])
            assert pose_close(p, expect, 1e-12), f"node {n}"

    def test_root_is_smallest_id(self):
        gt = {3: Pose2(0, 0, 0.4), 5: Pose2(1, 1, 0.9), 8: Pose2(-1, 0, -0.2)}
        graph = build_graph(consistent_edges(gt, [(3, 5), (5, 8)]))
        init = spanning_tree_init(graph, [3, 5, 8])
        assert init[3] == Pose2.identity()

    def test_unreachable_member_raises(self):
        graph = build_graph([PoseGraphEdge(0, 1, Pose2.identity())])
        with pytest.raises(DegenerateInputError):
            spanning_tree_init(graph, [0, 1, 7])


class TestOptimize:
    def test_noiseless_graph_is_a_fixpoint(self):
        gt = ring_truth(8)
        pairs = [(k, (k + 1) % 8) for k in range(8)] + [(0, 4)]
        graph = build_graph(consistent_edges(gt, pairs))
        init = {n: gt[n] for n in range(8)}
        res = optimize(graph, init)
        assert res.converged
        assert res.final_cost <= res.initial_cost < 1e-18
        for n in range(8):
            assert pose_close(res.poses[n], gt[n], 1e-9)

    def test_cost_decreases_from_noisy_init(self):
        rng = np.random.default_rng(0)
        gt = ring_truth(10)
        pairs = [(k, (k + 1) % 10) for k in range(10)] + [(0, 5), (2, 7)]
        graph = build_graph(noisy_edges(gt, pairs, rng))
        init = {
            n: Pose2(p.x + rng.normal(0, 0.3), p.y + rng.normal(0, 0.3), p.theta + rng.normal(0, 0.1))
            for n, p in gt.items()
        }
        res = optimize(graph, init)
        assert res.final_cost < res.initial_cost
        assert res.converged

    def test_gauge_invariance(self):
        rng = np.random.default_rng(4)
        gt = ring_truth(6)
        pairs = [(k, (k + 1) % 6) for k in range(6)] + [(1, 4)]
        graph = build_graph(noisy_edges(gt, pairs, rng))
        init = spanning_tree_init(graph, list(range(6)))
        g = Pose2(5.0, -2.0, 1.3)
        moved = {n: g.compose(p) for n, p in init.items()}

        res_a = optimize(graph, init)
        res_b = optimize(graph, moved)
        assert res_a.final_cost == pytest.approx(res_b.final_cost, rel=1e-6, abs=1e-9)
        for i, j in pairs:
            rel_a = between(res_a.poses[i], res_a.poses[j])
            rel_b = between(res_b.poses[i], res_b.poses[j])
            assert pose_close(rel_a, rel_b, 1e-6)

    def test_huge_huber_delta_matches_quadratic(self):
        rng = np.random.default_rng(7)
        gt = ring_truth(8)
        pairs = [(k, (k + 1) % 8) for k in range(8)] + [(0, 3), (2, 6)]
        graph = build_graph(noisy_edges(gt, pairs, rng))
        init = spanning_tree_init(graph, list(range(8)))
        res_quad = optimize(graph, init, RobustConfig(huber_delta=None))
        res_huge = optimize(graph, init, RobustConfig(huber_delta=1e9))
        assert res_quad.final_cost == pytest.approx(res_huge.final_cost, abs=1e-6)
        for n in range(8):
            assert pose_close(res_quad.poses[n], res_huge.poses[n], 1e-6)

    def test_single_node_returns_immediately(self):
        graph = PoseGraph((4,), ())
        res = optimize(graph, {4: Pose2(1.0, 2.0, 0.3)})
        assert res.iterations == 0
        assert res.poses[4] == Pose2(1.0, 2.0, 0.3)

    def test_empty_init_rejected(self):
        with pytest.raises(DegenerateInputError):
            optimize(PoseGraph((), ()), {})

    def test_nonfinite_init_raises(self):
        graph = build_graph([PoseGraphEdge(0, 1, Pose2(1, 0, 0))])
        init = {0: Pose2.identity(), 1: Pose2(float("nan"), 0.0, 0.0)}
        with pytest.raises(SolverFailureError):
            optimize(graph, init)

    def test_recovers_truth_from_rough_init(self):
        rng = np.random.default_rng(12)
        gt = ring_truth(12)
        pairs = [(k, (k + 1) % 12) for k in range(12)] + [(0, 6), (3, 9)]
        graph = build_graph(consistent_edges(gt, pairs))
        init = {
            n: Pose2(p.x + rng.normal(0, 0.2), p.y + rng.normal(0, 0.2), p.theta + rng.normal(0, 0.05))
            for n, p in gt.items()
        }
        init[0] = gt[0]  # keep the gauge at truth so poses are comparable
        res = optimize(graph, init)
        assert res.final_cost < 1e-15
        for n in range(12):
            assert pose_close(res.poses[n], gt[n], 1e-6)


class TestRobustEdgeCost:
    def test_matches_hand_computation(self):
        sigma = (0.05, 0.05, math.radians(1.0))
        graph = build_graph([PoseGraphEdge(0, 1, Pose2(1.0, 0.0, 0.0), sigma=sigma)])
        delta = 1.345

        # small residual: quadratic branch, u = 0.02 / 0.05
        poses = {0: Pose2.identity(), 1: Pose2(1.02, 0.0, 0.0)}
        u = 0.02 / 0.05
        assert robust_edge_cost(graph, poses, RobustConfig(huber_delta=delta)) == pytest.approx(
            0.5 * u * u, rel=1e-12
        )

        # large residual: linear branch
        poses = {0: Pose2.identity(), 1: Pose2(1.5, 0.0, 0.0)}
        u = 0.5 / 0.05
        assert robust_edge_cost(graph, poses, RobustConfig(huber_delta=delta)) == pytest.approx(
            delta * (u - 0.5 * delta), rel=1e-12
        )

    def test_skips_edges_with_missing_endpoints(self):
        graph = build_graph([PoseGraphEdge(0, 1, Pose2(1, 0, 0)), PoseGraphEdge(1, 2, Pose2(1, 0, 0))])
        poses = {0: Pose2.identity(), 1: Pose2(1.3, 0, 0)}
        full = robust_edge_cost(graph, poses)
        assert full > 0.0
        assert robust_edge_cost(graph, {0: Pose2.identity()}) == 0.0


class TestGraphIO:
    def test_roundtrip_is_exact(self, tmp_path):
        rng = np.random.default_rng(2)
        gt = ring_truth(5)
        pairs = [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)]
        edges = noisy_edges(gt, pairs, rng)
        edges = [
            PoseGraphEdge(e.i, e.j, e.z, (0.04, 0.06, 0.017), score=0.25 + 0.1 * k)
            for k, e in enumerate(edges)
        ]
        graph = build_graph(edges)
        path = str(tmp_path / "graph.txt")
        write_graph(path, graph, gt)
        loaded, poses = read_graph(path)
        assert loaded == graph
        assert poses == gt

    def test_write_without_poses(self, tmp_path):
        graph = build_graph([PoseGraphEdge(0, 1, Pose2(1.0, 0.0, 0.1))])
        path = str(tmp_path / "graph.txt")
        write_graph(path, graph)
        loaded, poses = read_graph(path)
        assert loaded == graph
        assert poses == {}

    def test_comment_header_present(self, tmp_path):
        graph = build_graph([PoseGraphEdge(0, 1, Pose2.identity())])
        path = str(tmp_path / "graph.txt")
        write_graph(path, graph)
        with open(path) as fh:
            assert fh.readline().startswith("#")
