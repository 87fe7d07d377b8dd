"""Top-down rendering: sampling geometry, densification, grid comparison."""

import math

import numpy as np
import pytest
import shapely
from shapely.geometry import Polygon

from panoplan.bev import BevConfig, BevGrid, densify, overlap_iou, paired_values, render_bev
from panoplan.bev import _bin_points
from panoplan.errors import ConfigError, MissingGroundTruthError
from panoplan.geom import Pose2, between
from panoplan.scene import PanoramaRecord, RoomContour, WdoKind

ROOM = np.array([[-2.0, -2.0], [2.0, -2.0], [2.0, 2.0], [-2.0, 2.0]])


def make_pano(contour=ROOM, gt_pose=Pose2(3.0, 1.0, 0.4), camera_height=1.6, pid=0):
    return PanoramaRecord(
        id=pid,
        contour=RoomContour.from_vertices(contour),
        wdos=(),
        vanishing_angle=0.0,
        camera_height=camera_height,
        gt_pose=gt_pose,
    )


def flat(level=0.7):
    return lambda w: np.full(len(w), level)


def linear_texture(w):
    return 0.5 + 0.02 * w[:, 0] + 0.03 * w[:, 1]


def occupied_centers(grid):
    c = grid.cells // 2
    rows, cols = np.nonzero(grid.occupancy)
    return np.column_stack([(cols - c) * grid.resolution, (rows - c) * grid.resolution])


class TestRender:
    def test_samples_stay_inside_the_room(self):
        cfg = BevConfig()
        grid = render_bev(make_pano(), "floor", flat(), cfg)
        centers = occupied_centers(grid)
        assert len(centers) > 1000
        dilated = Polygon(ROOM).buffer(cfg.resolution)
        inside = shapely.contains_xy(dilated, centers[:, 0], centers[:, 1])
        assert inside.all()

    def test_dense_mask_covers_the_room_interior(self):
        cfg = BevConfig()
        grid = render_bev(make_pano(), "floor", flat(), cfg)
        dense, mask = densify(grid, kernel=cfg.reliability_kernel)
        centers_x, centers_y = dense.cell_centers()
        gx, gy = np.meshgrid(centers_x, centers_y)
        core = Polygon(ROOM).buffer(-0.1)
        in_core = shapely.contains_xy(core, gx.ravel(), gy.ravel()).reshape(mask.shape)
        covered = np.count_nonzero(mask & in_core) / np.count_nonzero(in_core)
        assert covered >= 0.98

    def test_intensities_come_from_world_coordinates(self):
        cfg = BevConfig()
        pano = make_pano()
        grid = render_bev(pano, "floor", linear_texture, cfg)
        centers = occupied_centers(grid)
        rows, cols = np.nonzero(grid.occupancy)
        got = grid.intensity[rows, cols]
        want = linear_texture(pano.gt_pose.apply(centers))
        # the winning sample sits somewhere inside its cell, so allow one
        # cell diagonal of texture gradient
        atol = (0.02 + 0.03) * cfg.resolution * 1.5
        np.testing.assert_allclose(got, want, atol=atol)

    def test_footprint_invariant_to_camera_placement(self):
        # two cameras in the same room: the densified reliable regions must
        # describe the same physical footprint once mapped across frames
        room_world = ROOM + np.array([4.0, -1.0])
        poses = [Pose2(4.0, -1.0, 0.0), Pose2(4.8, -1.5, 2.1)]
        masks = []
        for pose in poses:
            local = pose.inverse().apply(room_world)
            grid = render_bev(make_pano(contour=local, gt_pose=pose), "floor", flat())
            masks.append(densify(grid, kernel=11)[0])
        rel = between(poses[0], poses[1])
        assert overlap_iou(masks[0], masks[1], rel) >= 0.95

    def test_ceiling_and_floor_agree_on_texture(self):
        pano = make_pano()
        floor = render_bev(pano, "floor", linear_texture)
        ceil = render_bev(pano, "ceiling", linear_texture)
        both = floor.occupancy & ceil.occupancy
        assert np.count_nonzero(both) > 1000
        diff = np.abs(floor.intensity[both] - ceil.intensity[both])
        assert diff.max() < (0.02 + 0.03) * floor.resolution * 2

    def test_shallow_floor_renders_empty(self):
        pano = make_pano(camera_height=0.8)  # below the 1 m minimum drop
        grid = render_bev(pano, "floor", flat())
        assert not grid.occupancy.any()

    def test_low_ceiling_clearance_renders_empty(self):
        pano = make_pano(camera_height=2.3)  # 0.3 m below a 2.6 m ceiling
        grid = render_bev(pano, "ceiling", flat())
        assert not grid.occupancy.any()

    def test_needs_gt_pose(self):
        pano = make_pano(gt_pose=None)
        with pytest.raises(MissingGroundTruthError):
            render_bev(pano, "floor", flat())

    def test_rejects_unknown_surface(self):
        with pytest.raises(ConfigError):
            render_bev(make_pano(), "wall", flat())


class TestBinning:
    def test_last_sample_wins_within_a_cell(self):
        # both samples land in the origin cell; the later one is kept
        pts = np.array([[0.004, 0.004], [0.001, 0.001]])
        vals = np.array([0.9, 0.3])
        intensity, occupancy = _bin_points(pts, vals, cells=11, resolution=0.02)
        assert occupancy.sum() == 1
        assert intensity[5, 5] == 0.3

    def test_out_of_extent_samples_dropped(self):
        pts = np.array([[5.0, 0.0], [0.0, 0.0]])
        vals = np.array([0.5, 0.6])
        intensity, occupancy = _bin_points(pts, vals, cells=11, resolution=0.02)
        assert occupancy.sum() == 1
        assert intensity[5, 5] == 0.6

    def test_cells_fill_at_rounded_coordinates(self):
        pts = np.array([[0.039, -0.042]])  # rounds to col +2, row -2
        _, occupancy = _bin_points(pts, np.array([1.0]), cells=11, resolution=0.02)
        assert occupancy[3, 7]


class TestDensify:
    def test_mask_matches_brute_force_box_rule(self):
        rng = np.random.default_rng(3)
        occ = rng.random((40, 40)) < 0.03
        grid = BevGrid(occ.astype(float), occ, 0.02, "floor")
        _, mask = densify(grid, kernel=11)
        k = 5
        for r in range(40):
            for c in range(40):
                window = occ[max(0, r - k):r + k + 1, max(0, c - k):c + k + 1]
                assert mask[r, c] == window.any()

    def test_sample_cells_keep_their_values(self):
        rng = np.random.default_rng(8)
        vals = rng.random((12, 12))
        occ = np.ones((12, 12), dtype=bool)
        dense, mask = densify(BevGrid(vals, occ, 0.02, "floor"), kernel=3)
        assert mask.all()
        np.testing.assert_allclose(dense.intensity, vals, atol=1e-9)

    def test_interpolation_is_linear_between_samples(self):
        # samples at the four corners of a linear ramp: the interior must
        # reproduce the ramp exactly
        n = 21
        vals = np.zeros((n, n))
        occ = np.zeros((n, n), dtype=bool)
        ramp = lambda r, c: 0.1 + 0.02 * r + 0.015 * c
        for r, c in [(0, 0), (0, n - 1), (n - 1, 0), (n - 1, n - 1)]:
            vals[r, c] = ramp(r, c)
            occ[r, c] = True
        dense, _ = densify(BevGrid(vals, occ, 0.02, "floor"), kernel=2 * n + 1)
        expect = ramp(*np.meshgrid(np.arange(n), np.arange(n), indexing="ij"))
        np.testing.assert_allclose(dense.intensity, expect, atol=1e-9)

    def test_unreliable_cells_zeroed(self):
        occ = np.zeros((40, 40), dtype=bool)
        occ[5, 5] = True
        vals = np.full((40, 40), 0.5)
        dense, mask = densify(BevGrid(vals, occ, 0.02, "floor"), kernel=3)
        assert not mask[30, 30]
        assert dense.intensity[30, 30] == 0.0

    def test_even_kernel_rejected(self):
        grid = BevGrid(np.zeros((4, 4)), np.zeros((4, 4), dtype=bool), 0.02, "floor")
        with pytest.raises(ConfigError):
            densify(grid, kernel=4)


def block_grid(r0, r1, c0, c1, cells=41, value=0.5):
    occ = np.zeros((cells, cells), dtype=bool)
    occ[r0:r1, c0:c1] = True
    return BevGrid(np.where(occ, value, 0.0), occ, 0.02, "floor")


class TestOverlap:
    def test_identity_overlap_is_one(self):
        g = block_grid(10, 20, 5, 15)
        assert overlap_iou(g, g, Pose2.identity()) == 1.0

    def test_integer_translation_recovers_full_overlap(self):
        res = 0.02
        a = block_grid(10, 20, 5, 15)
        b = block_grid(8, 18, 8, 18)  # same block, 3 columns right and 2 rows down
        i_T_j = Pose2(-3 * res, 2 * res, 0.0)
        assert overlap_iou(a, b, i_T_j) == 1.0

    def test_swap_and_invert_is_exactly_symmetric(self):
        rng = np.random.default_rng(0)
        occ_a = rng.random((41, 41)) < 0.2
        occ_b = rng.random((41, 41)) < 0.2
        a = BevGrid(occ_a.astype(float), occ_a, 0.02, "floor")
        b = BevGrid(occ_b.astype(float), occ_b, 0.02, "floor")
        g = Pose2(0.13, -0.07, 0.9)
        assert overlap_iou(a, b, g) == overlap_iou(b, a, g.inverse())

    def test_disjoint_blocks_score_zero(self):
        a = block_grid(0, 5, 0, 5)
        b = block_grid(30, 35, 30, 35)
        assert overlap_iou(a, b, Pose2.identity()) == 0.0

    def test_empty_grid_scores_zero(self):
        a = block_grid(10, 20, 5, 15)
        empty = block_grid(0, 0, 0, 0)
        assert overlap_iou(a, empty, Pose2.identity()) == 0.0

    def test_partial_overlap_matches_hand_count(self):
        # 10x10 blocks offset by 5 cells in x: intersection 5x10 = 50,
        # union 2*100 - 50 = 150
        a = block_grid(10, 20, 10, 20)
        b = block_grid(10, 20, 5, 15)
        i_T_j = Pose2.identity()
        assert overlap_iou(a, b, i_T_j) == pytest.approx(50 / 150)


class TestPairedValues:
    def test_identity_returns_all_cells_twice(self):
        rng = np.random.default_rng(5)
        occ = rng.random((21, 21)) < 0.3
        vals = np.where(occ, rng.random((21, 21)), 0.0)
        g = BevGrid(vals, occ, 0.02, "floor")
        va, vb = paired_values(g, g, Pose2.identity())
        assert len(va) == np.count_nonzero(occ)
        np.testing.assert_array_equal(va, vb)

    def test_disjoint_grids_return_nothing(self):
        a = block_grid(0, 5, 0, 5)
        b = block_grid(30, 35, 30, 35)
        va, vb = paired_values(a, b, Pose2.identity())
        assert len(va) == len(vb) == 0

    def test_translation_pairs_matching_cells(self):
        res = 0.02
        a = block_grid(10, 20, 5, 15, value=0.3)
        b = block_grid(8, 18, 8, 18, value=0.8)
        va, vb = paired_values(a, b, Pose2(-3 * res, 2 * res, 0.0))
        assert len(va) == 100
        assert set(va) == {0.3} and set(vb) == {0.8}


class TestImage:
    def test_to_image_puts_positive_y_up(self):
        cells = 9
        occ = np.zeros((cells, cells), dtype=bool)
        vals = np.zeros((cells, cells))
        occ[7, 2] = True  # high row = large world y
        vals[7, 2] = 1.0
        img = BevGrid(vals, occ, 0.02, "floor").to_image()
        assert img.size == (cells, cells)
        assert img.getpixel((2, cells - 1 - 7)) == 255
        assert img.getpixel((2, 7)) == 0
