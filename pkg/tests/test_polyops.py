import numpy as np
import pytest
from shapely.geometry import Point, Polygon

from panoplan.errors import DegenerateInputError
from panoplan.polyops import (
    is_simple_polygon,
    min_distance_to_boundary,
    points_in_polygon,
    polygon_area,
    polygon_contains_origin,
    polygon_raster_iou,
    rasterize_polygon,
)

UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def random_convex_polygon(rng, n=8, scale=4.0):
    """Convex hulls of random points are always simple polygons."""
    pts = rng.uniform(-scale, scale, size=(n + 8, 2))
    hull = Polygon(pts[:3]).convex_hull.union(Polygon(pts).convex_hull)
    coords = np.array(hull.convex_hull.exterior.coords[:-1])
    return coords


class TestArea:
    def test_unit_square(self):
        assert polygon_area(UNIT_SQUARE) == pytest.approx(1.0)

    def test_triangle(self):
        tri = np.array([[0, 0], [2, 0], [0, 3]], dtype=float)
        assert polygon_area(tri) == pytest.approx(3.0)

    def test_orientation_independent(self):
        assert polygon_area(UNIT_SQUARE[::-1]) == pytest.approx(1.0)

    def test_matches_shapely(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            poly = random_convex_polygon(rng)
            assert polygon_area(poly) == pytest.approx(Polygon(poly).area, rel=1e-12)

    def test_too_few_vertices(self):
        with pytest.raises(DegenerateInputError):
            polygon_area(np.zeros((2, 2)))


class TestPointsInPolygon:
    def test_against_shapely(self):
        rng = np.random.default_rng(1)
        for _ in range(15):
            poly = random_convex_polygon(rng)
            shp = Polygon(poly)
            queries = rng.uniform(-5, 5, size=(300, 2))
            # skip queries sitting essentially on the boundary, where the
            # even-odd rule and shapely may legitimately disagree
            dist = np.array([shp.exterior.distance(Point(q)) for q in queries])
            ok = dist > 1e-9
            ours = points_in_polygon(queries[ok], poly)
            theirs = np.array([shp.contains(Point(q)) for q in queries[ok]])
            np.testing.assert_array_equal(ours, theirs)

    def test_concave(self):
        lshape = np.array([[0, 0], [3, 0], [3, 1], [1, 1], [1, 3], [0, 3]], dtype=float)
        inside = np.array([[0.5, 2.5], [2.5, 0.5], [0.5, 0.5]])
        outside = np.array([[2.5, 2.5], [-0.1, 0.5], [3.5, 0.0]])
        assert points_in_polygon(inside, lshape).all()
        assert not points_in_polygon(outside, lshape).any()


class TestSimplicity:
    def test_square_is_simple(self):
        assert is_simple_polygon(UNIT_SQUARE)

    def test_bowtie_is_not(self):
        bowtie = np.array([[0, 0], [1, 1], [1, 0], [0, 1]], dtype=float)
        assert not is_simple_polygon(bowtie)

    def test_contains_origin(self):
        assert polygon_contains_origin(UNIT_SQUARE - 0.5)
        assert not polygon_contains_origin(UNIT_SQUARE + 2.0)


class TestRasterize:
    def test_axis_aligned_rect_exact(self):
        rect = np.array([[0, 0], [4, 0], [4, 5], [0, 5]], dtype=float)
        grid = rasterize_polygon(rect, 0.1, np.array([0.0, 0.0]), (50, 40))
        assert grid.all()
        assert grid.shape == (50, 40)

    def test_cell_center_rule(self):
        # A polygon covering x in [0, 0.04] leaves every 0.1-cell center
        # (0.05, ...) outside.
        sliver = np.array([[0, 0], [0.04, 0], [0.04, 1], [0, 1]], dtype=float)
        grid = rasterize_polygon(sliver, 0.1, np.array([0.0, 0.0]), (10, 2))
        assert not grid.any()

    def test_area_converges(self):
        rng = np.random.default_rng(2)
        poly = random_convex_polygon(rng)
        lo = poly.min(axis=0) - 0.1
        size = poly.max(axis=0) - lo + 0.2
        cell = 0.02
        shape = (int(size[1] / cell) + 1, int(size[0] / cell) + 1)
        grid = rasterize_polygon(poly, cell, lo, shape)
        raster_area = grid.sum() * cell * cell
        assert raster_area == pytest.approx(polygon_area(poly), rel=0.02)


class TestRasterIou:
    def test_identical(self):
        assert polygon_raster_iou(UNIT_SQUARE, UNIT_SQUARE) == pytest.approx(1.0)

    def test_disjoint(self):
        assert polygon_raster_iou(UNIT_SQUARE, UNIT_SQUARE + 10.0) == 0.0

    def test_against_shapely(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            a = random_convex_polygon(rng)
            b = random_convex_polygon(rng)
            inter = Polygon(a).intersection(Polygon(b)).area
            union = Polygon(a).union(Polygon(b)).area
            want = inter / union
            got = polygon_raster_iou(a, b, cell_size=0.02)
            assert got == pytest.approx(want, abs=0.02)


class TestBoundaryDistance:
    def test_center_of_unit_square(self):
        assert min_distance_to_boundary(np.array([0.5, 0.5]), UNIT_SQUARE) == pytest.approx(0.5)

    def test_matches_shapely(self):
        rng = np.random.default_rng(4)
        poly = random_convex_polygon(rng)
        shp = Polygon(poly)
        for q in rng.uniform(-4, 4, size=(50, 2)):
            want = shp.exterior.distance(Point(q))
            assert min_distance_to_boundary(q, poly) == pytest.approx(want, abs=1e-9)
