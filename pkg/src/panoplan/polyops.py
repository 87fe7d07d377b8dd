"""Small polygon utilities shared by the scene generator, rendering, and stitching.

Polygons are (N, 2) float arrays of vertices in order, implicitly closed
(no repeated final vertex).
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError

__all__ = [
    "polygon_area",
    "points_in_polygon",
    "is_simple_polygon",
    "polygon_contains_origin",
    "rasterize_polygon",
    "polygon_raster_iou",
    "min_distance_to_boundary",
]


def polygon_area(vertices: np.ndarray) -> float:
    """Unsigned shoelace area of a polygon."""
    v = np.asarray(vertices, dtype=float)
    if v.ndim != 2 or v.shape[0] < 3 or v.shape[1] != 2:
        raise DegenerateInputError(f"polygon needs at least 3 vertices of dim 2, got shape {v.shape}")
    x, y = v[:, 0], v[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def points_in_polygon(points: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Even-odd point-in-polygon test, vectorized over points.

    Points exactly on an edge may land on either side; callers that care
    about boundary cells should budget a one-cell tolerance.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    v = np.asarray(vertices, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    x1, y1 = v[:, 0], v[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    for ax, ay, bx, by in zip(x1, y1, x2, y2):
        crosses = (ay > y) != (by > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = ax + (y - ay) * (bx - ax) / (by - ay)
        inside ^= crosses & (x < xint)
    return inside


def _segments_properly_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        # Snap near-zero determinants to zero so collinear chains of
        # densified vertices don't read as crossings; the threshold is
        # relative to the magnitude of the cancelled terms.
        t1 = (b[0] - a[0]) * (c[1] - a[1])
        t2 = (b[1] - a[1]) * (c[0] - a[0])
        det = t1 - t2
        if abs(det) <= 1e-12 * (abs(t1) + abs(t2)):
            return 0.0
        return det

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0


def is_simple_polygon(vertices: np.ndarray) -> bool:
    """True when no two non-adjacent edges properly intersect.

    Quadratic scan; contours in this package stay small enough for that.
    """
    v = np.asarray(vertices, dtype=float)
    n = len(v)
    if n < 3:
        return False
    edges = [(v[i], v[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_properly_intersect(*edges[i], *edges[j]):
                return False
    return True


def polygon_contains_origin(vertices: np.ndarray) -> bool:
    return bool(points_in_polygon(np.zeros((1, 2)), vertices)[0])


def rasterize_polygon(
    vertices: np.ndarray,
    cell_size: float,
    origin: np.ndarray,
    shape: tuple[int, int],
) -> np.ndarray:
    """Boolean occupancy of a polygon on a grid.

    A cell (row, col) is occupied when its center lies inside the polygon.
    ``origin`` is the world position of the outer corner of cell (0, 0);
    rows grow with world y, columns with world x.
    """
    rows, cols = shape
    cx = origin[0] + (np.arange(cols) + 0.5) * cell_size
    cy = origin[1] + (np.arange(rows) + 0.5) * cell_size
    gx, gy = np.meshgrid(cx, cy)
    centers = np.column_stack([gx.ravel(), gy.ravel()])
    return points_in_polygon(centers, vertices).reshape(rows, cols)


def _joint_grid(poly_a: np.ndarray, poly_b: np.ndarray, cell_size: float):
    lo = np.minimum(poly_a.min(axis=0), poly_b.min(axis=0)) - cell_size
    hi = np.maximum(poly_a.max(axis=0), poly_b.max(axis=0)) + cell_size
    origin = np.floor(lo / cell_size) * cell_size
    shape = (
        int(np.ceil((hi[1] - origin[1]) / cell_size)) + 1,
        int(np.ceil((hi[0] - origin[0]) / cell_size)) + 1,
    )
    return origin, shape


def polygon_raster_iou(poly_a: np.ndarray, poly_b: np.ndarray, cell_size: float = 0.05) -> float:
    """Intersection-over-union of two polygons, evaluated on a shared fine grid."""
    a = np.asarray(poly_a, dtype=float)
    b = np.asarray(poly_b, dtype=float)
    origin, shape = _joint_grid(a, b, cell_size)
    ra = rasterize_polygon(a, cell_size, origin, shape)
    rb = rasterize_polygon(b, cell_size, origin, shape)
    union = np.count_nonzero(ra | rb)
    if union == 0:
        return 0.0
    return np.count_nonzero(ra & rb) / union


def min_distance_to_boundary(point: np.ndarray, vertices: np.ndarray) -> float:
    """Distance from a point to the closest polygon edge."""
    p = np.asarray(point, dtype=float)
    v = np.asarray(vertices, dtype=float)
    a = v
    b = np.roll(v, -1, axis=0)
    ab = b - a
    ap = p[None, :] - a
    denom = np.einsum("ij,ij->i", ab, ab)
    t = np.clip(np.einsum("ij,ij->i", ap, ab) / np.maximum(denom, 1e-15), 0.0, 1.0)
    closest = a + t[:, None] * ab
    return float(np.min(np.linalg.norm(closest - p[None, :], axis=1)))
