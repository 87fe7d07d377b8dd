"""Floorplan assembly from globally posed room contours.

Panoramas whose world-frame contours overlap are grouped into rooms, each
group is fused into a single confidence-voted contour, and the fused
contours are stitched into a labeled occupancy raster.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence

import numpy as np
from skimage import measure

from .errors import DegenerateInputError
from .geom import Pose2, wrap_angle
from .polyops import polygon_raster_iou, rasterize_polygon

DEFAULT_GROUPING_IOU = 0.25
DEFAULT_CELL_SIZE = 0.1
_FUSE_CELL = 0.01


@dataclass(frozen=True)
class RoomGroup:
    """Panoramas judged to view the same room.

    ``contour`` is the fused world-frame polygon; it is ``None`` until
    :func:`extract_confident_contour` has run for the group.
    """

    members: tuple[int, ...]
    contour: Optional[np.ndarray] = None


@dataclass
class FloorplanRaster:
    """Binary occupancy grid with an optional room label per cell.

    ``origin`` is the world position of the outer corner of cell (0, 0);
    rows grow with world y.  ``labels`` holds the room-group index of each
    occupied cell and -1 elsewhere.
    """

    cell_size: float
    origin: np.ndarray
    occupancy: np.ndarray
    labels: np.ndarray

    @property
    def occupied_area(self) -> float:
        return float(np.count_nonzero(self.occupancy)) * self.cell_size**2


def _world_contours(
    poses: Mapping[int, Pose2], contours: Mapping[int, np.ndarray]
) -> dict[int, np.ndarray]:
    return {k: poses[k].apply(np.asarray(contours[k], dtype=float)) for k in contours}


def group_panoramas(
    poses: Mapping[int, Pose2],
    contours: Mapping[int, np.ndarray],
    iou_threshold: float = DEFAULT_GROUPING_IOU,
) -> list[RoomGroup]:
    """Partition panoramas into rooms by world-frame contour overlap.

    Two panoramas are linked when the IoU of their posed contour polygons
    exceeds ``iou_threshold``; groups are the connected components of that
    link graph, so chains of pairwise overlaps merge transitively.
    """
    ids = sorted(contours)
    world = _world_contours(poses, contours)
    bbox = {k: (world[k].min(axis=0), world[k].max(axis=0)) for k in ids}
    adj: dict[int, set[int]] = {k: set() for k in ids}
    for a_idx, a in enumerate(ids):
        for b in ids[a_idx + 1 :]:
            # Disjoint bounding boxes cannot overlap; skip the raster.
            if np.any(bbox[a][1] < bbox[b][0]) or np.any(bbox[b][1] < bbox[a][0]):
                continue
            if polygon_raster_iou(world[a], world[b]) > iou_threshold:
                adj[a].add(b)
                adj[b].add(a)

    groups = []
    seen: set[int] = set()
    for start in ids:
        if start in seen:
            continue
        stack, members = [start], []
        seen.add(start)
        while stack:
            node = stack.pop()
            members.append(node)
            for nbr in sorted(adj[node], reverse=True):
                if nbr not in seen:
                    seen.add(nbr)
                    stack.append(nbr)
        groups.append(RoomGroup(members=tuple(sorted(members))))
    groups.sort(key=lambda g: g.members[0])
    return groups


def _nearest_ray(ray_angles: np.ndarray, bearings: np.ndarray) -> np.ndarray:
    """Index of the closest ray (wrapped angular distance) per bearing."""
    idx = np.searchsorted(ray_angles, bearings)
    lo = (idx - 1) % len(ray_angles)
    hi = idx % len(ray_angles)
    d_lo = np.abs(wrap_angle(bearings - ray_angles[lo]))
    d_hi = np.abs(wrap_angle(bearings - ray_angles[hi]))
    return np.where(d_lo <= d_hi, lo, hi)


def _fan_polygon(
    center: np.ndarray,
    own_world: np.ndarray,
    candidates: np.ndarray,
    confidences: np.ndarray,
) -> np.ndarray:
    """Vote one contour point per ray of a panorama's vertex fan.

    Rays are the bearings of the panorama's own contour vertices from its
    camera center.  Every candidate point lands on its nearest ray; the
    winner per ray is the highest-confidence candidate, with ties going to
    the point nearest the camera.
    """
    own_delta = own_world - center
    ray_angles = np.unique(np.arctan2(own_delta[:, 1], own_delta[:, 0]))
    if len(ray_angles) < 3:
        raise DegenerateInputError(
            f"contour spans only {len(ray_angles)} distinct bearings from its camera"
        )

    delta = candidates - center
    dist = np.hypot(delta[:, 0], delta[:, 1])
    keep = dist > 1e-12
    delta, dist, conf = delta[keep], dist[keep], confidences[keep]
    bearings = np.arctan2(delta[:, 1], delta[:, 0])
    bins = _nearest_ray(ray_angles, bearings)

    # First row per bin after sorting by (bin, -confidence, distance) is the
    # winner; lexsort is stable so insertion order breaks exact ties.
    order = np.lexsort((dist, -conf, bins))
    bins_sorted = bins[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = bins_sorted[1:] != bins_sorted[:-1]
    winners = order[first]

    polygon = np.full((len(ray_angles), 2), np.nan)
    polygon[bins_sorted[first]] = center + delta[winners]
    filled = ~np.isnan(polygon[:, 0])
    if np.count_nonzero(filled) < 3:
        raise DegenerateInputError("fewer than 3 rays received a contour vote")
    return polygon[filled]


def _canonical_cycle(polygon: np.ndarray) -> np.ndarray:
    # Round the sort keys so coordinate dust cannot flip the start vertex
    # between two copies of the same polygon.
    keys = np.round(polygon / 1e-6) * 1e-6
    start = np.lexsort((keys[:, 1], keys[:, 0]))[0]
    return np.roll(polygon, -start, axis=0)


def _trace_union(polygons: Sequence[np.ndarray]) -> np.ndarray:
    """Outer boundary of the union of overlapping polygons, via a fine raster."""
    stacked = np.vstack(polygons)
    lo = stacked.min(axis=0) - 3 * _FUSE_CELL
    hi = stacked.max(axis=0) + 3 * _FUSE_CELL
    origin = np.floor(lo / _FUSE_CELL) * _FUSE_CELL
    shape = (
        int(np.ceil((hi[1] - origin[1]) / _FUSE_CELL)) + 1,
        int(np.ceil((hi[0] - origin[0]) / _FUSE_CELL)) + 1,
    )
    mask = np.zeros(shape, dtype=bool)
    for poly in polygons:
        mask |= rasterize_polygon(poly, _FUSE_CELL, origin, shape)
    rings = measure.find_contours(mask.astype(float), 0.5)
    if not rings:
        raise DegenerateInputError("union raster is empty")
    ring = max(rings, key=len)
    # find_contours returns (row, col) with integer coordinates at cell
    # centers; drop the closing duplicate vertex.
    verts = np.column_stack(
        [
            origin[0] + (ring[:-1, 1] + 0.5) * _FUSE_CELL,
            origin[1] + (ring[:-1, 0] + 0.5) * _FUSE_CELL,
        ]
    )
    if len(verts) < 3:
        raise DegenerateInputError("union boundary has fewer than 3 vertices")
    return verts


def extract_confident_contour(
    group: RoomGroup,
    poses: Mapping[int, Pose2],
    contours: Mapping[int, np.ndarray],
    confidences: Optional[Mapping[int, np.ndarray]] = None,
) -> np.ndarray:
    """Fuse a group's contours into one world-frame polygon.

    Each member casts a ray fan from its camera center (one ray per own
    contour vertex), all members' world contour points vote on those rays,
    and the per-member winning polygons are unioned.  A single-member group
    passes its contour through unchanged.
    """
    if not group.members:
        raise DegenerateInputError("cannot fuse an empty group")
    world = {k: poses[k].apply(np.asarray(contours[k], dtype=float)) for k in group.members}
    if len(group.members) == 1:
        return world[group.members[0]]

    conf = {}
    for k in group.members:
        if confidences is not None and k in confidences:
            conf[k] = np.asarray(confidences[k], dtype=float)
        else:
            conf[k] = np.ones(len(contours[k]))
    all_points = np.vstack([world[k] for k in group.members])
    all_conf = np.concatenate([conf[k] for k in group.members])

    fans = []
    for k in group.members:
        center = np.array([poses[k].x, poses[k].y])
        fans.append(_fan_polygon(center, world[k], all_points, all_conf))

    first = _canonical_cycle(fans[0])
    if all(
        f.shape == first.shape and np.allclose(_canonical_cycle(f), first, atol=1e-9)
        for f in fans[1:]
    ):
        return fans[0]
    return _trace_union(fans)


def fuse_groups(
    poses: Mapping[int, Pose2],
    contours: Mapping[int, np.ndarray],
    confidences: Optional[Mapping[int, np.ndarray]] = None,
    iou_threshold: float = DEFAULT_GROUPING_IOU,
) -> list[RoomGroup]:
    """Group panoramas and fill in each group's fused contour."""
    groups = group_panoramas(poses, contours, iou_threshold)
    return [
        replace(g, contour=extract_confident_contour(g, poses, contours, confidences))
        for g in groups
    ]


def _empty_raster(cell_size: float) -> FloorplanRaster:
    return FloorplanRaster(
        cell_size=cell_size,
        origin=np.zeros(2),
        occupancy=np.zeros((0, 0), dtype=bool),
        labels=np.full((0, 0), -1, dtype=int),
    )


def _label_polygons(
    polygons: Sequence[np.ndarray], cell_size: float
) -> FloorplanRaster:
    if not polygons:
        return _empty_raster(cell_size)
    stacked = np.vstack(polygons)
    lo = stacked.min(axis=0) - cell_size
    hi = stacked.max(axis=0) + cell_size
    origin = np.floor(lo / cell_size) * cell_size
    shape = (
        int(np.ceil((hi[1] - origin[1]) / cell_size)) + 1,
        int(np.ceil((hi[0] - origin[0]) / cell_size)) + 1,
    )
    labels = np.full(shape, -1, dtype=int)
    for idx, poly in enumerate(polygons):
        inside = rasterize_polygon(poly, cell_size, origin, shape)
        labels[inside & (labels == -1)] = idx
    return FloorplanRaster(
        cell_size=cell_size,
        origin=origin,
        occupancy=labels >= 0,
        labels=labels,
    )


def stitch(
    groups: Sequence[RoomGroup], cell_size: float = DEFAULT_CELL_SIZE
) -> FloorplanRaster:
    """Rasterize the union of fused group contours.

    Each cell's label is the smallest group index whose contour contains
    the cell center, so overlapping groups resolve deterministically.
    """
    for g in groups:
        if g.contour is None:
            raise ValueError(f"group {g.members} has no fused contour; run fuse_groups first")
    return _label_polygons([g.contour for g in groups], cell_size)


def rasterize_rooms(
    polygons: Sequence[np.ndarray], cell_size: float = DEFAULT_CELL_SIZE
) -> FloorplanRaster:
    """Raster a list of room polygons, labeling cells by list index."""
    return _label_polygons([np.asarray(p, dtype=float) for p in polygons], cell_size)


def floorplan_iou(a: FloorplanRaster, b: FloorplanRaster) -> float:
    """Occupancy IoU of two rasters after aligning their grids.

    Origins may differ by whole cells; sub-cell offsets are rounded to the
    nearest cell.  Raises ``ValueError`` when cell sizes differ.
    """
    if not np.isclose(a.cell_size, b.cell_size):
        raise ValueError(f"cell size mismatch: {a.cell_size} vs {b.cell_size}")
    if a.occupancy.size == 0 and b.occupancy.size == 0:
        return 1.0
    if a.occupancy.size == 0 or b.occupancy.size == 0:
        return 0.0
    cell = a.cell_size
    shift = np.rint((b.origin - a.origin) / cell).astype(int)
    # Common grid in units of a's cell indices.
    lo = np.minimum([0, 0], shift[::-1])
    hi = np.maximum(a.occupancy.shape, shift[::-1] + np.array(b.occupancy.shape))
    common_a = np.zeros(hi - lo, dtype=bool)
    common_b = np.zeros(hi - lo, dtype=bool)
    ra, ca = -lo
    common_a[ra : ra + a.occupancy.shape[0], ca : ca + a.occupancy.shape[1]] = a.occupancy
    rb, cb = shift[::-1] - lo
    common_b[rb : rb + b.occupancy.shape[0], cb : cb + b.occupancy.shape[1]] = b.occupancy
    union = np.count_nonzero(common_a | common_b)
    if union == 0:
        return 1.0
    return np.count_nonzero(common_a & common_b) / union


_PALETTE = np.array(
    [
        [230, 120, 100],
        [110, 170, 220],
        [140, 200, 120],
        [230, 190, 90],
        [170, 130, 200],
        [100, 200, 190],
        [220, 140, 190],
        [160, 160, 110],
        [120, 130, 230],
        [200, 110, 120],
    ],
    dtype=np.uint8,
)


def raster_to_image(raster: FloorplanRaster):
    """Render a raster as an RGB image, one palette color per room label.

    Rows are flipped so world +y points up in the image.
    """
    from PIL import Image

    if raster.occupancy.size == 0:
        return Image.new("RGB", (1, 1), (255, 255, 255))
    rgb = np.full(raster.labels.shape + (3,), 255, dtype=np.uint8)
    occupied = raster.labels >= 0
    rgb[occupied] = _PALETTE[raster.labels[occupied] % len(_PALETTE)]
    return Image.fromarray(rgb[::-1])


_WDO_COLORS = {"window": "#2b7bba", "door": "#c0392b", "opening": "#27ae60"}


def write_floorplan_svg(
    path: str,
    contours: Sequence[np.ndarray],
    wdo_segments: Optional[Mapping[str, Sequence[np.ndarray]]] = None,
    camera_points: Optional[np.ndarray] = None,
) -> None:
    """Write a vector drawing of room contours with W/D/O overlays.

    ``wdo_segments`` maps kind name to world-frame (2, 2) endpoint arrays;
    segments are colored by kind.  Camera positions render as dots.
    """
    from .scene import atomic_write_text

    polys = [np.asarray(c, dtype=float) for c in contours]
    if polys:
        stacked = np.vstack(polys)
        lo, hi = stacked.min(axis=0) - 0.5, stacked.max(axis=0) + 0.5
    else:
        lo, hi = np.zeros(2), np.ones(2)
    scale = 60.0

    def sx(x: float) -> float:
        return (x - lo[0]) * scale

    def sy(y: float) -> float:
        # SVG y grows downward; world y grows upward.
        return (hi[1] - y) * scale

    width, height = (hi - lo) * scale
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.2f} {height:.2f}">',
        f'<rect width="{width:.2f}" height="{height:.2f}" fill="white"/>',
    ]
    for poly in polys:
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in poly)
        parts.append(
            f'<polygon points="{pts}" fill="#f2e8d8" fill-opacity="0.6" '
            'stroke="#333333" stroke-width="2"/>'
        )
    for kind, segments in (wdo_segments or {}).items():
        color = _WDO_COLORS.get(kind, "#888888")
        for seg in segments:
            s = np.asarray(seg, dtype=float)
            parts.append(
                f'<line x1="{sx(s[0, 0]):.2f}" y1="{sy(s[0, 1]):.2f}" '
                f'x2="{sx(s[1, 0]):.2f}" y2="{sy(s[1, 1]):.2f}" '
                f'stroke="{color}" stroke-width="5" stroke-linecap="round"/>'
            )
    if camera_points is not None:
        for x, y in np.asarray(camera_points, dtype=float):
            parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="4" fill="#111111"/>')
    parts.append("</svg>")
    atomic_write_text(path, "\n".join(parts) + "\n")
