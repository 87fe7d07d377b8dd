"""Synthetic home generator: tiled rooms, shared doors, windows, and panoramas.

The generator produces exact scenes for experiments. Rooms are axis-aligned
rectangles tiled without overlap in one or two rows; adjacent rooms get a
door on their shared wall, exterior walls carry windows, and rooms wider
than a threshold are split into two sub-rooms joined by a wide opening.
Optionally some outer corners of the home are chamfered to break the pure
Manhattan structure.

Everything is drawn from a single seeded generator, so a config maps to
exactly one scene, byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError
from .geom import Pose2, wrap_angle
from .polyops import min_distance_to_boundary, points_in_polygon
from .scene import (
    PanoramaRecord,
    RoomContour,
    Scene,
    WdoDetection,
    WdoKind,
)

__all__ = ["HomeConfig", "HomeLayout", "generate_synthetic_home", "generate_home"]

_WALL_TOL = 1e-9
_EDGE_MARGIN = 0.3


@dataclass(frozen=True)
class HomeConfig:
    """Knobs for the synthetic home generator.

    ``n_rooms`` counts the tiled cells; a cell wider than
    ``opening_split_threshold`` is split into two sub-rooms joined by an
    opening, so the final room count can exceed ``n_rooms``. Single-cell
    homes are never split, which keeps the one-room/one-pano case exact.
    """

    n_rooms: int = 5
    panos_per_room: int = 1
    seed: int = 0
    rows: Optional[int] = None
    room_width_range: tuple[float, float] = (2.8, 6.5)
    row_depth_range: tuple[float, float] = (2.8, 4.5)
    door_width_range: tuple[float, float] = (0.8, 1.1)
    window_width_range: tuple[float, float] = (0.6, 1.8)
    opening_width_range: tuple[float, float] = (1.2, 3.0)
    opening_split_threshold: float = 5.0
    non_manhattan_prob: float = 0.0
    chamfer_range: tuple[float, float] = (0.4, 0.9)
    contour_step: float = 0.25
    camera_height_range: tuple[float, float] = (1.5, 1.8)
    camera_clearance: float = 0.5

    def validate(self):
        if self.n_rooms < 1:
            raise ConfigError(f"n_rooms must be >= 1, got {self.n_rooms}")
        if not (1 <= self.panos_per_room <= 3):
            raise ConfigError(f"panos_per_room must be in 1..3, got {self.panos_per_room}")
        if self.rows is not None and self.rows not in (1, 2):
            raise ConfigError(f"rows must be 1 or 2, got {self.rows}")
        if self.room_width_range[0] < 2.0:
            raise ConfigError("rooms narrower than 2 m leave no space for cameras")
        if not (0.0 <= self.non_manhattan_prob <= 1.0):
            raise ConfigError("non_manhattan_prob must be a probability")


@dataclass
class _Room:
    rect: tuple[float, float, float, float]  # x0, y0, x1, y1
    chamfers: dict = field(default_factory=dict)  # corner name -> cut length
    polygon: np.ndarray = None
    features: list = field(default_factory=list)  # (WdoKind, p1, p2, normal) in world
    exterior: dict = field(default_factory=dict)  # side -> free (lo, hi) spans


@dataclass(frozen=True)
class HomeLayout:
    """Ground-truth structure behind a generated scene (for tests and plots)."""

    room_polygons: tuple[np.ndarray, ...]
    portals: tuple[tuple[int, int, WdoKind], ...]  # room index pairs joined by door/opening
    pano_rooms: tuple[int, ...]  # room index per panorama id

    def adjacent_pano_pairs(self) -> set[tuple[int, int]]:
        """Pano pairs expected to align: same room, or rooms joined by a portal."""
        joined = {(a, b) for a, b, _ in self.portals}
        pairs = set()
        n = len(self.pano_rooms)
        for i in range(n):
            for j in range(i + 1, n):
                ri, rj = self.pano_rooms[i], self.pano_rooms[j]
                if ri == rj or (min(ri, rj), max(ri, rj)) in joined:
                    pairs.add((i, j))
        return pairs


def _corner_polygon(rect, chamfers) -> np.ndarray:
    x0, y0, x1, y1 = rect
    verts: list[tuple[float, float]] = []
    bl = chamfers.get("bl", 0.0)
    br = chamfers.get("br", 0.0)
    tr = chamfers.get("tr", 0.0)
    tl = chamfers.get("tl", 0.0)
    verts.append((x0 + bl, y0) if bl else (x0, y0))
    if br:
        verts += [(x1 - br, y0), (x1, y0 + br)]
    else:
        verts.append((x1, y0))
    if tr:
        verts += [(x1, y1 - tr), (x1 - tr, y1)]
    else:
        verts.append((x1, y1))
    if tl:
        verts += [(x0 + tl, y1), (x0, y1 - tl)]
    else:
        verts.append((x0, y1))
    if bl:
        verts.append((x0, y0 + bl))
    return np.array(verts, dtype=float)


def _densify(polygon: np.ndarray, step: float) -> np.ndarray:
    out = []
    n = len(polygon)
    for i in range(n):
        a, b = polygon[i], polygon[(i + 1) % n]
        length = float(np.linalg.norm(b - a))
        pieces = max(1, int(math.ceil(length / step)))
        for k in range(pieces):
            out.append(a + (b - a) * (k / pieces))
    return np.array(out, dtype=float)


def _subtract_intervals(span: tuple[float, float], holes: list[tuple[float, float]]):
    """Portions of ``span`` not covered by any hole interval."""
    lo, hi = span
    events = sorted((max(lo, a), min(hi, b)) for a, b in holes if b > lo and a < hi)
    free = []
    cursor = lo
    for a, b in events:
        if a > cursor + _WALL_TOL:
            free.append((cursor, a))
        cursor = max(cursor, b)
    if hi > cursor + _WALL_TOL:
        free.append((cursor, hi))
    return free


def _side_span(rect, side):
    x0, y0, x1, y1 = rect
    return {
        "bottom": (x0, x1),
        "top": (x0, x1),
        "left": (y0, y1),
        "right": (y0, y1),
    }[side]


def _wall_segment(rect, side, lo, hi):
    """World endpoints (in increasing-coordinate order) and interior normal."""
    x0, y0, x1, y1 = rect
    if side == "bottom":
        return np.array([lo, y0]), np.array([hi, y0]), np.array([0.0, 1.0])
    if side == "top":
        return np.array([lo, y1]), np.array([hi, y1]), np.array([0.0, -1.0])
    if side == "left":
        return np.array([x0, lo]), np.array([x0, hi]), np.array([1.0, 0.0])
    if side == "right":
        return np.array([x1, lo]), np.array([x1, hi]), np.array([-1.0, 0.0])
    raise ValueError(side)


_OPPOSITE = {"left": "right", "right": "left", "top": "bottom", "bottom": "top"}


def _neighbors_across(rooms: list[_Room], idx: int, side: str):
    """Rooms sharing wall coordinate across ``side`` with a positive overlap."""
    x0, y0, x1, y1 = rooms[idx].rect
    result = []
    for j, other in enumerate(rooms):
        if j == idx:
            continue
        ox0, oy0, ox1, oy1 = other.rect
        if side == "left" and abs(ox1 - x0) < _WALL_TOL:
            lo, hi = max(y0, oy0), min(y1, oy1)
        elif side == "right" and abs(ox0 - x1) < _WALL_TOL:
            lo, hi = max(y0, oy0), min(y1, oy1)
        elif side == "bottom" and abs(oy1 - y0) < _WALL_TOL:
            lo, hi = max(x0, ox0), min(x1, ox1)
        elif side == "top" and abs(oy0 - y1) < _WALL_TOL:
            lo, hi = max(x0, ox0), min(x1, ox1)
        else:
            continue
        if hi - lo > _WALL_TOL:
            result.append((j, lo, hi))
    return result


def _chamfer_trim(side, corner_cuts, span):
    """Shrink a side span by the chamfer cuts at its two end corners."""
    lo, hi = span
    if side == "bottom":
        lo += corner_cuts.get("bl", 0.0)
        hi -= corner_cuts.get("br", 0.0)
    elif side == "top":
        lo += corner_cuts.get("tl", 0.0)
        hi -= corner_cuts.get("tr", 0.0)
    elif side == "left":
        lo += corner_cuts.get("bl", 0.0)
        hi -= corner_cuts.get("tl", 0.0)
    elif side == "right":
        lo += corner_cuts.get("br", 0.0)
        hi -= corner_cuts.get("tr", 0.0)
    return lo, hi


def generate_home(config: HomeConfig) -> tuple[Scene, HomeLayout]:
    """Generate a scene together with the layout structure behind it."""
    config.validate()
    rng = np.random.default_rng(config.seed)

    n_rows = config.rows if config.rows is not None else (1 if config.n_rooms <= 3 else 2)
    n_rows = min(n_rows, config.n_rooms)
    counts = [config.n_rooms] if n_rows == 1 else [
        int(math.ceil(config.n_rooms / 2)),
        config.n_rooms - int(math.ceil(config.n_rooms / 2)),
    ]

    depths = [rng.uniform(*config.row_depth_range) for _ in range(n_rows)]
    rooms: list[_Room] = []
    portals: list[tuple[int, int, WdoKind]] = []  # room idx pairs with portal kind

    y_cursor = 0.0
    for row, count in enumerate(counts):
        y0, y1 = y_cursor, y_cursor + depths[row]
        x_cursor = 0.0
        for _ in range(count):
            width = rng.uniform(*config.room_width_range)
            if config.n_rooms == 1:
                width = min(width, config.opening_split_threshold)
            x0, x1 = x_cursor, x_cursor + width
            if width > config.opening_split_threshold:
                ratio = rng.uniform(0.45, 0.55)
                xm = x0 + width * ratio
                rooms.append(_Room((x0, y0, xm, y1)))
                rooms.append(_Room((xm, y0, x1, y1)))
                portals.append((len(rooms) - 2, len(rooms) - 1, WdoKind.OPENING))
            else:
                rooms.append(_Room((x0, y0, x1, y1)))
            x_cursor = x1
        y_cursor = y1

    # Doors and openings on shared walls. Portal endpoints are positioned
    # later, once chamfers are fixed (chamfers never touch interior walls).
    portal_pairs = {(min(a, b), max(a, b)) for a, b, _ in portals}
    door_pairs = []
    needed = config.door_width_range[1] + 2 * _EDGE_MARGIN
    for i in range(len(rooms)):
        for j, lo, hi in _neighbors_across(rooms, i, "right"):
            if j > i and (i, j) not in portal_pairs and hi - lo >= needed:
                door_pairs.append((i, j, "right", lo, hi))
        for j, lo, hi in _neighbors_across(rooms, i, "top"):
            if j > i and (i, j) not in portal_pairs and hi - lo >= needed:
                door_pairs.append((i, j, "top", lo, hi))

    # Chamfer outer corners where both incident walls are exterior.
    for i, room in enumerate(rooms):
        exterior_sides = {}
        for side in ("bottom", "right", "top", "left"):
            holes = [(lo, hi) for _, lo, hi in _neighbors_across(rooms, i, side)]
            exterior_sides[side] = _subtract_intervals(_side_span(room.rect, side), holes)
        room.exterior = exterior_sides  # free spans per side, pre-chamfer

        x0, y0, x1, y1 = room.rect
        corner_sides = {
            "bl": (("bottom", x0), ("left", y0)),
            "br": (("bottom", x1), ("right", y0)),
            "tr": (("top", x1), ("right", y1)),
            "tl": (("top", x0), ("left", y1)),
        }
        for corner, incident in corner_sides.items():
            clear = []
            for side, coord in incident:
                spans = exterior_sides[side]
                room_span = _side_span(room.rect, side)
                at_end = None
                for lo, hi in spans:
                    if abs(lo - coord) < _WALL_TOL:
                        at_end = hi - lo
                    elif abs(hi - coord) < _WALL_TOL:
                        at_end = hi - lo
                clear.append(at_end)
            if all(c is not None for c in clear):
                max_cut = min(min(clear) - _EDGE_MARGIN, config.chamfer_range[1])
                if max_cut >= config.chamfer_range[0] and rng.random() < config.non_manhattan_prob:
                    room.chamfers[corner] = rng.uniform(config.chamfer_range[0], max_cut)

        room.polygon = _corner_polygon(room.rect, room.chamfers)

    # Doors between adjacent rooms.
    for i, j, side, lo, hi in door_pairs:
        width = rng.uniform(*config.door_width_range)
        center = rng.uniform(lo + _EDGE_MARGIN + width / 2, hi - _EDGE_MARGIN - width / 2)
        p1, p2, normal_i = _wall_segment(rooms[i].rect, side, center - width / 2, center + width / 2)
        rooms[i].features.append((WdoKind.DOOR, p1, p2, normal_i))
        rooms[j].features.append((WdoKind.DOOR, p1, p2, -normal_i))
        portals.append((i, j, WdoKind.DOOR))

    # Openings between the halves of split cells.
    for a, b, kind in [p for p in portals if p[2] is WdoKind.OPENING]:
        x0, y0, x1, y1 = rooms[a].rect  # left half; shared wall is its right side
        lo, hi = y0, y1
        max_width = min(config.opening_width_range[1], hi - lo - 2 * _EDGE_MARGIN)
        width = rng.uniform(config.opening_width_range[0], max(config.opening_width_range[0], max_width))
        center = rng.uniform(lo + _EDGE_MARGIN + width / 2, hi - _EDGE_MARGIN - width / 2)
        p1, p2, normal_a = _wall_segment(rooms[a].rect, "right", center - width / 2, center + width / 2)
        rooms[a].features.append((kind, p1, p2, normal_a))
        rooms[b].features.append((kind, p1, p2, -normal_a))

    # Windows on exterior wall spans (trimmed by chamfers).
    min_w = config.window_width_range[0]
    for room in rooms:
        for side in ("bottom", "right", "top", "left"):
            for span in room.exterior[side]:
                lo, hi = _chamfer_trim(side, room.chamfers, span)
                usable = hi - lo - 2 * _EDGE_MARGIN
                if usable < min_w:
                    continue
                halves = [(lo, hi)] if hi - lo < 4.5 else [(lo, (lo + hi) / 2), ((lo + hi) / 2, hi)]
                for wlo, whi in halves:
                    cap = whi - wlo - 2 * _EDGE_MARGIN
                    if cap < min_w:
                        continue
                    width = rng.uniform(min_w, min(config.window_width_range[1], cap))
                    center = rng.uniform(wlo + _EDGE_MARGIN + width / 2, whi - _EDGE_MARGIN - width / 2)
                    p1, p2, normal = _wall_segment(room.rect, side, center - width / 2, center + width / 2)
                    room.features.append((WdoKind.WINDOW, p1, p2, normal))

    # Panoramas.
    camera_height = float(rng.uniform(*config.camera_height_range))
    panos: list[PanoramaRecord] = []
    pano_rooms: list[int] = []
    for ridx, room in enumerate(rooms):
        x0, y0, x1, y1 = room.rect
        for _ in range(config.panos_per_room):
            position = None
            for _attempt in range(200):
                cand = np.array([rng.uniform(x0, x1), rng.uniform(y0, y1)])
                if not points_in_polygon(cand[None, :], room.polygon)[0]:
                    continue
                if min_distance_to_boundary(cand, room.polygon) >= config.camera_clearance:
                    position = cand
                    break
            if position is None:
                position = room.polygon.mean(axis=0)
            heading = wrap_angle(rng.uniform(-math.pi, math.pi))
            pose = Pose2(position[0], position[1], heading)
            inv = pose.inverse()

            contour_world = _densify(room.polygon, config.contour_step)
            contour = RoomContour.from_vertices(inv.apply(contour_world), 1.0)

            wdos = []
            for kind, p1, p2, normal in room.features:
                endpoints = inv.apply(np.array([p1, p2]))
                wdos.append(WdoDetection(kind, endpoints, inv.rotate_only(normal), 1.0))

            panos.append(
                PanoramaRecord(
                    id=len(panos),
                    contour=contour,
                    wdos=tuple(wdos),
                    vanishing_angle=float(np.mod(heading, math.pi / 2.0)),
                    camera_height=camera_height,
                    gt_pose=pose,
                )
            )
            pano_rooms.append(ridx)

    scene = Scene(tuple(panos), tuple(room.polygon for room in rooms))
    layout = HomeLayout(
        room_polygons=tuple(room.polygon for room in rooms),
        portals=tuple((min(a, b), max(a, b), k) for a, b, k in portals),
        pano_rooms=tuple(pano_rooms),
    )
    return scene, layout


def generate_synthetic_home(config: HomeConfig) -> Scene:
    """Generate a deterministic synthetic scene (see :class:`HomeConfig`)."""
    scene, _ = generate_home(config)
    return scene
