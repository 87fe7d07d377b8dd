"""Scene model: panorama records with room layouts and wall features.

A scene is the unit of input for reconstruction. Each panorama carries the
room contour visible from the camera, expressed in the camera's own level
frame (camera at the origin), plus the wall features (windows, doors,
openings) detected on that contour. Ground-truth poses and the true
floorplan are optional and only used by generators, oracle verification,
and evaluation.

Scenes serialize to a single self-describing JSON document; see
``docs/scene_format.md`` for the schema. All lengths are meters and all
angles radians.
"""

from __future__ import annotations

import enum
import json
import math
import os
import tempfile
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import SceneParseError, SceneValidationError
from .geom import Pose2, wrap_angle
from .polyops import is_simple_polygon, polygon_contains_origin

__all__ = [
    "WdoKind",
    "WdoDetection",
    "RoomContour",
    "PanoramaRecord",
    "Scene",
    "NoiseSpec",
    "load_scene",
    "save_scene",
    "validate_scene",
]

SCENE_FORMAT = "panoplan-scene"
SCENE_VERSION = 1

_UNIT_TOL = 1e-9


class WdoKind(str, enum.Enum):
    """Kinds of wall features usable as alignment anchors."""

    WINDOW = "window"
    DOOR = "door"
    OPENING = "opening"


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class WdoDetection:
    """A window, door, or opening on a room wall, in the panorama's frame.

    Attributes:
        kind: feature category.
        endpoints: (2, 2) array, one row per endpoint of the wall-plane
            segment at floor height.
        interior_normal: unit vector perpendicular to the segment pointing
            toward the camera side of the wall.
        confidence: detection confidence in [0, 1].
    """

    kind: WdoKind
    endpoints: np.ndarray
    interior_normal: np.ndarray
    confidence: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", WdoKind(self.kind))
        object.__setattr__(self, "endpoints", _frozen(self.endpoints))
        object.__setattr__(self, "interior_normal", _frozen(self.interior_normal))

    @property
    def width(self) -> float:
        return float(np.linalg.norm(self.endpoints[1] - self.endpoints[0]))

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.endpoints[0] + self.endpoints[1])

    def validate(self, where: str = "wdo"):
        if self.endpoints.shape != (2, 2):
            raise SceneValidationError(f"{where}: endpoints must have shape (2, 2)")
        if self.width <= 0.0:
            raise SceneValidationError(f"{where}: zero-width feature")
        n = self.interior_normal
        if abs(float(np.linalg.norm(n)) - 1.0) > _UNIT_TOL:
            raise SceneValidationError(f"{where}: interior normal is not unit length")
        seg = self.endpoints[1] - self.endpoints[0]
        if abs(float(np.dot(seg, n))) / self.width > _UNIT_TOL:
            raise SceneValidationError(f"{where}: interior normal is not perpendicular to the segment")
        if not (0.0 <= self.confidence <= 1.0):
            raise SceneValidationError(f"{where}: confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class RoomContour:
    """Room boundary polygon seen from one camera, with per-vertex confidence."""

    vertices: np.ndarray
    confidence: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vertices", _frozen(self.vertices))
        object.__setattr__(self, "confidence", _frozen(self.confidence))

    @classmethod
    def from_vertices(cls, vertices: np.ndarray, confidence: float | np.ndarray = 1.0) -> "RoomContour":
        v = np.asarray(vertices, dtype=float)
        conf = np.broadcast_to(np.asarray(confidence, dtype=float), (len(v),))
        return cls(v, conf.copy())

    def validate(self, where: str = "contour"):
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2 or len(self.vertices) < 3:
            raise SceneValidationError(f"{where}: needs at least 3 two-dimensional vertices")
        if self.confidence.shape != (len(self.vertices),):
            raise SceneValidationError(f"{where}: confidence length must match vertex count")
        if np.any(self.confidence < 0.0) or np.any(self.confidence > 1.0):
            raise SceneValidationError(f"{where}: confidence values outside [0, 1]")
        if not is_simple_polygon(self.vertices):
            raise SceneValidationError(f"{where}: polygon is self-intersecting")
        if not polygon_contains_origin(self.vertices):
            raise SceneValidationError(f"{where}: polygon does not contain the camera origin")


@dataclass(frozen=True)
class PanoramaRecord:
    """Everything observed from a single panorama."""

    id: int
    contour: RoomContour
    wdos: tuple[WdoDetection, ...]
    vanishing_angle: float
    camera_height: float
    gt_pose: Optional[Pose2] = None

    def __post_init__(self):
        object.__setattr__(self, "wdos", tuple(self.wdos))
        object.__setattr__(self, "vanishing_angle", float(self.vanishing_angle))

    def validate(self):
        where = f"pano {self.id}"
        if self.id < 0:
            raise SceneValidationError(f"{where}: ids must be non-negative")
        self.contour.validate(f"{where} contour")
        for k, w in enumerate(self.wdos):
            w.validate(f"{where} wdo {k}")
        if not (0.0 <= self.vanishing_angle < math.pi / 2.0):
            raise SceneValidationError(
                f"{where}: vanishing angle {self.vanishing_angle} outside [0, pi/2)"
            )
        if self.camera_height <= 0.0:
            raise SceneValidationError(f"{where}: camera height must be positive")


@dataclass(frozen=True)
class Scene:
    """An ordered collection of panorama records plus optional ground truth."""

    panoramas: tuple[PanoramaRecord, ...]
    gt_floorplan: Optional[tuple[np.ndarray, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "panoramas", tuple(self.panoramas))
        if self.gt_floorplan is not None:
            object.__setattr__(self, "gt_floorplan", tuple(_frozen(p) for p in self.gt_floorplan))

    def __len__(self) -> int:
        return len(self.panoramas)

    def pano(self, pano_id: int) -> PanoramaRecord:
        for p in self.panoramas:
            if p.id == pano_id:
                return p
        raise KeyError(f"no panorama with id {pano_id}")

    @property
    def has_gt_poses(self) -> bool:
        return all(p.gt_pose is not None for p in self.panoramas)


def validate_scene(scene: Scene):
    """Check structural invariants, raising SceneValidationError on the first violation."""
    ids = [p.id for p in scene.panoramas]
    if len(set(ids)) != len(ids):
        raise SceneValidationError("panorama ids are not unique")
    for p in scene.panoramas:
        p.validate()
    if scene.gt_floorplan is not None:
        for k, poly in enumerate(scene.gt_floorplan):
            if poly.ndim != 2 or poly.shape[1] != 2 or len(poly) < 3:
                raise SceneValidationError(f"gt_floorplan polygon {k}: needs at least 3 vertices")


@dataclass(frozen=True)
class NoiseSpec:
    """Perturbation magnitudes for degrading an exact scene.

    All draws come from a generator seeded with ``seed`` so a given spec is
    reproducible. Ground-truth fields are never touched.
    """

    sigma_vertex: float = 0.0
    sigma_wdo_endpoint: float = 0.0
    sigma_vanishing: float = 0.0
    p_drop_wdo: float = 0.0
    seed: int = 0


# --- serialization ---------------------------------------------------------


def _pose_to_dict(pose: Optional[Pose2]):
    if pose is None:
        return None
    return {"x": pose.x, "y": pose.y, "theta": pose.theta}


def _pose_from_dict(d) -> Optional[Pose2]:
    if d is None:
        return None
    return Pose2(d["x"], d["y"], d["theta"])


def scene_to_dict(scene: Scene) -> dict:
    return {
        "format": SCENE_FORMAT,
        "version": SCENE_VERSION,
        "units": {"length": "meters", "angle": "radians"},
        "panoramas": [
            {
                "id": p.id,
                "camera_height": p.camera_height,
                "vanishing_angle": p.vanishing_angle,
                "gt_pose": _pose_to_dict(p.gt_pose),
                "contour": {
                    "vertices": p.contour.vertices.tolist(),
                    "confidence": p.contour.confidence.tolist(),
                },
                "wdos": [
                    {
                        "kind": w.kind.value,
                        "endpoints": w.endpoints.tolist(),
                        "interior_normal": w.interior_normal.tolist(),
                        "confidence": w.confidence,
                    }
                    for w in p.wdos
                ],
            }
            for p in scene.panoramas
        ],
        "gt_floorplan": None
        if scene.gt_floorplan is None
        else [poly.tolist() for poly in scene.gt_floorplan],
    }


def scene_from_dict(doc: dict) -> Scene:
    try:
        if doc.get("format") != SCENE_FORMAT:
            raise SceneParseError(f"unrecognized document format {doc.get('format')!r}")
        if doc.get("version") != SCENE_VERSION:
            raise SceneParseError(f"unsupported scene version {doc.get('version')!r}")
        panos = []
        for pd in doc["panoramas"]:
            contour = RoomContour(
                np.asarray(pd["contour"]["vertices"], dtype=float),
                np.asarray(pd["contour"]["confidence"], dtype=float),
            )
            wdos = [
                WdoDetection(
                    kind=WdoKind(wd["kind"]),
                    endpoints=np.asarray(wd["endpoints"], dtype=float),
                    interior_normal=np.asarray(wd["interior_normal"], dtype=float),
                    confidence=float(wd["confidence"]),
                )
                for wd in pd["wdos"]
            ]
            panos.append(
                PanoramaRecord(
                    id=int(pd["id"]),
                    contour=contour,
                    wdos=tuple(wdos),
                    vanishing_angle=float(pd["vanishing_angle"]),
                    camera_height=float(pd["camera_height"]),
                    gt_pose=_pose_from_dict(pd.get("gt_pose")),
                )
            )
        gt_fp = doc.get("gt_floorplan")
        floorplan = None if gt_fp is None else tuple(np.asarray(p, dtype=float) for p in gt_fp)
        return Scene(tuple(panos), floorplan)
    except (KeyError, TypeError, ValueError) as exc:
        raise SceneParseError(f"malformed scene document: {exc}") from exc


def save_scene(scene: Scene, path: str):
    """Write a scene atomically (temp file + rename) as deterministic JSON."""
    doc = scene_to_dict(scene)
    payload = json.dumps(doc, indent=2, sort_keys=True)
    atomic_write_text(path, payload + "\n")


def load_scene(path: str) -> Scene:
    """Parse and validate a scene document.

    Raises:
        SceneParseError: unreadable or structurally malformed JSON, with the
            parser's line/column information when available.
        SceneValidationError: well-formed JSON violating a scene invariant.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SceneParseError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    scene = scene_from_dict(doc)
    validate_scene(scene)
    return scene


def atomic_write_text(path: str, text: str):
    """Write text to ``path`` via a temp file in the same directory plus rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def perturb(scene: Scene, spec: NoiseSpec) -> Scene:
    """Return a noisy copy of ``scene``; structure and ground truth are preserved.

    Contour vertices and feature endpoints get i.i.d. Gaussian offsets,
    vanishing angles get wrapped Gaussian offsets, and each wall feature is
    dropped independently with probability ``p_drop_wdo``. Interior normals
    are recomputed perpendicular to the perturbed segment, oriented toward
    the camera, so detection invariants survive the noise.
    """
    rng = np.random.default_rng(spec.seed)
    panos = []
    for p in scene.panoramas:
        verts = p.contour.vertices + rng.normal(0.0, spec.sigma_vertex, p.contour.vertices.shape) \
            if spec.sigma_vertex > 0 else p.contour.vertices.copy()
        contour = RoomContour(verts, p.contour.confidence.copy())

        wdos = []
        for w in p.wdos:
            if spec.p_drop_wdo > 0 and rng.random() < spec.p_drop_wdo:
                continue
            endpoints = w.endpoints + rng.normal(0.0, spec.sigma_wdo_endpoint, (2, 2)) \
                if spec.sigma_wdo_endpoint > 0 else w.endpoints.copy()
            seg = endpoints[1] - endpoints[0]
            normal = np.array([-seg[1], seg[0]]) / max(np.linalg.norm(seg), 1e-12)
            mid = 0.5 * (endpoints[0] + endpoints[1])
            if float(np.dot(normal, -mid)) < 0.0:
                normal = -normal
            wdos.append(WdoDetection(w.kind, endpoints, normal, w.confidence))

        vanishing = p.vanishing_angle
        if spec.sigma_vanishing > 0:
            vanishing = float(np.mod(vanishing + rng.normal(0.0, spec.sigma_vanishing), math.pi / 2.0))

        panos.append(
            replace(p, contour=contour, wdos=tuple(wdos), vanishing_angle=vanishing)
        )
    return Scene(tuple(panos), scene.gt_floorplan)
