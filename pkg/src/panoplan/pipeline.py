"""End-to-end reconstruction: scene in, posed panoramas and floorplan out.

The stages mirror the library modules: pairwise hypothesis generation,
verification, optional vanishing-angle alignment of the accepted edges,
pose-graph aggregation over the largest connected component, room grouping,
contour fusion, and raster stitching.  A run manifest captures the config
hash, per-stage timings, and status flags so runs are comparable.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .errors import ConfigError
from .floorplan import (
    DEFAULT_CELL_SIZE,
    DEFAULT_GROUPING_IOU,
    FloorplanRaster,
    RoomGroup,
    _empty_raster,
    fuse_groups,
    raster_to_image,
    stitch,
    write_floorplan_svg,
)
from .geom import Pose2
from .hypotheses import DEFAULT_WIDTH_RATIO_BOUNDS, axis_align, generate_hypotheses
from .posegraph import (
    DEFAULT_EDGE_SIGMA,
    PoseGraph,
    PoseGraphEdge,
    RobustConfig,
    build_graph,
    connected_components,
    optimize,
    robust_edge_cost,
    spanning_tree_init,
    write_graph,
)
from .scene import Scene, atomic_write_text
from .textures import value_noise
from .verify import OracleVerifier, VerifierConfig, XcorrVerifier, verify_all

MANIFEST_FORMAT = "panoplan-manifest"
POSES_FORMAT = "panoplan-poses"
ROOMS_FORMAT = "panoplan-rooms"
CONFIG_FORMAT = "panoplan-config"
FORMAT_VERSION = 1

VERIFIER_KINDS = ("oracle", "xcorr")
AGGREGATION_MODES = ("spanning_tree", "pgo")


@dataclass
class PipelineConfig:
    """Reconstruction knobs, serializable to a versioned JSON config file."""

    verifier: str = "oracle"
    accept_threshold: Optional[float] = None  # None: verifier-specific default
    axis_align: bool = True
    width_ratio_bounds: tuple[float, float] = DEFAULT_WIDTH_RATIO_BOUNDS
    max_axis_correction_deg: float = 15.0
    aggregation: str = "pgo"
    huber_delta: Optional[float] = 1.345
    max_iterations: int = 100
    edge_sigma: tuple[float, float, float] = DEFAULT_EDGE_SIGMA
    grouping_iou: float = DEFAULT_GROUPING_IOU
    cell_size: float = DEFAULT_CELL_SIZE
    texture_seed: int = 0

    def validate(self) -> None:
        if self.verifier not in VERIFIER_KINDS:
            raise ConfigError(f"unknown verifier {self.verifier!r}; choose from {VERIFIER_KINDS}")
        if self.aggregation not in AGGREGATION_MODES:
            raise ConfigError(
                f"unknown aggregation {self.aggregation!r}; choose from {AGGREGATION_MODES}"
            )
        lo, hi = self.width_ratio_bounds
        if not (0.0 < lo <= hi <= 1.0):
            raise ConfigError(f"width ratio bounds {self.width_ratio_bounds} not in (0, 1]")
        # Thresholds above 1 are allowed: scores cap at 1, so they reject
        # every hypothesis, which is a useful ablation setting.
        if self.accept_threshold is not None and self.accept_threshold < 0.0:
            raise ConfigError(f"accept threshold {self.accept_threshold} must be >= 0")
        if self.cell_size <= 0 or self.grouping_iou < 0 or self.max_iterations < 1:
            raise ConfigError("cell_size, grouping_iou, and max_iterations must be positive")
        if len(self.edge_sigma) != 3 or any(s <= 0 for s in self.edge_sigma):
            raise ConfigError(f"edge sigma {self.edge_sigma} must be three positive values")

    def verifier_config(self) -> VerifierConfig:
        if self.accept_threshold is not None:
            return VerifierConfig(accept_threshold=self.accept_threshold)
        if self.verifier == "xcorr":
            return VerifierConfig(accept_threshold=0.8)
        return VerifierConfig()

    def robust_config(self) -> RobustConfig:
        return RobustConfig(huber_delta=self.huber_delta, max_iterations=self.max_iterations)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["width_ratio_bounds"] = list(self.width_ratio_bounds)
        d["edge_sigma"] = list(self.edge_sigma)
        return d

    @staticmethod
    def from_dict(d: dict) -> "PipelineConfig":
        known = {f for f in PipelineConfig.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(d)
        if "width_ratio_bounds" in kwargs:
            kwargs["width_ratio_bounds"] = tuple(kwargs["width_ratio_bounds"])
        if "edge_sigma" in kwargs:
            kwargs["edge_sigma"] = tuple(kwargs["edge_sigma"])
        cfg = PipelineConfig(**kwargs)
        cfg.validate()
        return cfg

    def sha256(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode()
        ).hexdigest()


def load_pipeline_config(path: str, overrides: Optional[dict] = None) -> PipelineConfig:
    """Read a versioned JSON config file, applying override key/values."""
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    if doc.get("format") != CONFIG_FORMAT:
        raise ConfigError(f"{path}: expected format {CONFIG_FORMAT!r}, got {doc.get('format')!r}")
    if doc.get("version") != FORMAT_VERSION:
        raise ConfigError(f"{path}: unsupported config version {doc.get('version')!r}")
    fields = {k: v for k, v in doc.items() if k not in ("format", "version")}
    fields.update(overrides or {})
    return PipelineConfig.from_dict(fields)


def save_pipeline_config(config: PipelineConfig, path: str) -> None:
    doc = {"format": CONFIG_FORMAT, "version": FORMAT_VERSION}
    doc.update(config.to_dict())
    atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


@dataclass
class ReconstructionResult:
    poses: dict[int, Pose2]
    graph: PoseGraph
    components: list[list[int]]
    groups: list[RoomGroup]
    raster: FloorplanRaster
    manifest: dict = field(repr=False)

    @property
    def empty(self) -> bool:
        return self.manifest["status"]["empty_reconstruction"]


class _StageClock:
    def __init__(self):
        self.stages: dict[str, dict] = {}
        self._t0 = 0.0
        self._name = ""

    def start(self, name: str) -> None:
        self._name = name
        self._t0 = time.perf_counter()

    def stop(self, **counts) -> None:
        entry = {"seconds": round(time.perf_counter() - self._t0, 6)}
        entry.update(counts)
        self.stages[self._name] = entry


def reconstruct(scene: Scene, config: PipelineConfig = PipelineConfig()) -> ReconstructionResult:
    """Run the full pipeline on a scene and return poses plus floorplan.

    The returned poses cover the largest connected component of the
    verified graph, expressed in the frame of its smallest pano id.  A
    component smaller than two panos yields an empty floorplan and the
    ``empty_reconstruction`` status flag rather than an error.
    """
    config.validate()
    clock = _StageClock()
    panos = sorted(scene.panoramas, key=lambda p: p.id)

    clock.start("hypotheses")
    hyp_sets = []
    for ai in range(len(panos)):
        for bi in range(ai + 1, len(panos)):
            hyp_sets.append(
                generate_hypotheses(panos[ai], panos[bi], config.width_ratio_bounds)
            )
    n_hyps = sum(len(s) for s in hyp_sets)
    clock.stop(count=n_hyps, pairs=len(hyp_sets))

    clock.start("verify")
    if config.verifier == "oracle":
        verifier = OracleVerifier(scene, config.verifier_config())
    else:
        verifier = XcorrVerifier(
            scene,
            floor_texture=value_noise(scale=0.7, seed=config.texture_seed),
            ceiling_texture=value_noise(scale=0.9, seed=config.texture_seed + 1),
            config=config.verifier_config(),
        )
    accepted = verify_all(hyp_sets, verifier)
    clock.stop(count=len(accepted))

    clock.start("axis_align")
    max_corr = math.radians(config.max_axis_correction_deg)
    edges = []
    by_id = {p.id: p for p in panos}
    n_corrected = 0
    for h, decision in accepted:
        if config.axis_align:
            aligned = axis_align(h, by_id[h.pano_i], by_id[h.pano_j], max_corr)
            n_corrected += aligned.axis_aligned
            h = aligned
        edges.append(
            PoseGraphEdge(h.pano_i, h.pano_j, h.i_T_j, sigma=config.edge_sigma,
                          score=decision.score)
        )
    clock.stop(count=n_corrected if config.axis_align else 0)

    clock.start("aggregate")
    graph = build_graph(edges)
    components = connected_components(graph) if edges else []
    status = {"empty_reconstruction": False, "solver_converged": None}
    costs: dict[str, Optional[float]] = {"init": None, "final": None}
    poses: dict[int, Pose2] = {}
    if components and len(components[0]) >= 2:
        largest = components[0]
        init = spanning_tree_init(graph, largest)
        robust = config.robust_config()
        costs["init"] = robust_edge_cost(graph, init, robust)
        if config.aggregation == "pgo":
            result = optimize(graph, init, robust)
            poses = result.poses
            status["solver_converged"] = result.converged
            costs["final"] = robust_edge_cost(graph, poses, robust)
        else:
            poses = init
            costs["final"] = costs["init"]
    else:
        status["empty_reconstruction"] = True
    clock.stop(nodes=len(poses), edges=len(graph.edges) if edges else 0)

    clock.start("stitch")
    if poses:
        contours = {k: by_id[k].contour.vertices for k in poses}
        confidences = {k: by_id[k].contour.confidence for k in poses}
        groups = fuse_groups(poses, contours, confidences, config.grouping_iou)
        raster = stitch(groups, config.cell_size)
    else:
        groups = []
        raster = _empty_raster(config.cell_size)
    clock.stop(groups=len(groups))

    manifest = {
        "format": MANIFEST_FORMAT,
        "version": FORMAT_VERSION,
        "config": config.to_dict(),
        "config_sha256": config.sha256(),
        "n_panos": len(panos),
        "n_localized": len(poses),
        "components": [list(c) for c in components],
        "costs": costs,
        "stages": clock.stages,
        "status": status,
    }
    return ReconstructionResult(
        poses=poses,
        graph=graph,
        components=components,
        groups=groups,
        raster=raster,
        manifest=manifest,
    )


def _poses_doc(poses: dict[int, Pose2]) -> dict:
    return {
        "format": POSES_FORMAT,
        "version": FORMAT_VERSION,
        "poses": {
            str(k): {"x": p.x, "y": p.y, "theta": p.theta} for k, p in sorted(poses.items())
        },
    }


def poses_from_doc(doc: dict) -> dict[int, Pose2]:
    if doc.get("format") != POSES_FORMAT:
        raise ConfigError(f"expected format {POSES_FORMAT!r}, got {doc.get('format')!r}")
    return {
        int(k): Pose2(v["x"], v["y"], v["theta"]) for k, v in doc.get("poses", {}).items()
    }


def _rooms_doc(groups: list[RoomGroup]) -> dict:
    rooms = []
    for g in groups:
        contour = [] if g.contour is None else np.asarray(g.contour, dtype=float).tolist()
        rooms.append({"members": list(g.members), "contour": contour})
    return {"format": ROOMS_FORMAT, "version": FORMAT_VERSION, "rooms": rooms}


def rooms_from_doc(doc: dict) -> list[RoomGroup]:
    if doc.get("format") != ROOMS_FORMAT:
        raise ConfigError(f"expected format {ROOMS_FORMAT!r}, got {doc.get('format')!r}")
    return [
        RoomGroup(
            members=tuple(r["members"]),
            contour=np.array(r["contour"], dtype=float) if r["contour"] else None,
        )
        for r in doc.get("rooms", [])
    ]


def write_reconstruction(result: ReconstructionResult, scene: Scene, out_dir: str) -> None:
    """Write poses, graph, rooms, floorplan images, and the manifest."""
    os.makedirs(out_dir, exist_ok=True)
    atomic_write_text(
        os.path.join(out_dir, "poses.json"),
        json.dumps(_poses_doc(result.poses), indent=2, sort_keys=True) + "\n",
    )
    write_graph(os.path.join(out_dir, "graph.txt"), result.graph, result.poses or None)
    atomic_write_text(
        os.path.join(out_dir, "rooms.json"),
        json.dumps(_rooms_doc(result.groups), indent=2, sort_keys=True) + "\n",
    )
    raster_to_image(result.raster).save(os.path.join(out_dir, "floorplan.png"))

    by_id = {p.id: p for p in scene.panoramas}
    segments: dict[str, list[np.ndarray]] = {}
    cameras = []
    for k, pose in sorted(result.poses.items()):
        cameras.append([pose.x, pose.y])
        for w in by_id[k].wdos:
            segments.setdefault(w.kind.value, []).append(pose.apply(w.endpoints))
    write_floorplan_svg(
        os.path.join(out_dir, "floorplan.svg"),
        [g.contour for g in result.groups if g.contour is not None],
        segments,
        np.array(cameras) if cameras else None,
    )
    atomic_write_text(
        os.path.join(out_dir, "manifest.json"),
        json.dumps(result.manifest, indent=2, sort_keys=True) + "\n",
    )


def read_reconstruction(out_dir: str) -> tuple[dict[int, Pose2], list[RoomGroup], dict]:
    """Load the artifacts written by :func:`write_reconstruction`."""
    with open(os.path.join(out_dir, "poses.json"), encoding="utf-8") as f:
        poses = poses_from_doc(json.load(f))
    with open(os.path.join(out_dir, "rooms.json"), encoding="utf-8") as f:
        groups = rooms_from_doc(json.load(f))
    with open(os.path.join(out_dir, "manifest.json"), encoding="utf-8") as f:
        manifest = json.load(f)
    if manifest.get("format") != MANIFEST_FORMAT:
        raise ConfigError(f"unexpected manifest format {manifest.get('format')!r}")
    return poses, groups, manifest
