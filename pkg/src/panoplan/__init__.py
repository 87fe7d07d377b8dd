"""panoplan: floorplan reconstruction from sparse indoor panoramas.

The pipeline aligns panoramas pairwise through shared wall features
(windows, doors, openings), verifies candidate alignments, fuses the
survivors in a robust pose graph, and stitches the per-panorama room
layouts into a global floorplan raster.
"""

from .geom import Pose2, Sim2, Twist2, between, compose, exp, fit_sim2, log, wrap_angle
from .scene import (
    NoiseSpec,
    PanoramaRecord,
    RoomContour,
    Scene,
    WdoDetection,
    WdoKind,
    load_scene,
    perturb,
    save_scene,
)
from .synth import HomeConfig, generate_synthetic_home
from .evaluation import EvalReport, align_ransac, evaluate_reconstruction
from .floorplan import FloorplanRaster, RoomGroup, floorplan_iou, fuse_groups, stitch
from .pipeline import PipelineConfig, ReconstructionResult, reconstruct

__version__ = "0.1.0"

__all__ = [
    "Pose2",
    "Twist2",
    "Sim2",
    "compose",
    "between",
    "exp",
    "log",
    "fit_sim2",
    "wrap_angle",
    "WdoKind",
    "WdoDetection",
    "RoomContour",
    "PanoramaRecord",
    "Scene",
    "NoiseSpec",
    "load_scene",
    "save_scene",
    "perturb",
    "HomeConfig",
    "generate_synthetic_home",
    "RoomGroup",
    "FloorplanRaster",
    "fuse_groups",
    "stitch",
    "floorplan_iou",
    "EvalReport",
    "align_ransac",
    "evaluate_reconstruction",
    "PipelineConfig",
    "ReconstructionResult",
    "reconstruct",
]
