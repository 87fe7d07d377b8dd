"""Alignment verification: decide which hypotheses become pose-graph edges.

Two interchangeable verifiers share one contract (hypothesis in, scored
decision out):

* the oracle verifier compares a hypothesis against ground-truth relative
  poses with the standard acceptance tolerances (rotation within 7 degrees
  for doors and windows, 9 for openings; translation within 0.35 of the
  camera height in the L-infinity sense) and emits a 0/1 score;
* the cross-correlation verifier renders both panoramas to bird's-eye-view
  grids and scores appearance agreement over jointly reliable cells, with
  no access to ground truth.

A decision's ``accept`` flag is always ``score >= config.accept_threshold``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .bev import BevConfig, BevGrid, densify, paired_values, render_bev
from .errors import MissingGroundTruthError
from .geom import Pose2, between, wrap_angle
from .hypotheses import AlignmentHypothesis, HypothesisSet
from .scene import Scene, WdoKind

__all__ = [
    "VerifierConfig",
    "VerifierDecision",
    "oracle_verify",
    "xcorr_verify",
    "OracleVerifier",
    "XcorrVerifier",
    "verify_all",
]

caller = Callable[[AlignmentHypothesis], "VerifierDecision"]


@dataclass(frozen=True)
class VerifierConfig:
    """Acceptance thresholds for alignment verification.

    ``accept_threshold`` is the operating point on the verifier score; 0.93
    suits the binary oracle. Cross-correlation scores live on a softer
    scale, so pipelines using that verifier pass a lower threshold
    (0.8 by default there).
    """

    accept_threshold: float = 0.93
    rot_tol_door_deg: float = 7.0
    rot_tol_window_deg: float = 7.0
    rot_tol_opening_deg: float = 9.0
    trans_tol: float = 0.35  # L-infinity, in units of camera height
    min_joint_cells: int = 8


@dataclass(frozen=True)
class VerifierDecision:
    """Outcome of verifying one hypothesis."""

    score: float
    accept: bool
    source: str

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"verifier score {self.score} outside [0, 1]")


def _rot_tolerance(kind: WdoKind, config: VerifierConfig) -> float:
    if kind is WdoKind.OPENING:
        return config.rot_tol_opening_deg
    if kind is WdoKind.WINDOW:
        return config.rot_tol_window_deg
    return config.rot_tol_door_deg


def oracle_verify(
    h: AlignmentHypothesis,
    gt_i: Pose2,
    gt_j: Pose2,
    config: VerifierConfig = VerifierConfig(),
    camera_height: float = 1.0,
) -> VerifierDecision:
    """Score a hypothesis against the ground-truth relative pose.

    Rotation deviation must stay strictly below the per-kind tolerance and
    the translation deviation strictly below ``trans_tol`` in units of
    ``camera_height`` (L-infinity over x and y).
    """
    if gt_i is None or gt_j is None:
        raise MissingGroundTruthError("oracle verification needs ground-truth poses for both panoramas")
    gt = between(gt_i, gt_j)
    rot_err_deg = abs(math.degrees(wrap_angle(h.i_T_j.theta - gt.theta)))
    trans_err = max(abs(h.i_T_j.x - gt.x), abs(h.i_T_j.y - gt.y)) / camera_height
    good = rot_err_deg < _rot_tolerance(h.kind, config) and trans_err < config.trans_tol
    score = 1.0 if good else 0.0
    return VerifierDecision(score, score >= config.accept_threshold, "oracle")


def _zncc(a: np.ndarray, b: np.ndarray, min_cells: int) -> float:
    """Zero-mean normalized cross-correlation, clipped to [0, 1]."""
    if len(a) < min_cells:
        return 0.0
    va = a - a.mean()
    vb = b - b.mean()
    denom = math.sqrt(float(np.dot(va, va)) * float(np.dot(vb, vb)))
    if denom < 1e-12:
        return 0.0
    return float(np.clip(float(np.dot(va, vb)) / denom, 0.0, 1.0))


def xcorr_verify(
    h: AlignmentHypothesis,
    bev_i: tuple[BevGrid, BevGrid],
    bev_j: tuple[BevGrid, BevGrid],
    config: VerifierConfig = VerifierConfig(accept_threshold=0.8),
) -> VerifierDecision:
    """Score a hypothesis by appearance agreement of aligned renders.

    ``bev_i`` and ``bev_j`` hold the densified (floor, ceiling) grids of the
    two panoramas. The score is the normalized cross-correlation over
    jointly reliable cells, averaged over the two surfaces; surfaces with
    no joint support contribute zero, and a hypothesis with no overlap at
    all scores 0.
    """
    scores = []
    for ga, gb in zip(bev_i, bev_j):
        va, vb = paired_values(ga, gb, h.i_T_j)
        scores.append(_zncc(va, vb, config.min_joint_cells))
    score = float(np.mean(scores)) if scores else 0.0
    return VerifierDecision(score, score >= config.accept_threshold, "xcorr")


class OracleVerifier:
    """Callable oracle verifier bound to a scene with ground-truth poses."""

    def __init__(self, scene: Scene, config: VerifierConfig = VerifierConfig()):
        if not scene.has_gt_poses:
            raise MissingGroundTruthError("scene lacks ground-truth poses; oracle verifier unavailable")
        self._poses = {p.id: p.gt_pose for p in scene.panoramas}
        self._heights = {p.id: p.camera_height for p in scene.panoramas}
        self.config = config

    def __call__(self, h: AlignmentHypothesis) -> VerifierDecision:
        return oracle_verify(
            h, self._poses[h.pano_i], self._poses[h.pano_j],
            self.config, camera_height=self._heights[h.pano_i],
        )


class XcorrVerifier:
    """Callable cross-correlation verifier with cached per-pano renders."""

    def __init__(
        self,
        scene: Scene,
        floor_texture,
        ceiling_texture,
        config: VerifierConfig = VerifierConfig(accept_threshold=0.8),
        bev_config: BevConfig = BevConfig(),
    ):
        self.scene = scene
        self.config = config
        self.bev_config = bev_config
        self._floor_texture = floor_texture
        self._ceiling_texture = ceiling_texture
        self._cache: dict[int, tuple[BevGrid, BevGrid]] = {}

    def grids(self, pano_id: int) -> tuple[BevGrid, BevGrid]:
        if pano_id not in self._cache:
            pano = self.scene.pano(pano_id)
            dense = []
            for surface, tex in (("floor", self._floor_texture), ("ceiling", self._ceiling_texture)):
                sparse = render_bev(pano, surface, tex, self.bev_config)
                g, _ = densify(sparse, self.bev_config.reliability_kernel)
                dense.append(g)
            self._cache[pano_id] = tuple(dense)
        return self._cache[pano_id]

    def __call__(self, h: AlignmentHypothesis) -> VerifierDecision:
        return xcorr_verify(h, self.grids(h.pano_i), self.grids(h.pano_j), self.config)


def verify_all(
    hypothesis_sets: Iterable[HypothesisSet],
    verifier: caller,
) -> list[tuple[AlignmentHypothesis, VerifierDecision]]:
    """Run a verifier over every hypothesis, keeping accepted ones.

    Sets are processed in the given order and hypotheses in generation
    order, so the output order is deterministic.
    """
    accepted = []
    for hset in hypothesis_sets:
        for h in hset.hypotheses:
            decision = verifier(h)
            if decision.accept:
                accepted.append((h, decision))
    return accepted
