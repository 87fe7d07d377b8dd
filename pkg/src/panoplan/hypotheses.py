"""Pairwise alignment hypotheses from shared wall features.

Two panoramas that see the same window, door, or opening can be aligned by
registering the two detections of that feature. Each same-kind detection
pair whose widths are compatible yields up to two candidate relative poses:
one per way of pairing the segment endpoints (the two differ by a 180-degree
rotation about the feature). For windows the camera must sit on a consistent
side of the wall, which disambiguates the pairing; doors and openings keep
both branches.

A hypothesis stores ``i_T_j``: the pose of panorama ``j``'s frame expressed
in panorama ``i``'s frame.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .geom import Pose2, fit_rigid, wrap_angle
from .scene import PanoramaRecord, WdoKind

__all__ = [
    "PairingMode",
    "AlignmentHypothesis",
    "HypothesisSet",
    "generate_hypotheses",
    "axis_align",
    "DEFAULT_WIDTH_RATIO_BOUNDS",
]

DEFAULT_WIDTH_RATIO_BOUNDS = (0.65, 1.0)
_DEDUP_TOL = 1e-6
DEFAULT_MAX_CORRECTION = math.radians(15.0)


class PairingMode(enum.Enum):
    """How the two feature segments' endpoints were matched."""

    IDENTITY = "identity"  # first endpoint to first endpoint
    ROTATED = "rotated"  # first endpoint to second endpoint (180-degree flip)


@dataclass(frozen=True)
class AlignmentHypothesis:
    """One candidate relative pose between a panorama pair.

    Attributes:
        pano_i: reference panorama id.
        pano_j: panorama id being placed into ``pano_i``'s frame.
        wdo_i: index of the anchoring detection on panorama ``i``.
        wdo_j: index of the anchoring detection on panorama ``j``.
        kind: feature kind shared by both detections.
        mode: endpoint pairing that produced the pose.
        i_T_j: pose of panorama ``j`` in panorama ``i``'s frame.
        axis_aligned: True once the rotation has been snapped via vanishing
            angles.
    """

    pano_i: int
    pano_j: int
    wdo_i: int
    wdo_j: int
    kind: WdoKind
    mode: PairingMode
    i_T_j: Pose2
    axis_aligned: bool = False


@dataclass(frozen=True)
class HypothesisSet:
    """All deduplicated hypotheses for one ordered panorama pair."""

    pano_i: int
    pano_j: int
    hypotheses: tuple[AlignmentHypothesis, ...]

    def __len__(self) -> int:
        return len(self.hypotheses)


def _pose_close(a: Pose2, b: Pose2, tol: float) -> bool:
    return (
        abs(a.x - b.x) <= tol
        and abs(a.y - b.y) <= tol
        and abs(wrap_angle(a.theta - b.theta)) <= tol
    )


def _segment_angle(endpoints: np.ndarray) -> float:
    d = endpoints[1] - endpoints[0]
    return math.atan2(d[1], d[0])


def generate_hypotheses(
    a: PanoramaRecord,
    b: PanoramaRecord,
    width_ratio_bounds: tuple[float, float] = DEFAULT_WIDTH_RATIO_BOUNDS,
) -> HypothesisSet:
    """Enumerate candidate relative poses ``a_T_b`` for a panorama pair.

    Detection pairs are pruned when the ratio of the smaller to the larger
    width falls outside ``width_ratio_bounds`` (a closed interval). Window
    pairs keep only the endpoint pairing under which the two interior
    normals point in opposite directions once mapped into the same frame;
    that is the configuration placing the cameras on opposite sides of the
    shared window plane. Candidates whose pose duplicates an earlier one
    within 1e-6 are dropped (first occurrence wins).
    """
    lo, hi = width_ratio_bounds
    out: list[AlignmentHypothesis] = []
    for ia, wa in enumerate(a.wdos):
        for ib, wb in enumerate(b.wdos):
            if wa.kind is not wb.kind:
                continue
            wmin, wmax = sorted((wa.width, wb.width))
            if wmax <= 0.0 or not (lo <= wmin / wmax <= hi):
                continue
            ang_a = _segment_angle(wa.endpoints)
            ang_b = _segment_angle(wb.endpoints)
            for mode in (PairingMode.IDENTITY, PairingMode.ROTATED):
                theta = ang_a - ang_b if mode is PairingMode.IDENTITY else ang_a - ang_b + math.pi
                rot = Pose2(0.0, 0.0, theta)
                t = wa.midpoint - rot.rotate_only(wb.midpoint)
                pose = Pose2(t[0], t[1], theta)
                if wa.kind is WdoKind.WINDOW:
                    if float(np.dot(pose.rotate_only(wb.interior_normal), wa.interior_normal)) >= 0.0:
                        continue
                if any(_pose_close(pose, h.i_T_j, _DEDUP_TOL) for h in out):
                    continue
                out.append(
                    AlignmentHypothesis(
                        pano_i=a.id,
                        pano_j=b.id,
                        wdo_i=ia,
                        wdo_j=ib,
                        kind=wa.kind,
                        mode=mode,
                        i_T_j=pose,
                    )
                )
    return HypothesisSet(a.id, b.id, tuple(out))


def _wrap_quarter(angle: float) -> float:
    """Reduce an angle modulo 90 degrees to the representative in (-45, 45]."""
    quarter = math.pi / 2.0
    return quarter / 2.0 - ((quarter / 2.0 - angle) % quarter)


def axis_align(
    h: AlignmentHypothesis,
    a: PanoramaRecord,
    b: PanoramaRecord,
    max_correction: float = DEFAULT_MAX_CORRECTION,
) -> AlignmentHypothesis:
    """Snap a hypothesis rotation using the panoramas' vanishing angles.

    Vanishing angles observe each camera's heading relative to the shared
    dominant wall directions, modulo 90 degrees. The difference between the
    two observations predicts the relative rotation modulo 90 degrees;
    the deviation of the hypothesis from that prediction, reduced to
    (-45, 45] degrees, is the correction. Corrections larger than
    ``max_correction`` are distrusted and leave the hypothesis untouched.

    The correction rotates panorama ``b``'s room vertices (expressed in
    ``a``'s frame) about the matched feature midpoint, then re-fits the
    relative pose to the rotated vertices by rigid least squares, so the
    matched midpoint stays fixed.
    """
    predicted = b.vanishing_angle - a.vanishing_angle
    correction = _wrap_quarter(predicted - h.i_T_j.theta)
    if abs(correction) > max_correction:
        return h

    mid = a.wdos[h.wdo_i].midpoint
    src = b.contour.vertices
    placed = h.i_T_j.apply(src)
    rot = Pose2(0.0, 0.0, correction)
    corrected = rot.apply(placed - mid) + mid
    refit = fit_rigid(src, corrected)
    return replace(h, i_T_j=refit, axis_aligned=True)
