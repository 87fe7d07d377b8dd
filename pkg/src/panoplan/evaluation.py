"""Evaluation of reconstructed pose graphs and floorplans.

Estimated poses live in an arbitrary gauge, so they are first aligned to
ground truth with a RANSAC-robust Sim(2) fit on positions; errors, the
localization percentage, and connected-component coverage are reported
against the aligned frame.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import DegenerateInputError
from .floorplan import floorplan_iou, rasterize_rooms
from .geom import Pose2, Sim2, fit_sim2, wrap_angle

DEFAULT_INLIER_THRESHOLD = 0.2
DEFAULT_N_HYPOTHESES = 1000
DEFAULT_SUBSET_FRAC = 2.0 / 3.0


def align_ransac(
    est: Mapping[int, Pose2],
    gt: Mapping[int, Pose2],
    n_hyps: int = DEFAULT_N_HYPOTHESES,
    subset_frac: float = DEFAULT_SUBSET_FRAC,
    inlier_threshold: float = DEFAULT_INLIER_THRESHOLD,
    seed: int = 0,
) -> Sim2:
    """Robust Sim(2) aligning estimated positions onto ground truth.

    Each hypothesis fits on a random subset of ceil(subset_frac * M) matched
    position pairs and is scored by the number of poses whose transformed
    position lands within ``inlier_threshold`` meters of ground truth.  The
    winner (ties to the earliest hypothesis) is refit on its inlier set,
    iterating refit and reclassification to a fixpoint.
    """
    ids = sorted(est)
    missing = [k for k in ids if k not in gt]
    if missing:
        raise KeyError(f"estimated poses {missing} have no ground-truth counterpart")
    m = len(ids)
    if m < 2:
        raise DegenerateInputError(f"need at least 2 matched poses to align, got {m}")

    src = np.array([[est[k].x, est[k].y] for k in ids])
    dst = np.array([[gt[k].x, gt[k].y] for k in ids])
    subset = max(2, math.ceil(subset_frac * m))
    rng = np.random.default_rng(seed)

    best_inliers: Optional[np.ndarray] = None
    best_count = -1
    for _ in range(n_hyps):
        pick = rng.choice(m, size=subset, replace=False)
        try:
            s = fit_sim2(src[pick], dst[pick])
        except DegenerateInputError:
            continue
        resid = np.linalg.norm(s.apply(src) - dst, axis=1)
        inliers = resid < inlier_threshold
        count = int(np.count_nonzero(inliers))
        if count > best_count:
            best_count = count
            best_inliers = inliers
    if best_inliers is None or best_count < 2:
        raise DegenerateInputError("no RANSAC hypothesis produced a valid fit")

    inliers = best_inliers
    s = fit_sim2(src[inliers], dst[inliers])
    for _ in range(10):
        resid = np.linalg.norm(s.apply(src) - dst, axis=1)
        refreshed = resid < inlier_threshold
        if np.array_equal(refreshed, inliers):
            break
        if np.count_nonzero(refreshed) < 2:
            break
        inliers = refreshed
        s = fit_sim2(src[inliers], dst[inliers])
    return s


@dataclass(frozen=True)
class ErrorStats:
    mean: float
    median: float
    per_pano: np.ndarray = field(repr=False)


def pose_errors(
    est: Mapping[int, Pose2], gt: Mapping[int, Pose2], transform: Sim2
) -> tuple[ErrorStats, ErrorStats]:
    """Rotation (degrees) and translation (meters) errors after alignment.

    Translation error is the L2 distance between the Sim(2)-transformed
    estimated position and ground truth; rotation error is the wrapped
    absolute heading difference.
    """
    ids = sorted(est)
    if not ids:
        raise DegenerateInputError("no poses to evaluate")
    rot = np.empty(len(ids))
    trans = np.empty(len(ids))
    for row, k in enumerate(ids):
        aligned = transform.apply_pose(est[k])
        rot[row] = abs(math.degrees(wrap_angle(aligned.theta - gt[k].theta)))
        trans[row] = math.hypot(aligned.x - gt[k].x, aligned.y - gt[k].y)
    return (
        ErrorStats(float(rot.mean()), float(np.median(rot)), rot),
        ErrorStats(float(trans.mean()), float(np.median(trans)), trans),
    )


def localization_pct(largest_cc_size: int, total_panos: int) -> float:
    """Percentage of panoramas captured by the largest connected component."""
    if total_panos <= 0:
        raise DegenerateInputError("total_panos must be positive")
    return 100.0 * largest_cc_size / total_panos


def cc_distribution(
    components: Sequence[Sequence[int]], total_panos: int
) -> tuple[np.ndarray, np.ndarray]:
    """Fraction of panoramas per component rank, plus the cumulative sum.

    ``components`` must already be sorted by size descending (the order
    :func:`panoplan.posegraph.connected_components` returns).
    """
    if total_panos <= 0:
        raise DegenerateInputError("total_panos must be positive")
    sizes = np.array([len(c) for c in components], dtype=float)
    if np.any(np.diff(sizes) > 0):
        raise ValueError("components must be sorted by size descending")
    pdf = sizes / total_panos
    return pdf, np.cumsum(pdf)


@dataclass
class EvalReport:
    """Error statistics are ``None`` when nothing could be aligned."""

    localization_pct: float
    rotation_mean_deg: Optional[float]
    rotation_median_deg: Optional[float]
    translation_mean_m: Optional[float]
    translation_median_m: Optional[float]
    floorplan_iou: Optional[float]
    cc_pdf: tuple[float, ...]
    cc_cdf: tuple[float, ...]
    n_panos: int
    n_localized: int

    def to_dict(self) -> dict:
        return {
            "n_panos": self.n_panos,
            "n_localized": self.n_localized,
            "localization_pct": self.localization_pct,
            "rotation_error_deg": {
                "mean": self.rotation_mean_deg,
                "median": self.rotation_median_deg,
            },
            "translation_error_m": {
                "mean": self.translation_mean_m,
                "median": self.translation_median_m,
            },
            "floorplan_iou": self.floorplan_iou,
            "cc_pdf": list(self.cc_pdf),
            "cc_cdf": list(self.cc_cdf),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        def fmt(value: Optional[float], unit: str) -> str:
            return "n/a" if value is None else f"{value:.4f} {unit}"

        lines = [
            "reconstruction evaluation",
            f"  panoramas:         {self.n_panos}",
            f"  localized:         {self.n_localized} ({self.localization_pct:.1f}%)",
            f"  rotation error:    mean {fmt(self.rotation_mean_deg, 'deg')}, "
            f"median {fmt(self.rotation_median_deg, 'deg')}",
            f"  translation error: mean {fmt(self.translation_mean_m, 'm')}, "
            f"median {fmt(self.translation_median_m, 'm')}",
        ]
        if self.floorplan_iou is not None:
            lines.append(f"  floorplan IoU:     {self.floorplan_iou:.4f}")
        ranks = ", ".join(f"{v:.3f}" for v in self.cc_cdf)
        lines.append(f"  CC coverage CDF:   [{ranks}]")
        return "\n".join(lines) + "\n"


def evaluate_reconstruction(
    est_poses: Mapping[int, Pose2],
    gt_poses: Mapping[int, Pose2],
    total_panos: int,
    components: Optional[Sequence[Sequence[int]]] = None,
    est_rooms: Optional[Sequence[np.ndarray]] = None,
    gt_rooms: Optional[Sequence[np.ndarray]] = None,
    cell_size: float = 0.1,
    ransac_seed: int = 0,
) -> EvalReport:
    """Bundle alignment, error statistics, coverage, and IoU into a report.

    Only the estimated (localized) poses enter alignment and error
    statistics; ``total_panos`` sets the denominator of the localization
    percentage.  ``est_rooms`` are fused room polygons in the estimate's
    gauge; they are carried through the fitted Sim(2) into the ground-truth
    frame before both sides are rasterized for the floorplan IoU.
    """
    transform = align_ransac(est_poses, gt_poses, seed=ransac_seed)
    rot, trans = pose_errors(est_poses, gt_poses, transform)
    if components is None:
        components = [tuple(sorted(est_poses))]
    pdf, cdf = cc_distribution(components, total_panos)

    iou = None
    if est_rooms is not None and gt_rooms is not None:
        aligned = [transform.apply(np.asarray(r, dtype=float)) for r in est_rooms]
        iou = floorplan_iou(
            rasterize_rooms(aligned, cell_size), rasterize_rooms(gt_rooms, cell_size)
        )

    return EvalReport(
        localization_pct=localization_pct(len(est_poses), total_panos),
        rotation_mean_deg=rot.mean,
        rotation_median_deg=rot.median,
        translation_mean_m=trans.mean,
        translation_median_m=trans.median,
        floorplan_iou=iou,
        cc_pdf=tuple(float(v) for v in pdf),
        cc_cdf=tuple(float(v) for v in cdf),
        n_panos=total_panos,
        n_localized=len(est_poses),
    )


def save_report_plots(report: EvalReport, rot: ErrorStats, trans: ErrorStats, out_dir: str) -> None:
    """Write CC-coverage and error-distribution plots as PNG files."""
    import os

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(4, 3))
    ranks = np.arange(1, len(report.cc_pdf) + 1)
    ax.bar(ranks, report.cc_pdf, color="#4878a8", label="per rank")
    ax.plot(ranks, report.cc_cdf, "o-", color="#c44e52", label="cumulative")
    ax.set_xlabel("connected component rank")
    ax.set_ylabel("fraction of panoramas")
    ax.set_ylim(0, 1.05)
    ax.legend()
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "cc_coverage.png"), dpi=120)
    plt.close(fig)

    fig, axes = plt.subplots(1, 2, figsize=(7, 3))
    axes[0].hist(rot.per_pano, bins=20, color="#4878a8")
    axes[0].set_xlabel("rotation error (deg)")
    axes[1].hist(trans.per_pano, bins=20, color="#4878a8")
    axes[1].set_xlabel("translation error (m)")
    for ax in axes:
        ax.set_ylabel("panoramas")
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "pose_errors.png"), dpi=120)
    plt.close(fig)
