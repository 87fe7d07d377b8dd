"""Bird's-eye-view rendering of panoramas onto metric grids.

A panorama's floor (or ceiling) pixels are cast onto the horizontal plane
and binned into a square grid centered on the camera, 0.02 m per cell over
a 10 m x 10 m area by default (500 x 500 cells). The sparse render is then
densified by barycentric interpolation over a triangulation of the samples,
with a reliability mask marking cells whose box neighborhood contains at
least one real sample; values outside the mask are zeroed and must not be
trusted by downstream consumers.

Grid frame: the camera sits at the grid center, world x grows with columns
and world y with rows. ``to_image`` flips rows so +y points up on screen.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage
from scipy.interpolate import griddata
from scipy.spatial import QhullError

from .errors import ConfigError, DegenerateInputError, MissingGroundTruthError
from .geom import Pose2, pixel_angles
from .polyops import points_in_polygon
from .scene import PanoramaRecord

__all__ = ["BevConfig", "BevGrid", "render_bev", "densify", "overlap_iou", "paired_values"]


@dataclass(frozen=True)
class BevConfig:
    """Rendering knobs; the defaults give a 500x500 grid at 2 cm per cell."""

    resolution: float = 0.02
    extent: float = 10.0
    pano_width: int = 1024
    pano_height: int = 512
    reliability_kernel: int = 11
    ceiling_height: float = 2.6
    min_floor_drop: float = 1.0
    min_ceiling_rise: float = 0.5

    def __post_init__(self):
        if self.resolution <= 0 or self.extent <= 0:
            raise ConfigError("resolution and extent must be positive")
        if self.reliability_kernel < 1 or self.reliability_kernel % 2 == 0:
            raise ConfigError(f"reliability kernel must be odd and positive, got {self.reliability_kernel}")

    @property
    def cells(self) -> int:
        return int(round(self.extent / self.resolution))


@dataclass(frozen=True)
class BevGrid:
    """A camera-centered top-down grid.

    ``occupancy`` marks cells carrying real information: sampled cells for
    sparse renders, reliable cells for densified ones.
    """

    intensity: np.ndarray
    occupancy: np.ndarray
    resolution: float
    surface: str

    def __post_init__(self):
        if self.intensity.shape != self.occupancy.shape or self.intensity.ndim != 2:
            raise DegenerateInputError("intensity and occupancy shapes must match and be 2-D")

    @property
    def cells(self) -> int:
        return self.intensity.shape[0]

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """World (grid-frame) x and y coordinates of every cell center."""
        c = self.cells // 2
        idx = np.arange(self.cells)
        return (idx - c) * self.resolution, (idx - c) * self.resolution

    def to_image(self) -> Image.Image:
        img = np.clip(self.intensity * 255.0, 0, 255).astype(np.uint8)
        return Image.fromarray(img[::-1], mode="L")


def _bin_points(points: np.ndarray, values: np.ndarray, cells: int, resolution: float):
    """Bin sample points into a grid by rounding to the nearest cell.

    When several samples land in one cell the latest one in input order
    wins, which keeps renders deterministic. Out-of-extent samples are
    dropped.
    """
    c = cells // 2
    cols = np.round(points[:, 0] / resolution).astype(np.int64) + c
    rows = np.round(points[:, 1] / resolution).astype(np.int64) + c
    keep = (cols >= 0) & (cols < cells) & (rows >= 0) & (rows < cells)
    cols, rows, values = cols[keep], rows[keep], values[keep]

    intensity = np.zeros((cells, cells))
    occupancy = np.zeros((cells, cells), dtype=bool)
    intensity[rows, cols] = values  # duplicate indices: the last write wins
    occupancy[rows, cols] = True
    return intensity, occupancy


def render_bev(
    pano: PanoramaRecord,
    surface: str,
    texture_fn,
    config: BevConfig = BevConfig(),
) -> BevGrid:
    """Render one surface of a panorama to a camera-centered grid.

    Pixel rays are intersected with the floor plane (or a flat ceiling at
    ``config.ceiling_height``), keeping only points far enough below
    (respectively above) the camera, then clipped to the panorama's room
    contour and shaded by ``texture_fn`` evaluated at world coordinates.
    Rendering therefore needs the panorama's ground-truth pose; it emulates
    what the camera saw, not where the camera is believed to be.

    Args:
        pano: the panorama record (gt_pose required).
        surface: "floor" or "ceiling".
        texture_fn: maps (N, 2) world points to intensities in [0, 1].
        config: grid and sampling parameters.
    """
    if surface not in ("floor", "ceiling"):
        raise ConfigError(f"surface must be 'floor' or 'ceiling', got {surface!r}")
    if pano.gt_pose is None:
        raise MissingGroundTruthError(
            f"pano {pano.id}: rendering textures needs a ground-truth pose"
        )

    w, h = config.pano_width, config.pano_height
    u, v = np.meshgrid(np.arange(w, dtype=float), np.arange(h, dtype=float))
    theta, phi = pixel_angles(u.ravel(), v.ravel(), w, h)

    if surface == "floor":
        drop = pano.camera_height
        usable = (phi < 0) & (drop >= config.min_floor_drop)
        dist = np.where(usable, drop * np.cos(phi) / np.maximum(-np.sin(phi), 1e-12), np.nan)
    else:
        rise = config.ceiling_height - pano.camera_height
        usable = (phi > 0) & (rise >= config.min_ceiling_rise)
        dist = np.where(usable, rise * np.cos(phi) / np.maximum(np.sin(phi), 1e-12), np.nan)

    pts = np.column_stack([dist * np.cos(theta), dist * np.sin(theta)])
    valid = usable & np.isfinite(pts).all(axis=1)
    pts = pts[valid]
    if len(pts):
        inside = points_in_polygon(pts, pano.contour.vertices)
        pts = pts[inside]

    cells = config.cells
    if len(pts) == 0:
        return BevGrid(np.zeros((cells, cells)), np.zeros((cells, cells), dtype=bool),
                       config.resolution, surface)

    world = pano.gt_pose.apply(pts)
    values = np.clip(np.asarray(texture_fn(world), dtype=float), 0.0, 1.0)
    intensity, occupancy = _bin_points(pts, values, cells, config.resolution)
    return BevGrid(intensity, occupancy, config.resolution, surface)


def densify(grid: BevGrid, kernel: int = 11) -> tuple[BevGrid, np.ndarray]:
    """Interpolate a sparse render and compute its reliability mask.

    Interpolation is linear (barycentric over a triangulation of the
    occupied cell centers); cells outside the samples' convex hull stay
    zero. A cell is reliable iff the ``kernel`` x ``kernel`` box around it
    (clipped at the grid edge) contains at least one occupied cell of the
    sparse input. Unreliable cells are zeroed in the returned grid, whose
    occupancy equals the mask.

    Returns:
        (dense grid, reliability mask).
    """
    if kernel < 1 or kernel % 2 == 0:
        raise ConfigError(f"reliability kernel must be odd and positive, got {kernel}")

    occ = grid.occupancy
    counts = ndimage.convolve(
        occ.astype(np.int32), np.ones((kernel, kernel), dtype=np.int32),
        mode="constant", cval=0,
    )
    mask = counts >= 1

    rows, cols = np.nonzero(occ)
    dense = np.zeros_like(grid.intensity)
    if len(rows) >= 3:
        samples = np.column_stack([cols, rows]).astype(float)
        gc, gr = np.meshgrid(np.arange(grid.cells), np.arange(grid.cells))
        try:
            dense = griddata(
                samples, grid.intensity[rows, cols],
                (gc.astype(float), gr.astype(float)),
                method="linear", fill_value=0.0,
            )
            dense = np.nan_to_num(dense, nan=0.0)
        except QhullError:
            dense = grid.intensity.copy()
    else:
        dense = grid.intensity.copy()

    dense[~mask] = 0.0
    return BevGrid(dense, mask, grid.resolution, grid.surface), mask


def _occupied_centers(grid: BevGrid) -> np.ndarray:
    c = grid.cells // 2
    rows, cols = np.nonzero(grid.occupancy)
    return np.column_stack([(cols - c) * grid.resolution, (rows - c) * grid.resolution])


def _count_hits(points: np.ndarray, target: BevGrid) -> int:
    """How many points land in occupied cells of ``target``."""
    c = target.cells // 2
    cols = np.round(points[:, 0] / target.resolution).astype(np.int64) + c
    rows = np.round(points[:, 1] / target.resolution).astype(np.int64) + c
    ok = (cols >= 0) & (cols < target.cells) & (rows >= 0) & (rows < target.cells)
    return int(np.count_nonzero(target.occupancy[rows[ok], cols[ok]]))


def overlap_iou(a: BevGrid, b: BevGrid, i_T_j: Pose2) -> float:
    """Occupancy IoU of two grids under a relative pose.

    ``a`` lives in frame i, ``b`` in frame j, and ``i_T_j`` maps j into i.
    The intersection is averaged over both mapping directions, which makes
    the result exactly symmetric: swapping the grids and inverting the pose
    returns the same value.
    """
    na = int(np.count_nonzero(a.occupancy))
    nb = int(np.count_nonzero(b.occupancy))
    if na == 0 or nb == 0:
        return 0.0
    j_T_i = i_T_j.inverse()
    hits_ab = _count_hits(j_T_i.apply(_occupied_centers(a)), b)
    hits_ba = _count_hits(i_T_j.apply(_occupied_centers(b)), a)
    inter = 0.5 * (hits_ab + hits_ba)
    union = na + nb - inter
    return float(inter / union) if union > 0 else 0.0


def paired_values(a: BevGrid, b: BevGrid, i_T_j: Pose2) -> tuple[np.ndarray, np.ndarray]:
    """Intensity pairs over jointly occupied cells of two aligned grids.

    For every occupied cell of ``a`` whose center maps (via the inverse
    pose, nearest cell) into an occupied cell of ``b``, returns the two
    intensities. Used for appearance agreement scoring.
    """
    c = a.cells // 2
    rows, cols = np.nonzero(a.occupancy)
    centers = np.column_stack([(cols - c) * a.resolution, (rows - c) * a.resolution])
    mapped = i_T_j.inverse().apply(centers)

    cb = b.cells // 2
    bc = np.round(mapped[:, 0] / b.resolution).astype(np.int64) + cb
    br = np.round(mapped[:, 1] / b.resolution).astype(np.int64) + cb
    ok = (bc >= 0) & (bc < b.cells) & (br >= 0) & (br < b.cells)
    rows, cols, bc, br = rows[ok], cols[ok], bc[ok], br[ok]
    hit = b.occupancy[br, bc]
    return a.intensity[rows[hit], cols[hit]], b.intensity[br[hit], bc[hit]]
