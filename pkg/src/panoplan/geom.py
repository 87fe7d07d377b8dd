"""Planar rigid/similarity transforms and panorama ray geometry.

Conventions used throughout the package:

* World and room frames are right-handed, x to the right, y up (when drawn
  on paper), units in meters.
* Headings are counter-clockwise radians, always wrapped to (-pi, pi].
* A pose ``T = (x, y, theta)`` maps points from its local frame into its
  parent frame: ``p_parent = R(theta) @ p_local + (x, y)``.
* Panorama pixel coordinates ``(u, v)`` have ``u`` growing to the right
  from the left image edge and ``v`` growing downward from the top edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError

__all__ = [
    "Pose2",
    "Twist2",
    "Sim2",
    "SphericalPixel",
    "wrap_angle",
    "compose",
    "between",
    "exp",
    "log",
    "fit_sim2",
    "fit_rigid",
    "pixel_angles",
    "pixel_to_floor_point",
]

_SMALL_ANGLE = 1e-7


def wrap_angle(theta):
    """Wrap an angle (scalar or array) to the half-open interval (-pi, pi]."""
    wrapped = np.mod(np.asarray(theta, dtype=float), 2.0 * np.pi)
    wrapped = np.where(wrapped > np.pi, wrapped - 2.0 * np.pi, wrapped)
    if np.isscalar(theta) or np.ndim(theta) == 0:
        return float(wrapped)
    return wrapped


def _rotation_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class Pose2:
    """Rigid planar transform (element of SE(2)).

    ``theta`` is wrapped on construction so equality and hashing behave for
    angles that differ by full turns.
    """

    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    @staticmethod
    def identity() -> "Pose2":
        return Pose2(0.0, 0.0, 0.0)

    @property
    def translation(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def rotation(self) -> np.ndarray:
        return _rotation_matrix(self.theta)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map points (shape (2,) or (N, 2)) from the local into the parent frame."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation

    def rotate_only(self, vectors: np.ndarray) -> np.ndarray:
        """Apply only the rotation part (for directions and normals)."""
        return np.asarray(vectors, dtype=float) @ self.rotation.T

    def compose(self, other: "Pose2") -> "Pose2":
        t = self.apply(other.translation)
        return Pose2(t[0], t[1], self.theta + other.theta)

    def inverse(self) -> "Pose2":
        t = -self.rotation.T @ self.translation
        return Pose2(t[0], t[1], -self.theta)

    def __matmul__(self, other: "Pose2") -> "Pose2":
        return self.compose(other)


def compose(a: Pose2, b: Pose2) -> Pose2:
    """Composition ``a * b``: apply ``b`` first, then ``a``."""
    return a.compose(b)


def between(a: Pose2, b: Pose2) -> Pose2:
    """Relative pose of ``b`` expressed in ``a``'s frame, ``a^-1 * b``."""
    return a.inverse().compose(b)


@dataclass(frozen=True)
class Twist2:
    """Tangent-space element (vx, vy, omega) of SE(2)."""

    vx: float
    vy: float
    omega: float

    def as_array(self) -> np.ndarray:
        return np.array([self.vx, self.vy, self.omega])


def _exp_coeffs(omega: float) -> tuple[float, float]:
    """Return A = sin(w)/w and B = (1 - cos(w))/w with stable small-angle forms."""
    if abs(omega) < _SMALL_ANGLE:
        w2 = omega * omega
        return 1.0 - w2 / 6.0, omega / 2.0 - omega * w2 / 24.0
    return math.sin(omega) / omega, (1.0 - math.cos(omega)) / omega


def exp(xi: Twist2) -> Pose2:
    """Exponential map from the tangent space at the identity onto SE(2)."""
    a, b = _exp_coeffs(xi.omega)
    x = a * xi.vx - b * xi.vy
    y = b * xi.vx + a * xi.vy
    return Pose2(x, y, xi.omega)


def log(pose: Pose2) -> Twist2:
    """Logarithm map, inverse of :func:`exp` for rotations in (-pi, pi]."""
    a, b = _exp_coeffs(pose.theta)
    det = a * a + b * b
    vx = (a * pose.x + b * pose.y) / det
    vy = (-b * pose.x + a * pose.y) / det
    return Twist2(vx, vy, pose.theta)


def retract(pose: Pose2, delta: np.ndarray) -> Pose2:
    """Right-multiplicative manifold update ``pose * exp(delta)``."""
    return pose.compose(exp(Twist2(delta[0], delta[1], delta[2])))


@dataclass(frozen=True)
class Sim2:
    """Planar similarity transform: ``p -> scale * R(rotation) @ p + translation``."""

    scale: float
    rotation: float
    tx: float
    ty: float

    def __post_init__(self):
        if self.scale <= 0.0:
            raise DegenerateInputError(f"similarity scale must be positive, got {self.scale}")
        object.__setattr__(self, "rotation", wrap_angle(self.rotation))

    @staticmethod
    def identity() -> "Sim2":
        return Sim2(1.0, 0.0, 0.0, 0.0)

    @property
    def translation(self) -> np.ndarray:
        return np.array([self.tx, self.ty])

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return self.scale * (pts @ _rotation_matrix(self.rotation).T) + self.translation

    def apply_pose(self, pose: Pose2) -> Pose2:
        """Map a pose into the target frame (position scaled+rotated, heading rotated)."""
        t = self.apply(pose.translation)
        return Pose2(t[0], t[1], pose.theta + self.rotation)

    def inverse(self) -> "Sim2":
        inv_scale = 1.0 / self.scale
        r = _rotation_matrix(-self.rotation)
        t = -inv_scale * (r @ self.translation)
        return Sim2(inv_scale, -self.rotation, t[0], t[1])

    def compose(self, other: "Sim2") -> "Sim2":
        t = self.apply(other.translation)
        return Sim2(self.scale * other.scale, self.rotation + other.rotation, t[0], t[1])


def fit_sim2(src: np.ndarray, dst: np.ndarray) -> Sim2:
    """Least-squares similarity transform mapping ``src`` points onto ``dst``.

    Closed form via centroid demeaning and the complex cross-covariance of
    the demeaned point sets; reflections are never produced.

    Args:
        src: (N, 2) source points, N >= 2.
        dst: (N, 2) target points.

    Raises:
        DegenerateInputError: fewer than two points, mismatched shapes, or
            all source points coincident.
    """
    s = np.asarray(src, dtype=float)
    d = np.asarray(dst, dtype=float)
    if s.shape != d.shape or s.ndim != 2 or s.shape[1] != 2:
        raise DegenerateInputError(f"point sets must share shape (N, 2), got {s.shape} and {d.shape}")
    if s.shape[0] < 2:
        raise DegenerateInputError("similarity fit needs at least two point pairs")

    sc = s - s.mean(axis=0)
    dc = d - d.mean(axis=0)
    zs = sc[:, 0] + 1j * sc[:, 1]
    zd = dc[:, 0] + 1j * dc[:, 1]
    denom = float(np.sum(zs.real**2 + zs.imag**2))
    if denom < 1e-15:
        raise DegenerateInputError("source points are coincident; similarity is undetermined")

    a = np.sum(zd * np.conj(zs)) / denom
    scale = float(abs(a))
    if scale < 1e-15:
        raise DegenerateInputError("target points are coincident; similarity is undetermined")
    rotation = float(np.angle(a))
    t = d.mean(axis=0) - scale * (_rotation_matrix(rotation) @ s.mean(axis=0))
    return Sim2(scale, rotation, t[0], t[1])


def fit_rigid(src: np.ndarray, dst: np.ndarray) -> Pose2:
    """Least-squares rigid transform (unit scale) mapping ``src`` onto ``dst``."""
    s = np.asarray(src, dtype=float)
    d = np.asarray(dst, dtype=float)
    if s.shape != d.shape or s.ndim != 2 or s.shape[1] != 2:
        raise DegenerateInputError(f"point sets must share shape (N, 2), got {s.shape} and {d.shape}")
    if s.shape[0] < 2:
        raise DegenerateInputError("rigid fit needs at least two point pairs")

    sc = s - s.mean(axis=0)
    dc = d - d.mean(axis=0)
    zs = sc[:, 0] + 1j * sc[:, 1]
    zd = dc[:, 0] + 1j * dc[:, 1]
    a = np.sum(zd * np.conj(zs))
    if abs(a) < 1e-15:
        raise DegenerateInputError("rotation is undetermined for these point sets")
    rotation = float(np.angle(a))
    t = d.mean(axis=0) - _rotation_matrix(rotation) @ s.mean(axis=0)
    return Pose2(t[0], t[1], rotation)


@dataclass(frozen=True)
class SphericalPixel:
    """A pixel location inside an equirectangular panorama of size (w, h)."""

    u: float
    v: float
    w: int
    h: int

    def __post_init__(self):
        if not (self.w >= 2 and self.h >= 2):
            raise DegenerateInputError(f"panorama size must be at least 2x2, got {self.w}x{self.h}")
        if not (0 <= self.u < self.w and 0 <= self.v < self.h):
            raise DegenerateInputError(
                f"pixel ({self.u}, {self.v}) outside panorama of size {self.w}x{self.h}"
            )


def pixel_angles(u, v, w: int, h: int):
    """Spherical angles for equirectangular pixels (vectorized).

    The horizontal angle ``theta`` spans [-pi, pi] across the image width and
    is measured counter-clockwise from the camera's forward (+x) axis; the
    elevation ``phi`` spans [pi/2, -pi/2] from the top row to the bottom row,
    positive above the horizon.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    theta = u * (2.0 * np.pi / (w - 1)) - np.pi
    phi = np.pi * (1.0 - v / (h - 1)) - np.pi / 2.0
    return theta, phi


def pixel_to_floor_point(pixel: SphericalPixel, camera_height: float):
    """Intersect a pixel's viewing ray with the floor plane.

    The camera sits ``camera_height`` meters above the floor. Rays at or
    above the horizon never reach the floor and yield ``None``.

    Returns:
        (2,) array with the floor point in the camera's level frame
        (x forward at theta=0, counter-clockwise bearings), or ``None``.
    """
    if camera_height <= 0.0:
        raise DegenerateInputError(f"camera height must be positive, got {camera_height}")
    theta, phi = pixel_angles(pixel.u, pixel.v, pixel.w, pixel.h)
    if phi >= 0.0:
        return None
    # Unit ray has vertical component sin(phi) < 0 and horizontal magnitude
    # cos(phi); scaling it to drop exactly camera_height gives the hit point.
    dist = camera_height * math.cos(phi) / -math.sin(phi)
    return np.array([dist * math.cos(theta), dist * math.sin(theta)])
