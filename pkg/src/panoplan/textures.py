"""Procedural floor/ceiling textures keyed to world coordinates.

Each factory returns a function mapping (N, 2) world points to intensities
in [0, 1]. Textures are pure and deterministic, so two cameras looking at
the same patch of floor render identical values, which is what makes
appearance-based alignment scoring meaningful on synthetic scenes.
"""

from __future__ import annotations

import numpy as np

__all__ = ["constant", "stripes", "checker", "value_noise"]


def constant(value: float = 0.5):
    def fn(points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.full(len(pts), float(value))

    return fn


def stripes(period: float = 0.5, angle: float = 0.0, phase: float = 0.0):
    """Sinusoidal stripes with the given period along the given direction."""
    direction = np.array([np.cos(angle), np.sin(angle)])

    def fn(points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        coord = pts @ direction
        return 0.5 + 0.5 * np.sin(2.0 * np.pi * coord / period + phase)

    return fn


def checker(cell: float = 0.5):
    def fn(points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        parity = (np.floor(pts[:, 0] / cell) + np.floor(pts[:, 1] / cell)) % 2
        return parity.astype(float)

    return fn


def _hash01(ix: np.ndarray, iy: np.ndarray, seed: int) -> np.ndarray:
    """Deterministic lattice hash onto [0, 1) via integer mixing."""
    h = (ix.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)) ^ (
        iy.astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F)
    ) ^ np.uint64(seed * 0x165667B19E3779F9 + 0x27D4EB2F165667C5)
    h ^= h >> np.uint64(33)
    h *= np.uint64(0xFF51AFD7ED558CCD)
    h ^= h >> np.uint64(33)
    return (h >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def value_noise(scale: float = 1.0, seed: int = 0):
    """Smooth aperiodic noise: hashed lattice values with smoothstep blending."""

    def fn(points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points) / scale
        x0 = np.floor(pts[:, 0]).astype(np.int64)
        y0 = np.floor(pts[:, 1]).astype(np.int64)
        fx = pts[:, 0] - x0
        fy = pts[:, 1] - y0
        sx = fx * fx * (3.0 - 2.0 * fx)
        sy = fy * fy * (3.0 - 2.0 * fy)
        v00 = _hash01(x0, y0, seed)
        v10 = _hash01(x0 + 1, y0, seed)
        v01 = _hash01(x0, y0 + 1, seed)
        v11 = _hash01(x0 + 1, y0 + 1, seed)
        top = v00 + sx * (v10 - v00)
        bot = v01 + sx * (v11 - v01)
        return top + sy * (bot - top)

    return fn
