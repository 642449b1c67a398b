"""Pose sequences and their scalar parameterization on [-1, 1].

A path is an ordered sequence of 6D poses: a 3D position in normalized
object space plus a unit 3-vector for the tool orientation. A scalar
s in [-1, 1] addresses a point along the path (-1 is the first waypoint,
0 the middle, +1 the last); points in between are linear in the
fractional waypoint index.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

ORIENTATION_TOL = 1e-6

SAMPLING_STRATEGIES = ("equispaced", "noisy-equispaced", "uniform")

__all__ = [
    "ORIENTATION_TOL",
    "SAMPLING_STRATEGIES",
    "Pose6D",
    "Path",
    "PredictedPath",
    "ParamSamplingConfig",
    "SceneTransform",
    "interp_at",
    "resample",
    "sample_params",
    "reverse",
    "normalize_scene",
    "max_second_difference",
]


@dataclass(frozen=True)
class Pose6D:
    """A single end-effector sample: position plus unit orientation."""

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self) -> None:
        pos = np.asarray(self.position, dtype=float).reshape(3)
        ori = np.asarray(self.orientation, dtype=float).reshape(3)
        if not np.all(np.isfinite(pos)):
            raise ValueError("position components must be finite")
        if not np.all(np.isfinite(ori)):
            raise ValueError("orientation components must be finite")
        if abs(float(np.linalg.norm(ori)) - 1.0) > ORIENTATION_TOL:
            raise ValueError("orientation must have unit norm")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", ori)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.position, self.orientation])


@dataclass(frozen=True)
class Path:
    """Ordered pose sequence stored as a (K, 6) float array, K >= 2.

    Index order is execution order; reversing twice gives back the exact
    same array.
    """

    poses: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.poses, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 6:
            raise ValueError("poses must be a (K, 6) array")
        if arr.shape[0] < 2:
            raise ValueError("a path needs at least two poses")
        if not np.all(np.isfinite(arr)):
            raise ValueError("path entries must be finite")
        norms = np.linalg.norm(arr[:, 3:], axis=1)
        bad = np.nonzero(np.abs(norms - 1.0) > ORIENTATION_TOL)[0]
        if bad.size:
            raise ValueError(f"orientation at index {int(bad[0])} is not unit length")
        object.__setattr__(self, "poses", arr)

    def __len__(self) -> int:
        return int(self.poses.shape[0])

    @property
    def positions(self) -> np.ndarray:
        return self.poses[:, :3]

    @property
    def orientations(self) -> np.ndarray:
        return self.poses[:, 3:]

    def pose(self, index: int) -> Pose6D:
        row = self.poses[index]
        return Pose6D(row[:3].copy(), row[3:].copy())


@dataclass(frozen=True)
class PredictedPath:
    """A path plus the confidence that it should be kept."""

    path: Path
    confidence: float

    def __post_init__(self) -> None:
        c = float(self.confidence)
        if not 0.0 <= c <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")
        object.__setattr__(self, "confidence", c)


@dataclass(frozen=True)
class ParamSamplingConfig:
    """How the scalar path parameters for one pass are drawn.

    strategy "equispaced" uses the grid s_t = -1 + t * 2/T for t = 1..T,
    "noisy-equispaced" adds zero-mean Gaussian noise (clamped back into
    [-1, 1], then sorted), "uniform" sorts independent uniform draws.
    noise_sigma defaults to 0.5 / count when unset.
    """

    strategy: str = "equispaced"
    count: int = 64
    noise_sigma: float | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.strategy not in SAMPLING_STRATEGIES:
            raise ValueError(f"unknown sampling strategy {self.strategy!r}")
        if self.count < 1:
            raise ValueError("count must be a positive integer")
        if self.noise_sigma is not None and self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


def sample_params(config: ParamSamplingConfig) -> np.ndarray:
    """Draw a sorted array of `count` scalars in [-1, 1].

    Deterministic given the config seed. Note the equispaced grid starts
    at -1 + 2/T, not -1, so the very first waypoint is never addressed
    exactly; the asymmetry is kept on purpose.
    """
    t = np.arange(1, config.count + 1, dtype=float)
    grid = np.minimum(t * (2.0 / config.count) - 1.0, 1.0)
    if config.strategy == "equispaced":
        return grid
    rng = np.random.default_rng(config.seed)
    if config.strategy == "noisy-equispaced":
        sigma = config.noise_sigma if config.noise_sigma is not None else 0.5 / config.count
        vals = np.clip(grid + rng.normal(0.0, sigma, config.count), -1.0, 1.0)
    else:
        vals = rng.uniform(-1.0, 1.0, config.count)
    vals.sort()
    return vals


def _fractional_indices(path: Path, vals: np.ndarray, mode: str) -> np.ndarray:
    """Map scalars in [-1, 1] to fractional waypoint indices.

    "index" spreads parameters evenly over waypoint indices (the
    default); "arclength" spreads them evenly over the traversed
    position arc length instead.
    """
    k = len(path)
    if mode == "index":
        return 0.5 * (vals + 1.0) * (k - 1)
    if mode != "arclength":
        raise ValueError(f"unknown interpolation mode {mode!r}")
    segments = np.linalg.norm(np.diff(path.positions, axis=0), axis=1)
    cumulative = np.concatenate([[0.0], np.cumsum(segments)])
    total = cumulative[-1]
    if total <= 0.0:
        raise ValueError("arc-length parameterization needs a path of nonzero length")
    target = 0.5 * (vals + 1.0) * total
    i0 = np.clip(np.searchsorted(cumulative, target, side="right") - 1, 0, k - 2)
    span = segments[i0]
    frac = np.where(span > 0, (target - cumulative[i0]) / np.where(span > 0, span, 1.0), 0.0)
    # pin s = 1 to the last waypoint exactly; cumulative-sum rounding could
    # otherwise leave the endpoint a few ulp short
    return np.where(vals == 1.0, float(k - 1), i0 + np.minimum(frac, 1.0))


def interp_at(path: Path, s: float, mode: str = "index") -> Pose6D:
    """Pose at scalar parameter s via linear interpolation between waypoints.

    Positions are interpolated componentwise; orientations are
    interpolated then renormalized to unit length. When s lands exactly
    on a waypoint that waypoint is returned unchanged.
    """
    s = float(s)
    if not -1.0 <= s <= 1.0:
        raise ValueError("parameter s must lie in [-1, 1]")
    k = len(path)
    u = float(_fractional_indices(path, np.array([s]), mode)[0])
    i0 = min(int(np.floor(u)), k - 2)
    frac = u - i0
    if frac == 0.0:
        return path.pose(i0)
    if frac == 1.0:
        return path.pose(i0 + 1)
    row0 = path.poses[i0]
    row1 = path.poses[i0 + 1]
    pos = (1.0 - frac) * row0[:3] + frac * row1[:3]
    ori = (1.0 - frac) * row0[3:] + frac * row1[3:]
    n = float(np.sqrt((ori * ori).sum(axis=-1)))
    if n < 1e-12:
        raise ValueError("interpolated orientation degenerates to zero")
    return Pose6D(pos, ori / n)


def resample(path: Path, params: Sequence[float], mode: str = "index") -> Path:
    """New path whose t-th pose is interp_at(path, params[t], mode)."""
    vals = np.asarray(params, dtype=float)
    if vals.ndim != 1 or vals.size == 0:
        raise ValueError("params must be a nonempty 1-D sequence")
    if not np.all((vals >= -1.0) & (vals <= 1.0)):
        raise ValueError("params must lie in [-1, 1]")
    k = len(path)
    u = _fractional_indices(path, vals, mode)
    i0 = np.minimum(np.floor(u).astype(int), k - 2)
    frac = u - i0
    row0 = path.poses[i0]
    row1 = path.poses[i0 + 1]
    pos = (1.0 - frac)[:, None] * row0[:, :3] + frac[:, None] * row1[:, :3]
    ori = (1.0 - frac)[:, None] * row0[:, 3:] + frac[:, None] * row1[:, 3:]
    norms = np.sqrt((ori * ori).sum(axis=-1))
    if np.any(norms < 1e-12):
        raise ValueError("interpolated orientation degenerates to zero")
    out = np.concatenate([pos, ori / norms[:, None]], axis=1)
    exact0 = frac == 0.0
    exact1 = frac == 1.0
    out[exact0] = row0[exact0]
    out[exact1] = row1[exact1]
    return Path(out)


def reverse(path: Path) -> Path:
    """Same poses in reverse execution order."""
    return Path(path.poses[::-1].copy())


@dataclass(frozen=True)
class SceneTransform:
    """Centroid shift plus isotropic scale mapping a scene to normalized space."""

    centroid: np.ndarray
    scale: float

    def apply_points(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self.centroid) / self.scale

    def invert_points(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) * self.scale + self.centroid

    def apply_path(self, path: Path) -> Path:
        out = path.poses.copy()
        out[:, :3] = (out[:, :3] - self.centroid) / self.scale
        return Path(out)

    def invert_path(self, path: Path) -> Path:
        out = path.poses.copy()
        out[:, :3] = out[:, :3] * self.scale + self.centroid
        return Path(out)


def normalize_scene(
    point_cloud: np.ndarray, paths: Sequence[Path]
) -> tuple[np.ndarray, list[Path], SceneTransform]:
    """Center the cloud on its centroid and scale the maximum radius to one.

    The same rigid transform is applied to all path positions;
    orientations are untouched. Returns (cloud, paths, transform) where
    the transform inverts the mapping.
    """
    cloud = np.asarray(point_cloud, dtype=float)
    if cloud.ndim != 2 or cloud.shape[1] != 3 or cloud.shape[0] == 0:
        raise ValueError("point cloud must be a nonempty (P, 3) array")
    if not np.all(np.isfinite(cloud)):
        raise ValueError("point cloud entries must be finite")
    centroid = cloud.mean(axis=0)
    radii = np.linalg.norm(cloud - centroid, axis=1)
    scale = float(radii.max())
    if scale <= 0.0:
        raise ValueError("degenerate point cloud: all points coincide")
    tf = SceneTransform(centroid, scale)
    return tf.apply_points(cloud), [tf.apply_path(p) for p in paths], tf


def max_second_difference(path: Path) -> float:
    """Largest second-difference magnitude along the path positions.

    A discrete corner-sharpness probe: piecewise-linear paths concentrate
    their curvature at corners and score high, smooth paths score low.
    """
    pos = path.positions
    if len(path) < 3:
        return 0.0
    second = pos[:-2] - 2.0 * pos[1:-1] + pos[2:]
    return float(np.linalg.norm(second, axis=1).max())
