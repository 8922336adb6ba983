"""Sparse multi-label voxel grid with additive log-odds occupancy updates.

Each touched voxel stores one log-odds value per label. A voxel that was
never updated is implicitly all-zero, i.e. probability 0.5 for every label
(the unknown state). Updates add the logit of the measured probability to
the stored value and saturate at a symmetric clamp bound so the map stays
revisable under contradicting evidence.
"""

from __future__ import annotations

import math
from typing import Iterator, NamedTuple, Optional

import numpy as np

from .geometry import Box3


class VoxelKey(NamedTuple):
    """Integer voxel index; key k covers [k * res, (k + 1) * res) per axis."""

    ix: int
    iy: int
    iz: int


def logit(p: float) -> float:
    """Log-odds of a probability: log(p / (1 - p)). Requires 0 < p < 1."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"logit requires 0 < p < 1, got {p}")
    return math.log(p / (1.0 - p))


def probability(log_odds: float) -> float:
    """Recover the probability encoded by a finite log-odds value."""
    if not math.isfinite(log_odds):
        raise ValueError(f"probability requires a finite log-odds value, got {log_odds}")
    # two-branch sigmoid: accurate for both signs, never overflows
    if log_odds >= 0.0:
        return 1.0 / (1.0 + math.exp(-log_odds))
    e = math.exp(log_odds)
    return e / (1.0 + e)


def world_to_key(point, resolution: float) -> VoxelKey:
    """Voxel index containing a world point (floor division per axis)."""
    p = np.asarray(point, dtype=float)
    idx = np.floor(p / resolution).astype(np.int64)
    return VoxelKey(int(idx[0]), int(idx[1]), int(idx[2]))


def voxel_center(key, resolution: float) -> np.ndarray:
    """World coordinates of a voxel's center."""
    return (np.asarray(key, dtype=float) + 0.5) * resolution


def voxel_min_corner(key, resolution: float) -> np.ndarray:
    return np.asarray(key, dtype=float) * resolution


class LabelOccupancyGrid:
    """Sparse association VoxelKey -> per-label log-odds vector.

    Parameters
    ----------
    resolution : float
        Voxel edge length in meters, > 0.
    num_labels : int
        Total number of classes including background, >= 2.
    clamp : float
        Symmetric log-odds saturation bound, > 0 (may be ``inf``).
    roi : Box3, optional
        Updates for voxels whose center lies outside this box are
        discarded and counted in ``discarded_updates``.
    """

    def __init__(self, resolution: float, num_labels: int,
                 clamp: float = 3.5, roi: Optional[Box3] = None):
        resolution = float(resolution)
        num_labels = int(num_labels)
        clamp = float(clamp)
        if not (resolution > 0.0 and math.isfinite(resolution)):
            raise ValueError(f"resolution must be a positive finite number, got {resolution}")
        if num_labels < 2:
            raise ValueError(f"num_labels must be >= 2, got {num_labels}")
        if not clamp > 0.0 or math.isnan(clamp):
            raise ValueError(f"clamp must be > 0, got {clamp}")
        if roi is not None and not isinstance(roi, Box3):
            raise TypeError("roi must be a Box3 or None")
        self._resolution = resolution
        self._num_labels = num_labels
        self.clamp = clamp
        self.roi = roi
        self.discarded_updates = 0
        self._cells: dict[VoxelKey, np.ndarray] = {}

    @property
    def resolution(self) -> float:
        return self._resolution

    @property
    def num_labels(self) -> int:
        return self._num_labels

    def __len__(self) -> int:
        return len(self._cells)

    def __contains__(self, key) -> bool:
        return VoxelKey(*key) in self._cells

    def keys(self) -> Iterator[VoxelKey]:
        return iter(self._cells)

    def items(self):
        return self._cells.items()

    def world_to_key(self, point) -> VoxelKey:
        return world_to_key(point, self._resolution)

    def voxel_center(self, key) -> np.ndarray:
        return voxel_center(key, self._resolution)

    def inside_roi(self, key) -> bool:
        """A voxel counts as inside the roi iff its center is inside."""
        if self.roi is None:
            return True
        return bool(self.roi.contains(self.voxel_center(key)))

    def _check_label(self, label: int) -> int:
        label = int(label)
        if not 0 <= label < self._num_labels:
            raise ValueError(f"label {label} out of range [0, {self._num_labels - 1}]")
        return label

    def update_voxel(self, key, label: int, measurement_p: float) -> None:
        """Add one measurement for (voxel, label); other labels unchanged.

        Updates outside the roi are silently dropped and counted.
        """
        key = VoxelKey(*key)
        label = self._check_label(label)
        delta = logit(measurement_p)
        if not self.inside_roi(key):
            self.discarded_updates += 1
            return
        vec = self._cells.get(key)
        if vec is None:
            vec = np.zeros(self._num_labels)
            self._cells[key] = vec
        vec[label] = min(max(vec[label] + delta, -self.clamp), self.clamp)

    def update_voxel_probs(self, key, probs) -> None:
        """Vector form of :meth:`update_voxel` covering every label at once."""
        key = VoxelKey(*key)
        p = np.asarray(probs, dtype=float)
        if p.shape != (self._num_labels,):
            raise ValueError(f"expected {self._num_labels} probabilities, got shape {p.shape}")
        if not ((p > 0.0) & (p < 1.0)).all():
            raise ValueError("measurement probabilities must lie strictly in (0, 1)")
        if not self.inside_roi(key):
            self.discarded_updates += 1
            return
        vec = self._cells.get(key)
        if vec is None:
            vec = np.zeros(self._num_labels)
            self._cells[key] = vec
        np.clip(vec + np.log(p / (1.0 - p)), -self.clamp, self.clamp, out=vec)

    def log_odds(self, key, label: int) -> float:
        vec = self._cells.get(VoxelKey(*key))
        if vec is None:
            return 0.0
        return float(vec[self._check_label(label)])

    def log_odds_vector(self, key) -> np.ndarray:
        vec = self._cells.get(VoxelKey(*key))
        if vec is None:
            return np.zeros(self._num_labels)
        return vec.copy()

    def voxel_probability(self, key, label: int) -> float:
        """Stored probability for (voxel, label); 0.5 for untouched voxels."""
        return probability(self.log_odds(key, label))

    def segment(self, label: int) -> set[VoxelKey]:
        """Keys whose probability for ``label`` strictly exceeds 0.5."""
        label = self._check_label(label)
        return {key for key, vec in self._cells.items() if vec[label] > 0.0}

    def centroid(self, label: int) -> Optional[np.ndarray]:
        """Unweighted mean of segment voxel centers, or None if empty."""
        seg = self.segment(label)
        if not seg:
            return None
        keys = np.asarray(sorted(seg), dtype=float)
        return ((keys + 0.5) * self._resolution).mean(axis=0)

    def _set_cell(self, key, values) -> None:
        """Restore a raw log-odds vector (snapshot loading only)."""
        vec = np.asarray(values, dtype=float)
        if vec.shape != (self._num_labels,):
            raise ValueError(f"expected {self._num_labels} log-odds values, got shape {vec.shape}")
        self._cells[VoxelKey(*key)] = vec.copy()

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabelOccupancyGrid):
            return NotImplemented
        if (self._resolution != other._resolution
                or self._num_labels != other._num_labels
                or self.clamp != other.clamp
                or self.roi != other.roi
                or self._cells.keys() != other._cells.keys()):
            return False
        return all(np.array_equal(vec, other._cells[key]) for key, vec in self._cells.items())
