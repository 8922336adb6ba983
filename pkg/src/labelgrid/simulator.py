"""Synthetic shelf-bin scene renderer standing in for robot, camera and net.

Scenes are collections of axis-aligned boxes: labeled objects plus
label-0 occluders (bin walls, lip). Depth is rendered analytically with
the slab method, per-pixel label probabilities come from a deterministic
noise model, and a waypoint trajectory expands into stationary hold
frames optionally interleaved with interpolated moving frames that the
fusion gate is expected to reject.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from . import fileio
from .geometry import Box3, Pose, look_at
from .registration import CameraIntrinsics, SensorFrame


@dataclass(frozen=True)
class NoiseModel:
    """Synthetic classifier: confidence for the top label, occasional flips.

    ``confidence`` is the probability mass assigned to the rendered (or
    flipped) top label; the remainder is spread evenly over the other
    labels. Each pixel's top label is replaced by a uniformly random
    wrong label with probability ``flip_rate``. Randomness is a pure
    function of (seed, frame key, pixel index).
    """

    confidence: float = 0.8
    flip_rate: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.5 < self.confidence < 1.0:
            raise ValueError(f"confidence must lie in (0.5, 1), got {self.confidence}")
        if not 0.0 <= self.flip_rate < 0.5:
            raise ValueError(f"flip_rate must lie in [0, 0.5), got {self.flip_rate}")
        if int(self.seed) < 0:
            raise ValueError("seed must be a non-negative integer")
        object.__setattr__(self, "seed", int(self.seed))


@dataclass
class Scene:
    """Labeled object boxes, label-0 occluder boxes, and the bin-interior roi."""

    objects: list[tuple[int, Box3]]
    occluders: list[Box3]
    roi: Box3

    def __post_init__(self) -> None:
        labels = [int(label) for label, _ in self.objects]
        if any(label < 1 for label in labels):
            raise ValueError("object labels must be >= 1 (0 is background)")
        if len(set(labels)) != len(labels):
            raise ValueError("object labels must be unique within a scene")
        self.objects = [(int(label), box) for label, box in self.objects]

    @property
    def max_label(self) -> int:
        return max((label for label, _ in self.objects), default=0)


@dataclass(frozen=True)
class Waypoint:
    pose: Pose
    timestamp: float
    hold_frames: int = 1

    def __post_init__(self) -> None:
        if int(self.hold_frames) < 1:
            raise ValueError("hold_frames must be >= 1")
        object.__setattr__(self, "hold_frames", int(self.hold_frames))


@dataclass
class Trajectory:
    """Camera waypoints with dwell counts plus optional moving frames.

    Each waypoint emits ``hold_frames`` frames at its pose, spaced
    ``frame_dt`` apart starting at the waypoint timestamp. Between
    consecutive waypoints, ``transition_frames`` interpolated frames are
    inserted at evenly spaced times (rotation slerp, translation lerp).
    """

    waypoints: list[Waypoint]
    frame_dt: float = 0.25
    transition_frames: int = 0

    def __post_init__(self) -> None:
        if not self.waypoints:
            raise ValueError("trajectory needs at least one waypoint")
        if self.frame_dt <= 0:
            raise ValueError("frame_dt must be positive")
        if int(self.transition_frames) < 0:
            raise ValueError("transition_frames must be >= 0")
        self.transition_frames = int(self.transition_frames)
        for prev, curr in zip(self.waypoints, self.waypoints[1:]):
            prev_end = prev.timestamp + (prev.hold_frames - 1) * self.frame_dt
            if curr.timestamp <= prev_end:
                raise ValueError(
                    f"waypoint at t={curr.timestamp} starts before the previous "
                    f"waypoint finishes holding at t={prev_end}")


@dataclass(frozen=True)
class ScheduledFrame:
    pose: Pose
    timestamp: float
    moving: bool


def expand_trajectory(trajectory: Trajectory) -> list[ScheduledFrame]:
    """Full frame schedule: hold frames plus interpolated transitions."""
    schedule: list[ScheduledFrame] = []
    wps = trajectory.waypoints
    for i, wp in enumerate(wps):
        for j in range(wp.hold_frames):
            schedule.append(ScheduledFrame(wp.pose, wp.timestamp + j * trajectory.frame_dt, False))
        if i + 1 < len(wps) and trajectory.transition_frames > 0:
            nxt = wps[i + 1]
            start_t = wp.timestamp + (wp.hold_frames - 1) * trajectory.frame_dt
            slerp = Slerp([0.0, 1.0],
                          Rotation.from_matrix([wp.pose.rotation, nxt.pose.rotation]))
            n = trajectory.transition_frames
            for k in range(1, n + 1):
                frac = k / (n + 1)
                rotation = slerp(frac).as_matrix()
                translation = (1.0 - frac) * wp.pose.translation + frac * nxt.pose.translation
                schedule.append(ScheduledFrame(Pose(rotation, translation),
                                               start_t + frac * (nxt.timestamp - start_t), True))
    return schedule


# --- rendering -------------------------------------------------------------

def _pixel_rays(intrinsics: CameraIntrinsics) -> np.ndarray:
    """Camera-frame ray directions through every pixel, z normalized to 1."""
    uu, vv = np.meshgrid(np.arange(intrinsics.width, dtype=float),
                         np.arange(intrinsics.height, dtype=float))
    return np.stack([(uu - intrinsics.cx) / intrinsics.fx,
                     (vv - intrinsics.cy) / intrinsics.fy,
                     np.ones_like(uu)], axis=-1).reshape(-1, 3)


def _ray_box_depth(origin: np.ndarray, dirs: np.ndarray, box: Box3) -> np.ndarray:
    """Slab-method hit parameter per ray, inf for misses.

    Directions have camera-z component 1, so the parameter equals the
    camera-frame z depth of the hit point.
    """
    bmin = np.asarray(box.min)
    bmax = np.asarray(box.max)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (bmin - origin) / dirs
        t2 = (bmax - origin) / dirs
    near = np.minimum(t1, t2)
    far = np.maximum(t1, t2)
    # axis-parallel rays: hit the slab for all t or not at all
    parallel = dirs == 0.0
    if parallel.any():
        inside = (origin >= bmin) & (origin <= bmax)
        near = np.where(parallel, np.where(inside, -np.inf, np.inf), near)
        far = np.where(parallel, np.where(inside, np.inf, -np.inf), far)
    t_enter = near.max(axis=1)
    t_exit = far.min(axis=1)
    hit = (t_enter <= t_exit) & (t_exit > 0.0)
    t = np.where(t_enter > 0.0, t_enter, t_exit)
    return np.where(hit, t, np.inf)


def render_scene(scene: Scene, pose: Pose, intrinsics: CameraIntrinsics
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Depth (camera-z meters, 0 = miss) and true label image in one pass."""
    dirs = _pixel_rays(intrinsics) @ pose.rotation.T
    origin = pose.translation
    best_t = np.full(dirs.shape[0], np.inf)
    best_label = np.zeros(dirs.shape[0], dtype=np.int32)
    boxes = [(label, box) for label, box in scene.objects]
    boxes += [(0, box) for box in scene.occluders]
    for label, box in boxes:
        t = _ray_box_depth(origin, dirs, box)
        closer = t < best_t
        best_t = np.where(closer, t, best_t)
        best_label = np.where(closer, label, best_label)
    shape = (intrinsics.height, intrinsics.width)
    depth = np.where(np.isinf(best_t), 0.0, best_t).reshape(shape)
    labels = best_label.reshape(shape)
    return depth, labels


def render_depth(scene: Scene, pose: Pose, intrinsics: CameraIntrinsics) -> np.ndarray:
    return render_scene(scene, pose, intrinsics)[0]


def render_labels(scene: Scene, pose: Pose, intrinsics: CameraIntrinsics) -> np.ndarray:
    return render_scene(scene, pose, intrinsics)[1]


def frame_noise_key(timestamp: float) -> int:
    """Stable per-frame noise stream id: the timestamp's float64 bit pattern.

    Keying noise by time rather than stream position keeps a frame's
    rendered probabilities unchanged when moving frames are inserted or
    removed elsewhere in the stream.
    """
    return int(np.float64(timestamp).view(np.uint64))


def render_proba(true_labels, noise: NoiseModel, num_labels: int,
                 frame_key: int = 0) -> np.ndarray:
    """Per-pixel class probability image for a true label image.

    The top label receives ``noise.confidence``; every other label gets an
    equal share of the remainder; the float sum of each pixel's vector is
    corrected to 1 within one ulp. Deterministic per
    (seed, frame_key, pixel index) via a counter-based generator.
    """
    labels = np.asarray(true_labels)
    if labels.ndim != 2:
        raise ValueError(f"label image must be 2-D, got shape {labels.shape}")
    if labels.min() < 0 or labels.max() >= num_labels:
        raise ValueError(f"labels must lie in [0, {num_labels - 1}]")
    if num_labels < 2:
        raise ValueError("need at least two labels")
    n = labels.size
    rng = np.random.Generator(np.random.Philox(
        key=np.array([noise.seed, frame_key], dtype=np.uint64)))
    flips = rng.random(n) < noise.flip_rate
    wrong_draw = rng.integers(0, num_labels - 1, size=n)

    top = labels.ravel().astype(np.int64)
    wrong = wrong_draw + (wrong_draw >= top)
    top = np.where(flips, wrong, top)

    share = (1.0 - noise.confidence) / (num_labels - 1)
    probs = np.full((n, num_labels), share)
    rows = np.arange(n)
    probs[rows, top] = noise.confidence
    probs[rows, top] += 1.0 - probs.sum(axis=1)
    return probs.reshape(labels.shape + (num_labels,))


# --- frame emission ---------------------------------------------------------

def simulate_frames(scene: Scene, trajectory: Trajectory, intrinsics: CameraIntrinsics,
                    noise: NoiseModel, num_labels: int) -> list[SensorFrame]:
    """Render the trajectory into in-memory sensor frames.

    Depth and probabilities carry the same quantization the on-disk
    formats apply (millimeter depth, float32 probabilities), so a loaded
    frame stream compares equal to the in-memory one.
    """
    if num_labels <= scene.max_label:
        raise ValueError(f"num_labels={num_labels} too small for scene labels "
                         f"up to {scene.max_label}")
    frames = []
    for sched in expand_trajectory(trajectory):
        depth, labels = render_scene(scene, sched.pose, intrinsics)
        proba = render_proba(labels, noise, num_labels,
                             frame_key=frame_noise_key(sched.timestamp))
        depth_q = fileio.quantize_depth_mm(depth).astype(float) / 1000.0
        proba_q = proba.astype(np.float32).astype(float)
        frames.append(SensorFrame(timestamp=sched.timestamp, depth=depth_q,
                                  pose=sched.pose, intrinsics=intrinsics, proba=proba_q))
    return frames


def simulate(scene: Scene, trajectory: Trajectory, intrinsics: CameraIntrinsics,
             noise: NoiseModel, out_dir, num_labels: int) -> Path:
    """Render the trajectory to PGM/PROBIMG1 files plus a manifest.

    Returns the manifest path. Output is byte-deterministic for identical
    (scene, trajectory, intrinsics, noise.seed).
    """
    if num_labels <= scene.max_label:
        raise ValueError(f"num_labels={num_labels} too small for scene labels "
                         f"up to {scene.max_label}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for index, sched in enumerate(expand_trajectory(trajectory)):
        depth, labels = render_scene(scene, sched.pose, intrinsics)
        proba = render_proba(labels, noise, num_labels,
                             frame_key=frame_noise_key(sched.timestamp))
        depth_name = f"depth_{index:04d}.pgm"
        proba_name = f"proba_{index:04d}.probimg"
        fileio.write_depth_pgm(out / depth_name, depth)
        fileio.write_probimg(out / proba_name, proba)
        records.append({
            "depth_file": depth_name,
            "proba_file": proba_name,
            "timestamp": sched.timestamp,
            "pose": fileio.pose_record(sched.pose, intrinsics, sched.timestamp),
        })
    manifest = out / "manifest.json"
    fileio.write_manifest(manifest, records)
    return manifest


# --- scene / trajectory JSON -------------------------------------------------

def scene_from_json(obj: dict) -> Scene:
    """Parse {objects: [{label, min, max}], occluders: [{min, max}], roi: {min, max}}."""
    objects = [(int(o["label"]), fileio.box_from_json(o)) for o in obj.get("objects", [])]
    occluders = [fileio.box_from_json(o) for o in obj.get("occluders", [])]
    if "roi" not in obj:
        raise ValueError("scene is missing the roi box")
    return Scene(objects=objects, occluders=occluders, roi=fileio.box_from_json(obj["roi"]))


def load_scene(path) -> Scene:
    return scene_from_json(fileio.load_json(path))


def _waypoint_from_json(obj: dict) -> Waypoint:
    if "eye" in obj:
        pose = look_at(obj["eye"], obj["look_at"], obj.get("up", (0.0, 1.0, 0.0)))
    else:
        pose = Pose(np.asarray(obj["rotation"], dtype=float).reshape(3, 3),
                    np.asarray(obj["translation"], dtype=float))
    return Waypoint(pose=pose, timestamp=float(obj["timestamp"]),
                    hold_frames=int(obj.get("hold_frames", 1)))


def trajectory_from_json(obj: dict) -> tuple[Trajectory, CameraIntrinsics]:
    """Parse a trajectory file: intrinsics, frame timing, and waypoints.

    Waypoints specify either rotation + translation or eye + look_at
    (+ optional up).
    """
    intr_obj = obj["intrinsics"]
    intrinsics = CameraIntrinsics(fx=float(intr_obj["fx"]), fy=float(intr_obj["fy"]),
                                  cx=float(intr_obj["cx"]), cy=float(intr_obj["cy"]),
                                  width=int(intr_obj["width"]), height=int(intr_obj["height"]))
    trajectory = Trajectory(
        waypoints=[_waypoint_from_json(w) for w in obj["waypoints"]],
        frame_dt=float(obj.get("frame_dt", 0.25)),
        transition_frames=int(obj.get("transition_frames", 0)),
    )
    return trajectory, intrinsics


def load_trajectory(path) -> tuple[Trajectory, CameraIntrinsics]:
    return trajectory_from_json(fileio.load_json(path))
