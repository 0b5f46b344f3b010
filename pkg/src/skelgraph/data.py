"""Sequence ingestion, preprocessing, and a seeded synthetic generator.

Sequence files are JSONL: a header line
``{"n_joints": int, "actors": int, "label": int|null, "topology": name}``
followed by one line per frame, ``{"t": int, "joints": [[x,y,z], ...]}``
with ``actors * n_joints`` coordinate triples in actor-major order,
meters.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .graphs import dump_json
from .stgraph import SkeletonTopology, save_topology

__all__ = [
    "SkeletonSequence",
    "DatasetSplit",
    "load_sequence",
    "save_sequence",
    "segment_split",
    "interpolate_to_length",
    "generate_synthetic",
    "toy_topology",
    "save_dataset",
    "load_dataset",
]


@dataclass
class SkeletonSequence:
    """A time-ordered skeleton recording: frames of shape (P, N0, 3)."""

    frames: np.ndarray
    label: int | None = None
    topology_name: str = "toy15"
    source_id: str = ""

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim == 3:
            self.frames = self.frames[:, None, :, :]
        if self.frames.ndim != 4 or self.frames.shape[3] != 3:
            raise DataError(f"frames must have shape (T, P, N, 3), got {self.frames.shape}")
        if self.frames.shape[0] < 1 or self.frames.shape[1] < 1:
            raise DataError("sequence needs at least one frame and one actor")
        if not np.all(np.isfinite(self.frames)):
            raise DataError(f"sequence {self.source_id or '<unnamed>'} has non-finite coordinates")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def num_actors(self) -> int:
        return self.frames.shape[1]

    @property
    def num_joints(self) -> int:
        return self.frames.shape[2]

    def actor_frames(self, actor: int = 0) -> np.ndarray:
        """Frames of one actor, shape (T, N, 3)."""
        return self.frames[:, actor]

    def replace_frames(self, frames: np.ndarray, suffix: str = "") -> "SkeletonSequence":
        return SkeletonSequence(
            frames=frames,
            label=self.label,
            topology_name=self.topology_name,
            source_id=self.source_id + suffix,
        )


@dataclass
class DatasetSplit:
    train: list[SkeletonSequence]
    test: list[SkeletonSequence]
    num_classes: int
    seed: int
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.train or not self.test:
            raise DataError("both train and test splits must be nonempty")
        train_ids = {s.source_id for s in self.train}
        test_ids = {s.source_id for s in self.test}
        if train_ids & test_ids:
            raise DataError(f"train/test share source ids: {sorted(train_ids & test_ids)[:3]}")
        for seq in self.train + self.test:
            if seq.label is None:
                raise DataError(f"sequence {seq.source_id} is unlabeled")


# ---------------------------------------------------------------------------
# Sequence file I/O
# ---------------------------------------------------------------------------

def save_sequence(seq: SkeletonSequence, path) -> None:
    header = {
        "n_joints": seq.num_joints,
        "actors": seq.num_actors,
        "label": seq.label,
        "topology": seq.topology_name,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for t in range(seq.num_frames):
            joints = seq.frames[t].reshape(-1, 3).tolist()
            fh.write(json.dumps({"joints": joints, "t": t}, sort_keys=True) + "\n")


def load_sequence(path) -> SkeletonSequence:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DataError("empty sequence file", path=path)
    try:
        header = json.loads(lines[0])
        n_joints = int(header["n_joints"])
        actors = int(header["actors"])
        label = header.get("label")
        topology = header.get("topology", "")
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed header: {exc}", path=path, line=1) from exc
    frames = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            joints = np.asarray(obj["joints"], dtype=np.float64)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed frame: {exc}", path=path, line=lineno) from exc
        if joints.shape != (actors * n_joints, 3):
            raise DataError(
                f"frame has {joints.shape[0] if joints.ndim else 0} joints, "
                f"expected {actors * n_joints}",
                path=path, line=lineno,
            )
        if not np.all(np.isfinite(joints)):
            raise DataError("frame has non-finite coordinates", path=path, line=lineno)
        frames.append(joints.reshape(actors, n_joints, 3))
    if not frames:
        raise DataError("sequence file has no frames", path=path)
    return SkeletonSequence(
        frames=np.stack(frames),
        label=None if label is None else int(label),
        topology_name=topology,
        source_id=Path(path).stem,
    )


# ---------------------------------------------------------------------------
# Preprocessing
# ---------------------------------------------------------------------------

def segment_boundaries(total: int, num_segments: int) -> list[tuple[int, int]]:
    """Equal partition of [0, total); the remainder goes to leading segments."""
    base, extra = divmod(total, num_segments)
    bounds = []
    start = 0
    for s in range(num_segments):
        length = base + (1 if s < extra else 0)
        bounds.append((start, start + length))
        start += length
    return bounds


def segment_split(seq: SkeletonSequence, num_segments: int,
                  picks: list[int]) -> list[SkeletonSequence]:
    """Split a sequence into equal segments and pick one frame per segment.

    ``picks`` are 1-based offsets into each segment; every pick yields one
    derived sequence of length ``num_segments``.
    """
    t0 = seq.num_frames
    if t0 < num_segments:
        raise DataError(f"sequence length {t0} is shorter than {num_segments} segments")
    shortest = t0 // num_segments
    for pick in picks:
        if not (1 <= pick <= shortest):
            raise ConfigError(f"pick {pick} exceeds the shortest segment length {shortest}")
    bounds = segment_boundaries(t0, num_segments)
    out = []
    for pick in picks:
        indices = [start + pick - 1 for (start, _end) in bounds]
        out.append(seq.replace_frames(seq.frames[indices], suffix=f"#p{pick}"))
    return out


def interpolate_to_length(seq: SkeletonSequence, target: int,
                          seed: int = 0) -> SkeletonSequence:
    """Resample a sequence to exactly ``target`` frames.

    Short sequences grow by inserting means of adjacent frames
    (left-to-right sweep, repeated until long enough, then truncated);
    long sequences are randomly subsampled (seeded, order-preserving).
    """
    if target < 3:
        raise ConfigError("target length must be at least 3 (windows need 3 frames)")
    t0 = seq.num_frames
    if t0 == target:
        return seq
    if t0 > target:
        rng = np.random.default_rng(seed)
        keep = np.sort(rng.choice(t0, size=target, replace=False))
        return seq.replace_frames(seq.frames[keep], suffix=f"#s{target}")
    if t0 < 2:
        raise DataError("cannot interpolate a single-frame sequence")
    frames = list(seq.frames)
    while len(frames) < target:
        grown = []
        for idx, frame in enumerate(frames):
            grown.append(frame)
            if idx + 1 < len(frames):
                grown.append(0.5 * (frame + frames[idx + 1]))
        frames = grown
    return seq.replace_frames(np.stack(frames[:target]), suffix=f"#i{target}")


# ---------------------------------------------------------------------------
# Toy skeleton and synthetic motions
# ---------------------------------------------------------------------------

TOY_JOINTS = [
    "head", "neck", "spine",
    "l_shoulder", "l_elbow", "l_wrist",
    "r_shoulder", "r_elbow", "r_wrist",
    "l_hip", "l_knee", "l_ankle",
    "r_hip", "r_knee", "r_ankle",
]

TOY_BONES = [
    (0, 1), (1, 2),
    (1, 3), (3, 4), (4, 5),
    (1, 6), (6, 7), (7, 8),
    (2, 9), (9, 10), (10, 11),
    (2, 12), (12, 13), (13, 14),
]

# Salient non-physical pairs (hands vs. head) and latent weak pairs.
TOY_STRONG = [(0, 5), (0, 8)]
TOY_WEAK = [(5, 8), (5, 9), (8, 12)]

TOY_REST_POSE = np.array([
    [0.00, 0.00, 1.70],   # head
    [0.00, 0.00, 1.55],   # neck
    [0.00, 0.00, 1.20],   # spine
    [0.20, 0.00, 1.50],   # l_shoulder
    [0.45, 0.00, 1.50],   # l_elbow
    [0.70, 0.00, 1.50],   # l_wrist
    [-0.20, 0.00, 1.50],  # r_shoulder
    [-0.45, 0.00, 1.50],  # r_elbow
    [-0.70, 0.00, 1.50],  # r_wrist
    [0.12, 0.00, 1.05],   # l_hip
    [0.12, 0.00, 0.55],   # l_knee
    [0.12, 0.00, 0.05],   # l_ankle
    [-0.12, 0.00, 1.05],  # r_hip
    [-0.12, 0.00, 0.55],  # r_knee
    [-0.12, 0.00, 0.05],  # r_ankle
])


def toy_topology() -> SkeletonTopology:
    """Bundled 15-joint tree skeleton used by the synthetic generator."""
    return SkeletonTopology(
        num_joints=15,
        bones=TOY_BONES,
        nonphysical_strong=TOY_STRONG,
        nonphysical_weak=TOY_WEAK,
        joint_names=TOY_JOINTS,
    )


def _rotate_chain(pose, pivot, chain, axis, angle):
    """Rigidly rotate ``chain`` joints around the pivot joint."""
    c, s = math.cos(angle), math.sin(angle)
    if axis == "y":
        rot = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    else:  # "x"
        rot = np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    center = pose[pivot]
    pose[chain] = (pose[chain] - center) @ rot.T + center


def _motion_profile(t, num_frames, phase):
    # One full raise-and-return cycle, always to one side of the rest pose.
    return 0.5 * (1.0 - math.cos(2.0 * math.pi * t / num_frames + phase))


def _synthesize_frames(label, num_frames, amplitude, phase):
    frames = np.empty((num_frames, TOY_REST_POSE.shape[0], 3))
    for t in range(num_frames):
        pose = TOY_REST_POSE.copy()
        s = _motion_profile(t, num_frames, phase)
        if label % 4 == 0:
            # right arm arcs toward the head
            _rotate_chain(pose, 6, [7, 8], "y", amplitude * 1.2 * s)
        elif label % 4 == 1:
            # left leg swings forward
            _rotate_chain(pose, 9, [10, 11], "x", amplitude * 0.9 * s)
        elif label % 4 == 2:
            # whole body sways sideways
            pose[:, 0] += amplitude * 0.4 * s
        else:
            # both arms counter-rotate
            _rotate_chain(pose, 3, [4, 5], "y", amplitude * 0.8 * s)
            _rotate_chain(pose, 6, [7, 8], "y", -amplitude * 0.8 * s)
        frames[t] = pose
    return frames


def generate_synthetic(num_classes: int = 4, train_per_class: int = 50,
                       test_per_class: int = 25, num_frames: int = 32,
                       noise_sigma: float = 0.02, seed: int = 0) -> DatasetSplit:
    """Seeded synthetic skeleton-action dataset on the toy topology.

    Each class is a distinct parametric motion with mild per-sequence
    amplitude/phase jitter; classes are separable by construction at
    sigma = 0. Within each class, test sequences are the odd indices among
    the first 2 * test_per_class generated sequences.
    """
    if num_classes < 2:
        raise ConfigError("need at least 2 classes")
    if train_per_class < 1 or test_per_class < 1:
        raise ConfigError("need at least one train and one test sequence per class")
    if num_frames < 3:
        raise ConfigError("sequences need at least 3 frames")
    if noise_sigma < 0:
        raise ConfigError("noise sigma must be >= 0")

    rng = np.random.default_rng(seed)
    train, test = [], []
    per_class = train_per_class + test_per_class
    for label in range(num_classes):
        for idx in range(per_class):
            amplitude = 1.0 + 0.2 * (2.0 * rng.random() - 1.0)
            phase = 0.25 * (2.0 * rng.random() - 1.0)
            frames = _synthesize_frames(label, num_frames, amplitude, phase)
            if noise_sigma > 0:
                frames = frames + rng.normal(0.0, noise_sigma, size=frames.shape)
            seq = SkeletonSequence(
                frames=frames,
                label=label,
                source_id=f"syn-c{label}-i{idx:04d}",
            )
            is_test = idx < 2 * test_per_class and idx % 2 == 1
            (test if is_test else train).append(seq)
    config = {
        "classes": num_classes,
        "train_per_class": train_per_class,
        "test_per_class": test_per_class,
        "frames": num_frames,
        "noise_sigma": noise_sigma,
        "seed": seed,
    }
    return DatasetSplit(train=train, test=test, num_classes=num_classes,
                        seed=seed, config=config)


# ---------------------------------------------------------------------------
# Dataset directory layout: manifest.json + topology.json + one JSONL per
# sequence under train/ and test/.
# ---------------------------------------------------------------------------

def save_dataset(split: DatasetSplit, root, topology: SkeletonTopology | None = None) -> None:
    root = Path(root)
    (root / "train").mkdir(parents=True, exist_ok=True)
    (root / "test").mkdir(parents=True, exist_ok=True)
    manifest = {
        "classes": split.num_classes,
        "seed": split.seed,
        "config": split.config,
        "train": [],
        "test": [],
    }
    for part, sequences in (("train", split.train), ("test", split.test)):
        for seq in sequences:
            rel = f"{part}/{seq.source_id}.jsonl"
            save_sequence(seq, root / rel)
            manifest[part].append(rel)
    if topology is not None:
        save_topology(topology, root / "topology.json")
        manifest["topology"] = "topology.json"
    dump_json(manifest, root / "manifest.json")


def load_dataset(root) -> DatasetSplit:
    root = Path(root)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise DataError("manifest.json not found", path=root)
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    train = [load_sequence(root / rel) for rel in manifest["train"]]
    test = [load_sequence(root / rel) for rel in manifest["test"]]
    for part in (train, test):
        for seq in part:
            if seq.label is None:
                raise DataError(f"sequence {seq.source_id} has no label", path=root)
    return DatasetSplit(
        train=train,
        test=test,
        num_classes=int(manifest["classes"]),
        seed=int(manifest.get("seed", 0)),
        config=dict(manifest.get("config", {})),
    )
