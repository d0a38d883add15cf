"""Data sources for the three classification tasks.

Three generators live here:

- a planar two-region task on [0, 1]^2 with an exact analytic label oracle,
  used both for sampling training data and as the ground-truth labeler;
- an MNIST loader for the standard IDX files (big-endian, magic 0x803 for
  images and 0x801 for labels) with seeded stratified subsetting, plus the
  matching writer so the parser can be tested without the official files;
- a synthetic wrist-trajectory generator: windows of 10 timesteps for two
  wrists in 3-D, flattened to 60 coordinates in [0, 1], drawn from four
  scripted motion archetypes with optional noise.

Every sampler is deterministic given its seed, and every produced input lies
inside the [0, 1] box expected by the verifier's domain constraints.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .nn import Sample

# ---------------------------------------------------------------------------
# planar two-region task
# ---------------------------------------------------------------------------

# Class 1 is the union of a disc and an axis-aligned ellipse on a class-0
# background.  The exact parameters are fixed here so every sample, test, and
# report derived from this task is reproducible.
BLOB_DISC_CENTER = (0.30, 0.66)
BLOB_DISC_RADIUS = 0.16
BLOB_ELLIPSE_CENTER = (0.70, 0.32)
BLOB_ELLIPSE_SEMI_AXES = (0.20, 0.13)


def ground2d_label(point) -> int:
    """Exact class of a point in [0, 1]^2 under the two-blob ground truth."""
    x, y = float(point[0]), float(point[1])
    cx, cy = BLOB_DISC_CENTER
    if (x - cx) ** 2 + (y - cy) ** 2 <= BLOB_DISC_RADIUS ** 2:
        return 1
    ex, ey = BLOB_ELLIPSE_CENTER
    ax, ay = BLOB_ELLIPSE_SEMI_AXES
    if ((x - ex) / ax) ** 2 + ((y - ey) / ay) ** 2 <= 1.0:
        return 1
    return 0


def ground2d_label_batch(points: np.ndarray) -> np.ndarray:
    """Vectorized :func:`ground2d_label` for an (n, 2) array."""
    pts = np.asarray(points, dtype=float)
    cx, cy = BLOB_DISC_CENTER
    in_disc = (pts[:, 0] - cx) ** 2 + (pts[:, 1] - cy) ** 2 <= BLOB_DISC_RADIUS ** 2
    ex, ey = BLOB_ELLIPSE_CENTER
    ax, ay = BLOB_ELLIPSE_SEMI_AXES
    in_ell = ((pts[:, 0] - ex) / ax) ** 2 + ((pts[:, 1] - ey) / ay) ** 2 <= 1.0
    return (in_disc | in_ell).astype(np.int64)


def sample_ground2d(n: int, seed: int) -> list[Sample]:
    """Draw n uniform points on [0, 1]^2, labeled exactly by the oracle."""
    if n < 0:
        raise ValueError(f"sample count must be non-negative, got {n}")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0.0, 1.0, size=(n, 2))
    labels = ground2d_label_batch(pts)
    return [Sample(pts[i], int(labels[i])) for i in range(n)]


# ---------------------------------------------------------------------------
# MNIST (IDX files)
# ---------------------------------------------------------------------------

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    """Raised when an IDX file has a bad magic number or is truncated."""


@dataclass
class MnistSet:
    images: np.ndarray          # (n, 784) float64 in [0, 1]
    labels: np.ndarray          # (n,) int64 in [0, 10)

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"{self.images.shape[0]} images but {self.labels.shape[0]} labels")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def to_samples(self) -> list[Sample]:
        return [Sample(self.images[i], int(self.labels[i])) for i in range(len(self))]


def _read_exact(f, count: int, offset: int, what: str) -> bytes:
    data = f.read(count)
    if len(data) != count:
        raise IdxFormatError(
            f"truncated {what} at offset {offset}: wanted {count} bytes, "
            f"file ends after {len(data)}")
    return data


def read_idx_images(path) -> np.ndarray:
    """Raw image tensor (n, rows, cols) of unsigned bytes from an IDX file."""
    with open(path, "rb") as f:
        header = _read_exact(f, 16, 0, "image header")
        magic, n, rows, cols = struct.unpack(">IIII", header)
        if magic != IDX_IMAGES_MAGIC:
            raise IdxFormatError(
                f"bad image magic 0x{magic:08x} at offset 0 (want 0x{IDX_IMAGES_MAGIC:08x})")
        body = _read_exact(f, n * rows * cols, 16, "pixel data")
    return np.frombuffer(body, dtype=np.uint8).reshape(n, rows, cols)


def read_idx_labels(path) -> np.ndarray:
    """Label vector (n,) of unsigned bytes from an IDX file."""
    with open(path, "rb") as f:
        header = _read_exact(f, 8, 0, "label header")
        magic, n = struct.unpack(">II", header)
        if magic != IDX_LABELS_MAGIC:
            raise IdxFormatError(
                f"bad label magic 0x{magic:08x} at offset 0 (want 0x{IDX_LABELS_MAGIC:08x})")
        body = _read_exact(f, n, 8, "label data")
    return np.frombuffer(body, dtype=np.uint8).copy()


def write_idx_images(path, images: np.ndarray) -> None:
    """Inverse of :func:`read_idx_images`, for fixtures and round-trip tests."""
    arr = np.asarray(images, dtype=np.uint8)
    if arr.ndim != 3:
        raise ValueError(f"expected (n, rows, cols) array, got shape {arr.shape}")
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, *arr.shape))
        f.write(arr.tobytes())


def write_idx_labels(path, labels: np.ndarray) -> None:
    arr = np.asarray(labels, dtype=np.uint8)
    if arr.ndim != 1:
        raise ValueError(f"expected flat label array, got shape {arr.shape}")
    with open(path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABELS_MAGIC, arr.shape[0]))
        f.write(arr.tobytes())


def stratified_indices(labels: np.ndarray, subset_size: int, seed: int) -> np.ndarray:
    """Seeded class-proportional subset of indices, in ascending order.

    Each class receives floor(size * share) slots; leftover slots go to the
    classes with the largest fractional remainders (ties to the lower class),
    so the same (labels, size, seed) always selects the same indices.
    """
    labels = np.asarray(labels)
    n = labels.shape[0]
    if not 0 <= subset_size <= n:
        raise ValueError(f"subset size {subset_size} outside [0, {n}]")
    if subset_size == n:
        return np.arange(n)
    classes = np.unique(labels)
    shares = np.array([np.count_nonzero(labels == c) for c in classes], dtype=float)
    exact = subset_size * shares / n
    counts = np.floor(exact).astype(int)
    leftover = subset_size - int(counts.sum())
    if leftover:
        order = np.argsort(-(exact - counts), kind="stable")
        counts[order[:leftover]] += 1
    rng = np.random.default_rng(seed)
    chosen = []
    for c, k in zip(classes, counts):
        members = np.flatnonzero(labels == c)
        chosen.append(members[rng.permutation(members.shape[0])[:k]])
    return np.sort(np.concatenate(chosen)) if chosen else np.zeros(0, dtype=int)


def load_mnist(images_path, labels_path, subset_size: int | None = None,
               seed: int = 0) -> MnistSet:
    """Images scaled to [0, 1] and labels, optionally subset by stratum."""
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"{images.shape[0]} images but {labels.shape[0]} labels")
    flat = images.reshape(images.shape[0], -1).astype(float) / 255.0
    if subset_size is not None:
        idx = stratified_indices(labels, subset_size, seed)
        flat, labels = flat[idx], labels[idx]
    return MnistSet(flat, labels.astype(np.int64))


# ---------------------------------------------------------------------------
# synthetic wrist trajectories
# ---------------------------------------------------------------------------

TRAJECTORY_CLASSES = ("assembling", "retrieving", "reaching", "abnormal")
TRAJECTORY_STEPS = 10
TRAJECTORY_DIM = TRAJECTORY_STEPS * 2 * 3    # step-major: (t, wrist, axis)
TRAJECTORY_VELOCITY_CAP = 0.08               # max per-axis step between timesteps


def _archetype_curve(label: int) -> np.ndarray:
    """Noise-free (10, 2, 3) wrist path for one motion class.

    All curves keep per-axis steps at or below 0.055, leaving headroom for
    noise under the velocity cap.
    """
    u = np.linspace(0.0, 1.0, TRAJECTORY_STEPS)
    right = np.empty((TRAJECTORY_STEPS, 3))
    left = np.empty((TRAJECTORY_STEPS, 3))
    if label == 0:        # assembling: wrists converge with a mid-path dip
        right[:, 0] = 0.70 - 0.18 * u
        right[:, 1] = 0.30 + 0.20 * u
        right[:, 2] = 0.50 - 0.10 * np.sin(np.pi * u)
        left[:, 0] = 0.30 + 0.18 * u
        left[:, 1] = 0.70 - 0.20 * u
        left[:, 2] = 0.50 - 0.10 * np.sin(np.pi * u)
    elif label == 1:      # retrieving: right wrist pulls back and down
        right[:, 0] = 0.55 + 0.15 * u
        right[:, 1] = 0.60 - 0.35 * u
        right[:, 2] = 0.45 - 0.10 * u
        left[:, 0] = 0.30
        left[:, 1] = 0.40
        left[:, 2] = 0.40
    elif label == 2:      # reaching: right wrist extends forward and up
        right[:, 0] = 0.60 - 0.15 * u
        right[:, 1] = 0.25 + 0.43 * u
        right[:, 2] = 0.35 + 0.20 * u
        left[:, 0] = 0.35
        left[:, 1] = 0.35
        left[:, 2] = 0.35 + 0.05 * u
    elif label == 3:      # abnormal: bounded jitter around a hold position
        zig = 0.025 * np.where(np.arange(TRAJECTORY_STEPS) % 2 == 0, 1.0, -1.0)
        right[:, 0] = 0.50 + zig
        right[:, 1] = 0.45 - zig
        right[:, 2] = 0.45 + 0.04 * np.sin(3.0 * np.pi * u)
        left[:, 0] = 0.45 - zig
        left[:, 1] = 0.55 + zig
        left[:, 2] = 0.45 - 0.04 * np.sin(3.0 * np.pi * u)
    else:
        raise ValueError(f"unknown trajectory class {label}")
    return np.stack([right, left], axis=1)


def gen_trajectories(n: int, seed: int, noise: float = 0.01) -> list[Sample]:
    """n class-balanced trajectory windows, flattened to 60-vectors.

    Labels cycle through the four classes; ``noise`` is the amplitude of the
    uniform perturbation applied per coordinate (0 reproduces the archetype
    curves exactly).  Outputs are clipped to [0, 1], and consecutive timesteps
    never move more than TRAJECTORY_VELOCITY_CAP per axis.
    """
    if n < 0:
        raise ValueError(f"sample count must be non-negative, got {n}")
    if not 0.0 <= noise <= 0.012:
        raise ValueError(f"noise amplitude {noise} outside [0, 0.012]")
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        label = i % len(TRAJECTORY_CLASSES)
        curve = _archetype_curve(label)
        if noise:
            curve = curve + rng.uniform(-noise, noise, size=curve.shape)
        curve = np.clip(curve, 0.0, 1.0)
        out.append(Sample(curve.reshape(-1), label))
    return out


def trajectory_steps(x: np.ndarray) -> np.ndarray:
    """Reshape a flat 60-vector back to (timestep, wrist, axis)."""
    return np.asarray(x, dtype=float).reshape(TRAJECTORY_STEPS, 2, 3)


def nearest_archetype(x: np.ndarray) -> int:
    """Ground-truth class of a flat window: nearest noise-free archetype (L2)."""
    curves = np.stack([_archetype_curve(k).reshape(-1)
                       for k in range(len(TRAJECTORY_CLASSES))])
    dists = np.linalg.norm(curves - np.asarray(x, dtype=float), axis=1)
    return int(np.argmin(dists))


def check_velocity_cap(x: np.ndarray) -> bool:
    """True when consecutive timesteps respect the per-axis velocity cap."""
    steps = trajectory_steps(x)
    return bool(np.all(np.abs(np.diff(steps, axis=0)) <= TRAJECTORY_VELOCITY_CAP + 1e-12))
