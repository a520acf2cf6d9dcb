"""Dataset generation and file I/O.

Two on-disk formats are supported:

* the public CIFAR binary-batch layout (3073-byte records: one label
  byte followed by 3072 pixel bytes as R, G, B planes of a 32x32 image);
* a native lossless format ("SSWD") that round-trips float64 pixels, so
  corrupted/augmented datasets can be stored without quantization:
  magic "SSWD", version u32, K u32, count u32, C u32, H u32, W u32,
  then per item a u32 label and C*H*W little-endian float64 pixels.

The synthetic generator produces K classes of low-frequency structural
templates (oriented stripes, checkerboards, centered blobs/rings) with
per-image noise and a random +-1 pixel cyclic translation. The cyclic
shift leaves the amplitude spectrum untouched and moves only the phase,
so class structure lives where the augmentation method expects it.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

SSWD_MAGIC = b"SSWD"
SSWD_VERSION = 1


@dataclass
class Dataset:
    images: np.ndarray  # (n, C, H, W) float64
    labels: np.ndarray  # (n,) int64
    num_classes: int
    split: str = "train"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4:
            raise ValueError(f"images must be (n, C, H, W), got {self.images.shape}")
        if len(self.images) != len(self.labels):
            raise ValueError("images and labels disagree in length")
        if len(self.labels) and (self.labels.min() < 0
                                 or self.labels.max() >= self.num_classes):
            raise ValueError("labels out of range")

    def __len__(self):
        return len(self.images)

    @property
    def image_shape(self):
        return self.images.shape[1:]

    def subset(self, indices) -> "Dataset":
        return Dataset(self.images[indices], self.labels[indices],
                       self.num_classes, self.split, dict(self.meta))

    def replace_images(self, images) -> "Dataset":
        return Dataset(images, self.labels.copy(), self.num_classes,
                       self.split, dict(self.meta))


def _grids(n):
    h, w = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return h, w


PHASE_CODE_AMPLITUDE = 0.11

# (psi_h, psi_w) relative-phase codes for the first four classes; both
# values survive cyclic translation, and the w-codes +-pi/2 are the fixed
# points of a horizontal flip, so augmentation cannot alias classes.
# Classes 0/1 differ in both codes, so small K picks distant pairs.
_PHASE_CODES = ((0.0, np.pi / 2), (np.pi, -np.pi / 2),
                (np.pi, np.pi / 2), (0.0, -np.pi / 2))


def _harmonic_pair(theta, psi):
    # waveform shape is set by the relative phase of the two harmonics:
    # psi shifts where the harmonics reinforce, not how much energy they
    # carry, so all codes share one amplitude spectrum
    return np.sin(theta) + np.sin(2 * theta + psi)


def _template(class_index: int, n: int) -> np.ndarray:
    h, w = _grids(n)
    r2 = (h - (n - 1) / 2.0) ** 2 + (w - (n - 1) / 2.0) ** 2
    c = class_index % 10
    if c < 4:  # phase-coded classes: identical amplitude spectra
        psi_h, psi_w = _PHASE_CODES[c]
        a = PHASE_CODE_AMPLITUDE
        return (0.5 + a * _harmonic_pair(2 * np.pi * h / n, psi_h)
                + a * _harmonic_pair(2 * np.pi * w / n, psi_w))
    if c == 4:  # bright centered blob
        return 0.3 + 0.5 * np.exp(-r2 / (2 * (n / 6.0) ** 2))
    if c == 5:  # dark centered blob
        return 0.7 - 0.5 * np.exp(-r2 / (2 * (n / 6.0) ** 2))
    if c == 6:  # ring
        return 0.3 + 0.5 * np.exp(-(np.sqrt(r2) - n / 4.0) ** 2 / (2 * (n / 12.0) ** 2))
    if c == 7:  # smooth checkerboard
        return 0.5 + 0.3 * np.sin(2 * np.pi * 2 * h / n) * np.sin(2 * np.pi * 2 * w / n)
    if c == 8:  # coarse checkerboard
        return 0.5 + 0.3 * np.sin(2 * np.pi * h / n) * np.sin(2 * np.pi * w / n)
    return 0.3 + 0.5 * np.exp(-(h - (n - 1) / 2.0) ** 2 / (2 * (n / 8.0) ** 2))  # bright band


def synth_generate(num_classes: int, per_class: int, size: int = 16,
                   seed: int = 0, channels: int = 1,
                   split: str = "train") -> Dataset:
    """Seeded synthetic dataset with class-specific structural templates."""
    if not 2 <= num_classes <= 10:
        raise ValueError("num_classes must be in 2..10")
    if size < 2 or size & (size - 1):
        raise ValueError("size must be a power of two")
    templates = [_template(c, size) for c in range(num_classes)]
    images = np.empty((num_classes * per_class, channels, size, size))
    labels = np.empty(num_classes * per_class, dtype=np.int64)
    i = 0
    for c in range(num_classes):
        for j in range(per_class):
            rng = np.random.default_rng(
                np.random.SeedSequence((int(seed), _split_tag(split), c, j)))
            shift = rng.integers(-1, 2, size=2)
            img = np.roll(templates[c], shift, axis=(0, 1))
            img = img[None] + rng.normal(0.0, 0.05, size=(channels, size, size))
            images[i] = np.clip(img, 0.0, 1.0)
            labels[i] = c
            i += 1
    return Dataset(images, labels, num_classes, split,
                   meta={"source": "synth", "seed": int(seed)})


def _split_tag(split: str) -> int:
    return 0 if split == "train" else 1


def load_cifar_batch(path, num_classes: int = 10) -> Dataset:
    """Read one CIFAR binary batch file; pixels scaled to [0, 1] by /255."""
    with open(path, "rb") as fh:
        blob = fh.read()
    record = 3073
    if len(blob) == 0 or len(blob) % record != 0:
        raise ValueError(
            f"{path}: length {len(blob)} is not a multiple of {record}")
    count = len(blob) // record
    raw = np.frombuffer(blob, dtype=np.uint8).reshape(count, record)
    labels = raw[:, 0].astype(np.int64)
    if labels.max(initial=0) >= num_classes:
        raise ValueError(f"{path}: label {labels.max()} >= num_classes {num_classes}")
    images = raw[:, 1:].reshape(count, 3, 32, 32).astype(np.float64) / 255.0
    return Dataset(images, labels, num_classes, "train", meta={"source": str(path)})


def save_dataset(dataset: Dataset, path) -> None:
    n, c, h, w = dataset.images.shape
    with open(path, "wb") as fh:
        fh.write(SSWD_MAGIC)
        fh.write(struct.pack("<6I", SSWD_VERSION, dataset.num_classes, n, c, h, w))
        for img, label in zip(dataset.images, dataset.labels):
            fh.write(struct.pack("<I", int(label)))
            fh.write(np.ascontiguousarray(img, dtype="<f8").tobytes())


def load_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != SSWD_MAGIC:
        raise ValueError(f"{path}: not a dataset file (bad magic {blob[:4]!r})")
    version, k, n, c, h, w = struct.unpack("<6I", blob[4:28])
    if version != SSWD_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    item = 4 + c * h * w * 8
    if len(blob) != 28 + n * item:
        raise ValueError(f"{path}: truncated payload")
    images = np.empty((n, c, h, w))
    labels = np.empty(n, dtype=np.int64)
    offset = 28
    for i in range(n):
        labels[i] = struct.unpack("<I", blob[offset:offset + 4])[0]
        pixels = np.frombuffer(blob[offset + 4:offset + item], dtype="<f8")
        images[i] = pixels.reshape(c, h, w)
        offset += item
    return Dataset(images, labels, k, "train", meta={"source": str(path)})


def batch_iter(dataset: Dataset, batch_size: int, shuffle_seed=None):
    """Yield (images, labels) batches; seeded permutation when asked.

    The final short batch is kept. ``shuffle_seed=None`` preserves the
    stored order.
    """
    order = np.arange(len(dataset))
    if shuffle_seed is not None:
        rng = np.random.default_rng(np.random.SeedSequence(shuffle_seed))
        order = rng.permutation(len(dataset))
    for start in range(0, len(dataset), batch_size):
        idx = order[start:start + batch_size]
        yield dataset.images[idx], dataset.labels[idx]
