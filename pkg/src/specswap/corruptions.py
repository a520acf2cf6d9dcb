"""Common-corruption generators at five severities.

A desk-scale stand-in for the published corruption benchmarks: the seven
types that stay well defined at tiny resolutions. Severity parameters
are this module's own constants (versioned with the package), chosen so
mean squared distortion grows strictly with the level:

    gaussian_noise   additive N(0, sigma), sigma 0.04 .. 0.15
    shot_noise       Poisson(x * rate) / rate, rate 60 .. 3
    impulse_noise    salt & pepper, flip fraction 0.02 .. 0.17
    defocus_blur     anti-aliased disk kernel, radius 0.8 .. 3.0
    brightness       additive offset 0.05 .. 0.30
    contrast         shrink toward per-channel mean, factor 0.75 .. 0.2
    pixelate         area downscale to a fraction of N, then nearest upscale

Every output is clamped to [0, 1]. Randomized types draw an independent
RNG stream per (seed, item index), so corrupting a dataset is
deterministic and order-independent.
"""

from dataclasses import dataclass

import numpy as np

from .data import Dataset

CORRUPTION_TYPES = (
    "gaussian_noise",
    "shot_noise",
    "impulse_noise",
    "defocus_blur",
    "brightness",
    "contrast",
    "pixelate",
)

SEVERITY_PARAMS = {
    "gaussian_noise": (0.04, 0.06, 0.08, 0.10, 0.15),
    "shot_noise": (60.0, 25.0, 12.0, 5.0, 3.0),
    "impulse_noise": (0.02, 0.04, 0.07, 0.11, 0.17),
    "defocus_blur": (0.8, 1.2, 1.6, 2.2, 3.0),
    "brightness": (0.05, 0.10, 0.15, 0.22, 0.30),
    "contrast": (0.75, 0.60, 0.45, 0.30, 0.20),
    "pixelate": (0.75, 0.62, 0.50, 0.38, 0.25),  # fraction of N kept
}


@dataclass
class CorruptionSpec:
    kind: str
    severity: int
    seed: int = 0

    def __post_init__(self):
        if self.kind not in CORRUPTION_TYPES:
            raise ValueError(f"unknown corruption type {self.kind!r}")
        if not 1 <= self.severity <= 5:
            raise ValueError("severity must be in 1..5")

    @property
    def param(self):
        return SEVERITY_PARAMS[self.kind][self.severity - 1]


def _disk_kernel(radius: float, oversample: int = 8) -> np.ndarray:
    # fractional pixel coverage of a disk, estimated on a subpixel grid
    half = int(np.ceil(radius))
    size = 2 * half + 1
    sub = (np.arange(size * oversample) + 0.5) / oversample - half - 0.5
    dy, dx = np.meshgrid(sub, sub, indexing="ij")
    inside = (dy ** 2 + dx ** 2 <= radius ** 2).astype(np.float64)
    kernel = inside.reshape(size, oversample, size, oversample).mean(axis=(1, 3))
    return kernel / kernel.sum()


def _convolve_reflect(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    half = kernel.shape[0] // 2
    padded = np.pad(image, ((0, 0), (half, half), (half, half)), mode="reflect")
    windows = np.lib.stride_tricks.sliding_window_view(
        padded, kernel.shape, axis=(1, 2))
    return np.einsum("chwij,ij->chw", windows, kernel, optimize=True)


def _overlap_matrix(rows: int, cols: int, cell: float) -> np.ndarray:
    # weights[i, j] = overlap of [i*cell, (i+1)*cell) with [j, j+1)
    weights = np.zeros((rows, cols))
    for i in range(rows):
        lo, hi = i * cell, (i + 1) * cell
        for j in range(int(np.floor(lo)), min(cols, int(np.ceil(hi)))):
            weights[i, j] = min(hi, j + 1) - max(lo, j)
    return weights


def _pixelate(image: np.ndarray, fraction: float) -> np.ndarray:
    # area-average down to t cells, area-blend back up; integer factors
    # reduce to exact block replication
    n = image.shape[-1]
    t = max(2, int(round(n * fraction)))
    down_w = _overlap_matrix(t, n, n / t) / (n / t)
    up_w = _overlap_matrix(n, t, t / n) / (t / n)
    down = np.einsum("ih,chw,jw->cij", down_w, image, down_w, optimize=True)
    return np.einsum("hi,cij,wj->chw", up_w, down, up_w, optimize=True)


def corrupt(image: np.ndarray, spec: CorruptionSpec, rng=None) -> np.ndarray:
    """Apply one corruption to a (C, H, W) image; output clamped to [0, 1]."""
    image = np.asarray(image, dtype=np.float64)
    p = spec.param
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence((int(spec.seed), 0)))
    if spec.kind == "gaussian_noise":
        out = image + rng.normal(0.0, p, size=image.shape)
    elif spec.kind == "shot_noise":
        out = rng.poisson(np.clip(image, 0.0, 1.0) * p) / p
    elif spec.kind == "impulse_noise":
        u = rng.random(image.shape)
        out = image.copy()
        out[u < p / 2] = 0.0
        out[u > 1 - p / 2] = 1.0
    elif spec.kind == "defocus_blur":
        out = _convolve_reflect(image, _disk_kernel(p))
    elif spec.kind == "brightness":
        out = image + p
    elif spec.kind == "contrast":
        means = image.mean(axis=(1, 2), keepdims=True)
        out = (image - means) * p + means
    else:  # pixelate
        out = _pixelate(image, p)
    return np.clip(out, 0.0, 1.0)


def corrupt_dataset(dataset: Dataset, kind: str, severity: int,
                    seed: int = 0) -> Dataset:
    """Corrupt every image with its own (seed, index) RNG stream."""
    spec = CorruptionSpec(kind, severity, seed)
    out = np.empty_like(dataset.images)
    for i, img in enumerate(dataset.images):
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), i)))
        out[i] = corrupt(img, spec, rng=rng)
    corrupted = dataset.replace_images(out)
    corrupted.meta.update({"corruption": kind, "severity": severity,
                           "corruption_seed": int(seed)})
    return corrupted


def corruption_suite(dataset: Dataset, seed: int = 0) -> dict:
    """All 7 x 5 corrupted copies, keyed by (type, severity)."""
    return {
        (kind, severity): corrupt_dataset(dataset, kind, severity, seed)
        for kind in CORRUPTION_TYPES
        for severity in range(1, 6)
    }
