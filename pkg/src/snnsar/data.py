"""Datasets on disk and in memory, synthetic generators, and noise injection.

Images are held as float64 matrices scaled to [0, 1]; 8-bit files are
divided by 255 and 16-bit files by 65535 on load.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
from PIL import Image as PILImage, UnidentifiedImageError

from .errors import DataError, DomainError, NumericError

IMAGE_SUFFIXES = (".pgm", ".png")
SPLITS = ("train", "test")


@dataclass
class Sample:
    image: np.ndarray
    label: str
    split: str
    path: Optional[str] = None


@dataclass
class SplitSpec:
    """How to split class directories that lack ``train/`` and ``test/``."""

    test_fraction: float = 0.25
    seed: int = 0


@dataclass
class Dataset:
    classes: list[str]
    samples: list[Sample]
    manifest: dict = field(default_factory=dict)

    def split(self, name: str) -> list[Sample]:
        return [s for s in self.samples if s.split == name]

    def images(self, split: str) -> list[np.ndarray]:
        return [s.image for s in self.split(split)]

    def labels(self, split: str) -> list[str]:
        return [s.label for s in self.split(split)]

    def representatives(self) -> list[np.ndarray]:
        """First training image of every class, in class order."""
        out = []
        for c in self.classes:
            hit = next((s for s in self.samples if s.split == "train" and s.label == c), None)
            if hit is None:
                raise DataError(f"class {c!r} has no training sample")
            out.append(hit.image)
        return out


# image files


def read_image(path) -> np.ndarray:
    path = Path(path)
    try:
        with PILImage.open(path) as im:
            im.load()
            mode = im.mode
            arr = np.asarray(im)
    except (UnidentifiedImageError, OSError) as exc:
        raise DataError(f"{path}: unreadable image ({exc})") from None
    if mode == "L":
        scale = 255.0
    elif mode in ("I;16", "I;16B", "I;16L", "I"):
        scale = 65535.0
    elif mode == "1":
        scale = 1.0
    else:
        raise DataError(f"{path}: unsupported image mode {mode!r}; expected 8- or 16-bit grayscale")
    img = arr.astype(np.float64) / scale
    if img.ndim != 2:
        raise DataError(f"{path}: expected a single-channel image")
    return img


def write_pgm(path, image) -> None:
    """Write a [0, 1] matrix (or uint8 array) as an 8-bit binary PGM."""
    arr = np.asarray(image)
    if arr.dtype != np.uint8:
        arr = np.clip(np.rint(np.asarray(arr, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    PILImage.fromarray(arr, mode="L").save(Path(path), format="PPM")


# loading


def _images_in(directory: Path) -> list[Path]:
    return sorted(p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)


def load_dataset(root, split_spec: SplitSpec | None = None) -> Dataset:
    """Read ``root/<class>/{train,test}/*`` (or ``root/<class>/*`` split by ratio)."""
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"{root}: dataset root is not a directory")
    split_spec = split_spec or SplitSpec()
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        raise DataError(f"{root}: no class directories found")
    samples = []
    for cdir in class_dirs:
        label = cdir.name
        explicit = [s for s in SPLITS if (cdir / s).is_dir()]
        if explicit:
            files = [(s, p) for s in SPLITS if (cdir / s).is_dir() for p in _images_in(cdir / s)]
        else:
            paths = _images_in(cdir)
            rng = np.random.default_rng([split_spec.seed & 0xFFFFFFFF, len(samples), len(paths)])
            n_test = int(round(split_spec.test_fraction * len(paths)))
            test_idx = set(rng.permutation(len(paths))[:n_test].tolist())
            files = [("test" if i in test_idx else "train", p) for i, p in enumerate(paths)]
        if not files:
            raise DataError(f"{cdir}: class {label!r} contains no images")
        for split, p in files:
            samples.append(Sample(read_image(p), label, split, str(p)))
    shapes = {s.image.shape for s in samples}
    if len(shapes) != 1:
        raise DataError(f"{root}: images differ in size: {sorted(shapes)}")
    manifest = {"root": str(root), "test_fraction": split_spec.test_fraction, "seed": split_spec.seed}
    return Dataset([c.name for c in class_dirs], samples, manifest)


def dataset_from_arrays(images, labels, splits=None, classes=None) -> Dataset:
    labels = list(labels)
    splits = list(splits) if splits is not None else ["train"] * len(labels)
    samples = [Sample(np.asarray(img, dtype=np.float64), y, s) for img, y, s in zip(images, labels, splits)]
    return Dataset(list(classes) if classes else sorted(set(labels)), samples)


# synthetic data

PATTERN_FAMILIES = ("bar", "blobs", "ring")


def _pattern(family: str, variant: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Noise-free base image in [0, 1] with per-sample jitter."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    c = (size - 1) / 2
    cy, cx = c + rng.uniform(-1.5, 1.5, 2) * size / 64
    if family == "bar":
        angle = math.radians(45 + 50 * variant + rng.uniform(-8, 8))
        u = (xx - cx) * math.cos(angle) + (yy - cy) * math.sin(angle)
        v = -(xx - cx) * math.sin(angle) + (yy - cy) * math.cos(angle)
        return ((np.abs(u) < 0.32 * size) & (np.abs(v) < 0.07 * size)).astype(float)
    if family == "blobs":
        out = np.zeros((size, size))
        k = 3 + variant
        for j in range(k):
            a = 2 * math.pi * j / k + rng.uniform(-0.2, 0.2) + 0.4 * variant
            by = cy + 0.22 * size * math.sin(a)
            bx = cx + 0.22 * size * math.cos(a)
            out += np.exp(-((yy - by) ** 2 + (xx - bx) ** 2) / (2 * (0.06 * size) ** 2))
        return np.clip(out, 0, 1)
    r = np.hypot(yy - cy, xx - cx)
    radius = (0.28 + 0.08 * variant) * size + rng.uniform(-1, 1)
    return (np.abs(r - radius) < 0.05 * size).astype(float)


def class_names(class_count: int) -> list[str]:
    names = []
    for k in range(class_count):
        fam, var = PATTERN_FAMILIES[k % 3], k // 3
        names.append(fam if var == 0 else f"{fam}{var + 1}")
    return names


def speckle_image(class_index: int, size: int, rng: np.random.Generator,
                  background: float = 0.15, gain: float = 0.25) -> np.ndarray:
    """One synthetic sample: base pattern times unit-mean exponential speckle."""
    fam, var = PATTERN_FAMILIES[class_index % 3], class_index // 3
    base = background + (1.0 - background) * _pattern(fam, var, size, rng)
    speckle = rng.exponential(1.0, size=(size, size))
    return np.clip(base * speckle * gain, 0.0, 1.0)


def generate_synthetic(root, class_count: int = 3, per_class: int = 50, size: int = 64, seed: int = 0,
                       test_per_class: int = 20) -> Dataset:
    """Write a speckled class-per-directory tree and return it as a Dataset.

    Layout: ``root/<class>/{train,test}/<class>_<nnnn>.pgm`` plus ``manifest.txt``.
    """
    if class_count < 2:
        raise DomainError("class_count must be at least 2")
    if size < 16:
        raise DomainError("size must be at least 16")
    if per_class < 1 or test_per_class < 0:
        raise DomainError("per_class must be >= 1 and test_per_class >= 0")
    root = Path(root)
    names = class_names(class_count)
    samples = []
    lines = []
    for k, name in enumerate(names):
        rng = np.random.default_rng([seed & 0xFFFFFFFF, k])
        for split, count in (("train", per_class), ("test", test_per_class)):
            d = root / name / split
            d.mkdir(parents=True, exist_ok=True)
            for i in range(count):
                img = speckle_image(k, size, rng)
                path = d / f"{name}_{i:04d}.pgm"
                write_pgm(path, img)
                stored = read_image(path)
                rel = path.relative_to(root).as_posix()
                samples.append(Sample(stored, name, split, str(path)))
                lines.append(f"{rel} {name} {split}")
    (root / "manifest.txt").write_text("\n".join(lines) + "\n")
    return Dataset(names, samples, {"root": str(root), "seed": seed})


def orthogonal_centers(size: int, class_count: int = 3) -> list[tuple[float, float]]:
    if class_count == 3:
        pts = [(8, 8), (8, 24), (24, 16)]
    else:
        pts = [(16 + 9 * math.sin(2 * math.pi * k / class_count), 16 + 9 * math.cos(2 * math.pi * k / class_count))
               for k in range(class_count)]
    s = size / 32
    return [(y * s, x * s) for y, x in pts]


def orthogonal_image(center, size: int, shift=(0, 0)) -> np.ndarray:
    """Sharp exponential peak whose tail decays slowly enough to stay non-negative
    under the receptive field, so pixels away from it encode near silence."""
    yy, xx = np.mgrid[0:size, 0:size]
    r = np.hypot(yy - center[0] - shift[0], xx - center[1] - shift[1])
    s = size / 32
    return np.where(r < 13 * s, np.exp(-r / (2 * s)), 0.0)


def orthogonal_active_sets(size: int = 32, class_count: int = 3, radius: float = 5.5) -> list[np.ndarray]:
    """Boolean masks of each class's core region (pairwise disjoint)."""
    yy, xx = np.mgrid[0:size, 0:size]
    s = size / 32
    return [np.hypot(yy - cy, xx - cx) < radius * s for cy, cx in orthogonal_centers(size, class_count)]


def orthogonal_patterns(per_class: int = 30, size: int = 32, seed: int = 0, class_count: int = 3,
                        test_per_class: int = 0) -> Dataset:
    """In-memory fixture of spatially disjoint peaks with +-1 pixel jitter."""
    if class_count < 2:
        raise DomainError("class_count must be at least 2")
    rng = np.random.default_rng([seed & 0xFFFFFFFF, 99])
    names = [f"pattern{k}" for k in range(class_count)]
    samples = []
    for k, center in enumerate(orthogonal_centers(size, class_count)):
        for split, count in (("train", per_class), ("test", test_per_class)):
            for _ in range(count):
                shift = rng.integers(-1, 2, 2)
                samples.append(Sample(orthogonal_image(center, size, shift), names[k], split))
    return Dataset(names, samples, {"fixture": "orthogonal", "seed": seed})


def write_dataset(dataset: Dataset, root) -> None:
    """Write an in-memory dataset in the on-disk layout (8-bit PGM)."""
    root = Path(root)
    lines = []
    counters: dict[tuple[str, str], int] = {}
    for s in dataset.samples:
        key = (s.label, s.split)
        i = counters.get(key, 0)
        counters[key] = i + 1
        d = root / s.label / s.split
        d.mkdir(parents=True, exist_ok=True)
        path = d / f"{s.label}_{i:04d}.pgm"
        write_pgm(path, s.image)
        lines.append(f"{path.relative_to(root).as_posix()} {s.label} {s.split}")
    (root / "manifest.txt").write_text("\n".join(lines) + "\n")


# noise


@dataclass(frozen=True)
class NoiseSpec:
    snr_db: float
    seed: int = 0

    def __post_init__(self):
        if math.isnan(self.snr_db) or self.snr_db == -math.inf:
            raise DomainError(f"snr_db must be finite or +inf, got {self.snr_db}")


def signal_power(image) -> float:
    return float(np.mean(np.square(np.asarray(image, dtype=np.float64))))


def noise_field(image, snr_db: float, rng: np.random.Generator) -> np.ndarray:
    """Zero-mean white Gaussian noise whose power sits ``snr_db`` below the image's."""
    power = signal_power(image)
    if not power > 0:
        raise NumericError("image has zero signal power; SNR is undefined")
    sigma = math.sqrt(power / 10 ** (snr_db / 10))
    return rng.normal(0.0, sigma, size=np.shape(image))


def add_noise(image, spec: NoiseSpec, rng: np.random.Generator | None = None,
              value_range=(0.0, 1.0)) -> np.ndarray:
    """Additive white noise at the requested SNR, clamped to ``value_range``."""
    img = np.asarray(image, dtype=np.float64)
    if not signal_power(img) > 0:
        raise NumericError("image has zero signal power; SNR is undefined")
    if spec.snr_db == math.inf:
        return img.copy()
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    return np.clip(img + noise_field(img, spec.snr_db, rng), *value_range)


def parse_snr_list(text: str) -> list[float]:
    out = []
    for tok in text.split(","):
        tok = tok.strip().lower()
        if not tok:
            continue
        try:
            out.append(math.inf if tok in ("inf", "+inf") else float(tok))
        except ValueError:
            raise DomainError(f"bad SNR value {tok!r}") from None
    if not out:
        raise DomainError("empty SNR list")
    return out


def iter_labels(samples: Iterable[Sample]) -> list[str]:
    return [s.label for s in samples]
