"""Image to spike-train encoding.

Images pass through a fixed 5x5 on-center receptive field, are min-max
normalized into firing probabilities, and each pixel is turned into a
binary spike train over ``T + 1`` time units (indices ``0..T``).  Neither
encoder ever emits at time unit 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy.ndimage import correlate

from .errors import DimensionError, DomainError, FormatError, NumericError

RECEPTIVE_FIELD = np.array(
    [
        [-0.5, -0.125, 0.125, -0.125, -0.5],
        [-0.125, 0.125, 0.5, 0.125, -0.125],
        [0.125, 0.5, 1.0, 0.5, 0.125],
        [-0.125, 0.125, 0.5, 0.125, -0.125],
        [-0.5, -0.125, 0.125, -0.125, -0.5],
    ]
)
RECEPTIVE_FIELD.setflags(write=False)

METHODS = ("random", "deterministic")


@dataclass(frozen=True)
class SpikeTrain:
    """Firing flags of one neuron for time units ``0..duration``."""

    fires: np.ndarray

    def __post_init__(self):
        fires = np.asarray(self.fires, dtype=bool)
        if fires.ndim != 1 or fires.size < 1:
            raise DimensionError("spike train must be a non-empty 1-D sequence")
        object.__setattr__(self, "fires", fires)

    @classmethod
    def from_times(cls, times: Iterable[int], duration: int) -> "SpikeTrain":
        fires = np.zeros(duration + 1, dtype=bool)
        times = np.asarray(list(times), dtype=int)
        if times.size and (times.min() < 0 or times.max() > duration):
            raise DomainError(f"spike times must lie in [0, {duration}]")
        fires[times] = True
        return cls(fires)

    @property
    def duration(self) -> int:
        return self.fires.size - 1

    @property
    def times(self) -> np.ndarray:
        return np.flatnonzero(self.fires)

    @property
    def spike_count(self) -> int:
        return int(self.fires.sum())

    def __len__(self):
        return self.fires.size


@dataclass(frozen=True)
class EncoderSpec:
    method: str = "random"
    sedsi_T: int = 70
    f_min: float = 1.0
    f_max: float = 20.0
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise DomainError(f"unknown encoding method {self.method!r}; expected one of {METHODS}")
        if int(self.sedsi_T) != self.sedsi_T or self.sedsi_T < 1:
            raise DomainError(f"sedsi_T must be a positive integer, got {self.sedsi_T}")
        if not self.f_min < self.f_max:
            raise DomainError(f"f_min ({self.f_min}) must be below f_max ({self.f_max})")


def as_image(image) -> np.ndarray:
    """Validate a grayscale image and return it as a float64 matrix."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"image must be 2-D, got shape {arr.shape}")
    h, w = arr.shape
    if h < 5 or w < 5:
        raise DimensionError(f"image must be at least 5x5 for the receptive field, got {h}x{w}")
    if not np.all(np.isfinite(arr)):
        raise NumericError("image contains non-finite pixels")
    return arr


def apply_receptive_field(image) -> np.ndarray:
    """Kernel-weighted 5x5 neighborhood sum, zero padded, same size as input."""
    return correlate(as_image(image), RECEPTIVE_FIELD, mode="constant", cval=0.0)


def normalize(incentive) -> np.ndarray:
    """Min-max scale to [0, 1]; a constant matrix maps to all zeros."""
    arr = np.asarray(incentive, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NumericError("cannot normalize non-finite values")
    lo = arr.min()
    span = arr.max() - lo
    if span == 0:
        return np.zeros_like(arr)
    return (arr - lo) / span


def incentive_image(image) -> np.ndarray:
    return normalize(apply_receptive_field(image))


def _check_probability(p):
    p = np.asarray(p, dtype=np.float64)
    if not np.all(np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise DomainError("pixel value must lie in [0, 1]")
    return p


def encode_random(p: float, spec: EncoderSpec, rng: np.random.Generator) -> SpikeTrain:
    """Bernoulli spike at each of the time units 1..T with probability ``p``."""
    _check_probability(p)
    fires = np.zeros(spec.sedsi_T + 1, dtype=bool)
    fires[1:] = rng.random(spec.sedsi_T) < p
    return SpikeTrain(fires)


def deterministic_frequency(p, spec: EncoderSpec):
    """Spike count target, linear in ``p`` between (0, f_min) and (1, f_max)."""
    return spec.f_min + _check_probability(p) * (spec.f_max - spec.f_min)


def deterministic_period(p, spec: EncoderSpec):
    """Distance between consecutive spikes, ``floor(T / f_det)``, at least 1."""
    f_det = deterministic_frequency(p, spec)
    interval = np.floor(spec.sedsi_T / f_det) - 1
    return np.maximum(interval + 1, 1).astype(int)


def encode_deterministic(p: float, spec: EncoderSpec) -> SpikeTrain:
    period = int(deterministic_period(p, spec))
    fires = np.zeros(spec.sedsi_T + 1, dtype=bool)
    fires[period::period] = True
    return SpikeTrain(fires)


def image_rng(seed: int, index: int) -> np.random.Generator:
    """Independent, reproducible stream for image ``index`` under ``seed``."""
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, int(index)])


def encode_probabilities(probs, spec: EncoderSpec, index: int = 0) -> np.ndarray:
    """Spike field of shape ``(pixels, T + 1)`` from a matrix of probabilities.

    Rows follow row-major pixel order.
    """
    p = _check_probability(probs).ravel()
    T = spec.sedsi_T
    field = np.zeros((p.size, T + 1), dtype=bool)
    if spec.method == "random":
        rng = image_rng(spec.seed, index)
        field[:, 1:] = rng.random((p.size, T)) < p[:, None]
    else:
        period = deterministic_period(p, spec)
        t = np.arange(T + 1)
        field[:] = (t[None, :] > 0) & (t[None, :] % period[:, None] == 0)
    return field


def encode_image(image, spec: EncoderSpec, index: int = 0) -> np.ndarray:
    """Receptive field, normalization, then per-pixel encoding.

    ``index`` selects the random stream so a dataset encodes reproducibly.
    """
    return encode_probabilities(incentive_image(image), spec, index)


def field_to_trains(field) -> list[SpikeTrain]:
    return [SpikeTrain(row) for row in np.asarray(field, dtype=bool)]


# spike-field text files


def write_spike_field(path, field, width: int, height: int) -> None:
    field = np.asarray(field, dtype=bool)
    if field.shape[0] != width * height:
        raise DimensionError(f"field has {field.shape[0]} trains, expected {width}x{height}")
    T = field.shape[1] - 1
    lines = [f"spikefield v1 {width} {height} {T}"]
    for row in field:
        lines.append(" ".join(str(t) for t in np.flatnonzero(row)))
    Path(path).write_text("\n".join(lines) + "\n")


def read_spike_field(path) -> tuple[np.ndarray, int, int]:
    """Returns ``(field, width, height)``."""
    text = Path(path).read_text()
    # the file ends with one newline; empty lines before it are silent trains
    lines = (text[:-1] if text.endswith("\n") else text).split("\n")
    head = lines[0].split()
    if len(head) != 5 or head[0] != "spikefield":
        raise FormatError(f"{path}: not a spike-field file")
    if head[1] != "v1":
        raise FormatError(f"{path}: unsupported spike-field version {head[1]!r}")
    try:
        width, height, T = (int(v) for v in head[2:])
    except ValueError:
        raise FormatError(f"{path}: malformed header {lines[0]!r}") from None
    n = width * height
    body = lines[1 : n + 1]
    if len(body) < n:
        raise FormatError(f"{path}: expected {n} trains, found {len(body)}")
    field = np.zeros((n, T + 1), dtype=bool)
    for i, line in enumerate(body):
        if not line.strip():
            continue
        try:
            times = [int(v) for v in line.split()]
        except ValueError:
            raise FormatError(f"{path}: line {i + 2}: non-integer spike time") from None
        if min(times) < 0 or max(times) > T:
            raise FormatError(f"{path}: line {i + 2}: spike time outside [0, {T}]")
        field[i, times] = True
    return field, width, height
