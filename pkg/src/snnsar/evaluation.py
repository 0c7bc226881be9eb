"""Accuracy, confusion matrices and noise sweeps for trained models."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .data import Dataset, NoiseSpec, Sample, add_noise
from .errors import DataError, ModelError
from .stdp import UnsupervisedModel, classify
from .supervised import GuidanceBundle, SupervisedModel, classify_supervised


@dataclass
class EvalReport:
    """``confusion[i, j]`` counts true class i predicted as j; the extra last
    column counts samples on which the model made no decision."""

    classes: list[str]
    confusion: np.ndarray

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    @property
    def no_decision_count(self) -> int:
        return int(self.confusion[:, -1].sum())

    @property
    def overall_accuracy(self) -> float:
        return float(np.trace(self.confusion[:, :-1]) / self.total) if self.total else float("nan")

    @property
    def per_class_accuracy(self) -> dict[str, float]:
        rows = self.confusion.sum(axis=1)
        return {c: (float(self.confusion[i, i] / rows[i]) if rows[i] else float("nan"))
                for i, c in enumerate(self.classes)}

    def as_dict(self) -> dict:
        return {
            "overall_accuracy": self.overall_accuracy,
            "per_class_accuracy": self.per_class_accuracy,
            "no_decision_count": self.no_decision_count,
            "confusion": self.confusion.tolist(),
        }


def predict(model, image, index: int = 0, guidance: GuidanceBundle | None = None) -> Optional[str]:
    if isinstance(model, SupervisedModel):
        return classify_supervised(model, image, guidance, index)
    if isinstance(model, UnsupervisedModel):
        return classify(model, image, index)
    raise ModelError(f"cannot evaluate object of type {type(model).__name__}")


def report_from_predictions(classes: Sequence[str], labels: Sequence[str],
                            predictions: Sequence[Optional[str]]) -> EvalReport:
    classes = list(classes)
    col = {c: i for i, c in enumerate(classes)}
    conf = np.zeros((len(classes), len(classes) + 1), dtype=np.int64)
    for y, p in zip(labels, predictions):
        if y not in col:
            raise DataError(f"label {y!r} is not one of the model's classes")
        conf[col[y], len(classes) if p is None else col[p]] += 1
    return EvalReport(classes, conf)


def _samples(data, split: str) -> list[Sample]:
    samples = data.split(split) if isinstance(data, Dataset) else list(data)
    if not samples:
        raise DataError(f"no samples to evaluate in split {split!r}")
    return samples


def evaluate(model, data, guidance: GuidanceBundle | None = None, split: str = "test",
             jobs: int = 1, images: Sequence[np.ndarray] | None = None) -> EvalReport:
    """Score ``model`` on a dataset split (or a list of samples).

    ``images`` substitutes the pixel data (e.g. noisy copies) while labels
    and encoding indices still come from the samples.  Results do not
    depend on ``jobs``: sample ``i`` always uses encoding stream ``i``.
    """
    samples = _samples(data, split)
    imgs = list(images) if images is not None else [s.image for s in samples]
    if len(imgs) != len(samples):
        raise DataError("replacement image count does not match the sample count")

    def one(i):
        return predict(model, imgs[i], i, guidance)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            preds = list(pool.map(one, range(len(samples))))
    else:
        preds = [one(i) for i in range(len(samples))]
    return report_from_predictions(model.classes, [s.label for s in samples], preds)


def noise_sweep(model, data, snr_list: Sequence[float], seed: int = 0,
                guidance: GuidanceBundle | None = None, split: str = "test",
                jobs: int = 1) -> list[tuple[float, EvalReport]]:
    """Evaluate on noisy copies of the split at each SNR, in the given order.

    ``inf`` evaluates the clean images.  Noise for sample ``i`` at list
    position ``k`` is drawn from its own seeded stream.
    """
    samples = _samples(data, split)
    out = []
    for k, snr in enumerate(snr_list):
        spec = NoiseSpec(float(snr), seed)
        if spec.snr_db == math.inf:
            noisy = None
        else:
            noisy = [add_noise(s.image, spec, np.random.default_rng([seed & 0xFFFFFFFF, k, i]))
                     for i, s in enumerate(samples)]
        out.append((spec.snr_db, evaluate(model, samples, guidance, split, jobs, noisy)))
    return out
