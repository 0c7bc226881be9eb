"""Gradient-trained single-layer network.

The output potential is relaxed into a smooth linear function of the
weights, ``p_j(t) = sum_i w_ij * G_i(t)`` with ``G_i`` the input spike train
filtered by a causal exponential kernel (no threshold, no reset).  A
Huber loss against per-class target traces is minimised with Adam, one
image per step.  Targets come from the membrane potential of a trained
unsupervised network.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .encoding import EncoderSpec, as_image, encode_image
from .errors import DimensionError, DomainError, ModelError, NumericError
from .neuron import LifParams, SynapseMatrix, quantize_weights
from .stdp import UnsupervisedModel, forward

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ResponseKernel:
    """Causal kernel ``g(d) = exp(-d / tau_s)`` for ``d >= 0``, else 0."""

    tau_s: float = 10.0

    def __post_init__(self):
        if not self.tau_s > 0:
            raise DomainError(f"tau_s must be positive, got {self.tau_s}")

    def __call__(self, delta):
        d = np.asarray(delta, dtype=np.float64)
        return np.where(d >= 0, np.exp(-np.maximum(d, 0) / self.tau_s), 0.0)

    def matrix(self, sedsi_T: int) -> np.ndarray:
        """``K[t_k, t] = g(t - t_k)``; a spike field times K gives the filtered trains."""
        t = np.arange(sedsi_T + 1)
        return self(t[None, :] - t[:, None])


@dataclass(frozen=True)
class HuberSpec:
    delta: float = 1.0

    def __post_init__(self):
        if not self.delta > 0:
            raise DomainError(f"Huber delta must be positive, got {self.delta}")


@dataclass(frozen=True)
class AdamConfig:
    lr_ini: float = 1e-3
    lr_mid: float = 1e-4
    max_steps: int = 30000
    switch_fraction: float = 0.6
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not (self.lr_ini > 0 and self.lr_mid > 0):
            raise DomainError("learning rates must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise DomainError("Adam betas must lie in [0, 1)")
        if not self.epsilon > 0:
            raise DomainError("epsilon must be positive")
        if self.max_steps < 1 or not 0 <= self.switch_fraction <= 1:
            raise DomainError("max_steps must be >= 1 and switch_fraction in [0, 1]")

    @property
    def switch_step(self) -> int:
        return int(self.switch_fraction * self.max_steps)

    def learning_rate(self, step: int) -> float:
        """Rate used for the ``step``-th update (1-based)."""
        return self.lr_ini if step <= self.switch_step else self.lr_mid


@dataclass
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    config: AdamConfig = AdamConfig()

    @classmethod
    def zeros(cls, shape, config: AdamConfig = AdamConfig()) -> "AdamState":
        return cls(np.zeros(shape), np.zeros(shape), 0, config)

    @property
    def beta1(self) -> float:
        return self.config.beta1

    @property
    def beta2(self) -> float:
        return self.config.beta2

    @property
    def epsilon(self) -> float:
        return self.config.epsilon


@dataclass
class GuidanceBundle:
    traces: np.ndarray
    classes: list[str]

    def __post_init__(self):
        tr = np.asarray(self.traces, dtype=np.float64)
        if tr.ndim != 2 or tr.shape[0] != len(self.classes):
            raise DimensionError(f"guidance needs one trace per class, got {tr.shape} for {len(self.classes)} classes")
        if not np.all(np.isfinite(tr)):
            raise NumericError("guidance traces must be finite")
        self.traces = tr

    @property
    def class_count(self) -> int:
        return self.traces.shape[0]

    @property
    def sedsi_T(self) -> int:
        return self.traces.shape[1] - 1


@dataclass
class SupervisedModel:
    synapses: SynapseMatrix
    lif: LifParams
    kernel: ResponseKernel
    huber: HuberSpec
    adam: AdamConfig
    encoder: EncoderSpec
    image_shape: tuple[int, int]
    classes: list[str]
    guidance: GuidanceBundle
    seed: int = 0
    history: list[dict] = field(default_factory=list)
    unit: float = 1.0

    mode = "supervised"

    @property
    def topology(self) -> tuple[int, ...]:
        return (self.synapses.pre_count, self.synapses.post_count)


# differentiable forward model


def _weights(weights) -> np.ndarray:
    return weights.weights if isinstance(weights, SynapseMatrix) else np.asarray(weights, dtype=np.float64)


def response_field(pre_spike_field, kernel: ResponseKernel) -> np.ndarray:
    """``G[i, t] = sum over spikes t_k of train i of g(t - t_k)``."""
    f = np.asarray(pre_spike_field, dtype=np.float64)
    return f @ kernel.matrix(f.shape[1] - 1)


def potential_trace(weights, pre_spike_field, kernel: ResponseKernel) -> np.ndarray:
    """``(n, T+1)`` relaxed potentials, computed as ``(W^T S) K`` to stay cheap."""
    W = _weights(weights)
    f = np.asarray(pre_spike_field, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] != W.shape[0]:
        raise DimensionError(f"spike field shape {f.shape} does not match {W.shape[0]} inputs")
    return (W.T @ f) @ kernel.matrix(f.shape[1] - 1)


def huber_elementwise(d, spec: HuberSpec) -> np.ndarray:
    a = np.abs(d)
    return np.where(a <= spec.delta, 0.5 * a * a, spec.delta * a - 0.5 * spec.delta ** 2)


def huber_derivative(d, spec: HuberSpec) -> np.ndarray:
    return np.clip(d, -spec.delta, spec.delta)


def huber_loss(actual, target, spec: HuberSpec = HuberSpec()) -> float:
    a = np.asarray(actual, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    if a.shape != y.shape:
        raise DimensionError(f"trace shapes differ: {a.shape} vs {y.shape}")
    return float(huber_elementwise(a - y, spec).sum())


def grad_weights(weights, pre_spike_field, target, kernel: ResponseKernel,
                 spec: HuberSpec = HuberSpec()) -> np.ndarray:
    """Exact gradient of ``huber_loss(potential_trace(W), target)`` w.r.t. ``W``."""
    W = _weights(weights)
    f = np.asarray(pre_spike_field, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    K = kernel.matrix(f.shape[1] - 1)
    if f.shape[0] != W.shape[0]:
        raise DimensionError(f"spike field shape {f.shape} does not match {W.shape[0]} inputs")
    if y.shape != (W.shape[1], f.shape[1]):
        raise DimensionError(f"target shape {y.shape}, expected {(W.shape[1], f.shape[1])}")
    err = huber_derivative((W.T @ f) @ K - y, spec)
    # G @ err^T with G = f @ K, associated to avoid forming G
    return f @ (K @ err.T)


def adam_step(state: AdamState, grads, weights):
    """Bias-corrected Adam update; returns ``(new_state, new_weights)``."""
    g = np.asarray(grads, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if g.shape != w.shape or state.first_moment.shape != w.shape:
        raise DimensionError(f"gradient {g.shape}, weights {w.shape} and moments "
                             f"{state.first_moment.shape} must agree")
    c = state.config
    step = state.step_count + 1
    m = c.beta1 * state.first_moment + (1 - c.beta1) * g
    v = c.beta2 * state.second_moment + (1 - c.beta2) * g * g
    m_hat = m / (1 - c.beta1 ** step)
    v_hat = v / (1 - c.beta2 ** step)
    new_w = w - c.learning_rate(step) * m_hat / (np.sqrt(v_hat) + c.epsilon)
    return AdamState(m, v, step, c), new_w


# targets


def extract_guidance(model: UnsupervisedModel, representatives: Sequence,
                     encoder: EncoderSpec | None = None) -> GuidanceBundle:
    """Membrane potential of each class's output neuron on that class's representative.

    ``encoder`` overrides the model's own encoder (``sedsi_T`` must match).
    """
    encoder = encoder or model.encoder
    if encoder.sedsi_T != model.encoder.sedsi_T:
        raise DimensionError("guidance encoder must use the model's presentation window")
    if len(representatives) != len(model.classes):
        raise ModelError(f"need one representative per class ({len(model.classes)}), got {len(representatives)}")
    if not model.is_bijective():
        raise ModelError("guidance needs a model whose output neurons map one-to-one onto classes")
    traces = []
    for k, (label, img) in enumerate(zip(model.classes, representatives)):
        img = as_image(img)
        if img.shape != tuple(model.image_shape):
            raise DimensionError(f"representative shape {img.shape} does not match {tuple(model.image_shape)}")
        out = forward(model, encode_image(img, encoder, k))[-1]
        traces.append(out.drive[model.class_map.index(label)])
    # stored as 32-bit in checkpoints and CSV; keep the in-memory copy identical
    tr = np.asarray(traces).astype(np.float32).astype(np.float64)
    return GuidanceBundle(tr, list(model.classes))


def target_matrix(guidance: GuidanceBundle, k: int, p_rest: float = 0.0, unit: float = 1.0) -> np.ndarray:
    """Class ``k`` row follows its guidance trace; every other row rests.

    Potentials are expressed relative to ``p_rest`` in multiples of ``unit``
    (``unit = 1`` with ``p_rest = 0`` keeps plain millivolts).
    """
    if not unit > 0:
        raise DomainError(f"potential unit must be positive, got {unit}")
    y = np.zeros_like(guidance.traces)
    y[k] = (guidance.traces[k] - p_rest) / unit
    return y


def decide_supervised(trace, guidance: GuidanceBundle, huber: HuberSpec, p_rest: float = 0.0,
                      unit: float = 1.0) -> int:
    """Index of the class hypothesis with the lowest loss (ties to the lowest index)."""
    losses = [huber_loss(trace, target_matrix(guidance, k, p_rest, unit), huber)
              for k in range(guidance.class_count)]
    return int(np.argmin(losses))


def classify_supervised(model: SupervisedModel, image, guidance: GuidanceBundle | None = None,
                        index: int = 0) -> str:
    guidance = guidance or model.guidance
    img = as_image(image)
    if img.shape != tuple(model.image_shape):
        raise DimensionError(f"image shape {img.shape} does not match model input {tuple(model.image_shape)}")
    f = encode_image(img, model.encoder, index)
    trace = potential_trace(model.synapses, f, model.kernel)
    return model.classes[decide_supervised(trace, guidance, model.huber, model.lif.p_rest, model.unit)]


# training


def _accuracy(W, fields, labels, guidance, kernel, huber, p_rest, unit, classes) -> float:
    if not fields:
        return float("nan")
    hits = 0
    for f, y in zip(fields, labels):
        k = decide_supervised(potential_trace(W, f, kernel), guidance, huber, p_rest, unit)
        hits += classes[k] == y
    return hits / len(fields)


def train_supervised(images, labels, guidance: GuidanceBundle, lif: LifParams = LifParams(),
                     kernel: ResponseKernel = ResponseKernel(), huber: HuberSpec = HuberSpec(),
                     adam: AdamConfig = AdamConfig(), epochs: int = 25, seed: int = 0, *,
                     encoder: EncoderSpec | None = None, test=None, init_scale: float = 1e-3,
                     shuffle: bool = True, unit: float | None = None,
                     on_epoch: Optional[Callable[[dict], None]] = None) -> SupervisedModel:
    """Adam on the Huber loss, one image per step.

    ``test`` is an optional ``(images, labels)`` pair scored after each epoch
    alongside the training set.  Targets are measured from ``p_rest`` in
    units of ``unit`` millivolts, by default the rest-to-threshold span, so
    the Huber split sits at a fixed fraction of the firing threshold.
    """
    images = [as_image(img) for img in images]
    labels = list(labels)
    if not images:
        raise ModelError("training dataset is empty")
    if len(images) != len(labels):
        raise DimensionError("images and labels differ in length")
    classes = list(guidance.classes)
    # checkpoints store 32-bit values; train against exactly what will be saved
    guidance = GuidanceBundle(guidance.traces.astype(np.float32).astype(np.float64), classes)
    unknown = set(labels) - set(classes)
    if unknown:
        raise ModelError(f"labels not covered by the guidance: {sorted(unknown)}")
    if guidance.sedsi_T != lif.sedsi_T:
        raise DimensionError(f"guidance traces span {guidance.sedsi_T + 1} time units, expected {lif.sedsi_T + 1}")
    shapes = {img.shape for img in images}
    if len(shapes) != 1:
        raise DimensionError(f"images differ in shape: {sorted(shapes)}")
    encoder = replace(encoder or EncoderSpec(sedsi_T=lif.sedsi_T), sedsi_T=lif.sedsi_T, seed=seed)
    fields = [encode_image(img, encoder, i).astype(np.float64) for i, img in enumerate(images)]
    test_fields, test_labels = [], []
    if test is not None:
        t_imgs, test_labels = test
        test_labels = list(test_labels)
        # same stream indices as evaluation of the split, so reported numbers agree
        test_fields = [encode_image(as_image(img), encoder, i).astype(np.float64)
                       for i, img in enumerate(t_imgs)]
    cls_index = {c: k for k, c in enumerate(classes)}
    unit = lif.p_th - lif.p_rest if unit is None else float(unit)
    targets = [target_matrix(guidance, k, lif.p_rest, unit) for k in range(len(classes))]
    rng = np.random.default_rng([seed & 0xFFFFFFFF, 2])
    m, n = images[0].size, len(classes)
    W = rng.uniform(-init_scale, init_scale, size=(m, n))
    state = AdamState.zeros(W.shape, adam)
    history = []
    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(fields)) if shuffle else np.arange(len(fields))
        total = 0.0
        for i in order:
            y = targets[cls_index[labels[i]]]
            total += huber_loss(potential_trace(W, fields[i], kernel), y, huber)
            g = grad_weights(W, fields[i], y, kernel, huber)
            state, W = adam_step(state, g, W)
        if not np.all(np.isfinite(W)):
            raise NumericError(f"weights diverged in epoch {epoch}")
        rec = {
            "epoch": epoch,
            "loss": total / len(fields),
            "train_accuracy": _accuracy(W, fields, labels, guidance, kernel, huber, lif.p_rest, unit, classes),
            "test_accuracy": _accuracy(W, test_fields, test_labels, guidance, kernel, huber, lif.p_rest, unit, classes),
            "step_count": state.step_count,
        }
        history.append(rec)
        log.info("epoch %d: loss %.3f train %.3f test %.3f", epoch, rec["loss"],
                 rec["train_accuracy"], rec["test_accuracy"])
        if on_epoch is not None:
            on_epoch(rec)
    W = quantize_weights(W)
    return SupervisedModel(SynapseMatrix(W), lif, kernel, huber, adam, encoder, images[0].shape, classes,
                           guidance, seed, history, unit)


def loss_for(weights, pre_spike_field, target, kernel: ResponseKernel, spec: HuberSpec = HuberSpec()) -> float:
    return huber_loss(potential_trace(weights, pre_spike_field, kernel), target, spec)


__all__ = [
    "AdamConfig", "AdamState", "GuidanceBundle", "HuberSpec", "ResponseKernel", "SupervisedModel",
    "adam_step", "classify_supervised", "decide_supervised", "extract_guidance", "grad_weights",
    "huber_derivative", "huber_loss", "loss_for", "potential_trace", "response_field", "target_matrix",
    "train_supervised",
]
