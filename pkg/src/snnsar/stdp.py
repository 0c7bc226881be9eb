"""STDP plasticity and the unsupervised trainers.

Single-layer training is online: every output spike immediately updates
the weights of the firing neuron, and the new weights drive the next time
unit.  The bilayer trainer updates both weight matrices once per
subsegment of the presentation window, keyed off the output layer's peak
potential in that subsegment.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .encoding import EncoderSpec, as_image, encode_image
from .errors import DimensionError, DomainError, ModelError
from .neuron import LayerDynamics, LayerTrace, LifParams, SynapseMatrix, quantize_weights, simulate_currents

log = logging.getLogger(__name__)

WINDOW_MODES = ("exponential", "constant")


@dataclass(frozen=True)
class StdpParams:
    a_plus: float = 0.8
    a_minus: float = 0.3
    tau_plus: float = 5.0
    tau_minus: float = 5.0
    t_fore: int = 7
    t_back: int = 7
    silent_decay: float = 0.2
    w_min: float = -1.2
    w_max: float = 1.4
    window: str = "exponential"

    def __post_init__(self):
        if not (self.a_plus > 0 and self.a_minus > 0):
            raise DomainError("a_plus and a_minus must be positive")
        if not (self.tau_plus > 0 and self.tau_minus > 0):
            raise DomainError("tau_plus and tau_minus must be positive")
        if self.t_fore < 1 or self.t_back < 1:
            raise DomainError("t_fore and t_back must be at least 1")
        if not self.w_min < self.w_max:
            raise DomainError(f"w_min ({self.w_min}) must be below w_max ({self.w_max})")
        if self.silent_decay < 0:
            raise DomainError("silent_decay must be non-negative")
        if self.window not in WINDOW_MODES:
            raise DomainError(f"window must be one of {WINDOW_MODES}, got {self.window!r}")

    def scaled(self, gain: float) -> "StdpParams":
        """Same window shape with amplitudes, decay and bounds multiplied by ``gain``."""
        return replace(
            self,
            a_plus=self.a_plus * gain,
            a_minus=self.a_minus * gain,
            silent_decay=self.silent_decay * gain,
            w_min=self.w_min * gain,
            w_max=self.w_max * gain,
        )


@dataclass(frozen=True)
class SubsegmentSchedule:
    count: int = 10
    halfwidth: int = 3

    def bounds(self, sedsi_T: int) -> list[tuple[int, int]]:
        """Inclusive ``(start, stop)`` time units of each subsegment.

        Time unit 0 carries no input and is folded into the first segment.
        """
        if self.count < 1 or sedsi_T % self.count:
            raise DomainError(f"sedsi_T={sedsi_T} is not divisible into {self.count} subsegments")
        length = sedsi_T // self.count
        return [(0 if k == 0 else k * length + 1, (k + 1) * length) for k in range(self.count)]


def stdp_window(s, params: StdpParams):
    """Weight change for a pre/post spike offset ``s = t_post - t_pre``."""
    s = np.asarray(s, dtype=np.float64)
    if params.window == "constant":
        out = np.where(s >= 0, params.a_plus, -params.a_minus)
    else:
        out = np.where(
            s >= 0,
            params.a_plus * np.exp(-np.abs(s) / params.tau_plus),
            -params.a_minus * np.exp(-np.abs(s) / params.tau_minus),
        )
    return out if out.ndim else float(out)


def stdp_delta(t_spike: int, pre_field, params: StdpParams) -> np.ndarray:
    """Summed per-presynaptic weight change for a post spike at ``t_spike``.

    Pre spikes strictly inside ``(t - t_fore, t)`` potentiate, those strictly
    inside ``(t, t + t_back)`` depress; coincident spikes are ignored.
    """
    pre_field = np.asarray(pre_field, dtype=bool)
    last = pre_field.shape[1] - 1
    delta = np.zeros(pre_field.shape[0])
    before = np.arange(1, params.t_fore)
    before = before[t_spike - before >= 0]
    if before.size:
        delta += pre_field[:, t_spike - before] @ stdp_window(before, params)
    after = np.arange(1, params.t_back)
    after = after[t_spike + after <= last]
    if after.size:
        delta += pre_field[:, t_spike + after] @ stdp_window(-after, params)
    return delta


def apply_stdp_at(t_spike: int, post_index: int, pre_spike_field, synapses: SynapseMatrix,
                  params: StdpParams) -> SynapseMatrix:
    """Update (in place) and return the weights onto ``post_index``."""
    if not 0 <= post_index < synapses.post_count:
        raise DimensionError(f"post index {post_index} out of range for {synapses.post_count} neurons")
    pre_spike_field = np.asarray(pre_spike_field, dtype=bool)
    if pre_spike_field.shape[0] != synapses.pre_count:
        raise DimensionError("spike field does not match presynaptic count")
    if not 0 <= t_spike < pre_spike_field.shape[1]:
        raise DimensionError(f"spike time {t_spike} outside the spike field")
    col = synapses.weights[:, post_index]
    col += stdp_delta(t_spike, pre_spike_field, params)
    np.clip(col, params.w_min, params.w_max, out=col)
    return synapses


def micro_modify(winner_index: Optional[int], pre_spike_field, synapses: SynapseMatrix,
                 params: StdpParams) -> SynapseMatrix:
    """Weaken weights from inputs that stayed silent onto the image's winner."""
    if winner_index is None:
        return synapses
    silent = ~np.asarray(pre_spike_field, dtype=bool).any(axis=1)
    col = synapses.weights[:, winner_index]
    col[silent] -= params.silent_decay
    np.maximum(col, params.w_min, out=col)
    return synapses


def decide_winner(trace: LayerTrace) -> Optional[int]:
    """Most spikes wins; ties go to the earliest first spike, then the lowest index."""
    counts = trace.spikes.sum(axis=1)
    best = counts.max() if counts.size else 0
    if best == 0:
        return None
    tied = np.flatnonzero(counts == best)
    first = np.array([np.argmax(trace.spikes[i]) for i in tied])
    return int(tied[np.argmin(first)])


@dataclass
class UnsupervisedModel:
    synapses: list[SynapseMatrix]
    lif: LifParams
    stdp: StdpParams
    encoder: EncoderSpec
    image_shape: tuple[int, int]
    classes: list[str]
    class_map: list[Optional[str]]
    output_stdp: Optional[StdpParams] = None
    hidden_lif: Optional[LifParams] = None
    seed: int = 0
    history: list[dict] = field(default_factory=list)

    @property
    def mode(self) -> str:
        return "unsup_single" if len(self.synapses) == 1 else "unsup_bilayer"

    @property
    def topology(self) -> tuple[int, ...]:
        return (self.synapses[0].pre_count,) + tuple(s.post_count for s in self.synapses)

    def is_bijective(self) -> bool:
        return is_bijective(self.class_map, self.classes)


def is_bijective(class_map: Sequence[Optional[str]], classes: Sequence[str]) -> bool:
    return (
        len(class_map) == len(classes)
        and None not in class_map
        and sorted(class_map) == sorted(classes)
    )


def init_synapses(pre: int, post: int, params: StdpParams, rng: np.random.Generator,
                  init: tuple[float, float] = (0.6, 0.8)) -> SynapseMatrix:
    lo, hi = init[0] * params.w_max, init[1] * params.w_max
    w = rng.uniform(lo, hi, size=(pre, post))
    return SynapseMatrix(np.clip(w, params.w_min, params.w_max), params.w_min, params.w_max)


def forward(model: UnsupervisedModel, pre_field) -> list[LayerTrace]:
    """Forward-only pass through every layer with the current weights."""
    pre_field = np.asarray(pre_field, dtype=bool)
    if pre_field.shape[0] != model.synapses[0].pre_count:
        raise DimensionError(
            f"input has {pre_field.shape[0]} trains, model expects {model.synapses[0].pre_count}"
        )
    traces = []
    spikes = pre_field
    lifs = [model.lif] if len(model.synapses) == 1 else [model.hidden_lif or model.lif, model.lif]
    for syn, lif in zip(model.synapses, lifs):
        trace = simulate_currents(spikes.T.astype(np.float64) @ syn.weights, lif)
        traces.append(trace)
        spikes = trace.spikes
    return traces


def winner_for_field(model: UnsupervisedModel, pre_field) -> Optional[int]:
    return decide_winner(forward(model, pre_field)[-1])


def classify(model: UnsupervisedModel, image, index: int = 0) -> Optional[str]:
    """Predicted label, or None when no output neuron fires."""
    img = as_image(image)
    if img.shape != tuple(model.image_shape):
        raise DimensionError(f"image shape {img.shape} does not match model input {tuple(model.image_shape)}")
    winner = winner_for_field(model, encode_image(img, model.encoder, index))
    return None if winner is None else model.class_map[winner]


def calibrate(winners: Sequence[Optional[int]], labels: Sequence[str], classes: Sequence[str],
              n_out: int) -> list[Optional[str]]:
    """Majority-vote label per output neuron; neurons that never win get None."""
    votes = np.zeros((n_out, len(classes)), dtype=int)
    col = {c: i for i, c in enumerate(classes)}
    for w, y in zip(winners, labels):
        if w is not None:
            votes[w, col[y]] += 1
    return [classes[int(np.argmax(v))] if v.any() else None for v in votes]


# training


def _encode_all(images, encoder: EncoderSpec) -> list[np.ndarray]:
    return [encode_image(img, encoder, i) for i, img in enumerate(images)]


def _online_single(syn: SynapseMatrix, pre_field, lif: LifParams, stdp: StdpParams) -> Optional[int]:
    """One image of online single-layer training; returns the last winner."""
    W = syn.weights
    layer = LayerDynamics(syn.post_count, lif)
    rows = pre_field.T
    winner = None
    for t in range(rows.shape[0]):
        fired, _ = layer.step(W[rows[t]].sum(axis=0))
        if fired is not None:
            winner = fired
            apply_stdp_at(t, fired, pre_field, syn, stdp)
    micro_modify(winner, pre_field, syn, stdp)
    return winner


def _pair_delta(t_post: int, pre_field, lo: int, hi: int, params: StdpParams) -> np.ndarray:
    times = np.arange(lo, hi + 1)
    return pre_field[:, lo : hi + 1] @ stdp_window(t_post - times, params)


def _online_bilayer(model: UnsupervisedModel, pre_field, schedule: SubsegmentSchedule) -> Optional[int]:
    """One image of subsegment-wise bilayer training; returns the last output winner."""
    syn01, syn12 = model.synapses
    lif, stdp, out_stdp = model.lif, model.stdp, model.output_stdp
    T = pre_field.shape[1] - 1
    hidden = LayerDynamics(syn01.post_count, model.hidden_lif or lif)
    output = LayerDynamics(syn12.post_count, lif)
    hidden_spikes = np.zeros((syn01.post_count, T + 1), dtype=bool)
    drive = np.full((syn12.post_count, T + 1), -np.inf)
    rows = pre_field.T
    hidden_winner = out_winner = None
    for start, stop in schedule.bounds(T):
        W01, W12 = syn01.weights, syn12.weights
        for t in range(start, stop + 1):
            h, _ = hidden.step(W01[rows[t]].sum(axis=0))
            if h is not None:
                hidden_spikes[h, t] = True
                hidden_winner = h
            o, d = output.step(W12[hidden_spikes[:, t]].sum(axis=0))
            drive[:, t] = d
            if o is not None:
                out_winner = o
        seg = drive[:, start : stop + 1]
        if seg.max() < lif.p_th:
            continue
        j, k = np.unravel_index(np.argmax(seg), seg.shape)
        tu_max = start + int(k)
        lo = max(tu_max - schedule.halfwidth, 0)
        hi_in = min(tu_max + schedule.halfwidth, T)
        hi_hidden = min(hi_in, stop)
        # hidden -> output, post = the peaking output neuron
        col = syn12.weights[:, j]
        col += _pair_delta(tu_max, hidden_spikes, lo, hi_hidden, out_stdp)
        np.clip(col, out_stdp.w_min, out_stdp.w_max, out=col)
        # input -> hidden, post = hidden neurons spiking inside the same window
        h_idx, h_t = np.nonzero(hidden_spikes[:, lo : hi_hidden + 1])
        for h, th in zip(h_idx, h_t + lo):
            col = syn01.weights[:, h]
            col += _pair_delta(int(th), pre_field, lo, hi_in, stdp)
            np.clip(col, stdp.w_min, stdp.w_max, out=col)
    micro_modify(hidden_winner, pre_field, syn01, stdp)
    micro_modify(out_winner, hidden_spikes, syn12, out_stdp)
    return out_winner


def _check_dataset(images, labels, classes, n_out):
    if len(images) == 0:
        raise ModelError("training dataset is empty")
    if len(images) != len(labels):
        raise DimensionError("images and labels differ in length")
    if len(classes) < 2:
        raise ModelError(f"need at least two classes, got {len(classes)}")
    if n_out != len(classes):
        raise ModelError(f"output layer has {n_out} neurons but there are {len(classes)} classes")
    unknown = set(labels) - set(classes)
    if unknown:
        raise ModelError(f"labels not in class list: {sorted(unknown)}")
    shapes = {np.shape(img) for img in images}
    if len(shapes) != 1:
        raise DimensionError(f"images differ in shape: {sorted(shapes)}")


def evaluate_winners(model: UnsupervisedModel, fields) -> list[Optional[int]]:
    return [winner_for_field(model, f) for f in fields]


def _epoch_record(epoch: int, model: UnsupervisedModel, winners, labels) -> dict:
    classes = model.classes
    preds = [None if w is None else model.class_map[w] for w in winners]
    labels = list(labels)
    per_class = {}
    for c in classes:
        idx = [i for i, y in enumerate(labels) if y == c]
        per_class[c] = float(np.mean([preds[i] == c for i in idx])) if idx else float("nan")
    overall = float(np.mean([p == y for p, y in zip(preds, labels)]))
    last = model.synapses[-1]
    at_min = float(np.mean(model.synapses[0].weights <= model.stdp.w_min))
    return {
        "epoch": epoch,
        "per_class": per_class,
        "overall": overall,
        "bijective": model.is_bijective(),
        "winners": list(winners),
        "fraction_at_w_min": at_min,
        "output_fraction_at_w_min": float(np.mean(last.weights <= last.w_min)),
    }


def _fit(model: UnsupervisedModel, images, labels, epochs: int, seed: int,
         image_step: Callable[[np.ndarray], Optional[int]], shuffle: bool,
         on_epoch: Optional[Callable[[dict], None]]) -> UnsupervisedModel:
    fields = _encode_all(images, model.encoder)
    order_rng = np.random.default_rng([seed & 0xFFFFFFFF, 1])
    n_out = model.synapses[-1].post_count
    for epoch in range(1, epochs + 1):
        order = order_rng.permutation(len(fields)) if shuffle else np.arange(len(fields))
        for i in order:
            image_step(fields[i])
        winners = evaluate_winners(model, fields)
        model.class_map = calibrate(winners, labels, model.classes, n_out)
        rec = _epoch_record(epoch, model, winners, labels)
        model.history.append(rec)
        log.info("epoch %d: accuracy %.3f bijective=%s", epoch, rec["overall"], rec["bijective"])
        if on_epoch is not None:
            on_epoch(rec)
    if epochs == 0:
        winners = evaluate_winners(model, fields)
        model.class_map = calibrate(winners, labels, model.classes, n_out)
    for syn in model.synapses:
        # stored checkpoints hold 32-bit weights; keep the in-memory model identical
        syn.weights = quantize_weights(syn.weights, syn.w_min, syn.w_max)
    return model


def _prepare(images, labels, classes):
    images = [as_image(img) for img in images]
    labels = list(labels)
    classes = list(classes) if classes is not None else sorted(set(labels))
    return images, labels, classes


def train_unsupervised_single(images, labels, lif: LifParams = LifParams(), stdp: StdpParams = StdpParams(),
                              epochs: int = 20, seed: int = 0, *, classes=None,
                              encoder: EncoderSpec | None = None, init=(0.6, 0.8), shuffle: bool = True,
                              on_epoch=None) -> UnsupervisedModel:
    """Online STDP training of an input -> output network with winner-takes-all."""
    images, labels, classes = _prepare(images, labels, classes)
    _check_dataset(images, labels, classes, len(classes))
    encoder = replace(encoder or EncoderSpec(sedsi_T=lif.sedsi_T), sedsi_T=lif.sedsi_T, seed=seed)
    rng = np.random.default_rng([seed & 0xFFFFFFFF, 0])
    m = images[0].size
    syn = init_synapses(m, len(classes), stdp, rng, init)
    model = UnsupervisedModel([syn], lif, stdp, encoder, images[0].shape, classes,
                              [None] * len(classes), seed=seed)
    return _fit(model, images, labels, epochs, seed,
                lambda f: _online_single(syn, f, lif, stdp), shuffle, on_epoch)


def train_unsupervised_bilayer(images, labels, lif: LifParams = LifParams(), stdp: StdpParams = StdpParams(),
                               schedule: SubsegmentSchedule = SubsegmentSchedule(), epochs: int = 20,
                               seed: int = 0, *, classes=None, hidden: int = 100, output_gain: float = 120.0,
                               output_stdp: StdpParams | None = None, hidden_inhibit: float | None = None,
                               encoder: EncoderSpec | None = None, init=(0.6, 0.8), shuffle: bool = True,
                               on_epoch=None) -> UnsupervisedModel:
    """Two-matrix STDP training with subsegment-wise weight updates.

    The hidden -> output matrix uses ``stdp`` scaled by ``output_gain`` so
    that a single hidden spike can carry an output neuron over threshold.
    """
    if hidden < 1:
        raise ModelError("bilayer network needs a hidden layer")
    schedule.bounds(lif.sedsi_T)
    images, labels, classes = _prepare(images, labels, classes)
    _check_dataset(images, labels, classes, len(classes))
    encoder = replace(encoder or EncoderSpec(sedsi_T=lif.sedsi_T), sedsi_T=lif.sedsi_T, seed=seed)
    out_stdp = output_stdp or stdp.scaled(output_gain)
    hidden_lif = None if hidden_inhibit is None else lif.with_(p_inhibit=hidden_inhibit)
    rng = np.random.default_rng([seed & 0xFFFFFFFF, 0])
    m = images[0].size
    syn01 = init_synapses(m, hidden, stdp, rng, init)
    syn12 = init_synapses(hidden, len(classes), out_stdp, rng, init)
    model = UnsupervisedModel([syn01, syn12], lif, stdp, encoder, images[0].shape, classes,
                              [None] * len(classes), output_stdp=out_stdp, hidden_lif=hidden_lif, seed=seed)
    return _fit(model, images, labels, epochs, seed,
                lambda f: _online_bilayer(model, f, schedule), shuffle, on_epoch)


def first_bijective_epoch(history: Sequence[dict]) -> Optional[int]:
    for rec in history:
        if rec["bijective"]:
            return rec["epoch"]
    return None
