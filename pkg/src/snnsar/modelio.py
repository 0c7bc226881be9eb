"""Checkpoints, feature-map export and model statistics.

Checkpoint layout::

    snncp v1\\n
    <one line of JSON: mode, shapes, parameters, class map, ...>\\n
    <payload: little-endian float32 values, row-major, matrices in header order>

Weights are held in memory at float32 precision after training, so a
save/load round trip reproduces every matrix bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .data import write_pgm
from .encoding import EncoderSpec
from .errors import FormatError, ModelError
from .neuron import LifParams, SynapseMatrix
from .stdp import StdpParams, UnsupervisedModel
from .supervised import AdamConfig, GuidanceBundle, HuberSpec, ResponseKernel, SupervisedModel

MAGIC = "snncp"
FORMAT_VERSION = 1
MODES = ("unsup_single", "unsup_bilayer", "supervised")
_DTYPE = np.dtype("<f4")


def _bound(x: float):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def _unbound(x) -> float:
    return float(x)


def _matrices(model) -> list[tuple[str, np.ndarray, float, float]]:
    if isinstance(model, UnsupervisedModel):
        names = ["input_output"] if len(model.synapses) == 1 else ["input_hidden", "hidden_output"]
        return [(n, s.weights, s.w_min, s.w_max) for n, s in zip(names, model.synapses)]
    if isinstance(model, SupervisedModel):
        s = model.synapses
        return [("input_output", s.weights, s.w_min, s.w_max),
                ("guidance", model.guidance.traces, -math.inf, math.inf)]
    raise ModelError(f"cannot save object of type {type(model).__name__}")


def _header(model) -> dict:
    head = {
        "format_version": FORMAT_VERSION,
        "mode": model.mode,
        "topology": list(model.topology),
        "image_shape": list(model.image_shape),
        "classes": list(model.classes),
        "seed": int(model.seed),
        "lif": asdict(model.lif),
        "encoder": asdict(model.encoder),
        "matrices": [{"name": n, "shape": list(w.shape), "w_min": _bound(lo), "w_max": _bound(hi)}
                     for n, w, lo, hi in _matrices(model)],
    }
    if isinstance(model, UnsupervisedModel):
        head["stdp"] = asdict(model.stdp)
        head["class_map"] = list(model.class_map)
        head["output_stdp"] = asdict(model.output_stdp) if model.output_stdp else None
        head["hidden_lif"] = asdict(model.hidden_lif) if model.hidden_lif else None
    else:
        head["kernel"] = asdict(model.kernel)
        head["huber"] = asdict(model.huber)
        head["adam"] = asdict(model.adam)
        head["unit"] = model.unit
        head["class_map"] = list(model.classes)
    return head


def save_checkpoint(model, path) -> None:
    mats = _matrices(model)
    head = json.dumps(_header(model), sort_keys=True)
    payload = b"".join(np.ascontiguousarray(w, dtype=_DTYPE).tobytes() for _, w, _, _ in mats)
    with open(path, "wb") as fh:
        fh.write(f"{MAGIC} v{FORMAT_VERSION}\n".encode())
        fh.write(head.encode() + b"\n")
        fh.write(payload)


def _read_parts(path) -> tuple[dict, bytes]:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"{path}: cannot read checkpoint ({exc.strerror})") from None
    first, sep, rest = raw.partition(b"\n")
    tokens = first.decode("ascii", errors="replace").split()
    if not sep or len(tokens) != 2 or tokens[0] != MAGIC:
        raise FormatError(f"{path}: not a checkpoint (missing '{MAGIC} v{FORMAT_VERSION}' magic line)")
    if tokens[1] != f"v{FORMAT_VERSION}":
        raise FormatError(f"{path}: unsupported checkpoint version {tokens[1]!r}; expected v{FORMAT_VERSION}")
    head_line, sep, payload = rest.partition(b"\n")
    if not sep:
        raise FormatError(f"{path}: truncated checkpoint header")
    try:
        head = json.loads(head_line)
    except (json.JSONDecodeError, UnicodeDecodeError):
        raise FormatError(f"{path}: corrupt checkpoint header") from None
    if head.get("mode") not in MODES:
        raise FormatError(f"{path}: unknown model mode {head.get('mode')!r}")
    return head, payload


def _split_payload(path, head: dict, payload: bytes) -> list[np.ndarray]:
    specs = head.get("matrices") or []
    sizes = [int(np.prod(m["shape"])) for m in specs]
    expected = sum(sizes) * _DTYPE.itemsize
    if len(payload) < expected:
        raise FormatError(f"{path}: truncated payload: header declares {sum(sizes)} values, "
                          f"found {len(payload) // _DTYPE.itemsize}")
    if len(payload) > expected:
        raise FormatError(f"{path}: payload holds {len(payload) - expected} bytes beyond the declared matrices")
    values = np.frombuffer(payload, dtype=_DTYPE)
    out, pos = [], 0
    for spec, size in zip(specs, sizes):
        out.append(values[pos: pos + size].astype(np.float64).reshape(spec["shape"]))
        pos += size
    return out


def load_checkpoint(path):
    head, payload = _read_parts(path)
    mats = _split_payload(path, head, payload)
    specs = head["matrices"]
    try:
        lif = LifParams(**head["lif"])
        encoder = EncoderSpec(**head["encoder"])
        shape = tuple(head["image_shape"])
        classes = list(head["classes"])
        if int(np.prod(shape)) != mats[0].shape[0]:
            raise FormatError(f"{path}: image shape {shape} does not match {mats[0].shape[0]} inputs")
        if head["mode"] == "supervised":
            if len(mats) != 2:
                raise FormatError(f"{path}: supervised checkpoint needs weights and guidance")
            return SupervisedModel(
                SynapseMatrix(mats[0], _unbound(specs[0]["w_min"]), _unbound(specs[0]["w_max"])),
                lif, ResponseKernel(**head["kernel"]), HuberSpec(**head["huber"]), AdamConfig(**head["adam"]),
                encoder, shape, classes, GuidanceBundle(mats[1], classes), head["seed"], [], head["unit"])
        expected = 1 if head["mode"] == "unsup_single" else 2
        if len(mats) != expected:
            raise FormatError(f"{path}: mode {head['mode']} needs {expected} weight matrices, found {len(mats)}")
        syns = [SynapseMatrix(w, _unbound(s["w_min"]), _unbound(s["w_max"])) for w, s in zip(mats, specs)]
        for a, b in zip(syns, syns[1:]):
            if a.post_count != b.pre_count:
                raise FormatError(f"{path}: weight matrices do not chain ({a.weights.shape} then {b.weights.shape})")
        return UnsupervisedModel(
            syns, lif, StdpParams(**head["stdp"]), encoder, shape, classes, list(head["class_map"]),
            output_stdp=StdpParams(**head["output_stdp"]) if head.get("output_stdp") else None,
            hidden_lif=LifParams(**head["hidden_lif"]) if head.get("hidden_lif") else None,
            seed=head["seed"])
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: checkpoint header is missing or has a malformed field ({exc})") from None


# feature maps


def feature_columns(model) -> np.ndarray:
    """Per-output-neuron input weight maps, shape ``(pixels, outputs)``.

    For a bilayer network the map of output ``j`` is the composite
    ``W_in_hidden @ W_hidden_out[:, j]``.
    """
    if isinstance(model, SupervisedModel):
        return model.synapses.weights
    W = model.synapses[0].weights
    for syn in model.synapses[1:]:
        W = W @ syn.weights
    return W


def to_gray(values) -> np.ndarray:
    """Min-max scale to 0..255 (a constant map becomes all zeros)."""
    v = np.asarray(values, dtype=np.float64)
    span = v.max() - v.min()
    if span == 0:
        return np.zeros(v.shape, dtype=np.uint8)
    return np.rint((v - v.min()) / span * 255).astype(np.uint8)


def export_feature_maps(model, path_prefix) -> list[Path]:
    """Write ``<prefix><j>.pgm`` for every output neuron; returns the paths."""
    cols = feature_columns(model)
    shape = tuple(model.image_shape)
    prefix = str(path_prefix)
    out = []
    for j in range(cols.shape[1]):
        path = Path(f"{prefix}{j}.pgm")
        try:
            write_pgm(path, to_gray(cols[:, j]).reshape(shape))
        except OSError as exc:
            raise FormatError(f"{path}: cannot write feature map ({exc.strerror or exc})") from None
        out.append(path)
    return out


# statistics


def model_stats(model) -> dict:
    """Parameter count, 32-bit memory footprint and multiply-accumulate estimate.

    One time unit costs one multiply-accumulate per synapse, so an image
    costs ``parameters * sedsi_T``.
    """
    if isinstance(model, SupervisedModel):
        mats = [model.synapses.weights]
    elif isinstance(model, UnsupervisedModel):
        mats = [s.weights for s in model.synapses]
    else:
        raise ModelError(f"no statistics for object of type {type(model).__name__}")
    params = int(sum(w.size for w in mats))
    if params == 0:
        raise ModelError("model has no weights")
    T = model.lif.sedsi_T
    return {
        "mode": model.mode,
        "topology": list(model.topology),
        "parameters": params,
        "parameters_millions": params / 1e6,
        "memory_bytes": 4 * params,
        "macs_per_time_unit": params,
        "macs_per_image": params * T,
    }
