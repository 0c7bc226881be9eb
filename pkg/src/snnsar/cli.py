"""``snn`` command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numeric or model error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import shutil
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import RunConfig, parse_config
from .data import (SplitSpec, generate_synthetic, load_dataset, orthogonal_patterns, parse_snr_list, read_image,
                   write_dataset)
from .encoding import encode_image, read_spike_field, write_spike_field
from .errors import ConfigError, DataError, ModelError, SnnError
from .evaluation import evaluate, noise_sweep, predict
from .modelio import export_feature_maps, load_checkpoint, model_stats, save_checkpoint
from .stdp import UnsupervisedModel, forward, train_unsupervised_bilayer, train_unsupervised_single
from .supervised import GuidanceBundle, SupervisedModel, extract_guidance, train_supervised

log = logging.getLogger("snnsar")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# helpers


def _config(args) -> RunConfig:
    cfg = parse_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = cfg.with_(seed=args.seed)
    return cfg


def _claim_output(path, force: bool, directory: bool = False) -> Path:
    path = Path(path)
    if path.exists():
        if directory and path.is_dir() and not any(path.iterdir()):
            return path
        if not force:
            raise DataError(f"{path}: output already exists (pass --force to overwrite)")
        if directory and path.is_dir():
            shutil.rmtree(path)
    if not directory and path.parent and not path.parent.exists():
        raise DataError(f"{path}: parent directory does not exist")
    return path


def _require(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n, None) is None]
    if missing:
        raise ConfigError(f"{args.command} requires {', '.join(missing)}")


def _load_data(args, cfg: RunConfig):
    ds = load_dataset(args.data, SplitSpec(cfg.test_fraction, cfg.seed))
    pixels = ds.samples[0].image.size
    if "input_neurons" in cfg.explicit and cfg.input_neurons != pixels:
        raise DataError(f"{args.data}: images have {pixels} pixels but the config sets input_neurons = "
                        f"{cfg.input_neurons}")
    if "output_neurons" in cfg.explicit and cfg.output_neurons != len(ds.classes):
        raise DataError(f"{args.data}: dataset has {len(ds.classes)} classes but the config sets "
                        f"output_neurons = {cfg.output_neurons}")
    return ds


def _load_model(path):
    model = load_checkpoint(path)
    return model


def _read_guidance(path, classes=None) -> GuidanceBundle:
    path = Path(path)
    try:
        rows = list(csv.reader(path.read_text().splitlines()))
    except OSError as exc:
        raise DataError(f"{path}: cannot read guidance ({exc.strerror})") from None
    if not rows or rows[0][:2] != ["class_index", "class"]:
        raise DataError(f"{path}: not a guidance file (expected header 'class_index,class,t0,...')")
    names, traces = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        try:
            idx = int(row[0])
            vals = [float(v) for v in row[2:]]
        except (ValueError, IndexError):
            raise DataError(f"{path}: line {lineno}: malformed guidance row") from None
        if idx != len(names):
            raise DataError(f"{path}: line {lineno}: class indices must run 0, 1, 2, ...")
        names.append(row[1])
        traces.append(vals)
    if len({len(t) for t in traces}) != 1:
        raise DataError(f"{path}: guidance rows differ in length")
    if classes is not None and list(classes) != names:
        raise DataError(f"{path}: guidance classes {names} do not match dataset classes {list(classes)}")
    return GuidanceBundle(np.array(traces), names)


def _write_guidance(bundle: GuidanceBundle, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["class_index", "class"] + [f"t{t}" for t in range(bundle.traces.shape[1])])
        for k, (name, row) in enumerate(zip(bundle.classes, bundle.traces)):
            w.writerow([k, name] + [repr(float(v)) for v in row])


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else str(x)
    return str(x)


def _report_path(args) -> Path:
    return Path(args.report) if args.report else Path(str(args.out) + ".csv")


def _unsup_history_csv(path, model: UnsupervisedModel) -> None:
    header = ["epoch", "overall_accuracy"] + [f"accuracy_{c}" for c in model.classes] + [
        "bijective", "fraction_at_w_min"]
    rows = [[r["epoch"], _fmt(r["overall"])] + [_fmt(r["per_class"][c]) for c in model.classes]
            + [int(r["bijective"]), _fmt(r["fraction_at_w_min"])] for r in model.history]
    _write_csv(path, header, rows)


# subcommands


def cmd_gen_data(args, cfg: RunConfig) -> int:
    _require(args, "out")
    out = _claim_output(args.out, args.force, directory=True)
    if args.kind == "orthogonal":
        ds = orthogonal_patterns(args.per_class, args.size, cfg.seed, args.classes, args.test_per_class)
        write_dataset(ds, out)
    else:
        ds = generate_synthetic(out, args.classes, args.per_class, args.size, cfg.seed, args.test_per_class)
    print(f"wrote {len(ds.samples)} images in {len(ds.classes)} classes to {out}")
    return 0


def cmd_encode(args, cfg: RunConfig) -> int:
    _require(args, "image", "out")
    out = _claim_output(args.out, args.force)
    img = read_image(args.image)
    field = encode_image(img, cfg.encoder(), args.index)
    write_spike_field(out, field, img.shape[1], img.shape[0])
    print(f"wrote {field.shape[0]} spike trains over {field.shape[1]} time units to {out}")
    return 0


def cmd_trace(args, cfg: RunConfig) -> int:
    _require(args, "model", "out")
    if (args.image is None) == (args.spikes is None):
        raise ConfigError("trace needs exactly one of --image or --spikes")
    model = _load_model(args.model)
    if not isinstance(model, UnsupervisedModel):
        raise ModelError(f"{args.model}: trace needs a spiking (unsupervised) model")
    if args.spikes:
        field, _, _ = read_spike_field(args.spikes)
    else:
        field = encode_image(read_image(args.image), model.encoder, args.index)
    out = _claim_output(args.out, args.force)
    rows = []
    for layer, tr in enumerate(forward(model, field)):
        for t in range(tr.potentials.shape[1]):
            for j in range(tr.potentials.shape[0]):
                rows.append([layer, t, j, _fmt(float(tr.drive[j, t])), _fmt(float(tr.potentials[j, t])),
                             int(tr.spikes[j, t])])
    _write_csv(out, ["layer", "time_unit", "neuron", "drive", "potential", "spike"], rows)
    return 0


def _train_unsup(args, cfg: RunConfig, bilayer: bool) -> int:
    _require(args, "data", "out")
    out = _claim_output(args.out, args.force)
    report = _claim_output(_report_path(args), args.force)
    ds = _load_data(args, cfg)
    epochs = cfg.epochs if args.epochs is None else args.epochs
    common = dict(classes=ds.classes, encoder=cfg.encoder(), init=cfg.init_range)
    imgs, labels = ds.images("train"), ds.labels("train")
    if not imgs:
        raise DataError(f"{args.data}: no training images")
    if bilayer:
        hidden = cfg.hidden_neurons if args.hidden is None else args.hidden
        model = train_unsupervised_bilayer(imgs, labels, cfg.lif(), cfg.stdp(), cfg.schedule(), epochs, cfg.seed,
                                           hidden=hidden, output_gain=cfg.output_gain, **common)
    else:
        model = train_unsupervised_single(imgs, labels, cfg.lif(), cfg.stdp(), epochs, cfg.seed, **common)
    save_checkpoint(model, out)
    _unsup_history_csv(report, model)
    last = model.history[-1] if model.history else None
    if last:
        print(f"epoch {last['epoch']}: training accuracy {last['overall']:.4f}, bijective={last['bijective']}")
    return 0


def cmd_train_unsup(args, cfg):
    return _train_unsup(args, cfg, bilayer=False)


def cmd_train_bilayer(args, cfg):
    return _train_unsup(args, cfg, bilayer=True)


def cmd_extract_guidance(args, cfg: RunConfig) -> int:
    _require(args, "model", "data", "out")
    out = _claim_output(args.out, args.force)
    model = _load_model(args.model)
    if not isinstance(model, UnsupervisedModel):
        raise ModelError(f"{args.model}: guidance comes from an unsupervised model")
    ds = _load_data(args, cfg)
    if ds.classes != model.classes:
        raise DataError(f"{args.data}: dataset classes {ds.classes} differ from model classes {model.classes}")
    bundle = extract_guidance(model, ds.representatives())
    _write_guidance(bundle, out)
    return 0


def cmd_train_sup(args, cfg: RunConfig) -> int:
    _require(args, "data", "guidance", "out")
    out = _claim_output(args.out, args.force)
    report = _claim_output(_report_path(args), args.force)
    ds = _load_data(args, cfg)
    guidance = _read_guidance(args.guidance, ds.classes)
    epochs = cfg.sup_epochs if args.epochs is None else args.epochs
    test = (ds.images("test"), ds.labels("test")) if ds.split("test") else None
    model = train_supervised(ds.images("train"), ds.labels("train"), guidance, cfg.lif(), cfg.kernel(),
                             cfg.huber(), cfg.adam(), epochs, cfg.seed, encoder=cfg.encoder(), test=test,
                             init_scale=cfg.sup_init_scale)
    save_checkpoint(model, out)
    rows = [[r["epoch"], _fmt(r["loss"]), _fmt(r["train_accuracy"]), _fmt(r["test_accuracy"])]
            for r in model.history]
    _write_csv(report, ["epoch", "loss", "train_accuracy", "test_accuracy"], rows)
    if model.history:
        r = model.history[-1]
        print(f"epoch {r['epoch']}: train accuracy {r['train_accuracy']:.4f}, test accuracy {r['test_accuracy']:.4f}")
    return 0


def cmd_classify(args, cfg: RunConfig) -> int:
    _require(args, "model", "image")
    model = _load_model(args.model)
    guidance = _read_guidance(args.guidance) if args.guidance else None
    label = predict(model, read_image(args.image), args.index, guidance)
    text = "no-decision" if label is None else label
    print(text)
    if args.out:
        out = _claim_output(args.out, args.force)
        out.write_text(json.dumps({"image": str(args.image), "label": label}) + "\n")
    return 0


def _guidance_for(args, model):
    if args.guidance:
        return _read_guidance(args.guidance, model.classes)
    return None


def cmd_eval(args, cfg: RunConfig) -> int:
    _require(args, "model", "data", "out")
    out = _claim_output(args.out, args.force)
    model = _load_model(args.model)
    ds = _load_data(args, cfg)
    rep = evaluate(model, ds, _guidance_for(args, model), args.split, args.jobs)
    rows = [[c, _fmt(rep.per_class_accuracy[c])] + rep.confusion[i].tolist() for i, c in enumerate(rep.classes)]
    rows.append(["overall", _fmt(rep.overall_accuracy)] + [""] * len(rep.classes) + [rep.no_decision_count])
    _write_csv(out, ["class", "accuracy"] + [f"pred_{c}" for c in rep.classes] + ["no_decision"], rows)
    print(f"accuracy {rep.overall_accuracy:.4f} ({rep.no_decision_count} without decision)")
    return 0


def cmd_noise_sweep(args, cfg: RunConfig) -> int:
    _require(args, "model", "data", "out")
    out = _claim_output(args.out, args.force)
    model = _load_model(args.model)
    ds = _load_data(args, cfg)
    snrs = parse_snr_list(args.snr)
    results = noise_sweep(model, ds, snrs, cfg.seed, _guidance_for(args, model), args.split, args.jobs)
    rows = [[_fmt(snr), _fmt(rep.overall_accuracy), rep.no_decision_count] for snr, rep in results]
    _write_csv(out, ["snr_db", "accuracy", "no_decision"], rows)
    for snr, rep in results:
        print(f"snr {snr}: accuracy {rep.overall_accuracy:.4f}")
    return 0


def cmd_export_features(args, cfg: RunConfig) -> int:
    _require(args, "model", "out")
    model = _load_model(args.model)
    n = model.topology[-1]
    for j in range(n):
        _claim_output(f"{args.out}{j}.pgm", args.force)
    for p in export_feature_maps(model, args.out):
        print(p)
    return 0


def cmd_stats(args, cfg: RunConfig) -> int:
    _require(args, "model")
    stats = model_stats(_load_model(args.model))
    for key in ("mode", "parameters", "parameters_millions", "memory_bytes", "macs_per_time_unit", "macs_per_image"):
        print(f"{key}: {stats[key]}")
    if args.out:
        out = _claim_output(args.out, args.force)
        out.write_text(json.dumps(stats) + "\n")
    return 0


COMMANDS = {
    "gen-data": (cmd_gen_data, "generate a synthetic dataset tree"),
    "encode": (cmd_encode, "encode one image into a spike-field file"),
    "trace": (cmd_trace, "record potentials and spikes of a model on one input"),
    "train-unsup": (cmd_train_unsup, "train a single-layer STDP network"),
    "train-bilayer": (cmd_train_bilayer, "train a two-layer STDP network"),
    "extract-guidance": (cmd_extract_guidance, "write per-class guidance traces from an STDP model"),
    "train-sup": (cmd_train_sup, "train the gradient-based network against guidance traces"),
    "classify": (cmd_classify, "classify one image"),
    "eval": (cmd_eval, "evaluate a model on a dataset split"),
    "noise-sweep": (cmd_noise_sweep, "evaluate under additive noise at several SNRs"),
    "export-features": (cmd_export_features, "write one weight map per output neuron as PGM"),
    "stats": (cmd_stats, "print parameter, memory and operation counts"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="snn", description="Spiking network image classifier toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="run configuration file (key = value lines)")
        p.add_argument("--seed", type=int, help="random seed (overrides the config)")
        p.add_argument("--out", help="output file, directory or prefix")
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")
        p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
        if name in ("train-unsup", "train-bilayer", "extract-guidance", "train-sup", "eval", "noise-sweep"):
            p.add_argument("--data", help="dataset root directory")
        if name in ("trace", "extract-guidance", "classify", "eval", "noise-sweep", "export-features", "stats"):
            p.add_argument("--model", help="checkpoint file")
        if name in ("train-sup", "classify", "eval", "noise-sweep"):
            p.add_argument("--guidance", help="guidance CSV")
        if name in ("train-unsup", "train-bilayer", "train-sup"):
            p.add_argument("--epochs", type=int, help="number of epochs (overrides the config)")
            p.add_argument("--report", help="per-epoch accuracy CSV (default: <out>.csv)")
        if name in ("eval", "noise-sweep"):
            p.add_argument("--jobs", type=int, default=1, help="parallel evaluation workers")
            p.add_argument("--split", default="test", choices=("train", "test"), help="dataset split")
        if name in ("encode", "trace", "classify"):
            p.add_argument("--image", help="input image (PGM or PNG)")
            p.add_argument("--index", type=int, default=0, help="encoding stream index")
        if name == "trace":
            p.add_argument("--spikes", help="spike-field file instead of an image")
        if name == "noise-sweep":
            p.add_argument("--snr", default="inf,10,5,0,-5", help="comma-separated SNR levels in dB")
        if name == "train-bilayer":
            p.add_argument("--hidden", type=int, help="hidden-layer size (overrides the config)")
        if name == "gen-data":
            p.add_argument("--kind", choices=("speckle", "orthogonal"), default="speckle")
            p.add_argument("--classes", type=int, default=3)
            p.add_argument("--per-class", type=int, default=50, help="training images per class")
            p.add_argument("--test-per-class", type=int, default=20)
            p.add_argument("--size", type=int, default=64)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) < 1:
        print(f"snn {args.command}: error: --jobs must be >= 1", file=sys.stderr)
        return 1
    handler = COMMANDS[args.command][0]
    try:
        return handler(args, _config(args))
    except ConfigError as exc:
        print(f"snn {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"snn {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (SnnError, FloatingPointError) as exc:
        print(f"snn {args.command}: error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"snn {args.command}: error: {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
