import csv
import json

import numpy as np
import pytest

from pipeline import run, run_cli_pipeline
from snnsar.data import write_pgm
from snnsar.encoding import EncoderSpec
from snnsar.modelio import load_checkpoint, save_checkpoint
from snnsar.neuron import LifParams, SynapseMatrix
from snnsar.stdp import StdpParams, UnsupervisedModel


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipe")
    outputs = run_cli_pipeline(root)
    return root, outputs


def test_stats_prints_parameter_count(tmp_path, capsys):
    model = UnsupervisedModel([SynapseMatrix(np.zeros((16384, 3)), -1.2, 1.4)], LifParams(), StdpParams(),
                              EncoderSpec(), (128, 128), ["a", "b", "c"], ["a", "b", "c"])
    save_checkpoint(model, tmp_path / "m.snncp")
    assert run("stats", "--model", tmp_path / "m.snncp") == 0
    assert "parameters: 49152" in capsys.readouterr().out.splitlines()


def test_unknown_subcommand_exits_1(capsys):
    assert run("fly") == 1
    assert "usage" in capsys.readouterr().err


def test_missing_required_flag_exits_1():
    assert run("stats") == 1


def test_missing_model_exits_2(tmp_path):
    assert run("stats", "--model", tmp_path / "none.snncp") == 2


def test_bad_config_exits_1(tmp_path):
    (tmp_path / "c.cfg").write_text("nonsense = 1\n")
    assert run("gen-data", "--config", tmp_path / "c.cfg", "--out", tmp_path / "d") == 1


def test_existing_output_needs_force(tmp_path):
    args = ("gen-data", "--kind", "orthogonal", "--per-class", 1, "--test-per-class", 0, "--size", 16)
    assert run(*args, "--out", tmp_path / "d") == 0
    assert run(*args, "--out", tmp_path / "d") == 2
    assert run(*args, "--force", "--out", tmp_path / "d") == 0


def test_pipeline_outputs(pipeline_dir):
    root, outputs = pipeline_dir
    rows = list(csv.reader(outputs["eval_unsup.csv"].decode().splitlines()))
    assert rows[0] == ["class", "accuracy", "pred_pattern0", "pred_pattern1", "pred_pattern2", "no_decision"]
    assert rows[-1][0] == "overall"
    sweep = list(csv.reader(outputs["sweep.csv"].decode().splitlines()))
    assert [r[0] for r in sweep[1:]] == ["inf", "10.0", "5.0", "0.0", "-5.0"]
    guide = list(csv.reader(outputs["guidance.csv"].decode().splitlines()))
    assert guide[0][:3] == ["class_index", "class", "t0"] and len(guide) == 4
    assert load_checkpoint(root / "sup.snncp").mode == "supervised"


def test_classify_is_deterministic(pipeline_dir, capsys, tmp_path):
    root, _ = pipeline_dir
    image = root / "data" / "pattern1" / "test" / "pattern1_0000.pgm"
    labels = []
    for model in ("unsup.snncp", "sup.snncp"):
        for _ in range(2):
            assert run("classify", "--model", root / model, "--image", image) == 0
            labels.append(capsys.readouterr().out.strip())
    assert labels[0] == labels[1] and labels[2] == labels[3]
    assert set(labels) <= {"pattern0", "pattern1", "pattern2", "no-decision"}
    assert run("classify", "--model", root / "sup.snncp", "--image", image, "--out", tmp_path / "c.json") == 0
    assert json.loads((tmp_path / "c.json").read_text())["label"] == labels[2]


def test_encode_and_trace(pipeline_dir, tmp_path):
    root, _ = pipeline_dir
    image = root / "data" / "pattern0" / "train" / "pattern0_0000.pgm"
    assert run("encode", "--image", image, "--out", tmp_path / "s.txt") == 0
    assert (tmp_path / "s.txt").read_text().startswith("spikefield v1 32 32 70")
    assert run("trace", "--model", root / "unsup.snncp", "--spikes", tmp_path / "s.txt", "--out", tmp_path / "t.csv") == 0
    rows = list(csv.reader((tmp_path / "t.csv").read_text().splitlines()))
    assert rows[0] == ["layer", "time_unit", "neuron", "drive", "potential", "spike"]
    assert len(rows) == 1 + 71 * 3
    assert run("trace", "--model", root / "sup.snncp", "--image", image, "--out", tmp_path / "u.csv") == 3


def test_export_features(pipeline_dir, tmp_path):
    root, _ = pipeline_dir
    assert run("export-features", "--model", root / "unsup.snncp", "--out", tmp_path / "map") == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["map0.pgm", "map1.pgm", "map2.pgm"]


def test_bilayer_command(pipeline_dir, tmp_path):
    root, _ = pipeline_dir
    assert run("train-bilayer", "--data", root / "data", "--epochs", 1, "--hidden", 10,
               "--out", tmp_path / "b.snncp") == 0
    assert load_checkpoint(tmp_path / "b.snncp").topology == (1024, 10, 3)
    assert (tmp_path / "b.snncp.csv").exists()


def test_loader_rejects_rgb(tmp_path):
    from PIL import Image
    for c in ("a", "b"):
        (tmp_path / "d" / c).mkdir(parents=True)
        write_pgm(tmp_path / "d" / c / "x.pgm", np.zeros((8, 8)))
    Image.new("RGB", (8, 8)).save(tmp_path / "d" / "a" / "y.png")
    assert run("train-unsup", "--data", tmp_path / "d", "--out", tmp_path / "m.snncp") == 2
