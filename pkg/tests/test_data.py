import filecmp
import math

import numpy as np
import pytest
from PIL import Image

from snnsar.data import (
    NoiseSpec, SplitSpec, add_noise, class_names, generate_synthetic, load_dataset, noise_field,
    orthogonal_active_sets, orthogonal_patterns, parse_snr_list, read_image, signal_power, write_dataset,
    write_pgm,
)
from snnsar.errors import DataError, DomainError, NumericError


def make_tree(root, classes=("a", "b", "c"), per_class=4, size=8):
    rng = np.random.default_rng(0)
    for c in classes:
        (root / c).mkdir(parents=True)
        for i in range(per_class):
            write_pgm(root / c / f"{i}.pgm", rng.random((size, size)))


def test_load_tree_with_ratio_split(tmp_path):
    make_tree(tmp_path)
    d = load_dataset(tmp_path, SplitSpec(test_fraction=0.25, seed=0))
    assert d.classes == ["a", "b", "c"] and len(d.samples) == 12
    assert len(d.split("test")) == 3 and len(d.split("train")) == 9
    again = load_dataset(tmp_path, SplitSpec(test_fraction=0.25, seed=0))
    assert [s.path for s in d.samples] == [s.path for s in again.samples]
    assert [s.split for s in d.samples] == [s.split for s in again.samples]


def test_lexicographic_order(tmp_path):
    make_tree(tmp_path, per_class=3)
    d = load_dataset(tmp_path, SplitSpec(test_fraction=0.0))
    paths = [s.path for s in d.samples]
    assert paths == sorted(paths)


def test_empty_class_is_named(tmp_path):
    make_tree(tmp_path, classes=("a", "b"))
    (tmp_path / "empty").mkdir()
    with pytest.raises(DataError, match="empty"):
        load_dataset(tmp_path)


def test_mixed_sizes_rejected(tmp_path):
    make_tree(tmp_path, classes=("a",))
    (tmp_path / "b").mkdir()
    write_pgm(tmp_path / "b" / "x.pgm", np.zeros((9, 9)))
    with pytest.raises(DataError):
        load_dataset(tmp_path)


def test_read_image_bit_depths(tmp_path):
    Image.fromarray(np.array([[0, 65535]], dtype=np.uint16)).save(tmp_path / "w.png")
    assert np.allclose(read_image(tmp_path / "w.png"), [[0.0, 1.0]])
    Image.fromarray(np.array([[0, 255]], dtype=np.uint8)).save(tmp_path / "e.png")
    assert np.allclose(read_image(tmp_path / "e.png"), [[0.0, 1.0]])
    Image.new("RGB", (2, 2)).save(tmp_path / "c.png")
    with pytest.raises(DataError, match="mode"):
        read_image(tmp_path / "c.png")
    (tmp_path / "junk.pgm").write_bytes(b"not an image")
    with pytest.raises(DataError):
        read_image(tmp_path / "junk.pgm")


def test_generate_is_byte_identical(tmp_path):
    generate_synthetic(tmp_path / "x", 3, 50, 64, seed=7, test_per_class=0)
    generate_synthetic(tmp_path / "y", 3, 50, 64, seed=7, test_per_class=0)
    cmp = filecmp.dircmp(tmp_path / "x", tmp_path / "y")

    def same(c):
        if c.left_only or c.right_only or c.diff_files:
            return False
        _, mismatch, errors = filecmp.cmpfiles(c.left, c.right, c.common_files, shallow=False)
        return not mismatch and not errors and all(same(s) for s in c.subdirs.values())

    assert same(cmp)


def test_generated_classes_separate(tmp_path):
    # margin between class means vs. the intra-class standard deviation measured
    # along the axis that joins them
    d = generate_synthetic(tmp_path, 3, 50, 64, seed=7, test_per_class=0)
    X = {c: np.stack([s.image.ravel() for s in d.samples if s.label == c]) for c in d.classes}
    for i, a in enumerate(d.classes):
        for b in d.classes[i + 1:]:
            u = X[a].mean(axis=0) - X[b].mean(axis=0)
            margin = np.linalg.norm(u)
            u /= margin
            assert margin > max((X[a] @ u).std(), (X[b] @ u).std())


def test_generate_validation(tmp_path):
    with pytest.raises(DomainError):
        generate_synthetic(tmp_path, class_count=1)
    with pytest.raises(DomainError):
        generate_synthetic(tmp_path, size=8)


def test_class_names():
    assert class_names(4) == ["bar", "blobs", "ring", "bar2"]


def test_orthogonal_fixture_shape_and_disjoint_cores():
    d = orthogonal_patterns(per_class=30, size=32)
    assert len(d.split("train")) == 90 and d.classes == ["pattern0", "pattern1", "pattern2"]
    sets = orthogonal_active_sets(32)
    assert not (sets[0] & sets[1]).any() and not (sets[1] & sets[2]).any() and not (sets[0] & sets[2]).any()


def test_write_dataset_round_trip(tmp_path):
    d = orthogonal_patterns(per_class=2, size=16, test_per_class=1)
    write_dataset(d, tmp_path)
    back = load_dataset(tmp_path)
    assert back.classes == d.classes and len(back.samples) == len(d.samples)
    assert (tmp_path / "manifest.txt").exists()


def test_infinite_snr_is_identity(rng):
    img = rng.random((10, 10))
    out = add_noise(img, NoiseSpec(math.inf))
    assert np.array_equal(out, img) and out is not img


def test_noise_power_matches_snr():
    img = np.random.default_rng(1).random((256, 256))
    n = noise_field(img, 0.0, np.random.default_rng(2))
    assert abs(np.mean(n ** 2) / signal_power(img) - 1) < 0.05
    n10 = noise_field(img, 10.0, np.random.default_rng(2))
    assert abs(np.mean(n10 ** 2) / signal_power(img) - 0.1) < 0.005


def test_noise_is_clamped_and_deterministic(rng):
    img = rng.random((32, 32))
    a = add_noise(img, NoiseSpec(-5.0, seed=3))
    b = add_noise(img, NoiseSpec(-5.0, seed=3))
    assert np.array_equal(a, b)
    assert a.min() >= 0 and a.max() <= 1


def test_zero_image_noise_error():
    with pytest.raises(NumericError):
        add_noise(np.zeros((4, 4)), NoiseSpec(10.0))


def test_noise_spec_validation():
    with pytest.raises(DomainError):
        NoiseSpec(float("nan"))
    with pytest.raises(DomainError):
        NoiseSpec(-math.inf)


def test_parse_snr_list():
    assert parse_snr_list("inf, 10,5,0,-5") == [math.inf, 10, 5, 0, -5]
    with pytest.raises(DomainError):
        parse_snr_list("ten")
    with pytest.raises(DomainError):
        parse_snr_list(" , ")
