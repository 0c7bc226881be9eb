"""End-to-end command-line pipeline used by the CLI and acceptance tests."""

from pathlib import Path

from snnsar.cli import main

CSV_OUTPUTS = ("unsup.snncp.csv", "guidance.csv", "sup.snncp.csv", "eval_sup.csv", "eval_unsup.csv", "sweep.csv")


def run(*argv) -> int:
    return main([str(a) for a in argv])


def run_cli_pipeline(root, seed: int = 3, unsup_epochs: int = 8, sup_epochs: int = 3) -> dict[str, bytes]:
    """Generate the orthogonal fixture, train both stages, evaluate; returns CSV bytes by name."""
    root = Path(root)
    data = root / "data"
    steps = [
        ("gen-data", "--kind", "orthogonal", "--per-class", 30, "--test-per-class", 5, "--size", 32,
         "--seed", seed, "--out", data),
        ("train-unsup", "--data", data, "--epochs", unsup_epochs, "--seed", seed, "--out", root / "unsup.snncp"),
        ("extract-guidance", "--model", root / "unsup.snncp", "--data", data, "--out", root / "guidance.csv"),
        ("train-sup", "--data", data, "--guidance", root / "guidance.csv", "--epochs", sup_epochs,
         "--seed", seed, "--out", root / "sup.snncp"),
        ("eval", "--model", root / "sup.snncp", "--data", data, "--out", root / "eval_sup.csv"),
        ("eval", "--model", root / "unsup.snncp", "--data", data, "--jobs", 2, "--out", root / "eval_unsup.csv"),
        ("noise-sweep", "--model", root / "sup.snncp", "--data", data, "--seed", seed, "--out", root / "sweep.csv"),
    ]
    for step in steps:
        rc = run(*step)
        if rc != 0:
            raise AssertionError(f"step {step[0]} exited with {rc}")
    return {name: (root / name).read_bytes() for name in CSV_OUTPUTS}
