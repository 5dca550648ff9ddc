"""Shared fixtures: a tiny offline base model and one completed training run."""

from __future__ import annotations

from pathlib import Path

import pytest

from finetune_driver.prepare import prepare_run
from finetune_driver.spec import TrainSpec
from finetune_driver.tinymodel import build_tiny_model
from finetune_driver.train import train

DATA_DIR = Path(__file__).parent / "data"
SMOKE_FILE = DATA_DIR / "train_smoke.txt"


@pytest.fixture(scope="session")
def tiny_base(tmp_path_factory) -> Path:
    """A random small backbone + tokenizer trained on the smoke records."""
    return build_tiny_model(SMOKE_FILE, tmp_path_factory.mktemp("base"), seed=0)


def smoke_spec(tiny_base: Path, out_dir: Path, **overrides) -> TrainSpec:
    return TrainSpec(
        train_file=SMOKE_FILE,
        base_model=tiny_base,
        output_dir=out_dir,
        **overrides,
    )


@pytest.fixture(scope="session")
def trained_run(tiny_base, tmp_path_factory):
    """One 10-step training run shared by every test that needs artifacts.

    The learning rate is raised so the loss drop over so few steps is far
    above seed noise; both overrides land in the manifest.
    """
    spec = smoke_spec(tiny_base, tmp_path_factory.mktemp("run"),
                      epochs=2, learning_rate=1e-2)
    manifest = prepare_run(spec)
    result = train(manifest)
    return manifest, result
