"""Training-run configuration.

The defaults are the reference recipe in full: LoRA rank/alpha 16, dropout
0.05, learning rate 2e-4, sequence length 1024, batch size 10, 10 warmup
steps, one epoch, and padding assigned to a reserved special-token slot
(never the end-of-sequence token — an EOS pad makes the model generate
repetitions).  Any override shows up verbatim in the run manifest.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Union


@dataclass
class TrainSpec:
    train_file: Union[str, Path]
    base_model: Union[str, Path]
    output_dir: Union[str, Path]
    learning_rate: float = 2e-4
    adapter_rank: int = 16
    adapter_alpha: int = 16
    adapter_dropout: float = 0.05
    sequence_length: int = 1024
    batch_size: int = 10
    warmup_steps: int = 10
    epochs: int = 1
    padding_token_name: str = "reserved_special_token_250"
    load_in_4bit: bool = False
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.sequence_length <= 0:
            raise ValueError(f"sequence_length must be > 0, got {self.sequence_length}")
        if self.batch_size <= 0:
            raise ValueError(f"batch_size must be > 0, got {self.batch_size}")
        if self.adapter_rank <= 0:
            raise ValueError(f"adapter_rank must be > 0, got {self.adapter_rank}")
        if not 0.0 <= self.adapter_dropout < 1.0:
            raise ValueError(f"adapter_dropout must be in [0, 1), got {self.adapter_dropout}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be ≥ 1, got {self.epochs}")
        if self.warmup_steps < 0:
            raise ValueError(f"warmup_steps must be ≥ 0, got {self.warmup_steps}")

    @property
    def pad_token(self) -> str:
        """The literal token string of the configured padding slot."""
        return f"<|{self.padding_token_name}|>"

    def to_record(self) -> dict:
        rec = asdict(self)
        for key in ("train_file", "base_model", "output_dir"):
            rec[key] = str(rec[key])
        return rec


def _defaults() -> dict:
    return {
        f.name: f.default
        for f in fields(TrainSpec)
        if f.name not in ("train_file", "base_model", "output_dir")
    }


def spec_overrides(spec: TrainSpec) -> dict:
    """Non-default hyperparameter values, recorded in the manifest."""
    return {
        name: getattr(spec, name)
        for name, default in _defaults().items()
        if getattr(spec, name) != default
    }
