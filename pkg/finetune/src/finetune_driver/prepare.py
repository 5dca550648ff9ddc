"""Run preparation: validate data, resolve the tokenizer, fix the manifest.

The padding token is assigned to a named reserved special-token slot and is
required to be distinct from the end-of-sequence token (padding with EOS
teaches the model to repeat itself).  Everything the training loop will do —
padding policy, truncation policy, optimizer, schedule, and any
hyperparameter overrides — is recorded in the manifest up front so a run is
reproducible from its artifacts alone.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

from .data import load_flat_records
from .errors import ModelLoadError, TokenizerSlotUnavailable
from .spec import TrainSpec, spec_overrides

log = logging.getLogger(__name__)

MANIFEST_NAME = "run_manifest.json"


@dataclass
class RunManifest:
    spec: TrainSpec
    record_count: int
    truncated_count: int
    max_tokens: int
    mean_tokens: float
    pad_token: str
    pad_token_id: int
    eos_token_id: int
    pad_distinct_from_eos: bool
    steps_per_epoch: int
    total_steps: int
    padding_policy: str = "pad to the longest sequence in the batch"
    truncation_policy: str = ""
    optimizer: str = "adamw"
    lr_schedule: str = ""
    overrides: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        rec = dict(self.__dict__)
        rec["spec"] = self.spec.to_record()
        return rec


def load_tokenizer(base_model):
    from transformers import AutoTokenizer

    try:
        return AutoTokenizer.from_pretrained(str(base_model))
    except Exception as exc:
        raise ModelLoadError(
            f"could not load a tokenizer from {base_model}: {exc}"
        ) from exc


def prepare_run(spec: TrainSpec) -> RunManifest:
    """Validate the training file and resolve tokenizer/padding policy.

    Writes the manifest to ``{output_dir}/run_manifest.json`` and returns it.
    Raises :class:`MissingMarkers` for malformed records and
    :class:`TokenizerSlotUnavailable` when the tokenizer lacks the
    configured reserved padding slot.
    """
    records = load_flat_records(spec.train_file)
    tokenizer = load_tokenizer(spec.base_model)

    if spec.pad_token not in tokenizer.get_vocab():
        raise TokenizerSlotUnavailable(
            f"tokenizer for {spec.base_model} has no {spec.pad_token} slot"
        )
    pad_token_id = tokenizer.convert_tokens_to_ids(spec.pad_token)
    eos_token_id = tokenizer.eos_token_id
    if pad_token_id == eos_token_id:
        raise TokenizerSlotUnavailable(
            f"{spec.pad_token} resolves to the end-of-sequence token; "
            "padding with EOS makes the model generate repetitions"
        )

    lengths = [len(tokenizer(rec)["input_ids"]) for rec in records]
    steps_per_epoch = math.ceil(len(records) / spec.batch_size)
    manifest = RunManifest(
        spec=spec,
        record_count=len(records),
        truncated_count=sum(1 for n in lengths if n > spec.sequence_length),
        max_tokens=max(lengths, default=0),
        mean_tokens=round(sum(lengths) / len(lengths), 2) if lengths else 0.0,
        pad_token=spec.pad_token,
        pad_token_id=pad_token_id,
        eos_token_id=eos_token_id,
        pad_distinct_from_eos=True,
        steps_per_epoch=steps_per_epoch,
        total_steps=steps_per_epoch * spec.epochs,
        truncation_policy=f"truncate to {spec.sequence_length} tokens",
        lr_schedule=f"linear warmup over {spec.warmup_steps} steps, then constant",
        overrides=spec_overrides(spec),
    )

    out_dir = Path(spec.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / MANIFEST_NAME).write_text(
        json.dumps(manifest.to_record(), indent=2), encoding="utf-8"
    )
    log.info(
        "prepared run: %d records, %d over the %d-token budget",
        manifest.record_count,
        manifest.truncated_count,
        spec.sequence_length,
    )
    return manifest
