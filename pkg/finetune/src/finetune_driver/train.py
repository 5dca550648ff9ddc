"""Adapter training loop.

Loads the backbone, wraps the attention query/value projections with
low-rank adapters, and runs AdamW with a linear warmup.  Every optimizer
step appends ``{"step", "loss"}`` to a loss log, and the frozen backbone is
fingerprinted before and after training to prove only adapter weights moved.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path

import torch

from .errors import FinetuneError, ModelLoadError, OutOfMemory
from .lora import (
    apply_adapters,
    backbone_fingerprint,
    parameter_counts,
    save_adapter,
    trainable_parameters,
)
from .prepare import RunManifest, load_tokenizer

log = logging.getLogger(__name__)

LOSS_LOG_NAME = "loss_log.jsonl"
ADAPTER_DIR_NAME = "adapter"


@dataclass
class TrainResult:
    steps: int
    initial_loss: float
    final_loss: float
    backbone_hash: str
    trainable_params: int
    total_params: int
    adapter_dir: Path
    loss_log: Path


def load_model(base_model, load_in_4bit: bool = False):
    if load_in_4bit:
        try:
            import bitsandbytes  # noqa: F401
        except ImportError as exc:
            raise ModelLoadError(
                "4-bit loading requires the bitsandbytes package and a CUDA "
                "device; install bitsandbytes or rerun without load_in_4bit"
            ) from exc
    from transformers import AutoModelForCausalLM

    try:
        return AutoModelForCausalLM.from_pretrained(str(base_model))
    except Exception as exc:
        raise ModelLoadError(f"could not load a model from {base_model}: {exc}") from exc


def _batches(records: list[str], batch_size: int, epochs: int, seed: int):
    rng = random.Random(seed)
    for _ in range(epochs):
        order = list(range(len(records)))
        rng.shuffle(order)
        for start in range(0, len(order), batch_size):
            yield [records[i] for i in order[start : start + batch_size]]


def train(manifest: RunManifest) -> TrainResult:
    """Train adapters per the manifest; returns the run summary.

    Raises :class:`OutOfMemory` with remediation hints when a step cannot be
    allocated, and :class:`FinetuneError` if the backbone fingerprint changes.
    """
    spec = manifest.spec
    torch.manual_seed(spec.rng_seed)

    from .data import load_flat_records

    records = load_flat_records(spec.train_file)
    tokenizer = load_tokenizer(spec.base_model)
    tokenizer.pad_token = spec.pad_token
    model = load_model(spec.base_model, spec.load_in_4bit)
    model.train()

    apply_adapters(model, spec.adapter_rank, spec.adapter_alpha, spec.adapter_dropout)
    trainable, total = parameter_counts(model)
    fingerprint_before = backbone_fingerprint(model)
    log.info("training %d of %d parameters", trainable, total)

    optimizer = torch.optim.AdamW(trainable_parameters(model), lr=spec.learning_rate)
    warmup = max(spec.warmup_steps, 1)
    schedule = torch.optim.lr_scheduler.LambdaLR(
        optimizer, lambda step: min(1.0, (step + 1) / warmup)
    )

    out_dir = Path(spec.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    loss_log = out_dir / LOSS_LOG_NAME
    step = 0
    initial_loss = final_loss = 0.0
    with loss_log.open("w", encoding="utf-8") as handle:
        for batch in _batches(records, spec.batch_size, spec.epochs, spec.rng_seed):
            encoded = tokenizer(
                batch,
                return_tensors="pt",
                padding="longest",
                truncation=True,
                max_length=spec.sequence_length,
            )
            labels = encoded["input_ids"].clone()
            labels[encoded["attention_mask"] == 0] = -100
            try:
                out = model(**encoded, labels=labels)
                out.loss.backward()
            except (torch.cuda.OutOfMemoryError, MemoryError) as exc:
                raise OutOfMemory(
                    f"step {step + 1} could not be allocated; reduce batch_size "
                    f"(now {spec.batch_size}) or sequence_length (now "
                    f"{spec.sequence_length}), or enable load_in_4bit"
                ) from exc
            optimizer.step()
            schedule.step()
            optimizer.zero_grad()
            step += 1
            final_loss = float(out.loss.detach())
            if step == 1:
                initial_loss = final_loss
            handle.write(json.dumps({"step": step, "loss": round(final_loss, 6)}) + "\n")

    if step != manifest.total_steps:
        raise FinetuneError(
            f"ran {step} steps but the manifest planned {manifest.total_steps}"
        )
    if backbone_fingerprint(model) != fingerprint_before:
        raise FinetuneError("backbone weights changed during adapter training")

    adapter_dir = save_adapter(
        model, out_dir / ADAPTER_DIR_NAME, spec.adapter_rank, spec.adapter_alpha,
        spec.adapter_dropout,
    )
    log.info("finished %d steps: loss %.4f -> %.4f", step, initial_loss, final_loss)
    return TrainResult(
        steps=step,
        initial_loss=initial_loss,
        final_loss=final_loss,
        backbone_hash=fingerprint_before,
        trainable_params=trainable,
        total_params=total,
        adapter_dir=adapter_dir,
        loss_log=loss_log,
    )
