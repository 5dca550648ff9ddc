"""Build a tiny randomly initialized chat model for offline smoke runs.

Trains a byte-level BPE tokenizer on a flat training file — including the
reserved special-token slot used for padding — and pairs it with a small
randomly initialized Llama-architecture backbone.  The result exercises the
whole prepare/train/serve path in seconds on a CPU without downloading
anything.
"""

from __future__ import annotations

import logging
from pathlib import Path

import torch
from tokenizers import Tokenizer, decoders, models, pre_tokenizers, trainers
from transformers import LlamaConfig, LlamaForCausalLM, PreTrainedTokenizerFast

log = logging.getLogger(__name__)

BOS = "<s>"
EOS = "</s>"
RESERVED_PAD = "<|reserved_special_token_250|>"


def build_tokenizer(train_file, vocab_size: int = 800) -> PreTrainedTokenizerFast:
    tok = Tokenizer(models.BPE())
    tok.pre_tokenizer = pre_tokenizers.ByteLevel(add_prefix_space=False)
    tok.decoder = decoders.ByteLevel()
    trainer = trainers.BpeTrainer(
        vocab_size=vocab_size,
        special_tokens=[BOS, EOS, RESERVED_PAD],
        initial_alphabet=pre_tokenizers.ByteLevel.alphabet(),
    )
    tok.train([str(train_file)], trainer)
    return PreTrainedTokenizerFast(tokenizer_object=tok, bos_token=BOS, eos_token=EOS)


def build_tiny_model(train_file, out_dir, vocab_size: int = 800,
                     hidden_size: int = 64, num_layers: int = 2,
                     seed: int = 0) -> Path:
    """Write a random tiny backbone plus tokenizer to ``out_dir``."""
    tokenizer = build_tokenizer(train_file, vocab_size)
    torch.manual_seed(seed)
    config = LlamaConfig(
        vocab_size=len(tokenizer),
        hidden_size=hidden_size,
        intermediate_size=hidden_size * 2,
        num_hidden_layers=num_layers,
        num_attention_heads=4,
        num_key_value_heads=4,
        max_position_embeddings=2048,
        bos_token_id=tokenizer.bos_token_id,
        eos_token_id=tokenizer.eos_token_id,
    )
    model = LlamaForCausalLM(config)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(out_dir)
    tokenizer.save_pretrained(out_dir)
    log.info(
        "wrote tiny model (%d params, vocab %d) to %s",
        sum(p.numel() for p in model.parameters()), len(tokenizer), out_dir,
    )
    return out_dir
