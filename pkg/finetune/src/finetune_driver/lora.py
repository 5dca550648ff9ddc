"""Low-rank adapters over attention query/value projections.

Only the small ``lora_a``/``lora_b`` factor matrices train; every backbone
parameter stays frozen, which is verified by hashing the backbone before and
after training.  Adapters can be saved standalone, reloaded onto a fresh
backbone, or merged into the base weights for export.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from pathlib import Path

import torch
from torch import nn

log = logging.getLogger(__name__)

TARGET_MODULES = ("q_proj", "v_proj")
ADAPTER_WEIGHTS_NAME = "adapter_weights.pt"
ADAPTER_CONFIG_NAME = "adapter_config.json"


class LoraLinear(nn.Module):
    """A frozen linear layer plus a trainable low-rank perturbation."""

    def __init__(self, base: nn.Linear, rank: int, alpha: float, dropout: float):
        super().__init__()
        self.base = base
        for param in self.base.parameters():
            param.requires_grad_(False)
        self.lora_a = nn.Parameter(torch.empty(rank, base.in_features))
        self.lora_b = nn.Parameter(torch.zeros(base.out_features, rank))
        nn.init.kaiming_uniform_(self.lora_a, a=math.sqrt(5))
        self.scaling = alpha / rank
        self.dropout = nn.Dropout(dropout)

    def forward(self, x):
        delta = self.dropout(x) @ self.lora_a.T @ self.lora_b.T
        return self.base(x) + delta * self.scaling

    def merged_weight(self) -> torch.Tensor:
        return self.base.weight + (self.lora_b @ self.lora_a) * self.scaling


def apply_adapters(model, rank: int, alpha: float, dropout: float) -> int:
    """Freeze the model and wrap every target projection; return wrap count."""
    for param in model.parameters():
        param.requires_grad_(False)
    wrapped = 0
    for module in model.modules():
        for name, child in list(module.named_children()):
            if name in TARGET_MODULES and isinstance(child, nn.Linear):
                setattr(module, name, LoraLinear(child, rank, alpha, dropout))
                wrapped += 1
    if wrapped == 0:
        raise ValueError(
            f"model has no {'/'.join(TARGET_MODULES)} linear layers to adapt"
        )
    return wrapped


def trainable_parameters(model):
    return [p for p in model.parameters() if p.requires_grad]


def parameter_counts(model) -> tuple[int, int]:
    trainable = sum(p.numel() for p in model.parameters() if p.requires_grad)
    total = sum(p.numel() for p in model.parameters())
    return trainable, total


def backbone_fingerprint(model) -> str:
    """SHA-256 over all frozen parameters, in name order."""
    digest = hashlib.sha256()
    for name, param in sorted(model.named_parameters()):
        if not param.requires_grad:
            digest.update(name.encode("utf-8"))
            digest.update(param.detach().cpu().numpy().tobytes())
    return digest.hexdigest()


def adapter_state_dict(model) -> dict:
    return {
        name: param.detach().cpu()
        for name, param in model.named_parameters()
        if "lora_" in name
    }


def save_adapter(model, out_dir, rank: int, alpha: float, dropout: float) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.save(adapter_state_dict(model), out_dir / ADAPTER_WEIGHTS_NAME)
    config = {
        "rank": rank,
        "alpha": alpha,
        "dropout": dropout,
        "target_modules": list(TARGET_MODULES),
    }
    (out_dir / ADAPTER_CONFIG_NAME).write_text(
        json.dumps(config, indent=2), encoding="utf-8"
    )
    log.info("saved adapter (%d tensors) to %s", len(adapter_state_dict(model)), out_dir)
    return out_dir


def load_adapter(model, adapter_dir):
    """Wrap a fresh backbone and load saved adapter weights onto it."""
    adapter_dir = Path(adapter_dir)
    config_path = adapter_dir / ADAPTER_CONFIG_NAME
    weights_path = adapter_dir / ADAPTER_WEIGHTS_NAME
    if not config_path.is_file() or not weights_path.is_file():
        raise FileNotFoundError(f"no adapter found in {adapter_dir}")
    config = json.loads(config_path.read_text(encoding="utf-8"))
    apply_adapters(model, config["rank"], config["alpha"], config["dropout"])
    state = torch.load(weights_path, map_location="cpu", weights_only=True)
    missing, unexpected = model.load_state_dict(state, strict=False)
    if unexpected:
        raise ValueError(f"adapter weights do not fit this model: {unexpected[:3]}")
    loaded = {name for name in state}
    still_missing = [
        name for name in missing if "lora_" in name and name not in loaded
    ]
    if still_missing:
        raise ValueError(f"adapter weights incomplete: {still_missing[:3]}")
    return model


def merge_adapters(model):
    """Fold every adapter back into its base projection, in place."""
    merged = 0
    for module in model.modules():
        for name, child in list(module.named_children()):
            if isinstance(child, LoraLinear):
                child.base.weight.data = child.merged_weight().detach()
                setattr(module, name, child.base)
                merged += 1
    if merged == 0:
        raise ValueError("model has no adapters to merge")
    return model
