#!/usr/bin/env python3
"""End-to-end smoke run on the bundled 50-record training file.

Builds a tiny random base model, trains adapters for ten steps, serves the
result as a chat-completions endpoint, sends one request, and exports the
merged model.  Everything runs offline on a CPU in under a minute.
"""

from __future__ import annotations

import argparse
import json
import logging
import urllib.request
from pathlib import Path

from finetune_driver.prepare import load_tokenizer, prepare_run
from finetune_driver.serve import export_merged, load_adapted_model, start_server
from finetune_driver.spec import TrainSpec
from finetune_driver.tinymodel import build_tiny_model
from finetune_driver.train import train

DEFAULT_TRAIN_FILE = Path(__file__).resolve().parents[1] / "tests" / "data" / "train_smoke.txt"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/smoke", help="artifact directory")
    parser.add_argument("--train-file", default=DEFAULT_TRAIN_FILE)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")

    out = Path(args.out)
    base = build_tiny_model(args.train_file, out / "base", seed=args.seed)
    spec = TrainSpec(train_file=args.train_file, base_model=base,
                     output_dir=out / "run", epochs=2, learning_rate=1e-2,
                     rng_seed=args.seed)
    manifest = prepare_run(spec)
    print(f"prepared: {manifest.record_count} records, "
          f"{manifest.total_steps} steps planned, pad id {manifest.pad_token_id}")

    result = train(manifest)
    print(f"trained: {result.steps} steps, loss {result.initial_loss:.4f} -> "
          f"{result.final_loss:.4f}, {result.trainable_params} of "
          f"{result.total_params} parameters trainable")

    model = load_adapted_model(base, result.adapter_dir)
    tokenizer = load_tokenizer(base)
    server, _ = start_server(model, tokenizer, port=0, max_new_tokens=16)
    body = json.dumps({
        "model": "adapted",
        "messages": [{"role": "user",
                      "content": "[INST] Identify all food entities: soup. [/INST]"}],
        "temperature": 0.0,
        "max_tokens": 12,
    }).encode("utf-8")
    request = urllib.request.Request(
        f"http://127.0.0.1:{server.server_port}/v1/chat/completions",
        data=body, headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(request, timeout=120) as response:
        payload = json.loads(response.read())
    print(f"served reply: {payload['choices'][0]['message']['content']!r}")
    server.shutdown()

    merged = export_merged(base, result.adapter_dir, out / "merged")
    print(f"exported merged model to {merged}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
