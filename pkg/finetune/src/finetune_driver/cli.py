"""Command-line entry points: tiny / prepare / train / serve / export."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import FinetuneError
from .spec import TrainSpec

log = logging.getLogger(__name__)


def _add_spec_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--train-file", required=True)
    parser.add_argument("--base-model", required=True)
    parser.add_argument("--out", required=True, dest="output_dir")
    parser.add_argument("--lr", type=float, default=None)
    parser.add_argument("--rank", type=int, default=None)
    parser.add_argument("--alpha", type=float, default=None)
    parser.add_argument("--dropout", type=float, default=None)
    parser.add_argument("--seq-len", type=int, default=None)
    parser.add_argument("--batch-size", type=int, default=None)
    parser.add_argument("--warmup", type=int, default=None)
    parser.add_argument("--epochs", type=int, default=None)
    parser.add_argument("--pad-slot", default=None,
                        help="reserved special-token slot name used for padding")
    parser.add_argument("--load-in-4bit", action="store_true")
    parser.add_argument("--seed", type=int, default=None)


def _spec_from_args(args: argparse.Namespace) -> TrainSpec:
    overrides = {
        "learning_rate": args.lr,
        "adapter_rank": args.rank,
        "adapter_alpha": args.alpha,
        "adapter_dropout": args.dropout,
        "sequence_length": args.seq_len,
        "batch_size": args.batch_size,
        "warmup_steps": args.warmup,
        "epochs": args.epochs,
        "padding_token_name": args.pad_slot,
        "rng_seed": args.seed,
    }
    kwargs = {key: value for key, value in overrides.items() if value is not None}
    if args.load_in_4bit:
        kwargs["load_in_4bit"] = True
    return TrainSpec(
        train_file=args.train_file,
        base_model=args.base_model,
        output_dir=args.output_dir,
        **kwargs,
    )


def _emit(summary: dict) -> None:
    print(json.dumps(summary, sort_keys=True))


def cmd_tiny(args: argparse.Namespace) -> int:
    from .tinymodel import build_tiny_model

    out = build_tiny_model(args.train_file, args.out, vocab_size=args.vocab_size,
                           seed=args.seed)
    _emit({"command": "tiny", "model_dir": str(out)})
    return 0


def cmd_prepare(args: argparse.Namespace) -> int:
    from .prepare import prepare_run

    manifest = prepare_run(_spec_from_args(args))
    _emit({
        "command": "prepare",
        "records": manifest.record_count,
        "truncated": manifest.truncated_count,
        "pad_token_id": manifest.pad_token_id,
        "total_steps": manifest.total_steps,
        "out": str(manifest.spec.output_dir),
    })
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    from .prepare import prepare_run
    from .train import train

    manifest = prepare_run(_spec_from_args(args))
    result = train(manifest)
    _emit({
        "command": "train",
        "steps": result.steps,
        "initial_loss": round(result.initial_loss, 6),
        "final_loss": round(result.final_loss, 6),
        "trainable_params": result.trainable_params,
        "adapter_dir": str(result.adapter_dir),
    })
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    from .serve import serve_forever

    serve_forever(args.base_model, args.adapter, host=args.host, port=args.port,
                  max_new_tokens=args.max_new_tokens)
    return 0


def cmd_export(args: argparse.Namespace) -> int:
    from .serve import export_merged

    out = export_merged(args.base_model, args.adapter, args.out)
    _emit({"command": "export", "model_dir": str(out)})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finetune-driver",
        description="Adapter fine-tuning over flat instruction-response files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_tiny = sub.add_parser("tiny", help="build a tiny random model for smoke runs")
    p_tiny.add_argument("--train-file", required=True)
    p_tiny.add_argument("--out", required=True)
    p_tiny.add_argument("--vocab-size", type=int, default=800)
    p_tiny.add_argument("--seed", type=int, default=0)
    p_tiny.set_defaults(func=cmd_tiny)

    p_prepare = sub.add_parser("prepare", help="validate data and write the run manifest")
    _add_spec_arguments(p_prepare)
    p_prepare.set_defaults(func=cmd_prepare)

    p_train = sub.add_parser("train", help="prepare and train adapters")
    _add_spec_arguments(p_train)
    p_train.set_defaults(func=cmd_train)

    p_serve = sub.add_parser("serve", help="serve base+adapter as chat completions")
    p_serve.add_argument("--base-model", required=True)
    p_serve.add_argument("--adapter", required=True)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8080)
    p_serve.add_argument("--max-new-tokens", type=int, default=128)
    p_serve.set_defaults(func=cmd_serve)

    p_export = sub.add_parser("export", help="merge adapters and write a standalone model")
    p_export.add_argument("--base-model", required=True)
    p_export.add_argument("--adapter", required=True)
    p_export.add_argument("--out", required=True)
    p_export.set_defaults(func=cmd_export)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, ValueError) as exc:
        log.error("invalid input: %s", exc)
        return 2
    except FinetuneError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
