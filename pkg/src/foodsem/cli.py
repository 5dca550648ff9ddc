"""Command-line entry point wiring the corpus-to-evaluation pipeline.

Subcommands: ingest, convert, analyze, balance, folds, prompts, run, eval,
simulate, and pipeline (convert → balance → folds).  Every subcommand prints
one machine-readable JSON summary line and is byte-identical across reruns
given the same inputs and seeds.  Exit status: 0 success, 1 validation
failure, 2 configuration/usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional

from . import balance as bal
from . import folds as fold_mod
from .bioc import group_ontology_variants, load_corpus
from .errors import ConfigError, FoodsemError, InsufficientExemplars
from .evaluate import gold_from_pair, parse_response, report_to_json, score_nel
from .gateway import CorruptionProfile, GatewayConfig, complete_batch, simulate_response
from .irpairs import (
    IRPair,
    PairSource,
    TaskKind,
    build_ir_sequence,
    flat_text,
    pair_from_record,
    pair_to_record,
    sequences_to_records,
)
from .pools import load_phrase_pools
from .prompts import build_nshot_prompt
from .refs import Ontology, UriMode
from .util import read_jsonl, write_jsonl

log = logging.getLogger(__name__)

ONTOLOGY_CHOICES = tuple(o.value for o in Ontology)


def _summary(**fields) -> None:
    print(json.dumps(fields, ensure_ascii=False))


def _load_pairs(path) -> list[IRPair]:
    return [pair_from_record(rec) for rec in read_jsonl(path)]


def _load_general(path) -> list[IRPair]:
    """General-instruction corpus: IR records, or bare {instruction, response}."""
    pairs = []
    for i, rec in enumerate(read_jsonl(path)):
        if "pair_id" in rec and "task" in rec:
            pairs.append(pair_from_record(rec))
        else:
            pairs.append(
                IRPair(
                    pair_id=f"general/{i:06d}",
                    task=TaskKind.GENERAL,
                    instruction=rec["instruction"],
                    response=rec["response"],
                    gold=None,
                    source=PairSource.GENERAL,
                    source_id=f"general/{i:06d}",
                )
            )
    return pairs


def _convert(corpus_dir, pools_path, uri_mode: UriMode, seed: int):
    docs = load_corpus(corpus_dir)
    bundles = group_ontology_variants(docs)
    pools = load_phrase_pools(pools_path)
    sequences = [build_ir_sequence(b, pools, uri_mode, seed) for b in bundles]
    return docs, bundles, sequences


# ---------------------------------------------------------------------------
# Subcommand handlers


def cmd_ingest(args) -> int:
    docs = load_corpus(args.corpus_dir)
    out = Path(args.out)
    n = write_jsonl(out / "documents.jsonl", [d.to_record() for d in docs])
    _summary(
        command="ingest",
        documents=n,
        annotations=sum(len(d.annotations) for d in docs),
        notes=sum(len(d.notes) for d in docs),
        out=str(out / "documents.jsonl"),
    )
    return 0


def cmd_convert(args) -> int:
    docs, bundles, sequences = _convert(
        args.corpus_dir, args.pools, UriMode(args.uri_mode), args.seed
    )
    out = Path(args.out)
    records = sequences_to_records(sequences)
    write_jsonl(out / "ir_pairs.jsonl", records)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "ir_pairs.txt", "w", encoding="utf-8") as fh:
        for seq in sequences:
            for pair in seq.pairs:
                fh.write(flat_text(pair) + "\n")
    _summary(
        command="convert",
        documents=len(docs),
        sequences=len(sequences),
        pairs=len(records),
        out=str(out / "ir_pairs.jsonl"),
    )
    return 0


def _requested_ontologies(args, pairs) -> list[Ontology]:
    if args.ontology:
        return [Ontology(args.ontology)]
    present = {p.ontology for p in pairs if p.task is TaskKind.NEL}
    return [o for o in Ontology if o in present]


def cmd_analyze(args) -> int:
    pairs = _load_pairs(args.pairs)
    out = Path(args.out)
    summary = {}
    for ont in _requested_ontologies(args, pairs):
        nel = [p for p in pairs if p.task is TaskKind.NEL and p.ontology is ont]
        report = bal.entity_distribution(nel, threshold=args.threshold, ontology=ont)
        path = out / f"distribution_{ont.value}.csv"
        bal.write_report_csv(report, path)
        summary[ont.value] = {
            "entities": len(report.counts),
            "total_deficit": sum(report.deficits.values()),
            "out": str(path),
        }
    _summary(command="analyze", threshold=args.threshold, ontologies=summary)
    return 0


def cmd_balance(args) -> int:
    pairs = _load_pairs(args.pairs)
    pools = load_phrase_pools(args.pools)
    file_lexicon = bal.load_lexicon(args.lexicon) if args.lexicon else bal.LabelLexicon()
    out = Path(args.out)
    all_artificial: list[IRPair] = []
    counts = {}
    for ont in _requested_ontologies(args, pairs):
        nel = [p for p in pairs if p.task is TaskKind.NEL and p.ontology is ont]
        report = bal.entity_distribution(nel, threshold=args.threshold, ontology=ont)
        bal.write_report_csv(report, out / f"distribution_{ont.value}.csv")
        lexicon = bal.build_lexicon(nel).merged_with(file_lexicon)
        artificial = bal.generate_artificial_pairs(
            report, lexicon, pools, rng_seed=args.seed, uri_mode=UriMode(args.uri_mode)
        )
        violations = bal.assert_no_leakage(artificial, nel)
        if violations:
            print(f"leakage: {len(violations)} duplicated instructions", file=sys.stderr)
            return 1
        counts[ont.value] = len(artificial)
        all_artificial.extend(artificial)
    write_jsonl(out / "artificial_pairs.jsonl", [pair_to_record(p) for p in all_artificial])
    _summary(
        command="balance",
        threshold=args.threshold,
        counts=counts,
        total=len(all_artificial),
        out=str(out / "artificial_pairs.jsonl"),
    )
    return 0


def cmd_folds(args) -> int:
    pairs = _load_pairs(args.pairs)
    if args.artificial:
        pairs = pairs + _load_pairs(args.artificial)
    general = _load_general(args.general) if args.general else []
    unique, dropped = fold_mod.dedupe_by_instruction(pairs)
    datasets = fold_mod.split_into_datasets(unique)
    plan = fold_mod.plan_folds(datasets, k=args.folds, rng_seed=args.seed)
    out = Path(args.out)
    fold_mod.save_plan(plan, out / "fold_plan.jsonl")
    pairs_by_id = {p.pair_id: p for p in unique}
    pairs_by_id.update({p.pair_id: p for p in general})

    indices = [args.fold_index] if args.fold_index is not None else range(plan.k)
    fold_counts = []
    for i in indices:
        manifest = fold_mod.materialize_fold(
            plan,
            i,
            general,
            token_budget=args.token_budget,
            general_target=args.general_target,
        )
        leaks = fold_mod.verify_no_leakage(manifest)
        if leaks:
            print(f"fold {i}: {len(leaks)} leaked instructions", file=sys.stderr)
            return 1
        sizes = fold_mod.export_fold(manifest, pairs_by_id, out / f"fold_{i}")
        sizes["general"] = manifest.general_count
        fold_counts.append(sizes)
        for note in manifest.notes:
            log.warning("fold %d: %s", i, note)
    _summary(
        command="folds",
        k=plan.k,
        dropped_duplicates=dropped,
        datasets={ds: len(items) for ds, items in datasets.items()},
        folds=fold_counts,
        out=str(out),
    )
    return 0


def cmd_prompts(args) -> int:
    targets = _load_pairs(args.targets)
    exemplars = _load_pairs(args.exemplars)
    records = []
    skipped = 0
    for pair in targets:
        if pair.task is TaskKind.GENERAL:
            continue
        try:
            prompt = build_nshot_prompt(
                pair.instruction,
                pair.task,
                pair.ontology,
                args.n_shot,
                exemplars,
                rng_seed=args.seed,
                uri_mode=UriMode(args.uri_mode),
            )
        except InsufficientExemplars:
            skipped += 1
            continue
        records.append({"instance_id": pair.pair_id, "n": prompt.n, "prompt": prompt.body})
    out = Path(args.out)
    path = out / f"prompts_{args.n_shot}shot.jsonl"
    write_jsonl(path, records)
    _summary(command="prompts", n=args.n_shot, built=len(records), skipped=skipped, out=str(path))
    return 0 if records else 1


def cmd_run(args) -> int:
    prompts = [(rec["instance_id"], rec["prompt"]) for rec in read_jsonl(args.prompts)]
    out = Path(args.out)
    config = GatewayConfig.from_env(
        endpoint_url=args.endpoint_url,
        max_in_flight=args.max_in_flight,
        max_attempts=args.attempts,
        request_timeout=args.timeout,
        transcript_path=out / "transcript.jsonl",
    )
    results = complete_batch(prompts, config)
    write_jsonl(
        out / "responses.jsonl",
        [
            {
                "instance_id": r.instance_id,
                "response": r.text,
                "failed": r.failed,
                "attempts": r.attempts,
                "latency_ms": round(r.latency_ms, 3),
            }
            for r in results
        ],
    )
    _summary(
        command="run",
        prompts=len(prompts),
        failed=sum(r.failed for r in results),
        out=str(out / "responses.jsonl"),
    )
    return 0


def _load_predictions(path, ontology: Ontology, gold_ids: set[str]):
    """Predictions from a responses file or an IR pairs file.

    Records outside the gold instance set are skipped, so one mixed
    responses file (all tasks and ontologies) can be evaluated per
    ontology; absent gold instances still count as misses downstream.
    """
    preds = []
    skipped = 0
    for rec in read_jsonl(path):
        instance_id = rec.get("instance_id") or rec.get("pair_id")
        if instance_id not in gold_ids:
            skipped += 1
            continue
        preds.append(parse_response(rec.get("response", ""), ontology, instance_id))
    if skipped:
        log.info("skipped %d prediction records outside the gold set", skipped)
    return preds


def cmd_eval(args) -> int:
    ont = Ontology(args.ontology)
    gold_pairs = [
        p
        for p in _load_pairs(args.gold)
        if p.task is TaskKind.NEL and p.ontology is ont and p.gold is not None
    ]
    gold = [gold_from_pair(p) for p in gold_pairs]
    preds = _load_predictions(args.preds, ont, {g.instance_id for g in gold})
    report = score_nel(gold, preds)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"eval_{ont.value}.json"
    path.write_text(json.dumps(report_to_json(report), indent=2), encoding="utf-8")
    m = report.macro_weighted
    _summary(
        command="eval",
        ontology=ont.value,
        precision=round(m["precision"], 6),
        recall=round(m["recall"], 6),
        f1=round(m["f1"], 6),
        instances=report.counts["instances"],
        non_meaningful=report.counts["non_meaningful"],
        out=str(path),
    )
    return 0


def cmd_simulate(args) -> int:
    pairs = [p for p in _load_pairs(args.pairs) if p.gold is not None]
    profile = CorruptionProfile(
        p_drop_mention=args.p_drop_mention,
        p_corrupt_ref=args.p_corrupt_ref,
        p_format_noise=args.p_format_noise,
        p_empty=args.p_empty,
        rng_seed=args.seed,
    )
    records = [
        {"instance_id": p.pair_id, "response": simulate_response(p, profile)}
        for p in pairs
    ]
    out = Path(args.out)
    write_jsonl(out / "responses.jsonl", records)
    _summary(command="simulate", responses=len(records), out=str(out / "responses.jsonl"))
    return 0


def cmd_pipeline(args) -> int:
    out = Path(args.out)
    uri_mode = UriMode(args.uri_mode)
    _, _, sequences = _convert(args.corpus_dir, args.pools, uri_mode, args.seed)
    cafeteria = [p for seq in sequences for p in seq.pairs]
    write_jsonl(out / "ir_pairs.jsonl", sequences_to_records(sequences))
    with open(out / "ir_pairs.txt", "w", encoding="utf-8") as fh:
        for pair in cafeteria:
            fh.write(flat_text(pair) + "\n")

    pools = load_phrase_pools(args.pools)
    file_lexicon = bal.load_lexicon(args.lexicon) if args.lexicon else bal.LabelLexicon()
    artificial: list[IRPair] = []
    artificial_counts = {}
    nel_pairs = [p for p in cafeteria if p.task is TaskKind.NEL]
    for ont in Ontology:
        nel = [p for p in nel_pairs if p.ontology is ont]
        if not nel:
            continue
        report = bal.entity_distribution(nel, threshold=args.threshold, ontology=ont)
        bal.write_report_csv(report, out / f"distribution_{ont.value}.csv")
        lexicon = bal.build_lexicon(nel).merged_with(file_lexicon)
        generated = bal.generate_artificial_pairs(
            report, lexicon, pools, rng_seed=args.seed, uri_mode=uri_mode
        )
        if bal.assert_no_leakage(generated, nel):
            print(f"leakage in generated {ont.value} pairs", file=sys.stderr)
            return 1
        artificial_counts[ont.value] = len(generated)
        artificial.extend(generated)
    write_jsonl(out / "artificial_pairs.jsonl", [pair_to_record(p) for p in artificial])

    general = _load_general(args.general) if args.general else []
    unique, dropped = fold_mod.dedupe_by_instruction(cafeteria + artificial)
    datasets = fold_mod.split_into_datasets(unique)
    plan = fold_mod.plan_folds(datasets, k=args.folds, rng_seed=args.seed)
    fold_mod.save_plan(plan, out / "fold_plan.jsonl")
    pairs_by_id = {p.pair_id: p for p in unique}
    pairs_by_id.update({p.pair_id: p for p in general})
    for i in range(plan.k):
        manifest = fold_mod.materialize_fold(
            plan,
            i,
            general,
            token_budget=args.token_budget,
            general_target=args.general_target,
        )
        if fold_mod.verify_no_leakage(manifest):
            print(f"fold {i} leaks instructions between train and test", file=sys.stderr)
            return 1
        fold_mod.export_fold(manifest, pairs_by_id, out / f"fold_{i}")

    _summary(
        command="pipeline",
        sequences=len(sequences),
        cafeteria_pairs=len(cafeteria),
        artificial=artificial_counts,
        total_pairs=len(cafeteria) + len(artificial),
        dropped_duplicates=dropped,
        folds=plan.k,
        out=str(out),
    )
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="foodsem",
        description="Corpus engineering and evaluation for food NER/NEL instruction tuning.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, handler, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(handler=handler)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=0)
        return p

    p = add("ingest", cmd_ingest, "parse BioC corpus files to a document dump")
    p.add_argument("--corpus-dir", required=True)

    p = add("convert", cmd_convert, "convert a corpus to IR pairs")
    p.add_argument("--corpus-dir", required=True)
    p.add_argument("--pools", default=None, help="phrase pool file (default: shipped)")
    p.add_argument("--uri-mode", choices=("short", "full"), default="short")

    p = add("analyze", cmd_analyze, "entity-coverage distribution per ontology")
    p.add_argument("--pairs", required=True, help="IR pairs file from convert")
    p.add_argument("--ontology", choices=ONTOLOGY_CHOICES, default=None)
    p.add_argument("--threshold", type=int, default=bal.DEFAULT_THRESHOLD)

    p = add("balance", cmd_balance, "generate artificial pairs for under-covered entities")
    p.add_argument("--pairs", required=True)
    p.add_argument("--ontology", choices=ONTOLOGY_CHOICES, default=None)
    p.add_argument("--threshold", type=int, default=bal.DEFAULT_THRESHOLD)
    p.add_argument("--lexicon", default=None, help="supplemental label lexicon CSV")
    p.add_argument("--pools", default=None)
    p.add_argument("--uri-mode", choices=("short", "full"), default="short")

    p = add("folds", cmd_folds, "plan and materialize cross-validation folds")
    p.add_argument("--pairs", required=True)
    p.add_argument("--artificial", default=None)
    p.add_argument("--general", default=None, help="general-instruction corpus JSONL")
    p.add_argument("--folds", type=int, default=fold_mod.DEFAULT_K)
    p.add_argument("--fold-index", type=int, default=None)
    p.add_argument("--token-budget", type=int, default=fold_mod.DEFAULT_TOKEN_BUDGET)
    p.add_argument("--general-target", type=int, default=fold_mod.DEFAULT_GENERAL_TARGET)

    p = add("prompts", cmd_prompts, "build n-shot prompts for baseline models")
    p.add_argument("--targets", required=True, help="test pairs file")
    p.add_argument("--exemplars", required=True, help="training pairs file")
    p.add_argument("--n-shot", type=int, choices=(0, 1, 5), default=0)
    p.add_argument("--uri-mode", choices=("short", "full"), default="full")

    p = add("run", cmd_run, "send prompts to a chat-completions endpoint")
    p.add_argument("--prompts", required=True)
    p.add_argument("--endpoint-url", default=None)
    p.add_argument("--max-in-flight", type=int, default=4)
    p.add_argument("--attempts", type=int, default=3)
    p.add_argument("--timeout", type=float, default=60.0)

    p = add("eval", cmd_eval, "score predictions against gold pairs")
    p.add_argument("--gold", required=True)
    p.add_argument("--preds", required=True)
    p.add_argument("--ontology", choices=ONTOLOGY_CHOICES, required=True)

    p = add("simulate", cmd_simulate, "render gold-derived responses with corruption")
    p.add_argument("--pairs", required=True)
    p.add_argument("--p-drop-mention", type=float, default=0.0)
    p.add_argument("--p-corrupt-ref", type=float, default=0.0)
    p.add_argument("--p-format-noise", type=float, default=0.0)
    p.add_argument("--p-empty", type=float, default=0.0)

    p = add("pipeline", cmd_pipeline, "convert, balance, and build folds in one go")
    p.add_argument("--corpus-dir", required=True)
    p.add_argument("--pools", default=None)
    p.add_argument("--lexicon", default=None)
    p.add_argument("--general", default=None)
    p.add_argument("--threshold", type=int, default=bal.DEFAULT_THRESHOLD)
    p.add_argument("--folds", type=int, default=fold_mod.DEFAULT_K)
    p.add_argument("--token-budget", type=int, default=fold_mod.DEFAULT_TOKEN_BUDGET)
    p.add_argument("--general-target", type=int, default=fold_mod.DEFAULT_GENERAL_TARGET)
    p.add_argument("--uri-mode", choices=("short", "full"), default="short")

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, NotADirectoryError) as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return 2
    except FoodsemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
