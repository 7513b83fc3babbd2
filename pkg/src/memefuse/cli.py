"""Batch command line: ingest, preprocess, train, eval.

Every command is single-shot and deterministic given its flags; all
randomness fans out from --seed through named streams.  Exit codes:
0 success, 2 input or configuration error, 3 numeric failure.
"""

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import TASKS, VARIANTS, bundled_data
from .dataset import RowError, Schema, SchemaError, load_dataset, raw_distribution, split
from .encode import import_embeddings
from .evalmetrics import build_report
from .model import (ModelVariant, NumericError, TrainConfig, load_checkpoint,
                    predict_proba, save_checkpoint, save_history, train)
from .pipeline import (build_feature_space, build_training_set, encode_corpus,
                       fused_from_imported, labels_from_records)
from .textprep import PreprocessConfig, load_lexicon, load_vocabulary, preprocess

SPLIT_RATIO = 0.8


def _require(path, what):
    if path is None:
        raise ValueError(f"missing required {what} path")
    path = Path(path)
    if not path.exists():
        raise ValueError(f"{what} path does not exist: {path}")
    return path


def _load_schema(args) -> Schema:
    path = args.schema or bundled_data("memotion_schema.json")
    return Schema.from_json(_require(path, "schema"))


def _preprocess_config(args) -> PreprocessConfig:
    lexicon = _require(args.lexicon or bundled_data("emoji_lexicon.tsv"), "lexicon")
    vocab = _require(args.vocab or bundled_data("vocabulary.txt"), "vocabulary")
    return PreprocessConfig(emoji_lexicon=load_lexicon(lexicon),
                            vocabulary=load_vocabulary(vocab))


def _tokens_for(records, config, workers):
    def clean(record):
        return record.id, preprocess(record.text, config).tokens

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            pairs = list(pool.map(clean, records))
    else:
        pairs = [clean(r) for r in records]
    return dict(pairs)


def _corpus_features(records, tokens_by_id, kind, args):
    ids = [r.id for r in records]
    if args.embeddings:
        root = _require(args.embeddings, "embeddings")
        mappings = {}
        for name in ("image", "tokens", "text_sentence", "caption_sentence"):
            path = root / f"{name}.jsonl"
            if path.exists():
                mappings[name] = import_embeddings(path)
        return fused_from_imported(ids, kind, seed=args.seed, **mappings)
    space = build_feature_space(seed=args.seed)
    return encode_corpus(ids, tokens_by_id, space, kind, workers=args.workers)


def cmd_ingest(args) -> int:
    schema = _load_schema(args)
    path = _require(args.dataset, "dataset")
    records = load_dataset(path, schema)
    tallies = {task: raw_distribution(path, schema, task).counts for task in TASKS}
    if args.json:
        print(json.dumps({"records": len(records), "tasks": tallies}, indent=2))
    else:
        print(f"records: {len(records)}")
        for task in TASKS:
            levels = ", ".join(f"{level} {count}"
                               for level, count in tallies[task].items())
            print(f"{task}: {levels}")
    return 0


def cmd_preprocess(args) -> int:
    schema = _load_schema(args)
    records = load_dataset(_require(args.dataset, "dataset"), schema)
    config = _preprocess_config(args)
    tokens_by_id = _tokens_for(records, config, args.workers)
    out = Path(args.out)
    with open(out, "w", encoding="utf-8") as fh:
        for rid in sorted(tokens_by_id):
            fh.write(json.dumps({"id": rid, "tokens": tokens_by_id[rid]}) + "\n")
    print(f"preprocessed {len(records)} records -> {out}")
    return 0


def cmd_train(args) -> int:
    schema = _load_schema(args)
    records = load_dataset(_require(args.dataset, "dataset"), schema)
    parts = split(records, SPLIT_RATIO, args.seed)
    config = _preprocess_config(args)
    tokens_by_id = _tokens_for(parts.train, config, args.workers)
    features = _corpus_features(parts.train, tokens_by_id, args.variant, args)
    labels = labels_from_records(parts.train)
    train_set = build_training_set(features, labels, k=args.k, seed=args.seed)

    variant = ModelVariant(kind=args.variant)
    overrides = {"seed": args.seed}
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.lr is not None:
        overrides["learning_rate"] = args.lr
    if args.batch_size is not None:
        overrides["batch_size"] = args.batch_size
    train_config = TrainConfig.for_variant(args.variant, **overrides)
    params, history = train(variant, train_set, train_config)

    checkpoint = Path(args.checkpoint)
    checkpoint.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(checkpoint, variant, params, args.seed, train_config.epochs)
    history_path = Path(args.out) if args.out else checkpoint.with_suffix(".history.jsonl")
    history_path.parent.mkdir(parents=True, exist_ok=True)
    save_history(history_path, history)

    probs = predict_proba(variant, train_set.features, params)
    cells = []
    for task in TASKS:
        y = train_set.labels[task]
        keep = y >= 0
        hit = np.argmax(probs[task][keep], axis=1) == y[keep]
        cells.append(f"{task} {float(np.mean(hit)):.4f}")
    synthetic = train_set.features.shape[0] - len(parts.train)
    print(f"trained {args.variant}: {train_config.epochs} epochs, "
          f"{train_set.features.shape[0]} rows ({synthetic} synthetic)")
    print(f"checkpoint: {checkpoint}")
    print(f"history: {history_path}")
    print("final train accuracy: " + " ".join(cells))
    return 0


def cmd_eval(args) -> int:
    variant, params, meta = load_checkpoint(_require(args.checkpoint, "checkpoint"))
    if args.variant and args.variant != variant.kind:
        raise ValueError(f"checkpoint holds variant {variant.kind!r}, "
                         f"--variant asked for {args.variant!r}")
    if args.seed is None:
        args.seed = meta["seed"]
    schema = _load_schema(args)
    records = load_dataset(_require(args.dataset, "dataset"), schema)
    parts = split(records, SPLIT_RATIO, args.seed)
    config = _preprocess_config(args)
    tokens_by_id = _tokens_for(parts.test, config, args.workers)
    features = _corpus_features(parts.test, tokens_by_id, variant.kind, args)
    gold = labels_from_records(parts.test)
    probs = predict_proba(variant, features, params)
    preds = {task: np.argmax(probs[task], axis=1) for task in TASKS}
    report = build_report({variant.kind: preds}, gold)

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(report.to_text(), encoding="utf-8")
        with open(out / "report.json", "w", encoding="utf-8") as fh:
            json.dump(report.to_json(), fh, indent=2)
            fh.write("\n")
    if args.json:
        print(json.dumps(report.to_json(), indent=2))
    else:
        print(report.to_text(), end="")
    return 0


def _add_common(sub, *, dataset=True, textprep=False, encoding=False):
    if dataset:
        sub.add_argument("--dataset", required=True, help="annotation CSV or JSONL")
        sub.add_argument("--schema", help="schema JSON (default: bundled Memotion schema)")
    if textprep:
        sub.add_argument("--lexicon", help="emoji lexicon TSV (default: bundled)")
        sub.add_argument("--vocab", help="vocabulary list (default: bundled)")
        sub.add_argument("--workers", type=int, default=1,
                         help="parallel record-level workers")
    if encoding:
        sub.add_argument("--embeddings",
                         help="directory of exchange files replacing the toy encoders")
        sub.add_argument("--k", type=int, default=5, help="oversampling neighbor count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memefuse",
        description="Train and evaluate multimodal meme sentiment classifiers.")
    commands = parser.add_subparsers(dest="command", required=True)

    ingest = commands.add_parser("ingest", help="summarize an annotation file")
    _add_common(ingest)
    ingest.add_argument("--json", action="store_true", help="machine-readable summary")
    ingest.set_defaults(func=cmd_ingest)

    prep = commands.add_parser("preprocess", help="clean meme texts to a token file")
    _add_common(prep, textprep=True)
    prep.add_argument("--out", required=True, help="output JSONL path")
    prep.set_defaults(func=cmd_preprocess)

    tr = commands.add_parser("train", help="train one pipeline variant")
    _add_common(tr, textprep=True, encoding=True)
    tr.add_argument("--variant", required=True, choices=VARIANTS)
    tr.add_argument("--epochs", type=int)
    tr.add_argument("--lr", type=float)
    tr.add_argument("--batch-size", type=int)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--checkpoint", required=True, help="checkpoint output path")
    tr.add_argument("--out", help="history output path (default: next to checkpoint)")
    tr.set_defaults(func=cmd_train)

    ev = commands.add_parser("eval", help="score a checkpoint on the held-out split")
    _add_common(ev, textprep=True, encoding=True)
    ev.add_argument("--variant", choices=VARIANTS,
                    help="expected variant; mismatch with the checkpoint fails")
    ev.add_argument("--seed", type=int,
                    help="split seed (default: the checkpoint's training seed)")
    ev.add_argument("--checkpoint", required=True, help="checkpoint to score")
    ev.add_argument("--out", help="directory for report.txt / report.json")
    ev.add_argument("--json", action="store_true", help="print the JSON report")
    ev.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (SchemaError, RowError, ValueError, OSError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
