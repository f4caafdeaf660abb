"""Command line front end for the extraction and scoring pipeline.

Subcommands cover the full flow: build-kg, train-kge, ground, extract,
stats, encode-stub, train-qa, eval-qa, predict. Every subcommand accepts
--config FILE with key=value lines; command line flags override config
values, and SEEKQA_SEED overrides a configured seed. Exit code 0 means
success, 1 a usage problem, 2 a data problem.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import IO, Sequence

from .encoder import load_encodings
from .errors import DataError, UsageError
from .harness import (
    TrainConfig,
    evaluate,
    load_dataset,
    prepare_instances,
    run_extraction,
    run_stub_encoding,
    split_dataset,
    train,
    write_predictions,
)
from .kge import (
    EmbeddingTable,
    TransEConfig,
    TransEModel,
    export_table,
    import_table,
    train_transe,
)
from .kgstore import KnowledgeGraph, iter_lines, load_snapshot, load_triples, save_snapshot
from .sketch import Ablation, ModelDims, init_model, load_checkpoint, save_checkpoint
from .sonar import SonarConfig, ground_concepts, read_extractions, write_extractions
from .wordvec import load_word_vectors

SEED_ENV_VAR = "SEEKQA_SEED"


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit 2; usage problems are 1
        raise UsageError(message)


def _add_config_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file supplying flag defaults")


def _add_seed_arg(p: argparse.ArgumentParser, default: int = 0) -> None:
    p.add_argument("--seed", type=int, default=default)


def _add_sonar_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-hop", type=int, default=2)
    p.add_argument("--link-threshold", type=float, default=0.15)
    p.add_argument("--concept-threshold", type=float, default=0.30)
    p.add_argument("--relation-threshold", type=float, default=0.35)
    p.add_argument("--no-semantic-constraints", action="store_true",
                   help="keep any path passing the link threshold alone")
    p.add_argument("--no-filtering", action="store_true",
                   help="keep every enumerated path")
    p.add_argument("--directed-only", action="store_true",
                   help="follow stored edge direction only")
    p.add_argument("--path-cap", type=int, default=100,
                   help="kept paths per concept pair, strongest link first; 0 disables")


def _add_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--d-h", type=int, default=100, help="contextual encoder width")
    p.add_argument("--d-att", type=int, default=100)
    p.add_argument("--d-gru", type=int, default=150)
    p.add_argument("--d-k", type=int, default=100)
    p.add_argument("--gat-layers", type=int, default=2)
    p.add_argument("--train-relations", action="store_true",
                   help="update relation embeddings during training")
    p.add_argument("--uniform-path-weights", action="store_true",
                   help="replace within-pair path attention by the mean")
    p.add_argument("--uniform-pair-weights", action="store_true",
                   help="replace across-pair attention by the mean")


def _add_data_args(p: argparse.ArgumentParser, with_extractions: bool = True) -> None:
    p.add_argument("--dataset", required=True)
    p.add_argument("--dataset-format", default="choices_jsonl",
                   choices=["choices_jsonl", "simple_tsv"])
    if with_extractions:
        p.add_argument("--kg", required=True, help="graph snapshot file")
        p.add_argument("--extractions", required=True, help="extraction records (JSON lines)")
        p.add_argument("--concepts", required=True, help="concept embedding table")
        p.add_argument("--encodings", help="contextual encoding records (JSON lines)")
        p.add_argument("--stub-encoder", action="store_true",
                       help="generate deterministic stub encodings instead of --encodings")


def build_parser() -> _Parser:
    parser = _Parser(prog="seekqa", allow_abbrev=False,
                     description="knowledge-path extraction and answer scoring")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    p = sub.add_parser("build-kg", allow_abbrev=False,
                       help="parse triples into a graph snapshot")
    p.add_argument("--triples", required=True)
    p.add_argument("--format", default="tsv3", choices=["tsv3", "conceptnet_csv"])
    p.add_argument("--out", required=True)
    _add_config_arg(p)

    p = sub.add_parser("train-kge", allow_abbrev=False,
                       help="train translation embeddings on a graph snapshot")
    p.add_argument("--kg", required=True)
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--margin", type=float, default=1.0)
    p.add_argument("--learning-rate", type=float, default=0.01)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--negatives", type=int, default=1)
    p.add_argument("--out-concepts", required=True)
    p.add_argument("--out-relations", required=True)
    _add_seed_arg(p)
    _add_config_arg(p)

    p = sub.add_parser("ground", allow_abbrev=False,
                       help="show concept mentions grounded in a text")
    p.add_argument("--kg", required=True)
    p.add_argument("--text", required=True)
    _add_config_arg(p)

    p = sub.add_parser("extract", allow_abbrev=False,
                       help="extract and filter paths for each question-candidate pair")
    p.add_argument("--kg", required=True)
    p.add_argument("--concepts", required=True)
    p.add_argument("--relations", required=True)
    p.add_argument("--word-vectors", required=True)
    p.add_argument("--margin", type=float, default=1.0)
    p.add_argument("--dataset", required=True)
    p.add_argument("--dataset-format", default="choices_jsonl",
                   choices=["choices_jsonl", "simple_tsv"])
    p.add_argument("--out", required=True)
    _add_sonar_args(p)
    _add_config_arg(p)

    p = sub.add_parser("stats", allow_abbrev=False,
                       help="summarize link counts over extraction records")
    p.add_argument("--extractions", required=True)
    _add_config_arg(p)

    p = sub.add_parser("encode-stub", allow_abbrev=False,
                       help="write deterministic stand-in contextual encodings")
    p.add_argument("--dataset", required=True)
    p.add_argument("--dataset-format", default="choices_jsonl",
                   choices=["choices_jsonl", "simple_tsv"])
    p.add_argument("--d-h", type=int, default=100)
    p.add_argument("--out", required=True)
    _add_seed_arg(p)
    _add_config_arg(p)

    p = sub.add_parser("train-qa", allow_abbrev=False,
                       help="train the answer scorer")
    _add_data_args(p)
    p.add_argument("--relations", required=True, help="relation embedding table")
    p.add_argument("--train-fraction", type=float, default=0.6)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--steps", type=int, default=1200)
    p.add_argument("--batch-size", type=int, default=24)
    p.add_argument("--checkpoint", required=True, help="model checkpoint to write")
    p.add_argument("--loss-log", help="per-step loss file (step TAB loss)")
    _add_model_args(p)
    _add_seed_arg(p)
    _add_config_arg(p)

    p = sub.add_parser("eval-qa", allow_abbrev=False,
                       help="report held-out accuracy for a checkpoint")
    _add_data_args(p)
    p.add_argument("--train-fraction", type=float, default=0.6)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", help="optional predictions file for the held-out split")
    _add_seed_arg(p)
    _add_config_arg(p)

    p = sub.add_parser("predict", allow_abbrev=False,
                       help="write predictions for every instance")
    _add_data_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    _add_seed_arg(p)
    _add_config_arg(p)

    return parser


# -- config file and environment ----------------------------------------------

def _parse_config_file(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            for lineno, raw in enumerate(f, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise UsageError(f"config line {lineno}: expected key=value")
                key, _, value = line.partition("=")
                out[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    return out


def _explicit_on_command_line(argv: Sequence[str], action: argparse.Action) -> bool:
    for opt in action.option_strings:
        for tok in argv:
            if tok == opt or tok.startswith(opt + "="):
                return True
    return False


def _coerce_config_value(action: argparse.Action, raw: str):
    if action.nargs == 0:  # store_true style flag
        lowered = raw.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"config value for {action.dest}: expected a boolean, got {raw!r}")
    if action.type is not None:
        try:
            return action.type(raw)
        except (TypeError, ValueError):
            raise UsageError(f"config value for {action.dest}: cannot parse {raw!r}") from None
    return raw


def _apply_overrides(args: argparse.Namespace, argv: Sequence[str],
                     subparser: argparse.ArgumentParser) -> None:
    """Final value per option: command line, else SEEKQA_SEED (seed only),
    else config file, else the built-in default."""
    actions = {a.dest: a for a in subparser._actions if a.option_strings}
    if getattr(args, "config", None):
        config = _parse_config_file(args.config)
        for key, raw in config.items():
            if key == "config":
                continue
            action = actions.get(key)
            if action is None:
                raise UsageError(f"config file sets unknown option {key!r}")
            if not _explicit_on_command_line(argv, action):
                setattr(args, key, _coerce_config_value(action, raw))
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None and "seed" in actions:
        if not _explicit_on_command_line(argv, actions["seed"]):
            try:
                args.seed = int(env_seed)
            except ValueError:
                raise UsageError(f"{SEED_ENV_VAR} must be an integer, got {env_seed!r}") from None


# -- shared loading helpers ----------------------------------------------------

def _open_read(path: str) -> IO[str]:
    try:
        return open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None


def _open_write(path: str, binary: bool = False) -> IO:
    try:
        return open(path, "wb" if binary else "w", encoding=None if binary else "utf-8")
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from None


def _load_kg(path: str) -> KnowledgeGraph:
    try:
        with open(path, "rb") as f:
            return load_snapshot(f)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None


def _load_table(path: str) -> EmbeddingTable:
    with _open_read(path) as f:
        return import_table(f)


def _load_kge_model(g: KnowledgeGraph, concepts_path: str, relations_path: str,
                    margin: float) -> TransEModel:
    concepts = _load_table(concepts_path)
    relations = _load_table(relations_path)
    if concepts.names != g.concepts.names:
        raise DataError("concept embedding names do not match the graph snapshot")
    expected = g.relations.names + [n + "^-1" for n in g.relations.names]
    if relations.names != expected:
        raise DataError("relation embedding names do not match the graph snapshot")
    return TransEModel(concepts=concepts, relations=relations, margin=margin)


def _sonar_config(args: argparse.Namespace) -> SonarConfig:
    return SonarConfig(
        max_hop=args.max_hop,
        link_threshold=args.link_threshold,
        concept_threshold=args.concept_threshold,
        relation_threshold=args.relation_threshold,
        disable_semantic_constraints=args.no_semantic_constraints,
        disable_filtering=args.no_filtering,
        directed_only=args.directed_only,
        path_cap=None if args.path_cap == 0 else args.path_cap,
    )


def _load_instances(args: argparse.Namespace):
    with _open_read(args.dataset) as f:
        return load_dataset(f, args.dataset_format)


def _load_pair_records(args: argparse.Namespace, g: KnowledgeGraph, instances):
    with _open_read(args.extractions) as f:
        extractions = {c.id: c for c in read_extractions(f, g)}
    if args.stub_encoder:
        encodings = run_stub_encoding(instances, args.d_h if hasattr(args, "d_h") else 100,
                                      args.seed)
    elif args.encodings:
        with _open_read(args.encodings) as f:
            encodings = load_encodings(f)
    else:
        raise UsageError("provide --encodings FILE or --stub-encoder")
    return extractions, encodings


# -- subcommand bodies ---------------------------------------------------------

def _cmd_build_kg(args) -> int:
    with _open_read(args.triples) as f:
        g = load_triples(f, args.format)
    with _open_write(args.out, binary=True) as f:
        save_snapshot(g, f)
    print(f"concepts\t{g.num_concepts}")
    print(f"relations\t{g.num_relations}")
    print(f"triples\t{g.num_triples}")
    return 0


def _cmd_train_kge(args) -> int:
    g = _load_kg(args.kg)
    cfg = TransEConfig(
        dim=args.dim,
        margin=args.margin,
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        negatives_per_positive=args.negatives,
        seed=args.seed,
    )
    model = train_transe(g, cfg)
    with _open_write(args.out_concepts) as f:
        export_table(model.concepts, f)
    with _open_write(args.out_relations) as f:
        export_table(model.relations, f)
    print(f"concept_rows\t{len(model.concepts.names)}")
    print(f"relation_rows\t{len(model.relations.names)}")
    print(f"dim\t{args.dim}")
    return 0


def _cmd_ground(args) -> int:
    g = _load_kg(args.kg)
    for gc in ground_concepts(args.text, g):
        print(f"{g.concepts.name(gc.concept)}\t{gc.span[0]}\t{gc.span[1]}")
    return 0


def _cmd_extract(args) -> int:
    g = _load_kg(args.kg)
    kge = _load_kge_model(g, args.concepts, args.relations, args.margin)
    with _open_read(args.word_vectors) as f:
        words = load_word_vectors(f)
    instances = _load_instances(args)
    cfg = _sonar_config(args)
    records = run_extraction(instances, g, kge, words, cfg)
    with _open_write(args.out) as f:
        write_extractions(records.values(), g, f)
    print(f"pairs\t{len(records)}")
    return 0


def _cmd_stats(args) -> int:
    pairs = 0
    links = 0
    concept_pairs = 0
    with _open_read(args.extractions) as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                groups = rec["groups"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataError(f"extractions line {lineno}: {exc}") from None
            pairs += 1
            for grp in groups:
                if grp.get("kind", "qa") == "qa":
                    concept_pairs += 1
                    links += len(grp["paths"])
    print(f"qa_pairs\t{pairs}")
    print(f"total_links\t{links}")
    print(f"avg_links_per_qa\t{links / pairs if pairs else 0.0:.4f}")
    print(f"avg_concept_pairs_per_qa\t{concept_pairs / pairs if pairs else 0.0:.4f}")
    print(f"avg_links_per_concept_pair\t{links / concept_pairs if concept_pairs else 0.0:.4f}")
    return 0


def _cmd_encode_stub(args) -> int:
    from .encoder import save_encodings

    instances = _load_instances(args)
    encodings = run_stub_encoding(instances, args.d_h, args.seed)
    with _open_write(args.out) as f:
        save_encodings(encodings.values(), f)
    print(f"records\t{len(encodings)}")
    return 0


def _cmd_train_qa(args) -> int:
    g = _load_kg(args.kg)
    concepts = _load_table(args.concepts)
    relations = _load_table(args.relations)
    expected = g.relations.names + [n + "^-1" for n in g.relations.names]
    if relations.names != expected:
        raise DataError("relation embedding names do not match the graph snapshot")
    if concepts.names != g.concepts.names:
        raise DataError("concept embedding names do not match the graph snapshot")
    instances = _load_instances(args)
    extractions, encodings = _load_pair_records(args, g, instances)
    dims = ModelDims(
        d_h=args.d_h,
        d_g=concepts.dim,
        d_r=relations.dim,
        d_att=args.d_att,
        d_gru=args.d_gru,
        d_k=args.d_k,
        gat_layers=args.gat_layers,
    )
    train_insts, _ = split_dataset(instances, args.train_fraction, args.seed)
    prepared = prepare_instances(train_insts, extractions, encodings, concepts.data, dims)
    model = init_model(dims, relations.data, seed=args.seed,
                       train_relations=args.train_relations)
    ablation = Ablation(
        uniform_path_weights=args.uniform_path_weights,
        uniform_pair_weights=args.uniform_pair_weights,
    )
    cfg = TrainConfig(
        learning_rate=args.learning_rate,
        steps=args.steps,
        batch_size=args.batch_size,
        seed=args.seed,
    )
    log = _open_write(args.loss_log) if args.loss_log else None
    try:
        history = train(model, prepared, cfg, ablation, log)
    finally:
        if log is not None:
            log.close()
    with _open_write(args.checkpoint, binary=True) as f:
        save_checkpoint(model, f)
    acc, _ = evaluate(model, prepared, ablation)
    print(f"train_instances\t{len(prepared)}")
    print(f"final_loss\t{history[-1] if history else float('nan'):.6f}")
    print(f"train_accuracy\t{acc:.4f}")
    return 0


def _prepare_for_checkpoint(args):
    g = _load_kg(args.kg)
    concepts = _load_table(args.concepts)
    if concepts.names != g.concepts.names:
        raise DataError("concept embedding names do not match the graph snapshot")
    try:
        with open(args.checkpoint, "rb") as f:
            model = load_checkpoint(f)
    except OSError as exc:
        raise DataError(f"cannot read {args.checkpoint}: {exc}") from None
    args.d_h = model.dims.d_h  # stub encodings must match the trained width
    instances = _load_instances(args)
    extractions, encodings = _load_pair_records(args, g, instances)
    return model, instances, extractions, encodings, concepts


def _cmd_eval_qa(args) -> int:
    model, instances, extractions, encodings, concepts = _prepare_for_checkpoint(args)
    _, heldout = split_dataset(instances, args.train_fraction, args.seed)
    prepared = prepare_instances(heldout, extractions, encodings, concepts.data, model.dims)
    acc, results = evaluate(model, prepared)
    if args.out:
        with _open_write(args.out) as f:
            write_predictions(heldout, results, f)
    print(f"heldout_instances\t{len(prepared)}")
    print(f"accuracy\t{acc:.4f}")
    return 0


def _cmd_predict(args) -> int:
    model, instances, extractions, encodings, concepts = _prepare_for_checkpoint(args)
    prepared = prepare_instances(instances, extractions, encodings, concepts.data,
                                 model.dims, require_gold=False)
    _, results = evaluate(model, prepared)
    with _open_write(args.out) as f:
        write_predictions(instances, results, f)
    print(f"instances\t{len(prepared)}")
    return 0


_COMMANDS = {
    "build-kg": _cmd_build_kg,
    "train-kge": _cmd_train_kge,
    "ground": _cmd_ground,
    "extract": _cmd_extract,
    "stats": _cmd_stats,
    "encode-stub": _cmd_encode_stub,
    "train-qa": _cmd_train_qa,
    "eval-qa": _cmd_eval_qa,
    "predict": _cmd_predict,
}


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a subcommand is required (see --help)")
        sub = next(
            a for a in parser._subparsers._group_actions
        ).choices[args.command]
        _apply_overrides(args, argv, sub)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
