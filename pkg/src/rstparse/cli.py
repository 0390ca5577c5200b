"""Command-line surface: corpus generation, conversion, training, parsing,
evaluation, gradient checking, and tree inspection.

Exit codes: 0 success; 2 usage or configuration violation; 3 missing input
file; 4 data or format error; 5 document alignment error; 6 gradient check
above tolerance; 1 unexpected failure. Flags override config-file values,
which override defaults.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import pathlib
import sys
from typing import Optional

import numpy as np

from rstparse import kernel as K
from rstparse.classifier import LabelSpaceError
from rstparse.config import ConfigError, RunConfig
from rstparse.core import (
    TreeStructureError,
    UnmappedLabelError,
    binarize,
    default_relation_map,
    map_tree_relations,
    validate_tree,
    Document,
    RelationMap,
)
from rstparse.dis import DisParseError, parse_dis
from rstparse.fileio import (
    CorpusFormatError,
    CorpusRecord,
    EmbeddingFileError,
    TreeFormatError,
    read_corpus,
    read_embeddings,
    read_parses,
    write_corpus,
    write_parses,
)
from rstparse.metrics import (
    AlignmentError,
    align_by_doc_id,
    score_original,
    score_rst_parseval,
    top_split_accuracy,
)
from rstparse.model import ParserModel
from rstparse.beam import parse_beam
from rstparse.synthetic import generate_synthetic
from rstparse.training import document_loss, train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_FORMAT = 4
EXIT_ALIGNMENT = 5
EXIT_GRADCHECK = 6

GRADCHECK_TOLERANCE = 1e-4


class _CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _require_file(path: str) -> pathlib.Path:
    p = pathlib.Path(path)
    if not p.exists():
        raise _CliError(f"no such file: {path}", EXIT_MISSING)
    return p


def _load_config(path: Optional[str], overrides: dict) -> RunConfig:
    if path is None:
        merged = {k: v for k, v in overrides.items() if v is not None}
        return RunConfig.from_dict(merged, where="flags")
    _require_file(path)
    return RunConfig.from_file(path, overrides)


def _load_embeddings_if_needed(cfg: RunConfig):
    if cfg.embedding_mode != "precomputed":
        return None
    _require_file(cfg.embedding_file)
    return read_embeddings(cfg.embedding_file)


def _map_ordered(fn, items, jobs: int):
    """Apply fn across items, preserving input order in the output."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# subcommands


def _cmd_generate(args) -> int:
    records = generate_synthetic(
        args.docs,
        (args.min_edus, args.max_edus),
        vocab=args.vocab,
        seed=args.seed,
        markers=not args.no_markers,
    )
    write_corpus(records, args.out)
    print(f"wrote {len(records)} documents to {args.out}")
    return EXIT_OK


def _cmd_convert_dis(args) -> int:
    src = pathlib.Path(args.indir)
    if not src.is_dir():
        raise _CliError(f"no such directory: {args.indir}", EXIT_MISSING)
    relmap = RelationMap.load(_require_file(args.map)) if args.map else default_relation_map()
    paths = sorted(src.glob("*.dis"))
    if not paths:
        raise _CliError(f"no .dis files in {args.indir}", EXIT_MISSING)
    records = []
    for path in paths:
        parsed = parse_dis(path.read_text(encoding="utf-8"), source=str(path))
        for warning in parsed.warnings:
            print(f"warning: {warning}", file=sys.stderr)
        tree = map_tree_relations(binarize(parsed.root), relmap)
        tokens: list[str] = []
        breaks: list[int] = []
        for edu in range(1, len(parsed.edu_texts) + 1):
            tokens.extend(parsed.edu_texts[edu].split())
            breaks.append(len(tokens) - 1)
        doc = Document(path.stem, tuple(tokens), tuple(breaks))
        violation = validate_tree(tree, doc.n_edus)
        if violation is not None:
            raise TreeStructureError(f"{path}: {violation}")
        records.append(CorpusRecord(doc, tree))
    write_corpus(records, args.out)
    print(f"converted {len(records)} documents to {args.out}")
    return EXIT_OK


def _cmd_train(args) -> int:
    overrides = {
        "seed": args.seed,
        "epochs": args.epochs,
        "learning_rate": args.learning_rate,
        "batch_size": args.batch_size,
    }
    cfg = _load_config(args.config, overrides)
    corpus = read_corpus(_require_file(args.corpus))
    val = read_corpus(_require_file(args.val)) if args.val else None
    embeddings = _load_embeddings_if_needed(cfg)
    log_stream = open(args.log, "w", encoding="utf-8") if args.log else None
    try:
        result = train(corpus, cfg, val_corpus=val, embeddings=embeddings,
                       log_stream=log_stream)
    finally:
        if log_stream is not None:
            log_stream.close()
    result.model.save(args.out)
    final = result.log[-1]
    print(
        f"trained {cfg.epochs} epochs; final L_s={final.l_s:.4f} "
        f"L_l={final.l_l:.4f} L_reg={final.l_reg:.4f}; "
        f"best epoch {result.best_epoch}; checkpoint {args.out}"
    )
    return EXIT_OK


def _cmd_parse(args) -> int:
    _require_file(args.ckpt)
    try:
        _, meta = K.load_checkpoint(args.ckpt)
        cfg = RunConfig.from_dict(meta["config"], where=f"{args.ckpt}: config")
        embeddings = _load_embeddings_if_needed(cfg)
        model = ParserModel.load(args.ckpt, embeddings=embeddings)
    except (ValueError, KeyError) as exc:
        raise _CliError(f"{args.ckpt}: {exc}", EXIT_FORMAT) from exc
    corpus = read_corpus(_require_file(args.corpus))
    beam = args.beam if args.beam is not None else model.cfg.beam_size

    def run(record: CorpusRecord):
        enc = model.encode(record.document)
        if beam == 1:
            from rstparse.decoder import parse_greedy

            result = parse_greedy(enc, model.decoder, model.classifier)
        else:
            result = parse_beam(enc, model.decoder, model.classifier, beam)
        return record.doc_id, result.tree, result.normalized_score

    parses = _map_ordered(run, corpus, args.jobs)
    write_parses(parses, args.out)
    print(f"parsed {len(parses)} documents (beam={beam}) to {args.out}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    parses = read_parses(_require_file(args.pred))
    corpus = read_corpus(_require_file(args.gold))
    gold = [(r.doc_id, r.gold_tree) for r in corpus if r.gold_tree is not None]
    if len(gold) != len(corpus):
        missing = next(r.doc_id for r in corpus if r.gold_tree is None)
        raise _CliError(
            f"gold corpus document {missing!r} has no gold tree", EXIT_FORMAT
        )
    pairs = align_by_doc_id([(d, t) for d, t, _ in parses], gold)
    config_hash = None
    if args.config:
        config_hash = _load_config(args.config, {}).hash()

    def _chunked(scorer):
        jobs = max(1, args.jobs)
        if jobs == 1 or len(pairs) < 2 * jobs:
            return scorer(pairs)
        step = (len(pairs) + jobs - 1) // jobs
        chunks = [pairs[i : i + step] for i in range(0, len(pairs), step)]
        parts = _map_ordered(scorer, chunks, jobs)
        merged = parts[0]
        for part in parts[1:]:
            merged = merged.merge(part)
        return merged

    if args.convention in ("original", "both"):
        original = _chunked(score_original)
    if args.convention in ("rst", "both"):
        rst = _chunked(score_rst_parseval)

    if args.convention == "both":
        from rstparse.metrics import ScoreReport

        report = ScoreReport(
            original=original,
            rst_parseval=rst,
            top_split=top_split_accuracy(pairs),
            config_hash=config_hash,
        )
        print(report.to_table())
        payload = report.to_dict()
    elif args.convention == "original":
        payload = {"original_parseval": {"f1": original.f1},
                   "top_split_accuracy": top_split_accuracy(pairs)}
        print("Original Parseval: " + "  ".join(
            f"{c}={100 * original.f1[c]:.1f}" for c in ("S", "NS", "R", "Full")))
    else:
        payload = {"rst_parseval": {"f1": rst.f1},
                   "top_split_accuracy": top_split_accuracy(pairs)}
        print("RST Parseval: " + "  ".join(
            f"{c}={100 * rst.f1[c]:.1f}" for c in ("S", "NS", "R", "Full")))
    if config_hash is not None:
        payload["config_hash"] = config_hash
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return EXIT_OK


def _cmd_gradcheck(args) -> int:
    cfg = _load_config(args.config, {"dropout": 0.0})
    corpus = generate_synthetic(1, (3, 3), seed=cfg.seed)
    from rstparse.classifier import LabelSpace

    space = (
        LabelSpace.full()
        if cfg.label_mode == "full"
        else LabelSpace.observed(r.gold_tree for r in corpus)
    )
    model = ParserModel(cfg, space)
    doc, gold = corpus[0].document, corpus[0].gold_tree

    def loss_fn():
        loss, _, _ = document_loss(model, doc, gold)
        return K.add(loss, model.store.l2_penalty(cfg.weight_decay))

    report = K.grad_check(loss_fn, model.store)
    failed = False
    for name in sorted(report):
        status = "ok" if report[name] < GRADCHECK_TOLERANCE else "FAIL"
        failed = failed or report[name] >= GRADCHECK_TOLERANCE
        print(f"{name:<24} max rel err {report[name]:.3e}  {status}")
    return EXIT_GRADCHECK if failed else EXIT_OK


def _render_tree(tree, doc: Optional[Document]) -> str:
    from rstparse.core import Internal, Leaf, span

    lines: list[str] = []

    def visit(node, indent: int):
        pad = "  " * indent
        if isinstance(node, Leaf):
            text = doc.edu_text(node.edu) if doc is not None else ""
            lines.append(f"{pad}edu {node.edu}: {text}".rstrip())
            return
        i, j = span(node)
        lines.append(f"{pad}[{i},{j}] {node.nuclearity} {node.relation}")
        visit(node.left, indent + 1)
        visit(node.right, indent + 1)

    visit(tree, 0)
    return "\n".join(lines)


def _cmd_inspect(args) -> int:
    parses = read_parses(_require_file(args.tree))
    docs = {}
    if args.corpus:
        docs = {r.doc_id: r.document for r in read_corpus(_require_file(args.corpus))}
    selected = [p for p in parses if args.doc is None or p[0] == args.doc]
    if args.doc is not None and not selected:
        raise _CliError(f"document {args.doc!r} not in {args.tree}", EXIT_ALIGNMENT)
    for doc_id, tree, score in selected:
        print(f"# {doc_id} (score {score:.4f})")
        print(_render_tree(tree, docs.get(doc_id)))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument wiring


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rstparse", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic corpus")
    p.add_argument("--docs", type=int, required=True)
    p.add_argument("--min-edus", type=int, default=3)
    p.add_argument("--max-edus", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--vocab", type=int, default=30)
    p.add_argument("--no-markers", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("convert-dis", help="convert a .dis directory to a corpus")
    p.add_argument("--in", dest="indir", required=True)
    p.add_argument("--map", default=None, help="relation mapping file (default: bundled)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_convert_dis)

    p = sub.add_parser("train", help="train a parser")
    p.add_argument("--config", default=None)
    p.add_argument("--corpus", required=True)
    p.add_argument("--val", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--log", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("parse", help="parse a corpus with a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--beam", type=int, default=None, help="beam size (1 = greedy)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_parse)

    p = sub.add_parser("evaluate", help="score predicted trees against gold")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--convention", choices=("rst", "original", "both"), default="both")
    p.add_argument("--config", default=None, help="stamp this config's hash into the report")
    p.add_argument("--json", default=None, help="also write the report as JSON")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("gradcheck", help="finite-difference check of all gradients")
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("inspect", help="render parsed trees as indented text")
    p.add_argument("--tree", required=True)
    p.add_argument("--corpus", default=None, help="corpus supplying EDU texts")
    p.add_argument("--doc", default=None, help="restrict to one document id")
    p.set_defaults(func=_cmd_inspect)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (
        CorpusFormatError,
        TreeFormatError,
        EmbeddingFileError,
        DisParseError,
        TreeStructureError,
        UnmappedLabelError,
        LabelSpaceError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except AlignmentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ALIGNMENT


if __name__ == "__main__":
    sys.exit(main())
