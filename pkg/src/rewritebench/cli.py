"""Command-line surface.

Subcommands map one-to-one onto pipeline stages (ingest, rewrite, embed,
retrieve, eval, diagnose), analyses (correlate, advise), and the drivers
(run-matrix, report, audit). Exit codes: 0 success, 1 when any cell or
data operation failed, 2 for configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ExperimentConfig, load_config
from .embed import EmbeddingCache, EncoderClient, embed_texts
from .errors import ConfigError, WorkbenchError
from .ingest import ingest_collection
from .matrix import run_matrix
from .models import Regime, RewritePlan, Strategy
from .pipeline import run_arm
from .report import (advise_from_reports, correlation_report, join_rows,
                     load_stores, write_csv, write_reports)
from .retrieval import retrieve_topk
from .rewrite import RewriteCache, RewriteRecord, RewriterClient, audit_sample, rewrite_corpus, rewrite_queries
from .stores import DiagnosticsStore, RunStore
from .templates import resolve_catalog
from .tokenizers import build_tokenizer


def _dump(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, indent=1, ensure_ascii=False)
                    + "\n", encoding="utf-8")


def _task_spec(config: ExperimentConfig, task_id: str):
    for t in config.tasks:
        if t.task_id == task_id:
            return t
    raise ConfigError(f"task {task_id!r} not in config")


def _encoder_spec(config: ExperimentConfig, encoder_id: str):
    for e in config.encoders:
        if e.encoder_id == encoder_id:
            return e
    raise ConfigError(f"encoder {encoder_id!r} not in config")


def _rewriter_spec(config: ExperimentConfig, rewriter_id: str):
    for r in config.rewriters:
        if r.rewriter_id == rewriter_id:
            return r
    raise ConfigError(f"rewriter {rewriter_id!r} not in config")


def _plan_from_args(config: ExperimentConfig, args) -> RewritePlan:
    family = _task_spec(config, args.task).family
    if not getattr(args, "strategy", None):
        return RewritePlan.baseline(task_family=family)
    if not getattr(args, "regime", None) or not getattr(args, "rewriter", None):
        raise ConfigError("--strategy requires --regime and --rewriter")
    return RewritePlan(strategy=Strategy(args.strategy), regime=Regime(args.regime),
                       rewriter_id=args.rewriter, task_family=family)


def _arm_context(config: ExperimentConfig, args):
    """(collection, plan, encoder client, tokenizer, caches, catalog, rewriter)."""
    task = _task_spec(config, args.task)
    collection = ingest_collection(task.corpus, task.queries, task.qrels,
                                   task_id=task.task_id)
    plan = _plan_from_args(config, args)
    enc = _encoder_spec(config, args.encoder)
    encoder = EncoderClient(enc.endpoint)
    tokenizer = build_tokenizer(enc.tokenizer)
    embedding_cache = EmbeddingCache(config.cache_dir / "embeddings")
    rewrite_cache = RewriteCache(config.cache_dir / "rewrites.jsonl")
    catalog = resolve_catalog(config.template_catalog)
    rewriter = None
    if not plan.is_baseline:
        rewriter = RewriterClient(_rewriter_spec(config, plan.rewriter_id).endpoint)
    return collection, plan, encoder, tokenizer, embedding_cache, rewrite_cache, catalog, rewriter


def cmd_ingest(config: ExperimentConfig, args) -> int:
    tasks = [t for t in config.tasks if args.task in (None, t.task_id)]
    if not tasks:
        raise ConfigError(f"task {args.task!r} not in config")
    for t in tasks:
        collection = ingest_collection(t.corpus, t.queries, t.qrels, task_id=t.task_id)
        report = collection.report.to_dict()
        _dump(config.out_dir / f"ingest_{t.task_id}.json", report)
        print(f"{t.task_id}: {report['n_documents']} docs, {report['n_queries']} queries, "
              f"{report['n_qrels_rows']} qrels rows, {report['warning_count']} warnings")
    return 0


def cmd_rewrite(config: ExperimentConfig, args) -> int:
    task = _task_spec(config, args.task)
    collection = ingest_collection(task.corpus, task.queries, task.qrels,
                                   task_id=task.task_id)
    plan = _plan_from_args(config, args)
    if plan.is_baseline:
        raise ConfigError("rewrite requires --strategy/--regime/--rewriter")
    rewrite_cache = RewriteCache(config.cache_dir / "rewrites.jsonl")
    catalog = resolve_catalog(config.template_catalog)
    rewriter = RewriterClient(_rewriter_spec(config, plan.rewriter_id).endpoint)
    docs, records = rewrite_corpus(collection.documents, plan, rewriter,
                                   catalog, rewrite_cache)
    out = config.out_dir / "rewritten" / f"{args.task}__{plan.rewriter_id}__{plan.arm_label}"
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "corpus.jsonl", "w", encoding="utf-8") as fh:
        for d in docs:
            fh.write(json.dumps({"_id": d.id, "text": d.text}, ensure_ascii=False) + "\n")
    if plan.regime is Regime.QC:
        queries, q_records = rewrite_queries(collection.queries, plan, rewriter,
                                             catalog, rewrite_cache)
        records.extend(q_records)
        with open(out / "queries.jsonl", "w", encoding="utf-8") as fh:
            for q in queries:
                fh.write(json.dumps({"_id": q.id, "text": q.text}, ensure_ascii=False) + "\n")
    with open(out / "records.jsonl", "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")
    failed = sum(1 for r in records if r.failed)
    print(f"{plan.arm_label}: {len(records)} rewrites, {failed} fallbacks -> {out}")
    return 0


def _arm_matrices(config: ExperimentConfig, args):
    (collection, plan, encoder, _, embedding_cache, rewrite_cache,
     catalog, rewriter) = _arm_context(config, args)
    docs, queries = collection.documents, collection.queries
    if not plan.is_baseline:
        docs, _ = rewrite_corpus(docs, plan, rewriter, catalog, rewrite_cache)
        if plan.regime is Regime.QC:
            queries, _ = rewrite_queries(queries, plan, rewriter, catalog, rewrite_cache)
    corpus = embed_texts([d.id for d in docs], [d.text for d in docs],
                         encoder, embedding_cache)
    qmat = embed_texts([q.id for q in queries], [q.text for q in queries],
                       encoder, embedding_cache)
    return collection, plan, corpus, qmat


def cmd_embed(config: ExperimentConfig, args) -> int:
    _, plan, corpus, qmat = _arm_matrices(config, args)
    print(f"{plan.arm_label}: corpus {corpus.n_rows}x{corpus.dim}, "
          f"queries {qmat.n_rows}x{qmat.dim} (cache warm)")
    return 0


def cmd_retrieve(config: ExperimentConfig, args) -> int:
    _, plan, corpus, qmat = _arm_matrices(config, args)
    ranked = retrieve_topk(qmat, corpus, k=args.k or config.k)
    out = config.out_dir / f"rankings_{args.task}__{args.encoder}__{plan.arm_label}.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        for r in ranked:
            fh.write(json.dumps({"query_id": r.query_id,
                                 "entries": [[d, s] for d, s in r.entries]},
                                ensure_ascii=False) + "\n")
    print(f"{len(ranked)} ranked lists -> {out}")
    return 0


def _run_single_arm(config: ExperimentConfig, args):
    (collection, plan, encoder, tokenizer, embedding_cache, rewrite_cache,
     catalog, rewriter) = _arm_context(config, args)
    baseline = None
    if not plan.is_baseline:
        baseline = run_arm(collection, RewritePlan.baseline(plan.task_family),
                           encoder=encoder, tokenizer=tokenizer,
                           embedding_cache=embedding_cache, k=config.k,
                           gain=config.gain)
    arm = run_arm(collection, plan, encoder=encoder, tokenizer=tokenizer,
                  embedding_cache=embedding_cache, rewriter=rewriter,
                  rewrite_cache=rewrite_cache, catalog=catalog,
                  baseline=baseline, k=config.k, gain=config.gain)
    return arm


def cmd_eval(config: ExperimentConfig, args) -> int:
    arm = _run_single_arm(config, args)
    RunStore(config.out_dir / "runs.jsonl").append(arm.run_record)
    delta = "" if arm.run_record.delta_ndcg is None else \
        f" (delta {arm.run_record.delta_ndcg:+.5f})"
    print(f"{arm.plan.arm_label}: mean NDCG@{config.k} "
          f"{arm.run_record.mean_ndcg:.5f}{delta}, "
          f"{arm.excluded_queries} queries excluded")
    return 0


def cmd_diagnose(config: ExperimentConfig, args) -> int:
    arm = _run_single_arm(config, args)
    store = DiagnosticsStore(config.out_dir / "diagnostics.jsonl")
    store.append("lexical", arm.lexical.to_dict())
    store.append("geometry", arm.geometry.to_dict())
    dh = arm.lexical.delta_h_bits
    ds = arm.geometry.delta_s_bar
    print(f"{arm.plan.arm_label}: H {arm.lexical.h_bits:.4f} bits"
          + ("" if dh is None else f" (delta {dh:+.4f})")
          + f", s_bar {arm.geometry.s_bar:+.5f}"
          + ("" if ds is None else f" (delta {ds:+.5f})"))
    return 0


def cmd_correlate(config: ExperimentConfig, args) -> int:
    runs, lexical, geometry = load_stores(config.out_dir)
    rows = join_rows(runs, lexical, geometry)
    header, table = correlation_report(rows)
    out = config.out_dir / "report" / "correlations.csv"
    write_csv(out, header, table)
    for row in table:
        print(", ".join(str(v) for v in row[:2] + row[4:7]))
    print(f"-> {out}")
    return 0


def cmd_advise(config: ExperimentConfig, args) -> int:
    _, lexical, _ = load_stores(config.out_dir)
    advices = advise_from_reports(lexical, skip_threshold=args.skip_threshold
                                  if args.skip_threshold is not None
                                  else config.skip_threshold)
    if not advices:
        print("no rewrite-arm diagnostics in the store yet")
        return 1
    _dump(config.out_dir / "report" / "advice.json", [a.to_dict() for a in advices])
    for a in advices:
        print(f"{a.task_id} [{a.rewriter_id}]: {a.recommended} -- {a.rationale}")
    return 0


def cmd_run_matrix(config: ExperimentConfig, args) -> int:
    result = run_matrix(config)
    n_ok = len(result.results)
    print(f"{n_ok} cells ok, {len(result.failures)} failed -> {result.out_dir}")
    for cell, msg in sorted(result.failures.items(), key=lambda kv: kv[0].cell_id):
        print(f"  FAILED {cell.cell_id}: {msg}", file=sys.stderr)
    return result.exit_status


def cmd_report(config: ExperimentConfig, args) -> int:
    written = write_reports(config.out_dir, skip_threshold=config.skip_threshold)
    for path in written:
        print(path)
    return 0


def cmd_audit(config: ExperimentConfig, args) -> int:
    task = _task_spec(config, args.task)
    collection = ingest_collection(task.corpus, task.queries, task.qrels,
                                   task_id=task.task_id)
    sources = {d.id: d.text for d in collection.documents}
    sources.update({q.id: q.text for q in collection.queries})
    records: list[RewriteRecord] = []
    cells_dir = config.out_dir / "cells"
    for path in sorted(cells_dir.glob("*/rewrites.jsonl")):
        for line in path.read_text(encoding="utf-8").splitlines():
            rec = RewriteRecord.from_dict(json.loads(line))
            if rec.source_id not in sources:
                continue  # record belongs to another task
            if args.rewriter and rec.rewriter_id != args.rewriter:
                continue
            records.append(rec)
    if not records:
        print("no rewrite records found under", cells_dir, file=sys.stderr)
        return 1
    bundle = audit_sample(records, sources, min(args.sample_size, len(records)),
                          args.seed if args.seed is not None else config.seed)
    out = config.out_dir / "audit.json"
    _dump(out, [item.to_dict() for item in bundle])
    print(f"{len(bundle)} rewrites sampled -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rewritebench",
        description="Rewriting-augmented code retrieval workbench")
    parser.add_argument("--config", required=True, help="experiment config (YAML)")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--cache-dir", default=None)
    parser.add_argument("--out-dir", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    def arm_flags(p):
        p.add_argument("--task", required=True)
        p.add_argument("--encoder", required=True)
        p.add_argument("--rewriter", default=None)
        p.add_argument("--strategy", default=None,
                       choices=[s.value for s in Strategy if s is not Strategy.BASELINE])
        p.add_argument("--regime", default=None,
                       choices=[Regime.QC.value, Regime.C.value])

    p = sub.add_parser("ingest", help="validate a collection and emit its report")
    p.add_argument("--task", default=None)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("rewrite", help="rewrite one arm's corpus (and queries under QC)")
    p.add_argument("--task", required=True)
    p.add_argument("--rewriter", required=True)
    p.add_argument("--strategy", required=True,
                   choices=[s.value for s in Strategy if s is not Strategy.BASELINE])
    p.add_argument("--regime", required=True,
                   choices=[Regime.QC.value, Regime.C.value])
    p.set_defaults(func=cmd_rewrite)

    p = sub.add_parser("embed", help="embed one arm's texts (warms the cache)")
    arm_flags(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("retrieve", help="rank the corpus for every query")
    arm_flags(p)
    p.add_argument("--k", type=int, default=None)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("eval", help="score one arm and append its run record")
    arm_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("diagnose", help="entropy and cosine diagnostics for one arm")
    arm_flags(p)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("correlate", help="correlate shift diagnostics with NDCG deltas")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("advise", help="recommend a strategy (or Skip) per task")
    p.add_argument("--skip-threshold", type=float, default=None)
    p.set_defaults(func=cmd_advise)

    p = sub.add_parser("run-matrix", help="run every configured cell plus baselines")
    p.set_defaults(func=cmd_run_matrix)

    p = sub.add_parser("report", help="emit the report files from the stores")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("audit", help="sample rewrites for human review")
    p.add_argument("--task", required=True)
    p.add_argument("--rewriter", default=None)
    p.add_argument("--sample-size", type=int, required=True)
    p.set_defaults(func=cmd_audit)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config, seed=args.seed,
                             cache_dir=args.cache_dir, out_dir=args.out_dir)
        return args.func(config, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except WorkbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
