"""Composition of one evaluation arm: rewrite (per regime), embed,
retrieve, score, and compute the corpus diagnostics along the way."""

from __future__ import annotations

from dataclasses import dataclass, field

from .embed import EmbeddingCache, EncoderClient, embed_texts
from .errors import ContractError
from .geometry import GeometryReport, build_geometry_report, with_delta_s
from .ingest import Collection
from .lexical import LexicalReport, build_lexical_report, with_delta_h
from .models import Regime, RewritePlan, RunRecord
from .retrieval import retrieve_topk, score_ranked_lists
from .rewrite import RewriteCache, RewriteRecord, RewriterClient, rewrite_corpus, rewrite_queries
from .templates import TemplateCatalog
from .tokenizers import Tokenizer


@dataclass
class ArmResult:
    """Everything one (encoder, task, arm) cell produces."""

    plan: RewritePlan
    run_record: RunRecord
    lexical: LexicalReport
    geometry: GeometryReport
    rewrite_records: list[RewriteRecord] = field(default_factory=list)
    excluded_queries: int = 0


def run_arm(collection: Collection, plan: RewritePlan, *,
            encoder: EncoderClient, tokenizer: Tokenizer,
            embedding_cache: EmbeddingCache | None = None,
            rewriter: RewriterClient | None = None,
            rewrite_cache: RewriteCache | None = None,
            catalog: TemplateCatalog | None = None,
            baseline: ArmResult | None = None,
            k: int = 10, gain: str = "linear") -> ArmResult:
    """Execute one arm end to end over an ingested collection.

    For the Baseline plan nothing is rewritten. Otherwise the corpus is
    always rewritten and the queries only under QC. Deltas (NDCG, entropy,
    cosine) are attached when the matching baseline result is supplied.
    """
    documents, queries = collection.documents, collection.queries
    rewrite_records: list[RewriteRecord] = []

    if not plan.is_baseline:
        if rewriter is None or catalog is None:
            raise ContractError("rewrite arms need a rewriter client and a template catalog")
        documents, doc_records = rewrite_corpus(documents, plan, rewriter,
                                                catalog, rewrite_cache)
        rewrite_records.extend(doc_records)
        if plan.regime is Regime.QC:
            queries, q_records = rewrite_queries(queries, plan, rewriter,
                                                 catalog, rewrite_cache)
            rewrite_records.extend(q_records)

    corpus_texts = [d.text for d in documents]
    lexical = build_lexical_report(
        corpus_texts, tokenizer, encoder_id=encoder.encoder_id,
        task_id=collection.task_id, arm=plan.arm_label,
        rewriter_id=plan.rewriter_id)

    corpus_matrix = embed_texts([d.id for d in documents], corpus_texts,
                                encoder, embedding_cache)
    query_matrix = embed_texts([q.id for q in queries], [q.text for q in queries],
                               encoder, embedding_cache)

    geometry = build_geometry_report(corpus_matrix, task_id=collection.task_id,
                                     arm=plan.arm_label, rewriter_id=plan.rewriter_id)

    ranked = retrieve_topk(query_matrix, corpus_matrix, k=k)
    per_query = score_ranked_lists(ranked, collection.qrels, k=k, gain=gain)
    mean = sum(per_query.values()) / len(per_query)

    delta = None
    if baseline is not None and not plan.is_baseline:
        delta = mean - baseline.run_record.mean_ndcg
        lexical = with_delta_h(baseline.lexical, lexical)
        geometry = with_delta_s(baseline.geometry, geometry)

    record = RunRecord(
        encoder_id=encoder.encoder_id, task_id=collection.task_id, plan=plan,
        ndcg_per_query=per_query, mean_ndcg=mean, delta_ndcg=delta,
        gain=gain, k=k)
    return ArmResult(plan=plan, run_record=record, lexical=lexical,
                     geometry=geometry, rewrite_records=rewrite_records,
                     excluded_queries=len(queries) - len(per_query))


def evaluate_arm(collection: Collection, plan: RewritePlan, *,
                 encoder: EncoderClient, tokenizer: Tokenizer,
                 embedding_cache: EmbeddingCache | None = None,
                 rewriter: RewriterClient | None = None,
                 rewrite_cache: RewriteCache | None = None,
                 catalog: TemplateCatalog | None = None,
                 baseline: ArmResult | None = None,
                 k: int = 10, gain: str = "linear") -> RunRecord:
    """The run record alone; see :func:`run_arm` for the full artifact set."""
    return run_arm(collection, plan, encoder=encoder, tokenizer=tokenizer,
                   embedding_cache=embedding_cache, rewriter=rewriter,
                   rewrite_cache=rewrite_cache, catalog=catalog,
                   baseline=baseline, k=k, gain=gain).run_record
