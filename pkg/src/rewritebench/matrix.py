"""The experiment matrix: every (encoder, task, rewriter, strategy, regime)
cell plus one Baseline cell per (encoder, task).

Cells are independent: a failure in one is recorded and the rest proceed.
With warm caches a rerun issues zero endpoint calls and rewrites
byte-identical outputs, so the runner is a fixed point under repetition.
Per-cell artifacts live under ``out_dir/cells/<cell_id>/``; run records and
diagnostics are appended to the global stores in deterministic cell order.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .config import ExperimentConfig
from .embed import EmbeddingCache, EncoderClient
from .errors import WorkbenchError
from .ingest import Collection, ingest_collection
from .models import Regime, RewritePlan, Strategy
from .pipeline import ArmResult, run_arm
from .rewrite import RewriteCache, RewriterClient
from .stores import DiagnosticsStore, RunStore
from .templates import resolve_catalog
from .tokenizers import build_tokenizer


@dataclass(frozen=True)
class CellKey:
    encoder_id: str
    task_id: str
    rewriter_id: str = ""
    strategy: Strategy = Strategy.BASELINE
    regime: Regime = Regime.NONE

    @property
    def is_baseline(self) -> bool:
        return self.strategy is Strategy.BASELINE

    @property
    def cell_id(self) -> str:
        parts = [self.encoder_id, self.task_id]
        if self.is_baseline:
            parts.append("Baseline")
        else:
            parts.extend([self.rewriter_id, self.strategy.value, self.regime.value])
        return "__".join(p.replace("/", "_").replace(" ", "_") for p in parts)


@dataclass
class MatrixResult:
    out_dir: Path
    results: dict[CellKey, ArmResult] = field(default_factory=dict)
    failures: dict[CellKey, str] = field(default_factory=dict)
    endpoint_calls: dict[str, int] = field(default_factory=dict)

    @property
    def exit_status(self) -> int:
        return 1 if self.failures else 0


def _dump_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=1)
                    + "\n", encoding="utf-8")


def plan_cells(config: ExperimentConfig) -> list[CellKey]:
    """Baselines first (arms consume their results), then every arm cell,
    in config order throughout."""
    baselines, arms = [], []
    for enc in config.encoders:
        for task in config.tasks:
            baselines.append(CellKey(encoder_id=enc.encoder_id, task_id=task.task_id))
            for rw in config.rewriters:
                for strategy in config.strategies:
                    for regime in config.regimes:
                        arms.append(CellKey(
                            encoder_id=enc.encoder_id, task_id=task.task_id,
                            rewriter_id=rw.rewriter_id, strategy=strategy,
                            regime=regime))
    return baselines + arms


def _persist_cell(cell_dir: Path, result: ArmResult, *, config_hash: str,
                  seed: int) -> None:
    _dump_json(cell_dir / "record.json", result.run_record.to_dict())
    _dump_json(cell_dir / "lexical.json", result.lexical.to_dict())
    _dump_json(cell_dir / "geometry.json", result.geometry.to_dict())
    _dump_json(cell_dir / "meta.json", {
        "arm": result.plan.arm_label,
        "excluded_queries": result.excluded_queries,
        "config_hash": config_hash,
        "seed": seed,
    })
    if result.rewrite_records:
        lines = [json.dumps(r.to_dict(), sort_keys=True, ensure_ascii=False)
                 for r in result.rewrite_records]
        (cell_dir / "rewrites.jsonl").write_text("\n".join(lines) + "\n",
                                                 encoding="utf-8")


def run_matrix(config: ExperimentConfig,
               fault_hook: Callable[[CellKey], None] | None = None) -> MatrixResult:
    """Execute the full matrix described by *config*.

    ``fault_hook`` is test instrumentation: it is invoked with each cell
    key before the cell runs and may raise to simulate a cell failure.
    """
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    catalog = resolve_catalog(config.template_catalog)
    embedding_cache = EmbeddingCache(Path(config.cache_dir) / "embeddings")
    rewrite_cache = RewriteCache(Path(config.cache_dir) / "rewrites.jsonl")

    encoder_clients = {e.encoder_id: EncoderClient(e.endpoint) for e in config.encoders}
    tokenizers = {e.encoder_id: build_tokenizer(e.tokenizer) for e in config.encoders}
    rewriter_clients = {r.rewriter_id: RewriterClient(r.endpoint)
                        for r in config.rewriters}
    task_specs = {t.task_id: t for t in config.tasks}

    result = MatrixResult(out_dir=out_dir)

    collections: dict[str, Collection] = {}
    task_errors: dict[str, str] = {}
    for t in config.tasks:
        try:
            collections[t.task_id] = ingest_collection(
                t.corpus, t.queries, t.qrels, task_id=t.task_id)
        except WorkbenchError as exc:
            task_errors[t.task_id] = str(exc)

    cells = plan_cells(config)
    baselines: dict[tuple[str, str], ArmResult] = {}

    def execute(cell: CellKey) -> tuple[CellKey, ArmResult | None, str | None]:
        if cell.task_id in task_errors:
            return cell, None, f"task ingest failed: {task_errors[cell.task_id]}"
        try:
            if fault_hook is not None:
                fault_hook(cell)
            collection = collections[cell.task_id]
            family = task_specs[cell.task_id].family
            if cell.is_baseline:
                plan = RewritePlan.baseline(task_family=family)
                rewriter = None
            else:
                plan = RewritePlan(strategy=cell.strategy, regime=cell.regime,
                                   rewriter_id=cell.rewriter_id,
                                   template_id="", task_family=family)
                rewriter = rewriter_clients[cell.rewriter_id]
            arm = run_arm(
                collection, plan,
                encoder=encoder_clients[cell.encoder_id],
                tokenizer=tokenizers[cell.encoder_id],
                embedding_cache=embedding_cache,
                rewriter=rewriter, rewrite_cache=rewrite_cache, catalog=catalog,
                baseline=baselines.get((cell.encoder_id, cell.task_id)),
                k=config.k, gain=config.gain)
            return cell, arm, None
        except WorkbenchError as exc:
            return cell, None, str(exc)

    def run_wave(wave: list[CellKey]) -> None:
        if config.parallelism > 1 and len(wave) > 1:
            with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
                outcomes = list(pool.map(execute, wave))
        else:
            outcomes = [execute(c) for c in wave]
        for cell, arm, err in outcomes:
            if err is not None:
                result.failures[cell] = err
                continue
            assert arm is not None
            result.results[cell] = arm
            if cell.is_baseline:
                baselines[(cell.encoder_id, cell.task_id)] = arm
            _persist_cell(out_dir / "cells" / cell.cell_id, arm,
                          config_hash=config.config_hash, seed=config.seed)

    run_wave([c for c in cells if c.is_baseline])
    run_wave([c for c in cells if not c.is_baseline])

    run_store = RunStore(out_dir / "runs.jsonl")
    diag_store = DiagnosticsStore(out_dir / "diagnostics.jsonl")
    for cell in cells:
        arm = result.results.get(cell)
        if arm is None:
            continue
        run_store.append(arm.run_record)
        diag_store.append("lexical", arm.lexical.to_dict())
        diag_store.append("geometry", arm.geometry.to_dict())

    for name, client in sorted(encoder_clients.items()):
        result.endpoint_calls[f"encoder:{name}"] = client.call_count
    for name, client in sorted(rewriter_clients.items()):
        result.endpoint_calls[f"rewriter:{name}"] = client.call_count

    _dump_json(out_dir / "summary.json", {
        "config_hash": config.config_hash,
        "seed": config.seed,
        "n_cells": len(cells),
        "cells": [c.cell_id for c in cells],
        "failures": {c.cell_id: msg for c, msg in sorted(
            result.failures.items(), key=lambda kv: kv[0].cell_id)},
        "excluded_queries": {
            c.cell_id: a.excluded_queries
            for c, a in sorted(result.results.items(), key=lambda kv: kv[0].cell_id)},
    })
    return result
