"""Domain types for collections, rewrite arms, and evaluation records."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Mapping

from .errors import ContractError, DomainError

MEAN_NDCG_TOL = 1e-12


class Strategy(str, Enum):
    REPHRASE = "Rephrase"
    PSEUDO = "Pseudo"
    NL = "NL"
    BASELINE = "Baseline"


class Regime(str, Enum):
    QC = "QC"
    C = "C"
    NONE = "None"


class TaskFamily(str, Enum):
    CODE_TO_CODE = "CodeToCode"
    TEXT_TO_CODE = "TextToCode"
    HYBRID = "Hybrid"


@dataclass(frozen=True)
class Document:
    """One corpus item. ``text`` is the canonical content handed to every
    downstream stage; when a title is present it has already been folded in
    at ingest time."""

    id: str
    text: str
    title: str | None = None
    lang_tag: str | None = None

    def __post_init__(self):
        if not self.id:
            raise DomainError("document id must be non-empty")
        if not self.text.strip():
            raise DomainError(f"document {self.id!r} has empty text")


@dataclass(frozen=True)
class Query:
    id: str
    text: str

    def __post_init__(self):
        if not self.id:
            raise DomainError("query id must be non-empty")
        if not self.text.strip():
            raise DomainError(f"query {self.id!r} has empty text")


@dataclass(frozen=True)
class RewritePlan:
    """One transformation arm: which strategy, which sides, which rewriter.

    ``Baseline`` is the untouched arm and is the only strategy allowed (and
    required) to carry regime ``None``.
    """

    strategy: Strategy
    regime: Regime
    rewriter_id: str = ""
    template_id: str = ""
    task_family: TaskFamily = TaskFamily.CODE_TO_CODE

    def __post_init__(self):
        if (self.strategy is Strategy.BASELINE) != (self.regime is Regime.NONE):
            raise ContractError(
                f"strategy {self.strategy.value} is incompatible with regime "
                f"{self.regime.value}: Baseline pairs with None and nothing else does"
            )

    @property
    def is_baseline(self) -> bool:
        return self.strategy is Strategy.BASELINE

    @property
    def arm_label(self) -> str:
        if self.is_baseline:
            return "Baseline"
        return f"{self.strategy.value}-{self.regime.value}"

    def to_dict(self) -> dict[str, Any]:
        return {
            "strategy": self.strategy.value,
            "regime": self.regime.value,
            "rewriter_id": self.rewriter_id,
            "template_id": self.template_id,
            "task_family": self.task_family.value,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "RewritePlan":
        return cls(
            strategy=Strategy(d["strategy"]),
            regime=Regime(d["regime"]),
            rewriter_id=d.get("rewriter_id", ""),
            template_id=d.get("template_id", ""),
            task_family=TaskFamily(d.get("task_family", "CodeToCode")),
        )

    @classmethod
    def baseline(cls, task_family: TaskFamily = TaskFamily.CODE_TO_CODE) -> "RewritePlan":
        return cls(strategy=Strategy.BASELINE, regime=Regime.NONE,
                   task_family=task_family)


@dataclass
class RunRecord:
    """Per-query and mean NDCG@k for one (encoder, task, arm) cell."""

    encoder_id: str
    task_id: str
    plan: RewritePlan
    ndcg_per_query: dict[str, float]
    mean_ndcg: float
    delta_ndcg: float | None = None
    gain: str = "linear"
    k: int = 10

    def __post_init__(self):
        if not self.ndcg_per_query:
            raise DomainError("run record needs at least one evaluated query")
        for qid, v in self.ndcg_per_query.items():
            if not (0.0 <= v <= 1.0):
                raise DomainError(f"ndcg for query {qid!r} outside [0,1]: {v}")
        expected = sum(self.ndcg_per_query.values()) / len(self.ndcg_per_query)
        if abs(expected - self.mean_ndcg) > MEAN_NDCG_TOL:
            raise DomainError(
                f"mean_ndcg {self.mean_ndcg} inconsistent with per-query values "
                f"(recomputed {expected})"
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            "encoder_id": self.encoder_id,
            "task_id": self.task_id,
            "plan": self.plan.to_dict(),
            "ndcg_per_query": dict(self.ndcg_per_query),
            "mean_ndcg": self.mean_ndcg,
            "delta_ndcg": self.delta_ndcg,
            "gain": self.gain,
            "k": self.k,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "RunRecord":
        return cls(
            encoder_id=d["encoder_id"],
            task_id=d["task_id"],
            plan=RewritePlan.from_dict(d["plan"]),
            ndcg_per_query={str(k): float(v) for k, v in d["ndcg_per_query"].items()},
            mean_ndcg=float(d["mean_ndcg"]),
            delta_ndcg=None if d.get("delta_ndcg") is None else float(d["delta_ndcg"]),
            gain=d.get("gain", "linear"),
            k=int(d.get("k", 10)),
        )
