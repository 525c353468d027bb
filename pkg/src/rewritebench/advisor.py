"""Entropy-based strategy selection: should this task be rewritten at all,
and if so, with which strategy?

The decision rule recommends the strategy with the largest mean entropy
gain when that gain clears the skip threshold (default 0.0 bits, the sign
boundary between enriching and flattening rewrites), and Skip otherwise.
Ties prefer the richer abstraction: NL over Pseudo over Rephrase.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .errors import DomainError
from .models import Strategy

SKIP = "Skip"

# richer abstraction wins at equal entropy gain
_TIE_RANK = {Strategy.REPHRASE: 0, Strategy.PSEUDO: 1, Strategy.NL: 2}


@dataclass(frozen=True)
class Advice:
    task_id: str
    rewriter_id: str
    delta_h: dict[Strategy, float]
    recommended: str  # a Strategy value or "Skip"
    rationale: str
    skip_threshold: float

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "rewriter_id": self.rewriter_id,
            "delta_h": {s.value: v for s, v in sorted(self.delta_h.items(),
                                                      key=lambda kv: kv[0].value)},
            "recommended": self.recommended,
            "rationale": self.rationale,
            "skip_threshold": self.skip_threshold,
        }


def advise(task_id: str, delta_h_by_strategy: Mapping[Strategy, float],
           skip_threshold: float = 0.0, rewriter_id: str = "") -> Advice:
    """Pick the argmax-entropy-gain strategy, or Skip if nothing clears the
    threshold. Operates on per-task aggregates, never per query."""
    if not delta_h_by_strategy:
        raise DomainError("cannot advise without at least one measured strategy")
    for s in delta_h_by_strategy:
        if s is Strategy.BASELINE:
            raise DomainError("Baseline has no entropy delta; pass rewrite strategies only")

    best = max(delta_h_by_strategy,
               key=lambda s: (delta_h_by_strategy[s], _TIE_RANK[s]))
    values = ", ".join(f"{s.value}={delta_h_by_strategy[s]:+.3f}"
                       for s in sorted(delta_h_by_strategy, key=lambda s: s.value))
    if delta_h_by_strategy[best] > skip_threshold:
        recommended = best.value
        rationale = (f"entropy gain ({values} bits): {best.value} is largest and "
                     f"exceeds the skip threshold {skip_threshold:+.3f}")
    else:
        recommended = SKIP
        rationale = (f"entropy gain ({values} bits): no strategy exceeds the "
                     f"skip threshold {skip_threshold:+.3f}; rewriting is unlikely to pay off")
    return Advice(task_id=task_id, rewriter_id=rewriter_id,
                  delta_h=dict(delta_h_by_strategy), recommended=recommended,
                  rationale=rationale, skip_threshold=skip_threshold)
