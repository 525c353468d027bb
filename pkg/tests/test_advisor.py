import pytest

from rewritebench.advisor import SKIP, advise
from rewritebench.errors import DomainError
from rewritebench.models import Strategy


class TestAdvise:
    def test_argmax_strategy_recommended(self):
        # per-strategy means lifted from a reference diagnostics table
        advice = advise("ct-contest", {Strategy.REPHRASE: 0.60,
                                       Strategy.PSEUDO: 0.95,
                                       Strategy.NL: 0.90})
        assert advice.recommended == "Pseudo"
        assert "+0.950" in advice.rationale

    def test_negative_delta_means_skip(self):
        advice = advise("cosqa", {Strategy.NL: -0.36})
        assert advice.recommended == SKIP
        assert "-0.360" in advice.rationale

    def test_tie_prefers_richer_abstraction(self):
        advice = advise("t", {Strategy.REPHRASE: 0.5, Strategy.NL: 0.5})
        assert advice.recommended == "NL"
        advice = advise("t", {Strategy.REPHRASE: 0.5, Strategy.PSEUDO: 0.5})
        assert advice.recommended == "Pseudo"

    def test_threshold_is_strict(self):
        assert advise("t", {Strategy.NL: 0.0}).recommended == SKIP
        assert advise("t", {Strategy.NL: 1e-9}).recommended == "NL"

    def test_configurable_threshold(self):
        deltas = {Strategy.NL: 0.3, Strategy.REPHRASE: 0.1}
        assert advise("t", deltas, skip_threshold=0.25).recommended == "NL"
        assert advise("t", deltas, skip_threshold=0.35).recommended == SKIP

    def test_scale_covariance_at_zero_threshold(self):
        deltas = {Strategy.REPHRASE: 0.2, Strategy.PSEUDO: 0.7, Strategy.NL: 0.4}
        base = advise("t", deltas).recommended
        for c in (0.5, 2.0, 10.0):
            scaled = {s: c * v for s, v in deltas.items()}
            assert advise("t", scaled).recommended == base

    def test_empty_input_rejected(self):
        with pytest.raises(DomainError):
            advise("t", {})

    def test_baseline_not_a_strategy(self):
        with pytest.raises(DomainError):
            advise("t", {Strategy.BASELINE: 0.0})

    def test_skip_iff_all_below_threshold(self):
        # the Skip invariant, both directions
        below = advise("t", {Strategy.NL: -0.1, Strategy.PSEUDO: -0.4})
        assert below.recommended == SKIP
        mixed = advise("t", {Strategy.NL: -0.1, Strategy.PSEUDO: 0.2})
        assert mixed.recommended == "Pseudo"

    def test_dict_shape(self):
        advice = advise("task-1", {Strategy.NL: 0.4}, rewriter_id="rw-9")
        d = advice.to_dict()
        assert d["task_id"] == "task-1"
        assert d["rewriter_id"] == "rw-9"
        assert d["delta_h"] == {"NL": 0.4}
        assert d["recommended"] == "NL"
        assert isinstance(d["rationale"], str)
