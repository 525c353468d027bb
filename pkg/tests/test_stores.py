import threading

from rewritebench.models import Regime, RewritePlan, RunRecord, Strategy
from rewritebench.stores import DiagnosticsStore, RunStore, persist_run


def _record(i: int = 0) -> RunRecord:
    return RunRecord(
        encoder_id="enc", task_id="task",
        plan=RewritePlan(strategy=Strategy.NL, regime=Regime.QC, rewriter_id="rw"),
        ndcg_per_query={"q1": 0.25 + i * 1e-6, "q2": 0.75},
        mean_ndcg=(0.25 + i * 1e-6 + 0.75) / 2)


class TestRunStore:
    def test_roundtrip_is_identity(self, tmp_path):
        store = RunStore(tmp_path / "runs.jsonl")
        rec = _record()
        store.append(rec)
        (run_id, back), = store.read()
        assert back == rec
        assert run_id == "run-000000"

    def test_distinct_ids_stable_order(self, tmp_path):
        store = RunStore(tmp_path / "runs.jsonl")
        id_a = store.append(_record(1))
        id_b = store.append(_record(2))
        assert id_a != id_b
        rows = store.read()
        assert [rid for rid, _ in rows] == [id_a, id_b]

    def test_thousand_records_all_readable(self, tmp_path):
        store = RunStore(tmp_path / "runs.jsonl")
        for i in range(1000):
            store.append(_record(i))
        assert len(store.read()) == 1000

    def test_concurrent_appends_serialize(self, tmp_path):
        store = RunStore(tmp_path / "runs.jsonl")

        def worker(n):
            for i in range(25):
                store.append(_record(n * 100 + i))

        threads = [threading.Thread(target=worker, args=(n,)) for n in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        rows = store.read()
        assert len(rows) == 100
        assert len({rid for rid, _ in rows}) == 100

    def test_persist_run_helper(self, tmp_path):
        path = tmp_path / "runs.jsonl"
        run_id = persist_run(_record(), path)
        assert run_id == "run-000000"
        assert len(RunStore(path).read()) == 1

    def test_schema_version_on_every_line(self, tmp_path):
        import json
        path = tmp_path / "runs.jsonl"
        persist_run(_record(), path)
        line = json.loads(path.read_text().splitlines()[0])
        assert line["v"] == 1


class TestDiagnosticsStore:
    def test_kinds_separated(self, tmp_path):
        store = DiagnosticsStore(tmp_path / "diag.jsonl")
        store.append("lexical", {"encoder_id": "e", "h_bits": 1.0})
        store.append("geometry", {"encoder_id": "e", "s_bar": 0.5})
        assert len(store.by_kind("lexical")) == 1
        assert len(store.by_kind("geometry")) == 1
        assert store.by_kind("lexical")[0]["h_bits"] == 1.0
