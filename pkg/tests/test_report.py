import json

import pytest

from crosslens.errors import MissingStageArtifacts, RetriesExhausted
from crosslens.gateway import Gateway, ScriptedBackend
from crosslens.report import (
    EVIDENCE_OVERLAP_THRESHOLD,
    FinalReport,
    assemble_context,
    attach_evidence,
    render_markdown,
    serialize_report,
    synthesize_report,
    token_overlap,
    verify_evidence,
    write_report,
)
from tests.conftest import FINAL_REPORT_JSON, NODE_INSIGHT


def gw(responses):
    return Gateway(backend=ScriptedBackend(responses))


def scaffold_run(tmp_path, *, cross=True):
    """Minimal on-disk run directory with one source and one cross node."""
    out = tmp_path / "run"
    profiles = out / "profiles"
    profiles.mkdir(parents=True)
    (profiles / "_ranking.json").write_text(
        json.dumps({"order": ["sales"], "source_files": {"sales": "sources/sales.csv"}})
    )
    (profiles / "sales.json").write_text(
        json.dumps({"source_name": "sales", "modality": "csv", "row_count": 6, "column_count": 3})
    )
    node_dir = out / "explorations" / "sales" / "q1"
    node_dir.mkdir(parents=True)
    node = {
        "node_id": "q1",
        "question": {"text": "What is the trend?", "origin": "seed", "parent": None},
        "insight_text": NODE_INSIGHT,
    }
    (node_dir / "node.json").write_text(json.dumps(node))
    (out / "explorations" / "sales" / "exploration.json").write_text(
        json.dumps({"source_name": "sales", "summary": "Steady growth.", "nodes": [node]})
    )
    cross_dir = out / "cross"
    cross_dir.mkdir()
    if cross:
        (cross_dir / "checklist.json").write_text(
            json.dumps(
                {
                    "items": [
                        {
                            "question": {"text": "Cross q?", "source_a": "sales", "source_b": "returns"},
                            "status": "done",
                            "node_id": "q1",
                        }
                    ]
                }
            )
        )
        cq = cross_dir / "q1"
        cq.mkdir()
        (cq / "node.json").write_text(
            json.dumps(
                {
                    "node_id": "q1",
                    "question": {"text": "Cross q?", "origin": "cross", "parent": None},
                    "insight_text": "Returns track revenue by region with a small lag.",
                }
            )
        )
        (cross_dir / "annotations.json").write_text(
            json.dumps([{"annotator": "returns", "target": "sales", "comment": "check joins"}])
        )
    return out


class TestAssembleContext:
    def test_sections_in_rank_order(self, tmp_path):
        context = assemble_context(scaffold_run(tmp_path))
        assert context.index("## Source: sales") < context.index("## Cross-Source Findings")
        assert NODE_INSIGHT in context
        assert "## Agent Annotations" in context
        assert "check joins" in context

    def test_missing_ranking_raises(self, tmp_path):
        out = scaffold_run(tmp_path)
        (out / "profiles" / "_ranking.json").unlink()
        with pytest.raises(MissingStageArtifacts):
            assemble_context(out)

    def test_missing_exploration_raises(self, tmp_path):
        out = scaffold_run(tmp_path)
        (out / "explorations" / "sales" / "exploration.json").unlink()
        with pytest.raises(MissingStageArtifacts):
            assemble_context(out)

    def test_oversize_section_truncated_with_trace(self, tmp_path):
        out = scaffold_run(tmp_path, cross=False)
        exploration = json.loads((out / "explorations" / "sales" / "exploration.json").read_text())
        exploration["summary"] = "x" * 10_000
        (out / "explorations" / "sales" / "exploration.json").write_text(json.dumps(exploration))
        events = []
        context = assemble_context(out, trace=events.append)
        assert "...[truncated]" in context
        assert any(e["type"] == "context_truncated" for e in events)


class TestSynthesize:
    def test_five_keys_parsed(self):
        report = synthesize_report("ctx", gw({"synthesize": [json.dumps(FINAL_REPORT_JSON)]}))
        assert report.summary == FINAL_REPORT_JSON["summary"]
        assert report.insights == FINAL_REPORT_JSON["insights"]

    def test_fenced_and_chatty_output_accepted(self):
        wrapped = "Here is the report:\n```json\n" + json.dumps(FINAL_REPORT_JSON) + "\n```"
        report = synthesize_report("ctx", gw({"synthesize": [wrapped]}))
        assert report.next_steps == FINAL_REPORT_JSON["next_steps"]

    def test_missing_key_retried(self):
        incomplete = {k: v for k, v in FINAL_REPORT_JSON.items() if k != "limitations"}
        responses = {"synthesize": [json.dumps(incomplete), json.dumps(FINAL_REPORT_JSON)]}
        report = synthesize_report("ctx", gw(responses))
        assert report.limitations == FINAL_REPORT_JSON["limitations"]

    def test_exhaustion_raises(self):
        with pytest.raises(RetriesExhausted):
            synthesize_report("ctx", gw({"synthesize": ["not json at all"]}))


class TestTokenOverlap:
    def test_identical_is_one(self):
        assert token_overlap("revenue grew fast", "revenue grew fast") == 1.0

    def test_disjoint_is_zero(self):
        assert token_overlap("alpha beta", "gamma delta") == 0.0

    def test_reference_value(self):
        # tokens {sales, grew, north} vs {sales, fell, north}: 2 shared of 4 union
        assert token_overlap("sales grew north", "sales fell north") == pytest.approx(0.5)

    def test_symmetry(self):
        a, b = "regional revenue trend", "trend of revenue by region"
        assert token_overlap(a, b) == token_overlap(b, a)


class TestAttachEvidence:
    def test_linked_and_unlinked(self, tmp_path):
        out = scaffold_run(tmp_path)
        report = attach_evidence(FinalReport.from_dict(FINAL_REPORT_JSON), out)
        assert len(report.evidence) == len(report.insights)
        linked = report.evidence[0]
        assert linked["source"] == "sales"
        assert linked["node_ref"] == "explorations/sales/q1"
        assert linked["locator"]["kind"] == "csv_rows"
        assert report.evidence[1] == {"insight_index": 1, "unlinked": True}

    def test_threshold_is_half(self, tmp_path):
        out = scaffold_run(tmp_path, cross=False)
        # below-threshold paraphrase must not link
        report = FinalReport(
            summary="s",
            insights=["An entirely different statement about inventory stocking levels."],
            cross_dataset_discoveries=[],
            limitations=[],
            next_steps=[],
        )
        attach_evidence(report, out)
        assert report.evidence[0].get("unlinked") is True
        assert EVIDENCE_OVERLAP_THRESHOLD == 0.5

    def test_verify_evidence_resolves_on_disk(self, tmp_path):
        out = scaffold_run(tmp_path)
        bundle = tmp_path / "bundle"
        (bundle / "sources").mkdir(parents=True)
        (bundle / "sources" / "sales.csv").write_text("a\n1")
        report = attach_evidence(FinalReport.from_dict(FINAL_REPORT_JSON), out)
        assert verify_evidence(report, out, bundle_dir=bundle) == []

    def test_verify_evidence_flags_dangling(self, tmp_path):
        out = scaffold_run(tmp_path)
        report = attach_evidence(FinalReport.from_dict(FINAL_REPORT_JSON), out)
        problems = verify_evidence(report, out, bundle_dir=None)
        assert any("locator" in p for p in problems)


class TestSerialization:
    def test_roundtrip(self):
        report = FinalReport.from_dict(FINAL_REPORT_JSON)
        assert FinalReport.from_dict(json.loads(serialize_report(report))).to_dict() == report.to_dict()

    def test_write_report_emits_json_and_markdown(self, tmp_path):
        report = FinalReport.from_dict(FINAL_REPORT_JSON)
        path = write_report(report, tmp_path)
        assert path.name == "report.json"
        markdown = (tmp_path / "report.md").read_text()
        assert "# Analysis Report" in markdown
        assert FINAL_REPORT_JSON["insights"][0] in markdown

    def test_markdown_marks_evidence(self, tmp_path):
        out = scaffold_run(tmp_path)
        report = attach_evidence(FinalReport.from_dict(FINAL_REPORT_JSON), out)
        markdown = render_markdown(report)
        assert "_(evidence: explorations/sales/q1)_" in markdown
