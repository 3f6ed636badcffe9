import json
import sqlite3

import pandas as pd
import pytest

from crosslens.bundle import DataSource
from crosslens.errors import ExtractionInconsistent, ParseFailure
from crosslens.gateway import Gateway, ScriptedBackend
from crosslens.profiler import (
    profile_database,
    profile_dataframe,
    profile_image,
    profile_structured,
    profile_text,
)
from tests.conftest import PRICING_HEADERS, PRICING_ROWS, render_table_png


def make_source(path, modality=None):
    modality = modality or {"csv": "csv", "json": "json", "txt": "txt", "png": "image",
                            "sqlite": "sql_db", "db": "sql_db"}[path.suffix.lstrip(".")]
    return DataSource(name=path.stem, modality=modality, path=path, size_bytes=path.stat().st_size)


def scripted_gateway(responses):
    return Gateway(backend=ScriptedBackend(responses))


class TestProfileDataframe:
    def test_unique_ratio(self):
        df = pd.DataFrame({"c": ["a", "a", "b", "c"]})
        # oracle by hand: 3 distinct over 4 non-null
        assert profile_dataframe(df, "s", "csv").columns[0].unique_ratio == pytest.approx(0.75)

    def test_overall_missing_rate(self):
        df = pd.DataFrame({"a": [1, None, 3, 4, 5], "b": ["x", "y", None, "z", "w"]})
        # 2 empty cells out of 10
        assert profile_dataframe(df, "s", "csv").overall_missing_rate == pytest.approx(0.2)

    def test_brute_force_missing_recount(self):
        df = pd.DataFrame(
            {
                "a": [1, None, 3, None],
                "b": [None, None, "x", "y"],
                "c": [1.0, 2.0, 3.0, 4.0],
            }
        )
        profile = profile_dataframe(df, "s", "csv")
        missing = sum(
            1 for col in df.columns for v in df[col] if pd.isna(v)
        )
        assert profile.overall_missing_rate == pytest.approx(missing / (len(df) * len(df.columns)))
        for col_stats in profile.columns:
            col = df[col_stats.name]
            assert col_stats.missing_rate == pytest.approx(col.isna().sum() / len(col))

    def test_temporal_detection_with_oracle(self):
        from datetime import datetime

        values = ["2023-01-05", "2023-02-05", "2023-03-05"]
        # independent oracle: every value parses as a date
        for v in values:
            datetime.strptime(v, "%Y-%m-%d")
        df = pd.DataFrame({"order_date": values, "revenue": [1, 2, 3]})
        profile = profile_dataframe(df, "s", "csv")
        by_name = {c.name: c.inferred_type for c in profile.columns}
        assert by_name["order_date"] == "temporal"
        assert by_name["revenue"] == "numeric"
        assert profile.has_temporal

    def test_categorical_vs_text_threshold(self):
        df = pd.DataFrame(
            {
                "cat": ["a", "b", "a", "b", "a", "b", "a", "b"],
                "free": [f"unique sentence {i}" for i in range(8)],
            }
        )
        by_name = {c.name: c.inferred_type for c in profile_dataframe(df, "s", "csv").columns}
        assert by_name == {"cat": "categorical", "free": "text"}

    def test_schema_keywords_from_column_names(self):
        df = pd.DataFrame({"order_date": [1], "net_revenue": [2]})
        kws = set(profile_dataframe(df, "s", "csv").schema_keywords)
        assert {"order", "date", "net", "revenue"} <= kws


class TestStructuredSources:
    def test_csv_counts(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("a,b\n1,2\n3,\n", encoding="utf-8")
        profile = profile_structured(make_source(p))
        assert (profile.row_count, profile.column_count) == (2, 2)
        assert profile.overall_missing_rate == pytest.approx(0.25)

    def test_csv_read_only(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("a,b\n1,2\n", encoding="utf-8")
        before = p.read_bytes()
        profile_structured(make_source(p))
        assert p.read_bytes() == before

    def test_csv_non_utf8_encoding_chain(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_bytes("name,city\nJosé,Málaga\n".encode("latin-1"))
        profile = profile_structured(make_source(p))
        assert profile.row_count == 1

    def test_json_nested_values_stay_nested(self, tmp_path):
        p = tmp_path / "t.json"
        p.write_text(
            json.dumps([{"id": 1, "meta": {"a": 1}}, {"id": 2, "meta": {"a": 2}}]),
            encoding="utf-8",
        )
        by_name = {c.name: c.inferred_type for c in profile_structured(make_source(p)).columns}
        assert by_name == {"id": "numeric", "meta": "nested"}

    def test_json_non_record_top_level(self, tmp_path):
        p = tmp_path / "t.json"
        p.write_text('"just a string"', encoding="utf-8")
        with pytest.raises(ParseFailure):
            profile_structured(make_source(p))


class TestDatabase:
    def test_one_profile_per_table(self, tmp_path):
        p = tmp_path / "shop.sqlite"
        conn = sqlite3.connect(p)
        conn.execute("CREATE TABLE orders (id INTEGER, amount REAL)")
        conn.execute("INSERT INTO orders VALUES (1, 9.5), (2, 11.0)")
        conn.execute("CREATE TABLE customers (id INTEGER, name TEXT)")
        conn.execute("INSERT INTO customers VALUES (1, 'ann')")
        conn.commit()
        conn.close()
        profiles = profile_database(make_source(p))
        assert [pr.source_name for pr in profiles] == ["shop.customers", "shop.orders"]
        by_name = {pr.source_name: pr.row_count for pr in profiles}
        assert by_name == {"shop.customers": 1, "shop.orders": 2}


class TestText:
    def test_under_budget_verbatim(self, tmp_path):
        p = tmp_path / "n.txt"
        p.write_text("Short note about revenue in 2023.", encoding="utf-8")
        profile = profile_text(make_source(p))
        assert profile.summary_text == "Short note about revenue in 2023."
        assert "revenue" in profile.schema_keywords

    def test_over_budget_uses_gateway_summary(self, tmp_path):
        p = tmp_path / "n.txt"
        p.write_text("word " * 50, encoding="utf-8")
        gw = scripted_gateway({"profile_text": ["Condensed summary."]})
        profile = profile_text(make_source(p), gateway=gw, budget=100)
        assert profile.summary_text == "Condensed summary."

    def test_over_budget_without_gateway_truncates_and_traces(self, tmp_path):
        p = tmp_path / "n.txt"
        p.write_text("x" * 500, encoding="utf-8")
        events = []
        profile = profile_text(make_source(p), budget=100, trace=events.append)
        assert len(profile.summary_text) == 100
        assert events and events[0]["type"] == "text_summary_fallback"


class TestImage:
    def _png(self, tmp_path):
        p = tmp_path / "pricing.png"
        render_table_png(p, PRICING_HEADERS, PRICING_ROWS)
        return make_source(p)

    def test_tabular_image_cell_exact(self, tmp_path):
        gw = scripted_gateway(
            {
                "classify_image": ["<image_kind>tabular</image_kind>"],
                "extract_table": [json.dumps({"headers": PRICING_HEADERS, "rows": PRICING_ROWS})],
            }
        )
        profile, table = profile_image(self._png(tmp_path), gw)
        assert table.headers == PRICING_HEADERS
        assert table.rows == PRICING_ROWS
        assert profile.image_kind == "tabular"
        assert (profile.row_count, profile.column_count) == (len(PRICING_ROWS), len(PRICING_HEADERS))
        # numeric coercion applies only to clean columns; "price" mixes ints and floats but all parse
        by_name = {c.name: c.inferred_type for c in profile.columns}
        assert by_name["price"] == "numeric"

    def test_visualization_image(self, tmp_path):
        gw = scripted_gateway(
            {
                "classify_image": ["<image_kind>visualization</image_kind>"],
                "describe_image": ["A line chart of monthly revenue by region."],
            }
        )
        profile, table = profile_image(self._png(tmp_path), gw)
        assert table is None
        assert profile.image_kind == "visualization"
        assert "revenue" in profile.schema_keywords

    def test_ragged_grid_rejected(self, tmp_path):
        gw = scripted_gateway(
            {
                "classify_image": ["<image_kind>tabular</image_kind>"],
                "extract_table": [json.dumps({"headers": ["a", "b"], "rows": [["1"], ["2", "3"]]})],
            }
        )
        with pytest.raises(ExtractionInconsistent):
            profile_image(self._png(tmp_path), gw)
