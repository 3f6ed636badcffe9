"""Per-source profiling: schema and statistics for structured data, compressed
summaries for text, and classify-then-extract handling for images."""

from __future__ import annotations

import json
import re
import sqlite3
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import pandas as pd

from .bundle import DataSource
from .errors import EncodingFailure, ExtractionInconsistent, GatewayFailure, ParseFailure
from .gateway import Gateway, extract_tagged
from .prompts import CLASSIFY_IMAGE_PROMPT, DESCRIBE_CHART_PROMPT, EXTRACT_TABLE_PROMPT, TEXT_SUMMARY_TEMPLATE
from .text_utils import tokenize, top_tokens

TEMPORAL_KEYWORDS = ("date", "time", "timestamp", "year", "month", "day", "quarter", "week")

ENCODING_CHAIN = ("utf-8", "gbk", "latin-1")

MAX_SAMPLE_VALUES = 5
SUMMARY_BUDGET_DEFAULT = 4000


@dataclass
class ColumnStats:
    name: str
    inferred_type: str  # numeric | categorical | temporal | text | nested
    missing_rate: float
    unique_ratio: float
    sample_values: list[str] = field(default_factory=list)


@dataclass
class ExtractedTable:
    headers: list[str]
    rows: list[list]
    provenance: str


@dataclass
class SourceProfile:
    source_name: str
    modality: str
    row_count: int
    column_count: int
    columns: list[ColumnStats] = field(default_factory=list)
    overall_missing_rate: float = 0.0
    has_temporal: bool = False
    schema_keywords: list[str] = field(default_factory=list)
    summary_text: str = ""
    image_kind: Optional[str] = None  # tabular | visualization | other

    def to_dict(self) -> dict:
        return {
            "source_name": self.source_name,
            "modality": self.modality,
            "row_count": self.row_count,
            "column_count": self.column_count,
            "columns": [vars(c) for c in self.columns],
            "overall_missing_rate": self.overall_missing_rate,
            "has_temporal": self.has_temporal,
            "schema_keywords": sorted(self.schema_keywords),
            "summary_text": self.summary_text,
            "image_kind": self.image_kind,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SourceProfile":
        cols = [ColumnStats(**c) for c in data.get("columns", [])]
        return cls(**{**data, "columns": cols})

    def schema_text(self) -> str:
        """Compact schema rendering for prompt slots."""
        lines = [f"{self.source_name} ({self.modality}): {self.row_count} rows x {self.column_count} columns"]
        for col in self.columns:
            samples = ", ".join(col.sample_values[:3])
            lines.append(
                f"- {col.name} [{col.inferred_type}] missing={col.missing_rate:.2f} "
                f"unique={col.unique_ratio:.2f} e.g. {samples}"
            )
        if not self.columns and self.summary_text:
            lines.append(self.summary_text[:800])
        return "\n".join(lines)


def _has_temporal_name(name: str) -> bool:
    lowered = name.lower()
    return any(kw in lowered for kw in TEMPORAL_KEYWORDS)


def _infer_column_type(series: pd.Series, name: str) -> str:
    non_null = series.dropna()
    if len(non_null) and non_null.map(lambda v: isinstance(v, (dict, list))).any():
        return "nested"
    if pd.api.types.is_datetime64_any_dtype(series):
        return "temporal"
    if pd.api.types.is_numeric_dtype(series):
        return "numeric"
    sample = non_null.astype(str).head(20)
    if len(sample):
        parsed = pd.to_datetime(sample, errors="coerce", format="mixed")
        parse_rate = parsed.notna().mean()
        # pure numbers also "parse" as dates; require a temporal-looking name then
        datey = sample.str.contains(r"[-/:]").mean()
        if parse_rate >= 0.9 and (datey >= 0.5 or _has_temporal_name(name)):
            return "temporal"
        numeric = pd.to_numeric(sample, errors="coerce")
        if numeric.notna().mean() >= 0.9:
            return "numeric"
    if len(series):
        unique_ratio = non_null.nunique() / max(len(non_null), 1)
        return "categorical" if unique_ratio < 0.5 else "text"
    return "text"


def _column_stats(series: pd.Series, name: str) -> ColumnStats:
    total = len(series)
    missing = int(series.isna().sum())
    non_null = series.dropna()
    if len(non_null):
        hashable = non_null.map(lambda v: json.dumps(v, default=str) if isinstance(v, (dict, list)) else v)
        unique_ratio = hashable.nunique() / len(non_null)
    else:
        unique_ratio = 0.0
    samples = [str(v)[:80] for v in non_null.head(MAX_SAMPLE_VALUES)]
    return ColumnStats(
        name=str(name),
        inferred_type=_infer_column_type(series, str(name)),
        missing_rate=missing / total if total else 0.0,
        unique_ratio=unique_ratio,
        sample_values=samples,
    )


def profile_dataframe(df: pd.DataFrame, source_name: str, modality: str) -> SourceProfile:
    """Profile an in-memory table: exact row/column counts, per-column stats."""
    columns = [_column_stats(df[c], c) for c in df.columns]
    total_cells = len(df) * len(df.columns)
    missing_cells = int(df.isna().sum().sum())
    keywords = set()
    for c in df.columns:
        keywords.update(tokenize(str(c)))
    has_temporal = any(c.inferred_type == "temporal" for c in columns) or any(
        _has_temporal_name(str(c)) for c in df.columns
    )
    summary = f"{source_name}: {len(df)} rows x {len(df.columns)} columns ({', '.join(map(str, df.columns[:12]))})"
    return SourceProfile(
        source_name=source_name,
        modality=modality,
        row_count=len(df),
        column_count=len(df.columns),
        columns=columns,
        overall_missing_rate=missing_cells / total_cells if total_cells else 0.0,
        has_temporal=has_temporal,
        schema_keywords=sorted(keywords),
        summary_text=summary[:SUMMARY_BUDGET_DEFAULT],
    )


def _read_csv(path: Path) -> pd.DataFrame:
    last_exc: Exception | None = None
    for encoding in ENCODING_CHAIN:
        try:
            return pd.read_csv(path, encoding=encoding)
        except UnicodeDecodeError as exc:
            last_exc = exc
        except Exception as exc:
            raise ParseFailure(f"cannot parse {path}: {exc}") from exc
    raise EncodingFailure(f"cannot decode {path} with {ENCODING_CHAIN}: {last_exc}")


def _read_json_records(path: Path) -> pd.DataFrame:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseFailure(f"cannot parse {path}: {exc}") from exc
    if isinstance(data, dict):
        data = [data]
    if not isinstance(data, list):
        raise ParseFailure(f"{path}: top-level JSON must be an object or array of objects")
    # top-level keys become columns; deeper nesting stays as `nested` values
    return pd.DataFrame(data)


def profile_structured(source: DataSource) -> SourceProfile:
    """Profile a csv or json source (sql_db sources go through profile_database)."""
    if source.modality == "csv":
        df = _read_csv(source.path)
    elif source.modality == "json":
        df = _read_json_records(source.path)
    else:
        raise ParseFailure(f"profile_structured cannot handle modality {source.modality!r}")
    return profile_dataframe(df, source.name, source.modality)


def profile_database(source: DataSource) -> list[SourceProfile]:
    """Profile every table of a relational source: one profile entry per table."""
    uri = f"file:{source.path}?mode=ro"
    try:
        conn = sqlite3.connect(uri, uri=True)
    except sqlite3.Error as exc:
        raise ParseFailure(f"cannot open {source.path}: {exc}") from exc
    try:
        tables = [
            row[0]
            for row in conn.execute(
                "SELECT name FROM sqlite_master WHERE type='table' ORDER BY name"
            )
        ]
        profiles = []
        for table in tables:
            df = pd.read_sql_query(f'SELECT * FROM "{table}"', conn)
            profiles.append(profile_dataframe(df, f"{source.name}.{table}", "sql_db"))
        return profiles
    finally:
        conn.close()


def profile_text(source: DataSource, gateway: Optional[Gateway] = None,
                 budget: int = SUMMARY_BUDGET_DEFAULT, trace=None) -> SourceProfile:
    """Profile a text source: verbatim when under budget, model-compressed otherwise."""
    raw = None
    for encoding in ENCODING_CHAIN:
        try:
            raw = source.path.read_text(encoding=encoding)
            break
        except UnicodeDecodeError:
            continue
    if raw is None:
        raise EncodingFailure(f"cannot decode {source.path}")
    if len(raw) <= budget:
        summary = raw
    elif gateway is not None:
        try:
            prompt = TEXT_SUMMARY_TEMPLATE.format(budget=budget, text=raw[: budget * 10])
            summary = gateway.complete_with_retry(
                prompt,
                validator=lambda t: None if t.strip() else "empty summary",
                stage_tag="profile_text",
            ).text.strip()[:budget]
        except GatewayFailure:
            summary = raw[:budget]
            if trace is not None:
                trace({"type": "text_summary_fallback", "source": source.name})
    else:
        summary = raw[:budget]
        if trace is not None:
            trace({"type": "text_summary_fallback", "source": source.name})
    keywords = top_tokens(raw, k=20)
    return SourceProfile(
        source_name=source.name,
        modality="txt",
        row_count=0,
        column_count=0,
        overall_missing_rate=0.0,
        has_temporal=any(kw in TEMPORAL_KEYWORDS for kw in keywords),
        schema_keywords=sorted(keywords),
        summary_text=summary,
    )


def _parse_grid(text: str) -> tuple[list[str], list[list]]:
    cleaned = text.strip()
    cleaned = re.sub(r"^```(?:json)?\s*", "", cleaned)
    cleaned = re.sub(r"\s*```$", "", cleaned)
    try:
        data = json.loads(cleaned)
    except json.JSONDecodeError as exc:
        raise ExtractionInconsistent(f"extraction output is not valid JSON: {exc}") from exc
    headers = data.get("headers")
    rows = data.get("rows")
    if not isinstance(headers, list) or not isinstance(rows, list):
        raise ExtractionInconsistent("extraction output lacks headers/rows lists")
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != len(headers):
            raise ExtractionInconsistent(
                f"ragged grid: row {i} has {len(row) if isinstance(row, list) else 'non-list'} "
                f"cells, expected {len(headers)}"
            )
    return [str(h) for h in headers], rows


def profile_image(source: DataSource, gateway: Gateway) -> tuple[SourceProfile, Optional[ExtractedTable]]:
    """Classify-then-extract: tabular images become structured profiles over the
    extracted grid; visualizations get a textual chart description."""
    valid_kinds = {"tabular", "visualization", "other"}

    def classify_validator(text: str) -> Optional[str]:
        kinds = extract_tagged(text, "image_kind")
        if not kinds:
            return "missing <image_kind> tag"
        if kinds[0].strip().lower() not in valid_kinds:
            return f"unknown image kind {kinds[0]!r}"
        return None

    completion = gateway.complete_with_retry(
        CLASSIFY_IMAGE_PROMPT,
        validator=classify_validator,
        stage_tag="classify_image",
        image_path=str(source.path),
    )
    kind = extract_tagged(completion.text, "image_kind")[0].strip().lower()

    if kind == "tabular":
        raw = gateway.complete_with_retry(
            EXTRACT_TABLE_PROMPT,
            validator=lambda t: None if t.strip() else "empty extraction",
            stage_tag="extract_table",
            image_path=str(source.path),
        ).text
        headers, rows = _parse_grid(raw)
        table = ExtractedTable(headers=headers, rows=rows, provenance=f"{source.name}:full_image")
        df = pd.DataFrame(rows, columns=headers)
        # numeric-looking cells come back as strings; coerce column-wise where clean
        for col in df.columns:
            coerced = pd.to_numeric(df[col], errors="coerce")
            if coerced.notna().all():
                df[col] = coerced
        profile = profile_dataframe(df, source.name, "image")
        profile.image_kind = "tabular"
        return profile, table

    description = gateway.complete_with_retry(
        DESCRIBE_CHART_PROMPT,
        validator=lambda t: None if t.strip() else "empty description",
        stage_tag="describe_image",
        image_path=str(source.path),
    ).text.strip()
    profile = SourceProfile(
        source_name=source.name,
        modality="image",
        row_count=0,
        column_count=0,
        overall_missing_rate=0.0,
        has_temporal=False,
        schema_keywords=sorted(top_tokens(description, k=20)),
        summary_text=description[:SUMMARY_BUDGET_DEFAULT],
        image_kind=kind,
    )
    return profile, None
