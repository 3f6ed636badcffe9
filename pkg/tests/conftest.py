"""Shared fixtures: toy bundles and fully scripted backend responses."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

# the table behind the rendered pricing PNG; the vision backend is scripted to
# return exactly this grid, and the image-pathway test compares against it
PRICING_HEADERS = ["product", "region", "price"]
PRICING_ROWS = [
    ["widget", "north", "19.99"],
    ["widget", "south", "21.50"],
    ["gadget", "north", "42"],
    ["gadget", "south", "44"],
]

SALES_CSV = """order_date,region,revenue
2023-01-05,north,1200
2023-02-05,south,1350
2023-03-05,north,1500
2023-04-05,south,1420
2023-05-05,north,1610
2023-06-05,south,1700
"""

RETURNS_CSV = """return_date,region,amount
2023-01-20,north,80
2023-02-18,south,95
2023-03-19,north,70
2023-04-21,south,110
"""

INVENTORY_JSON = [
    {"sku": "W-1", "region": "north", "stock": 320},
    {"sku": "W-2", "region": "south", "stock": 280},
    {"sku": "G-1", "region": "north", "stock": 150},
    {"sku": "G-2", "region": "south", "stock": 90},
]

NOTES_TXT = (
    "Quarterly operations notes: the north region launched a new widget promotion in "
    "March 2023, while the south region struggled with delayed gadget shipments. "
    "Management expects regional revenue to keep growing through the year."
)

NODE_INSIGHT = "Sales grew 12.5% quarter over quarter reaching $3,000 in Q4."

FINAL_REPORT_JSON = {
    "summary": "Revenue grew steadily across both regions through 2023, with the north region leading.",
    "insights": [
        NODE_INSIGHT,
        "Completely unrelated observation about the weather.",
    ],
    "cross_dataset_discoveries": ["Returns track revenue by region with a small lag."],
    "limitations": ["Analysis limited to the sources provided in the bundle."],
    "next_steps": ["Collect more recent data to confirm the trend."],
}

SCRIPT_RESPONSE = (
    "Here is the analysis code:\n```python\nimport insight.tools as tools\n"
    "tools.setup()\nprint('analysis')\ntools.fix_fnames()\n```"
)


def render_table_png(path: Path, headers, rows) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(4, 2))
    ax.axis("off")
    ax.table(cellText=rows, colLabels=headers, loc="center")
    fig.savefig(path, dpi=100)
    plt.close(fig)


def write_toy_bundle(root: Path) -> Path:
    """The 5-source fixture: 2 CSV + 1 JSON + 1 TXT + 1 rendered table PNG."""
    bundle = root / "toy_retail"
    sources = bundle / "sources"
    sources.mkdir(parents=True)
    (bundle / "task.json").write_text(
        json.dumps(
            {
                "goal": "Summarize regional revenue trends for 2023 and explain the role of returns and inventory.",
                "context": "Retail operations review.",
            }
        ),
        encoding="utf-8",
    )
    (sources / "sales.csv").write_text(SALES_CSV, encoding="utf-8")
    (sources / "returns.csv").write_text(RETURNS_CSV, encoding="utf-8")
    (sources / "inventory.json").write_text(json.dumps(INVENTORY_JSON), encoding="utf-8")
    (sources / "notes.txt").write_text(NOTES_TXT, encoding="utf-8")
    render_table_png(sources / "pricing.png", PRICING_HEADERS, PRICING_ROWS)
    (bundle / "ground_truth.json").write_text(
        json.dumps(
            {
                "summary": "Regional revenue grew through 2023.",
                "insights": [
                    "Revenue grew 12.5% quarter over quarter.",
                    "North region outsold the south region.",
                ],
            }
        ),
        encoding="utf-8",
    )
    return bundle


def write_trio_bundle(root: Path) -> Path:
    """A 3-CSV bundle used for cardinality and ablation checks."""
    bundle = root / "trio"
    sources = bundle / "sources"
    sources.mkdir(parents=True)
    (bundle / "task.json").write_text(
        json.dumps({"goal": "Explain how regional revenue relates to returns and inventory."}),
        encoding="utf-8",
    )
    (sources / "sales.csv").write_text(SALES_CSV, encoding="utf-8")
    (sources / "returns.csv").write_text(RETURNS_CSV, encoding="utf-8")
    (sources / "stock.csv").write_text(
        "sku,region,stock\nW-1,north,320\nW-2,south,280\nG-1,north,150\n", encoding="utf-8"
    )
    return bundle


def scripted_pipeline_responses(n_sources: int, n_primary: int = 1) -> dict:
    """Canned backend responses for a full pipeline run.

    Keyed by stage tag; lists repeat their last entry, so only label-dependent
    sequences (key_id, cross_question) need explicit per-call entries. Every
    cross question mentions "region", a schema keyword shared by all fixture
    sources, which satisfies the both-datasets check for any pair.
    """
    primary_label = (
        "<richness>9</richness><alignment>9</alignment>"
        "<label>Primary</label><justification>Core revenue metrics drive the goal.</justification>"
    )
    secondary_label = (
        "<richness>5</richness><alignment>6</alignment>"
        "<label>Secondary</label><justification>Context and validation only.</justification>"
    )
    cross_three = (
        "<question>How does revenue by region relate to returns by region?</question>"
        "<question>Does region-level stock explain regional revenue differences?</question>"
        "<question>Do regional price levels align with regional revenue trends?</question>"
    )
    cross_one = "<question>How does this region data compare with the other region data?</question>"
    primary_pair_calls = n_primary * (n_sources - 1)
    return {
        "classify_image": ["<image_kind>tabular</image_kind>"],
        "extract_table": [json.dumps({"headers": PRICING_HEADERS, "rows": PRICING_ROWS})],
        "describe_image": ["A line chart of monthly revenue."],
        "profile_text": ["Operations notes about regional performance."],
        "preliminary_eval": [
            "<relevance>8</relevance><reasoning>Schema matches the goal.</reasoning><priority>High</priority>"
        ],
        "get_questions": [
            "<question>What is the overall trend of the key metric over time?</question>"
            "<question>Which region contributes most to the total?</question>"
        ],
        "generate_code": [SCRIPT_RESPONSE],
        "node_insight": [f"<insight>{NODE_INSIGHT}</insight>"],
        "followup": [
            "<question>How does the metric vary by region?</question>"
            "<question>What anomalies appear in the monthly data?</question>"
        ],
        "select_question": ["<question_id>0</question_id>"],
        "source_summary": [
            "<summary>This source shows steady regional growth with notable seasonal peaks.</summary>"
        ],
        "key_id": [primary_label] * n_primary + [secondary_label],
        "cross_question": [cross_three] * primary_pair_calls + [cross_one],
        "annotation": ["<comment>Consider checking regional seasonality against this data.</comment>"],
        "synthesize": [json.dumps(FINAL_REPORT_JSON)],
    }


def max_judge_responses() -> dict:
    return {
        "judge_factuality": ["<score>10</score>"],
        "judge_logic": ["<score>10</score>"],
        "judge_insightfulness": [
            {"text": "<score>10</score>", "token_logprobs": [["10", [["10", 0.0]]]]}
        ],
    }


@pytest.fixture(scope="session")
def toy_bundle_dir(tmp_path_factory) -> Path:
    return write_toy_bundle(tmp_path_factory.mktemp("bundles"))


@pytest.fixture(scope="session")
def trio_bundle_dir(tmp_path_factory) -> Path:
    return write_trio_bundle(tmp_path_factory.mktemp("bundles_trio"))
